//! Model comparisons: per-band CI/AB/ABG fits with sigma deltas and parameter
//! spreads, model-vs-model crossover distances, and curve tables for plotting.

use std::fmt::{self, Write as _};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, InclusiveRange, LineageStep, SamplePredicate};
use crate::estimation::{fit_ab, fit_abg, fit_ci, FitResult, DEFAULT_AB_GAMMA};
use crate::models::{CiModel, DistanceM, FrequencyGhz, PathLossModel};

/// Largest distance accepted by crossover searches and curve grids, m.
pub const MAX_ANALYSIS_DISTANCE_M: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("distance range [{lo}, {hi}] must lie within [1, 1e6] m with lo <= hi")]
    InvalidDistanceRange { lo: f64, hi: f64 },
    #[error("frequency band [{lo}, {hi}] GHz is not a valid range")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("models are identical on the range")]
    IdenticalModels,
    #[error("distance grid point {0} m is outside [1, 1e6] m")]
    InvalidGrid(f64),
}

/// Fits of one band. `abg` is absent when the band has a single frequency,
/// in which case the AB fit stands in for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFits {
    pub ci: FitResult,
    pub ab: Option<FitResult>,
    pub abg: Option<FitResult>,
    /// `sigma_CI - sigma` of the floating-intercept column.
    pub sigma_delta_db: f64,
}

impl ModelFits {
    /// ABG fit, or the AB fit for single-frequency bands.
    pub fn floating(&self) -> &FitResult {
        self.abg
            .as_ref()
            .or(self.ab.as_ref())
            .expect("ModelFits always holds AB or ABG")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BandOutcome {
    Fitted(ModelFits),
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub label: String,
    pub freq_range_ghz: Option<InclusiveRange>,
    pub n_samples: usize,
    pub frequencies_ghz: Vec<f64>,
    pub distance_range_m: Option<InclusiveRange>,
    pub outcome: BandOutcome,
}

impl BandRow {
    pub fn fits(&self) -> Option<&ModelFits> {
        match &self.outcome {
            BandOutcome::Fitted(f) => Some(f),
            BandOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpread {
    pub parameter: String,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    pub bands: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub dataset_id: String,
    pub lineage: Vec<LineageStep>,
    pub full: BandRow,
    pub bands: Vec<BandRow>,
    pub stability: Vec<ParameterSpread>,
}

fn fit_band(data: &Dataset) -> Result<ModelFits, String> {
    if data.is_empty() {
        return Err("band selects no samples".into());
    }
    let ci = fit_ci(data).map_err(|e| format!("CI: {e}"))?;
    let ab = fit_ab(data, DEFAULT_AB_GAMMA).ok();
    let abg = if data.distinct_frequencies().len() > 1 {
        Some(fit_abg(data).map_err(|e| format!("ABG: {e}"))?)
    } else {
        None
    };
    let floating = abg
        .as_ref()
        .or(ab.as_ref())
        .ok_or_else(|| "AB: distances carry no leverage".to_string())?;
    let sigma_delta_db = ci.sigma_db - floating.sigma_db;
    Ok(ModelFits {
        ci,
        ab,
        abg,
        sigma_delta_db,
    })
}

fn band_row(label: String, freq_range_ghz: Option<InclusiveRange>, data: &Dataset) -> BandRow {
    let summary = data.summarize();
    let outcome = match fit_band(data) {
        Ok(f) => BandOutcome::Fitted(f),
        Err(reason) => BandOutcome::Failed { reason },
    };
    BandRow {
        label,
        freq_range_ghz,
        n_samples: summary.n_samples,
        frequencies_ghz: summary.frequencies_ghz,
        distance_range_m: summary.distance_range_m,
        outcome,
    }
}

fn spread(parameter: &str, values: impl Iterator<Item = f64>) -> Option<ParameterSpread> {
    let values: Vec<f64> = values.collect();
    let min = values.iter().copied().reduce(f64::min)?;
    let max = values.iter().copied().reduce(f64::max)?;
    Some(ParameterSpread {
        parameter: parameter.to_string(),
        min,
        max,
        spread: max - min,
        bands: values.len(),
    })
}

/// Fits CI and ABG (AB for single-frequency bands) on the full dataset and on
/// each caller-supplied frequency band. Band failures are recorded, not
/// propagated.
pub fn compare(data: &Dataset, bands: &[InclusiveRange]) -> Result<ComparisonReport, AnalysisError> {
    if data.is_empty() {
        return Err(AnalysisError::EmptyDataset);
    }
    let full_range = data.summarize().frequencies_ghz;
    let full_label = match (full_range.first(), full_range.last()) {
        (Some(lo), Some(hi)) if lo != hi => format!("all ({lo}-{hi} GHz)"),
        (Some(f), _) => format!("all ({f} GHz)"),
        _ => "all".to_string(),
    };
    let full = band_row(full_label, None, data);

    let mut rows = Vec::with_capacity(bands.len());
    for band in bands {
        let predicate =
            SamplePredicate::frequency_band(band.lo, band.hi).map_err(|_| AnalysisError::InvalidBand {
                lo: band.lo,
                hi: band.hi,
            })?;
        let subset = data.filter(&predicate).expect("validated predicate");
        rows.push(band_row(format!("{band}"), Some(*band), &subset));
    }

    let fitted: Vec<&ModelFits> = rows.iter().filter_map(BandRow::fits).collect();
    let param = |f: &dyn Fn(&ModelFits) -> f64| fitted.iter().map(|m| f(m)).collect::<Vec<_>>().into_iter();
    let abg_of = |m: &ModelFits| *m.floating().abg().expect("floating fit is ABG-shaped");
    let stability = [
        spread("ple", param(&|m| m.ci.ci().expect("CI fit").ple)),
        spread("alpha", param(&|m| abg_of(m).alpha)),
        spread("beta_db", param(&|m| abg_of(m).beta_db)),
        spread("gamma", param(&|m| abg_of(m).gamma)),
        spread("sigma_ci_db", param(&|m| m.ci.sigma_db)),
        spread("sigma_abg_db", param(&|m| m.floating().sigma_db)),
    ]
    .into_iter()
    .flatten()
    .collect();

    Ok(ComparisonReport {
        dataset_id: data.id().to_string(),
        lineage: data.lineage().to_vec(),
        full,
        bands: rows,
        stability,
    })
}

fn row_cells(row: &BandRow) -> Vec<String> {
    let dist = row
        .distance_range_m
        .map(|r| format!("{:.0}-{:.0}", r.lo, r.hi))
        .unwrap_or_else(|| "-".into());
    let mut cells = vec![row.label.clone(), row.n_samples.to_string(), dist];
    match &row.outcome {
        BandOutcome::Fitted(f) => {
            let fl = f.floating();
            let m = fl.abg().expect("ABG-shaped");
            let gamma = if m.gamma_fixed {
                format!("{}*", m.gamma)
            } else {
                format!("{:.1}", m.gamma)
            };
            cells.extend([
                format!("{:.1}", f.ci.ci().expect("CI fit").ple),
                format!("{:.1}", m.alpha),
                format!("{:.1}", m.beta_db),
                gamma,
                format!("{:.1}", f.ci.sigma_db),
                format!("{:.1}", fl.sigma_db),
                format!("{:.1}", f.sigma_delta_db),
            ]);
        }
        BandOutcome::Failed { reason } => cells.push(format!("failed: {reason}")),
    }
    cells
}

impl ComparisonReport {
    /// Human table, one decimal place per value (`*` marks a fixed gamma).
    pub fn to_text(&self) -> String {
        let header: Vec<String> = [
            "band (GHz)", "N", "dist (m)", "n_CI", "alpha", "beta", "gamma", "sig_CI", "sig_ABG", "delta",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let mut table = vec![header];
        table.extend(self.bands.iter().map(row_cells));
        table.push(row_cells(&self.full));

        let columns = table.iter().map(Vec::len).max().unwrap_or(0);
        let widths: Vec<usize> = (0..columns)
            .map(|c| table.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0))
            .collect();
        let mut out = format!("dataset {}\n", self.dataset_id);
        for row in &table {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| format!("{cell:>w$}", w = widths[c]))
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        if !self.stability.is_empty() {
            let _ = writeln!(out, "\nspread across bands (max - min):");
            for s in &self.stability {
                let _ = writeln!(
                    out,
                    "  {:<13} {:.1} ({:.1} .. {:.1})",
                    s.parameter, s.spread, s.min, s.max
                );
            }
        }
        out
    }

    /// Machine-readable document with full-precision values.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerModel {
    A,
    B,
}

/// A distance interval on which one model predicts the lower path loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from_m: f64,
    pub to_m: f64,
    pub lower: LowerModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverResult {
    pub frequency_ghz: f64,
    pub model_a: PathLossModel,
    pub model_b: PathLossModel,
    pub range_m: InclusiveRange,
    /// Distances where the two mean path loss curves meet (zero or one).
    pub crossovers_m: Vec<f64>,
    pub segments: Vec<Segment>,
}

impl fmt::Display for CrossoverResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "A = {}  B = {}  at {} GHz, {}-{} m",
            self.model_a, self.model_b, self.frequency_ghz, self.range_m.lo, self.range_m.hi
        )?;
        match self.crossovers_m.first() {
            Some(d) => writeln!(f, "crossover at {d:.4} m")?,
            None => writeln!(f, "no crossover on the range")?,
        }
        for s in &self.segments {
            let name = match s.lower {
                LowerModel::A => "A",
                LowerModel::B => "B",
            };
            writeln!(f, "  {:.4}-{:.4} m: {name} lower", s.from_m, s.to_m)?;
        }
        Ok(())
    }
}

fn check_distance_range(lo: f64, hi: f64) -> Result<InclusiveRange, AnalysisError> {
    if lo >= 1.0 && hi <= MAX_ANALYSIS_DISTANCE_M && lo <= hi {
        Ok(InclusiveRange { lo, hi })
    } else {
        Err(AnalysisError::InvalidDistanceRange { lo, hi })
    }
}

/// Where `model_a` and `model_b` predict equal mean path loss at frequency `f`
/// on `[lo, hi]` m. Both models are lines in log10(d) at fixed `f`, so the
/// crossover is solved in closed form.
pub fn crossover(
    model_a: &PathLossModel,
    model_b: &PathLossModel,
    f: FrequencyGhz,
    (lo, hi): (f64, f64),
) -> Result<CrossoverResult, AnalysisError> {
    let range_m = check_distance_range(lo, hi)?;
    let (sa, ia) = model_a.log_distance_line(f);
    let (sb, ib) = model_b.log_distance_line(f);
    let slope = sa - sb;
    let intercept = ia - ib;

    let parallel = slope.abs() <= 1e-12 * sa.abs().max(sb.abs()).max(1.0);
    if parallel && intercept.abs() <= 1e-9 * ia.abs().max(ib.abs()).max(1.0) {
        return Err(AnalysisError::IdenticalModels);
    }
    // A is lower where slope * x + intercept < 0.
    let lower_at = |x: f64| {
        if slope * x + intercept < 0.0 {
            LowerModel::A
        } else {
            LowerModel::B
        }
    };

    let mut crossovers_m = Vec::new();
    let mut segments = Vec::new();
    let root = if parallel { None } else { Some(-intercept / slope) };
    match root.map(|x| (x, 10f64.powf(x))) {
        Some((x, d)) if range_m.contains(d) => {
            crossovers_m.push(d);
            if d > lo {
                segments.push(Segment {
                    from_m: lo,
                    to_m: d,
                    lower: lower_at(x - 1.0),
                });
            }
            if d < hi {
                segments.push(Segment {
                    from_m: d,
                    to_m: hi,
                    lower: lower_at(x + 1.0),
                });
            }
        }
        _ => {
            let mid = 0.5 * (lo.log10() + hi.log10());
            let lower = if parallel {
                if intercept < 0.0 {
                    LowerModel::A
                } else {
                    LowerModel::B
                }
            } else {
                lower_at(mid)
            };
            segments.push(Segment {
                from_m: lo,
                to_m: hi,
                lower,
            });
        }
    }

    Ok(CrossoverResult {
        frequency_ghz: f.value(),
        model_a: *model_a,
        model_b: *model_b,
        range_m,
        crossovers_m,
        segments,
    })
}

/// Label of the free-space column in curve tables.
pub const FREE_SPACE_LABEL: &str = "free_space";

/// Mean path loss of several models over a distance grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub frequency_ghz: f64,
    /// Model labels, free space first.
    pub labels: Vec<String>,
    pub distances_m: Vec<f64>,
    /// `values[i][j]`: model `j` at distance `i`.
    pub values: Vec<Vec<f64>>,
}

pub fn curve_table(
    models: &[(String, PathLossModel)],
    f: FrequencyGhz,
    grid_m: &[f64],
) -> Result<CurveTable, AnalysisError> {
    let mut columns = vec![(FREE_SPACE_LABEL.to_string(), PathLossModel::Ci(CiModel::free_space()))];
    columns.extend(models.iter().cloned());
    let mut values = Vec::with_capacity(grid_m.len());
    for &d in grid_m {
        if d > MAX_ANALYSIS_DISTANCE_M {
            return Err(AnalysisError::InvalidGrid(d));
        }
        let dist = DistanceM::new(d).map_err(|_| AnalysisError::InvalidGrid(d))?;
        values.push(columns.iter().map(|(_, m)| m.eval(f, dist).value()).collect());
    }
    Ok(CurveTable {
        frequency_ghz: f.value(),
        labels: columns.into_iter().map(|(l, _)| l).collect(),
        distances_m: grid_m.to_vec(),
        values,
    })
}

impl CurveTable {
    /// CSV with header `distance_m,<label>...`. `decimals` fixes the number
    /// of decimal places; `None` writes shortest round-trip values.
    pub fn write_csv<W: Write>(&self, writer: W, decimals: Option<usize>) -> Result<(), csv::Error> {
        let fmt = |x: f64| match decimals {
            Some(p) => format!("{x:.p$}"),
            None => format!("{x}"),
        };
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["distance_m".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (d, row) in self.distances_m.iter().zip(&self.values) {
            let mut record = vec![fmt(*d)];
            record.extend(row.iter().map(|&v| fmt(v)));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            let mut g: Vec<f64> = (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect();
            g[0] = lo;
            g[count - 1] = hi;
            g
        }
    }
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}
