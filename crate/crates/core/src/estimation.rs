//! Closed-form minimum shadow-fading estimators for the CI, AB and ABG models.
//!
//! All three fits minimise the sum of squared dB residuals, which is the same
//! as minimising the shadow-fading standard deviation
//! `sigma = sqrt(sum(residual^2) / N)` (divisor `N`, no degrees-of-freedom
//! correction).
//!
//! Per sample the regressors are `B = PL`, `D = 10 log10(d / 1 m)` and
//! `F = 10 log10(f / 1 GHz)`. Moment sums are accumulated with compensated
//! summation in dataset order, so results are reproducible bit for bit.
//!
//! [`oracle_fit_abg`] solves the ABG problem a second, independent way
//! (Gaussian elimination on the assembled normal equations) and exists to
//! cross-check [`fit_abg`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, PathLossSample};
use crate::models::{fspl_1m, AbgModel, CiModel, PathLossModel};
use crate::summation::NeumaierSum;

/// Relative threshold below which a closed-form denominator counts as zero.
pub const RANK_EPSILON: f64 = 1e-9;

/// Frequency coefficient used by the AB reversion unless told otherwise.
pub const DEFAULT_AB_GAMMA: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("distances carry no leverage (all samples at the same distance)")]
    DegenerateDistances,
    #[error(
        "ABG design is rank deficient (denominator {denominator:e} vs scale {scale:e}); \
         use the AB fit with fixed gamma for single-frequency data"
    )]
    RankDeficient { denominator: f64, scale: f64 },
}

/// Regressors of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressorTriple {
    /// Path loss, dB.
    pub b: f64,
    /// `10 log10(d / 1 m)`.
    pub d: f64,
    /// `10 log10(f / 1 GHz)`.
    pub f: f64,
}

impl RegressorTriple {
    pub fn of(s: &PathLossSample) -> Self {
        Self {
            b: s.path_loss_db(),
            d: 10.0 * s.distance_m().log10(),
            f: 10.0 * s.frequency_ghz().log10(),
        }
    }
}

/// Min, max and mean of `observed - predicted`, dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub min_db: f64,
    pub max_db: f64,
    pub mean_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: PathLossModel,
    pub sigma_db: f64,
    pub n_samples: usize,
    pub residuals: ResidualSummary,
}

impl FitResult {
    fn new(model: PathLossModel, data: &Dataset) -> Result<Self, EstimationError> {
        let (sigma_db, residuals) = residual_stats(&model, data)?;
        let model = match model {
            PathLossModel::Ci(m) => PathLossModel::Ci(CiModel {
                sigma_db: Some(sigma_db),
                ..m
            }),
            PathLossModel::Abg(m) => PathLossModel::Abg(AbgModel {
                sigma_db: Some(sigma_db),
                ..m
            }),
        };
        Ok(Self {
            model,
            sigma_db,
            n_samples: data.len(),
            residuals,
        })
    }

    pub fn ci(&self) -> Option<&CiModel> {
        match &self.model {
            PathLossModel::Ci(m) => Some(m),
            PathLossModel::Abg(_) => None,
        }
    }

    pub fn abg(&self) -> Option<&AbgModel> {
        match &self.model {
            PathLossModel::Abg(m) => Some(m),
            PathLossModel::Ci(_) => None,
        }
    }
}

/// Compensated moment sums of the (B, D, F) regressors, optionally taken
/// about a shifted origin.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: f64,
    pub d: f64,
    pub f: f64,
    pub b: f64,
    pub dd: f64,
    pub ff: f64,
    pub df: f64,
    pub db: f64,
    pub fb: f64,
}

impl Moments {
    /// Raw moments.
    pub fn of(data: &Dataset) -> Self {
        Self::about(data, RegressorTriple { b: 0.0, d: 0.0, f: 0.0 })
    }

    /// Moments of `(B - origin.b, D - origin.d, F - origin.f)`.
    pub fn about(data: &Dataset, origin: RegressorTriple) -> Self {
        let mut acc = [NeumaierSum::new(); 8];
        for s in data.samples() {
            let t = RegressorTriple::of(s);
            let (b, d, f) = (t.b - origin.b, t.d - origin.d, t.f - origin.f);
            for (slot, v) in acc.iter_mut().zip([d, f, b, d * d, f * f, d * f, d * b, f * b]) {
                slot.add(v);
            }
        }
        let [d, f, b, dd, ff, df, db, fb] = acc.map(|a| a.value());
        Self {
            n: data.len() as f64,
            d,
            f,
            b,
            dd,
            ff,
            df,
            db,
            fb,
        }
    }
}

/// Origin that keeps the closed-form fractions well conditioned: `B` at its
/// mean, `D` and `F` one standard deviation below theirs. `D` and `F` are not
/// centred exactly because the beta fraction's denominator carries a factor
/// `sum(D)`.
fn conditioning_origin(data: &Dataset) -> RegressorTriple {
    let n = data.len() as f64;
    let mut sums = [NeumaierSum::new(); 3];
    for s in data.samples() {
        let t = RegressorTriple::of(s);
        for (slot, v) in sums.iter_mut().zip([t.b, t.d, t.f]) {
            slot.add(v);
        }
    }
    let [b, d, f] = sums.map(|x| x.value() / n);
    let mut sq = [NeumaierSum::new(); 2];
    for s in data.samples() {
        let t = RegressorTriple::of(s);
        sq[0].add((t.d - d) * (t.d - d));
        sq[1].add((t.f - f) * (t.f - f));
    }
    let [sd, sf] = sq.map(|x| (x.value() / n).sqrt());
    RegressorTriple { b, d: d - sd, f: f - sf }
}

fn non_empty(data: &Dataset) -> Result<(), EstimationError> {
    if data.is_empty() {
        Err(EstimationError::EmptyDataset)
    } else {
        Ok(())
    }
}

/// Shadow-fading sigma and residual summary of `model` on `data`.
fn residual_stats(model: &PathLossModel, data: &Dataset) -> Result<(f64, ResidualSummary), EstimationError> {
    non_empty(data)?;
    let mut sq = NeumaierSum::new();
    let mut sum = NeumaierSum::new();
    let (mut min_db, mut max_db) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in data.samples() {
        let r = s.path_loss_db() - model.eval(s.frequency, s.distance).value();
        sq.add(r * r);
        sum.add(r);
        min_db = min_db.min(r);
        max_db = max_db.max(r);
    }
    let n = data.len() as f64;
    let sigma = (sq.value().max(0.0) / n).sqrt();
    Ok((
        sigma,
        ResidualSummary {
            min_db,
            max_db,
            mean_db: sum.value() / n,
        },
    ))
}

/// Shadow-fading standard deviation of any model on `data`, dB.
pub fn sigma_for(model: &PathLossModel, data: &Dataset) -> Result<f64, EstimationError> {
    residual_stats(model, data).map(|(sigma, _)| sigma)
}

/// CI fit: `n = sum(D A) / sum(D^2)` with `A = PL - FSPL(f, 1 m)`.
pub fn fit_ci(data: &Dataset) -> Result<FitResult, EstimationError> {
    non_empty(data)?;
    let mut da = NeumaierSum::new();
    let mut dd = NeumaierSum::new();
    for s in data.samples() {
        let d = 10.0 * s.distance_m().log10();
        let a = s.path_loss_db() - fspl_1m(s.frequency).value();
        da.add(d * a);
        dd.add(d * d);
    }
    let dd = dd.value();
    if dd <= 0.0 {
        return Err(EstimationError::DegenerateDistances);
    }
    let model = CiModel {
        ple: da.value() / dd,
        sigma_db: None,
    };
    FitResult::new(model.into(), data)
}

/// AB fit: ordinary least squares of `B' = B - gamma F` on `D` with `gamma`
/// pinned,
///
/// ```text
/// alpha = (N sum(D B') - sum(D) sum(B')) / (N sum(D^2) - sum(D)^2)
/// beta  = mean(B') - alpha mean(D)
/// ```
///
/// with the sums taken about the means of `D` and `B'` (the slope does not
/// depend on that shift).
pub fn fit_ab(data: &Dataset, gamma: f64) -> Result<FitResult, EstimationError> {
    non_empty(data)?;
    let n = data.len() as f64;
    let reduced = |s: &PathLossSample| {
        let t = RegressorTriple::of(s);
        (t.d, t.b - gamma * t.f)
    };
    let (mut d_sum, mut b_sum) = (NeumaierSum::new(), NeumaierSum::new());
    for (d, b) in data.samples().iter().map(reduced) {
        d_sum.add(d);
        b_sum.add(b);
    }
    let (d_mean, b_mean) = (d_sum.value() / n, b_sum.value() / n);

    let mut sd = NeumaierSum::new();
    let mut sdd = NeumaierSum::new();
    let mut sb = NeumaierSum::new();
    let mut sdb = NeumaierSum::new();
    for (d, b) in data.samples().iter().map(reduced) {
        let (d, b) = (d - d_mean, b - b_mean);
        sd.add(d);
        sdd.add(d * d);
        sb.add(b);
        sdb.add(d * b);
    }
    let (sd, sdd, sb, sdb) = (sd.value(), sdd.value(), sb.value(), sdb.value());
    let denominator = n * sdd - sd * sd;
    let raw_dd = sdd + 2.0 * d_mean * sd + n * d_mean * d_mean;
    if !(denominator > RANK_EPSILON * n * raw_dd) {
        return Err(EstimationError::DegenerateDistances);
    }
    let alpha = (n * sdb - sd * sb) / denominator;
    let beta_db = (b_mean + sb / n) - alpha * (d_mean + sd / n);
    let model = AbgModel {
        alpha,
        beta_db,
        gamma,
        gamma_fixed: true,
        sigma_db: None,
    };
    FitResult::new(model.into(), data)
}

/// ABG fit from the closed-form Cramer-rule fractions for alpha, beta and
/// gamma.
///
/// The fractions are evaluated on regressors taken about
/// [`conditioning_origin`]; alpha and gamma do not depend on the origin and
/// beta is moved back to the 1 m / 1 GHz reference afterwards.
pub fn fit_abg(data: &Dataset) -> Result<FitResult, EstimationError> {
    non_empty(data)?;
    let origin = conditioning_origin(data);
    let Moments { n, d, f, b, dd, ff, df, db, fb } = Moments::about(data, origin);

    // Shared 2x2 blocks of the alpha and gamma fractions.
    let dvar = d * d - n * dd;
    let fvar = f * f - n * ff;
    let dfcov = d * f - n * df;
    let dbcov = d * b - n * db;
    let fbcov = f * b - n * fb;

    // The alpha denominator is N det(normal matrix), which shifting D and F
    // leaves unchanged; the scale uses the raw sum(D^2) and sum(F^2).
    let denominator = dvar * fvar - dfcov * dfcov;
    let raw_dd = dd + 2.0 * origin.d * d + n * origin.d * origin.d;
    let raw_ff = ff + 2.0 * origin.f * f + n * origin.f * origin.f;
    let scale = (n * raw_dd) * (n * raw_ff);
    if n < 3.0 || !(denominator.abs() > RANK_EPSILON * scale) {
        return Err(EstimationError::RankDeficient { denominator, scale });
    }

    let alpha = (dbcov * fvar - dfcov * fbcov) / denominator;
    let gamma = (fbcov * dvar - dfcov * dbcov) / denominator;
    let beta_shifted = ((d * fb - b * df) * (f * dd - d * df) - (b * dd - d * db) * (d * ff - f * df))
        / (dvar * (d * ff - f * df) + dfcov * (f * dd - d * df));
    let beta_db = beta_shifted + origin.b - alpha * origin.d - gamma * origin.f;

    let model = AbgModel {
        alpha,
        beta_db,
        gamma,
        gamma_fixed: false,
        sigma_db: None,
    };
    FitResult::new(model.into(), data)
}

/// Independent ABG solver: assembles the 3x3 normal equations and solves them
/// by Gaussian elimination with partial pivoting.
pub fn oracle_fit_abg(data: &Dataset) -> Result<FitResult, EstimationError> {
    non_empty(data)?;
    // Unknowns ordered (alpha, beta, gamma); columns are (D, 1, F).
    let mut gram = [[NeumaierSum::new(); 3]; 3];
    let mut rhs = [NeumaierSum::new(); 3];
    for s in data.samples() {
        let t = RegressorTriple::of(s);
        let x = [t.d, 1.0, t.f];
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j].add(x[i] * x[j]);
            }
            rhs[i].add(x[i] * t.b);
        }
    }
    let mut a = gram.map(|row| row.map(|s| s.value()));
    let mut y = rhs.map(|s| s.value());
    let diag_scale = [a[0][0], a[1][1], a[2][2]];

    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty pivot range");
        a.swap(col, pivot);
        y.swap(col, pivot);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            y[row] -= factor * y[col];
        }
    }
    // Product of pivots is the determinant up to sign; compare it against the
    // diagonal product the same way the closed form does.
    let determinant = a[0][0] * a[1][1] * a[2][2];
    let scale = diag_scale.iter().product::<f64>();
    if data.len() < 3 || !(determinant.abs() > RANK_EPSILON * scale) {
        return Err(EstimationError::RankDeficient {
            denominator: determinant,
            scale,
        });
    }

    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (y[row] - tail) / a[row][row];
    }
    let model = AbgModel {
        alpha: x[0],
        beta_db: x[1],
        gamma: x[2],
        gamma_fixed: false,
        sigma_db: None,
    };
    FitResult::new(model.into(), data)
}

/// Residuals of the three ABG stationarity conditions,
///
/// ```text
/// alpha sum(D^2) + beta sum(D) + gamma sum(DF) - sum(DB)
/// alpha sum(D)   + beta N      + gamma sum(F)  - sum(B)
/// alpha sum(DF)  + beta sum(F) + gamma sum(F^2) - sum(FB)
/// ```
///
/// each divided by the magnitude of the largest term in its equation.
pub fn normal_equation_residuals(model: &AbgModel, data: &Dataset) -> [f64; 3] {
    let m = Moments::of(data);
    let (a, b, g) = (model.alpha, model.beta_db, model.gamma);
    let rows = [
        [a * m.dd, b * m.d, g * m.df, -m.db],
        [a * m.d, b * m.n, g * m.f, -m.b],
        [a * m.df, b * m.f, g * m.ff, -m.fb],
    ];
    rows.map(|terms| {
        let scale = terms.iter().fold(0.0f64, |s, t| s.max(t.abs()));
        let total: f64 = terms.iter().copied().sum::<NeumaierSum>().value();
        if scale == 0.0 {
            0.0
        } else {
            total.abs() / scale
        }
    })
}
