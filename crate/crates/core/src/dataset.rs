//! Path loss sample collections: CSV ingestion, validation, capping and
//! filtering.
//!
//! Datasets are immutable. Every transform returns a new [`Dataset`] whose
//! lineage log gains one entry, and whose id is derived from the parent id and
//! that entry.
//!
//! CSV schema (UTF-8, comma separated, header required):
//!
//! ```text
//! frequency_ghz,distance_m,path_loss_db,scenario,environment,data_type,source_tag
//! ```
//!
//! `scenario` is one of `UMI_SC`, `UMI_OS`, `UMA`, `OTHER`; `environment` is
//! `LOS` or `NLOS`; `data_type` is `M`, `R` or `S`. `source_tag` may be
//! omitted. Unknown extra columns are ignored with a warning.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::models::{DistanceM, FrequencyGhz, ModelError, PathLossDb};

/// Default receiver-sensitivity bound on path loss, dB.
pub const DEFAULT_CAP_DB: f64 = 180.0;

/// Significant digits used when writing numeric CSV fields.
pub const CSV_SIGNIFICANT_DIGITS: usize = 12;

const COLUMNS: [&str; 7] = [
    "frequency_ghz",
    "distance_m",
    "path_loss_db",
    "scenario",
    "environment",
    "data_type",
    "source_tag",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("file has no header row")]
    EmptyFile,
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: {reason}")]
    UnparseableRow { row: u64, reason: String },
    #[error("invalid range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("cap must be finite and > 0 dB, got {0}")]
    InvalidCap(f64),
}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let upper = s.trim().to_ascii_uppercase();
                match upper.as_str() {
                    $($text $(| $alias)* => Ok($name::$variant),)+
                    _ => Err(format!("unknown {} `{}`", stringify!($name), s.trim())),
                }
            }
        }
    };
}

label_enum!(
    /// Deployment scenario.
    Scenario {
        UmiStreetCanyon => "UMI_SC",
        UmiOpenSquare => "UMI_OS",
        Uma => "UMA",
        Other => "OTHER",
    }
);

label_enum!(
    /// Propagation condition.
    Environment {
        Los => "LOS",
        Nlos => "NLOS",
    }
);

label_enum!(
    /// Provenance of a sample.
    DataType {
        Measured => "M" | "MEASURED",
        RayTraced => "R" | "RAYTRACED",
        Synthetic => "S" | "SYNTHETIC",
    }
);

/// One measured, ray-traced or synthetic (f, d, PL) point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLossSample {
    pub frequency: FrequencyGhz,
    pub distance: DistanceM,
    pub path_loss: PathLossDb,
    pub scenario: Scenario,
    pub environment: Environment,
    pub data_type: DataType,
    pub source_tag: String,
}

impl PathLossSample {
    /// A sample with `OTHER`/`NLOS`/synthetic metadata and an empty tag.
    pub fn new(frequency_ghz: f64, distance_m: f64, path_loss_db: f64) -> Result<Self, ModelError> {
        Ok(Self {
            frequency: FrequencyGhz::new(frequency_ghz)?,
            distance: DistanceM::new(distance_m)?,
            path_loss: PathLossDb::new(path_loss_db)?,
            scenario: Scenario::Other,
            environment: Environment::Nlos,
            data_type: DataType::Synthetic,
            source_tag: String::new(),
        })
    }

    pub fn with_metadata(
        mut self,
        scenario: Scenario,
        environment: Environment,
        data_type: DataType,
        source_tag: impl Into<String>,
    ) -> Self {
        self.scenario = scenario;
        self.environment = environment;
        self.data_type = data_type;
        self.source_tag = source_tag.into();
        self
    }

    pub fn frequency_ghz(&self) -> f64 {
        self.frequency.value()
    }

    pub fn distance_m(&self) -> f64 {
        self.distance.value()
    }

    pub fn path_loss_db(&self) -> f64 {
        self.path_loss.value()
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusiveRange {
    pub lo: f64,
    pub hi: f64,
}

impl InclusiveRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self, DatasetError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(DatasetError::InvalidRange { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl fmt::Display for InclusiveRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

/// Conjunction of optional sample constraints. Absent fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplePredicate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<Environment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_range_ghz: Option<InclusiveRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_range_m: Option<InclusiveRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_type: Option<DataType>,
}

impl SamplePredicate {
    pub fn frequency_band(lo: f64, hi: f64) -> Result<Self, DatasetError> {
        Ok(Self {
            freq_range_ghz: Some(InclusiveRange::new(lo, hi)?),
            ..Self::default()
        })
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn matches(&self, s: &PathLossSample) -> bool {
        self.scenario.is_none_or(|v| v == s.scenario)
            && self.environment.is_none_or(|v| v == s.environment)
            && self.data_type.is_none_or(|v| v == s.data_type)
            && self.freq_range_ghz.is_none_or(|r| r.contains(s.frequency_ghz()))
            && self.dist_range_m.is_none_or(|r| r.contains(s.distance_m()))
    }

    fn validate(&self) -> Result<(), DatasetError> {
        for r in [self.freq_range_ghz, self.dist_range_m].into_iter().flatten() {
            InclusiveRange::new(r.lo, r.hi)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapMode {
    /// Drop samples above the cap.
    #[default]
    Discard,
    /// Replace samples above the cap by the cap value.
    Clamp,
}

/// One entry of a dataset's transform history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LineageStep {
    Loaded {
        source: String,
        digest: String,
        rows: usize,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        skipped_rows: Vec<u64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        ignored_columns: Vec<String>,
    },
    Constructed {
        origin: String,
        rows: usize,
    },
    Generated {
        generator: String,
        seed: u64,
        rows: usize,
        config: String,
    },
    Cap {
        cap_db: f64,
        mode: CapMode,
        affected: usize,
    },
    Filter {
        predicate: SamplePredicate,
        removed: usize,
    },
    Outliers {
        fraction: f64,
        offset_db: f64,
        seed: u64,
        affected: usize,
    },
}

/// Ordered, immutable collection of samples with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    id: String,
    samples: Vec<PathLossSample>,
    lineage: Vec<LineageStep>,
}

fn short_digest(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

impl Dataset {
    /// Wraps in-memory samples. The id is derived from `origin` and the
    /// sample values.
    pub fn from_samples(origin: impl Into<String>, samples: Vec<PathLossSample>) -> Self {
        let origin = origin.into();
        let mut hasher = Sha256::new();
        hasher.update(origin.as_bytes());
        for s in &samples {
            for v in [s.frequency_ghz(), s.distance_m(), s.path_loss_db()] {
                hasher.update(v.to_le_bytes());
            }
        }
        let id = hex::encode(&hasher.finalize()[..8]);
        let step = LineageStep::Constructed {
            origin,
            rows: samples.len(),
        };
        Self {
            id,
            samples,
            lineage: vec![step],
        }
    }

    pub(crate) fn with_root(id: String, samples: Vec<PathLossSample>, step: LineageStep) -> Self {
        Self {
            id,
            samples,
            lineage: vec![step],
        }
    }

    /// Child dataset: same history plus `step`.
    pub(crate) fn derive(&self, samples: Vec<PathLossSample>, step: LineageStep) -> Self {
        let mut payload = self.id.clone().into_bytes();
        payload.extend(serde_json::to_vec(&step).expect("lineage step serializes"));
        let mut lineage = self.lineage.clone();
        lineage.push(step);
        Self {
            id: short_digest(&payload),
            samples,
            lineage,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn samples(&self) -> &[PathLossSample] {
        &self.samples
    }

    pub fn lineage(&self) -> &[LineageStep] {
        &self.lineage
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Distinct carrier frequencies in ascending order.
    pub fn distinct_frequencies(&self) -> Vec<f64> {
        distinct_sorted(self.samples.iter().map(PathLossSample::frequency_ghz))
    }

    pub fn summarize(&self) -> DatasetSummary {
        summarize(self)
    }

    pub fn apply_cap(&self, cap_db: f64, mode: CapMode) -> Result<Dataset, DatasetError> {
        apply_cap(self, cap_db, mode)
    }

    pub fn filter(&self, predicate: &SamplePredicate) -> Result<Dataset, DatasetError> {
        filter(self, predicate)
    }
}

fn distinct_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Options for [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    /// Skip rows that fail validation (recording their row numbers in the
    /// lineage) instead of rejecting the whole file.
    pub skip_invalid_rows: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            skip_invalid_rows: false,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    read_csv(&bytes[..], &path.display().to_string(), options)
}

/// Parses CSV text. `source` names the input in the lineage.
pub fn read_csv(bytes: &[u8], source: &str, options: &CsvOptions) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);

    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(DatasetError::EmptyFile);
    }
    let position = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut index = [None; COLUMNS.len()];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = position(name);
        if slot.is_none() && name != "source_tag" {
            return Err(DatasetError::MissingColumn(name.to_string()));
        }
    }
    let ignored_columns: Vec<String> = headers
        .iter()
        .map(str::trim)
        .filter(|h| !COLUMNS.contains(h))
        .map(str::to_string)
        .collect();
    if !ignored_columns.is_empty() {
        log::warn!("{source}: ignoring unknown columns {ignored_columns:?}");
    }

    let mut samples = Vec::new();
    let mut skipped_rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        let field = |i: usize| index[i].and_then(|c| record.get(c)).unwrap_or("").trim();
        match parse_row(&field) {
            Ok(s) => samples.push(s),
            Err(reason) if options.skip_invalid_rows => {
                log::warn!("{source}: skipping row {row}: {reason}");
                skipped_rows.push(row);
            }
            Err(reason) => return Err(DatasetError::UnparseableRow { row, reason }),
        }
    }

    let digest = short_digest(bytes);
    let step = LineageStep::Loaded {
        source: source.to_string(),
        digest: digest.clone(),
        rows: samples.len(),
        skipped_rows,
        ignored_columns,
    };
    Ok(Dataset::with_root(digest, samples, step))
}

fn parse_row<'a>(field: &impl Fn(usize) -> &'a str) -> Result<PathLossSample, String> {
    let number = |i: usize| -> Result<f64, String> {
        let text = field(i);
        text.parse::<f64>()
            .map_err(|_| format!("{} `{text}` is not a number", COLUMNS[i]))
    };
    let frequency = FrequencyGhz::new(number(0)?).map_err(|e| e.to_string())?;
    let distance = DistanceM::new(number(1)?).map_err(|e| e.to_string())?;
    let path_loss = PathLossDb::new(number(2)?).map_err(|e| e.to_string())?;
    Ok(PathLossSample {
        frequency,
        distance,
        path_loss,
        scenario: field(3).parse()?,
        environment: field(4).parse()?,
        data_type: field(5).parse()?,
        source_tag: field(6).to_string(),
    })
}

/// Decimal text with at most [`CSV_SIGNIFICANT_DIGITS`] significant digits.
/// The rendering is the shortest one that parses back to the rounded value.
pub fn format_significant(x: f64) -> String {
    let rounded: f64 = format!("{:.*e}", CSV_SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("scientific notation parses");
    format!("{rounded}")
}

/// Writes the dataset in the CSV schema, in sample order.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for s in data.samples() {
        w.write_record([
            format_significant(s.frequency_ghz()).as_str(),
            format_significant(s.distance_m()).as_str(),
            format_significant(s.path_loss_db()).as_str(),
            s.scenario.as_str(),
            s.environment.as_str(),
            s.data_type.as_str(),
            s.source_tag.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let file = File::create(path)?;
    write_csv(data, std::io::BufWriter::new(file))
}

/// Bounds path loss at `cap_db`, either dropping or clamping samples above it.
pub fn apply_cap(data: &Dataset, cap_db: f64, mode: CapMode) -> Result<Dataset, DatasetError> {
    if !(cap_db.is_finite() && cap_db > 0.0) {
        return Err(DatasetError::InvalidCap(cap_db));
    }
    let cap = PathLossDb::new(cap_db).expect("finite cap");
    let mut affected = 0;
    let mut samples = Vec::with_capacity(data.len());
    for s in data.samples() {
        if s.path_loss_db() <= cap_db {
            samples.push(s.clone());
            continue;
        }
        affected += 1;
        if mode == CapMode::Clamp {
            samples.push(PathLossSample {
                path_loss: cap,
                ..s.clone()
            });
        }
    }
    Ok(data.derive(
        samples,
        LineageStep::Cap {
            cap_db,
            mode,
            affected,
        },
    ))
}

/// Keeps the samples matching every present predicate field, in order.
pub fn filter(data: &Dataset, predicate: &SamplePredicate) -> Result<Dataset, DatasetError> {
    predicate.validate()?;
    let samples: Vec<PathLossSample> = data
        .samples()
        .iter()
        .filter(|s| predicate.matches(s))
        .cloned()
        .collect();
    let removed = data.len() - samples.len();
    Ok(data.derive(
        samples,
        LineageStep::Filter {
            predicate: predicate.clone(),
            removed,
        },
    ))
}

/// Table-style summary of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_samples: usize,
    pub frequencies_ghz: Vec<f64>,
    pub distance_range_m: Option<InclusiveRange>,
    pub path_loss_range_db: Option<InclusiveRange>,
    pub per_scenario: BTreeMap<Scenario, usize>,
    pub per_environment: BTreeMap<Environment, usize>,
    pub per_data_type: BTreeMap<DataType, usize>,
}

fn min_max(values: impl Iterator<Item = f64>) -> Option<InclusiveRange> {
    values.fold(None, |acc, x| match acc {
        None => Some(InclusiveRange { lo: x, hi: x }),
        Some(r) => Some(InclusiveRange {
            lo: r.lo.min(x),
            hi: r.hi.max(x),
        }),
    })
}

pub fn summarize(data: &Dataset) -> DatasetSummary {
    let mut per_scenario = BTreeMap::new();
    let mut per_environment = BTreeMap::new();
    let mut per_data_type = BTreeMap::new();
    for s in data.samples() {
        *per_scenario.entry(s.scenario).or_insert(0) += 1;
        *per_environment.entry(s.environment).or_insert(0) += 1;
        *per_data_type.entry(s.data_type).or_insert(0) += 1;
    }
    DatasetSummary {
        n_samples: data.len(),
        frequencies_ghz: data.distinct_frequencies(),
        distance_range_m: min_max(data.samples().iter().map(PathLossSample::distance_m)),
        path_loss_range_db: min_max(data.samples().iter().map(PathLossSample::path_loss_db)),
        per_scenario,
        per_environment,
        per_data_type,
    }
}
