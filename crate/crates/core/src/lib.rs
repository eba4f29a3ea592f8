//! Close-in (CI) and alpha-beta-gamma (ABG) large-scale path loss models.
//!
//! * [`models`]: path loss equations and the exact CI to ABG mapping.
//! * [`estimation`]: closed-form minimum shadow-fading fits (CI, AB, ABG).
//! * [`dataset`]: CSV ingestion, capping and filtering of samples.
//! * [`synth`]: seeded synthetic measurement campaigns.
//! * [`analysis`]: band comparisons, crossovers and curve tables.

pub mod analysis;
pub mod dataset;
pub mod estimation;
pub mod models;
pub mod summation;
pub mod synth;

pub use dataset::{CapMode, Dataset, PathLossSample};
pub use estimation::{fit_ab, fit_abg, fit_ci, oracle_fit_abg, sigma_for, EstimationError, FitResult};
pub use models::{AbgModel, CiModel, DistanceM, FrequencyGhz, PathLossDb, PathLossModel};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
