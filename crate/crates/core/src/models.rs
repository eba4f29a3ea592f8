//! Close-in (CI), alpha-beta-gamma (ABG) and free-space path loss equations.
//!
//! Everything here is a pure function of its inputs. Evaluators return the
//! mean path loss; shadow fading is only ever drawn by [`crate::synth`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Reference distance of both models, in meters.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("frequency must be finite and > 0 GHz, got {0}")]
    InvalidFrequency(f64),
    #[error("distance must be finite and >= 1 m, got {0}")]
    InvalidDistance(f64),
    #[error("path loss must be finite, got {0}")]
    InvalidPathLoss(f64),
    #[error("model coefficient `{name}` must be finite, got {value}")]
    NonFiniteCoefficient { name: &'static str, value: f64 },
    #[error("shadow-fading sigma must be finite and >= 0 dB, got {0}")]
    InvalidSigma(f64),
}

/// Carrier frequency in GHz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FrequencyGhz(f64);

impl FrequencyGhz {
    pub fn new(value: f64) -> Result<Self, ModelError> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(ModelError::InvalidFrequency(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn hz(self) -> f64 {
        self.0 * 1e9
    }
}

impl TryFrom<f64> for FrequencyGhz {
    type Error = ModelError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<FrequencyGhz> for f64 {
    fn from(f: FrequencyGhz) -> Self {
        f.0
    }
}

/// 3D transmitter-receiver separation in meters. Never below the 1 m
/// reference distance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DistanceM(f64);

impl DistanceM {
    pub fn new(value: f64) -> Result<Self, ModelError> {
        if value.is_finite() && value >= REFERENCE_DISTANCE_M {
            Ok(Self(value))
        } else {
            Err(ModelError::InvalidDistance(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for DistanceM {
    type Error = ModelError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<DistanceM> for f64 {
    fn from(d: DistanceM) -> Self {
        d.0
    }
}

/// Path loss in dB, positive-loss convention.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PathLossDb(f64);

impl PathLossDb {
    pub fn new(value: f64) -> Result<Self, ModelError> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(ModelError::InvalidPathLoss(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PathLossDb {
    type Error = ModelError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<PathLossDb> for f64 {
    fn from(pl: PathLossDb) -> Self {
        pl.0
    }
}

fn check_coefficient(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFiniteCoefficient { name, value })
    }
}

fn check_sigma(sigma: Option<f64>) -> Result<(), ModelError> {
    match sigma {
        Some(s) if !(s.is_finite() && s >= 0.0) => Err(ModelError::InvalidSigma(s)),
        _ => Ok(()),
    }
}

/// Close-in free-space reference distance model: one path loss exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiModel {
    pub ple: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_db: Option<f64>,
}

impl CiModel {
    pub fn new(ple: f64) -> Result<Self, ModelError> {
        check_coefficient("ple", ple)?;
        Ok(Self { ple, sigma_db: None })
    }

    pub fn with_sigma(self, sigma_db: f64) -> Result<Self, ModelError> {
        check_sigma(Some(sigma_db))?;
        Ok(Self {
            sigma_db: Some(sigma_db),
            ..self
        })
    }

    /// The free-space model (PLE = 2).
    pub fn free_space() -> Self {
        Self {
            ple: 2.0,
            sigma_db: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check_coefficient("ple", self.ple)?;
        check_sigma(self.sigma_db)
    }
}

/// Alpha-beta-gamma model. With `gamma_fixed` set it is the two-parameter
/// floating-intercept (AB) model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbgModel {
    pub alpha: f64,
    pub beta_db: f64,
    pub gamma: f64,
    #[serde(default)]
    pub gamma_fixed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_db: Option<f64>,
}

impl AbgModel {
    pub fn new(alpha: f64, beta_db: f64, gamma: f64) -> Result<Self, ModelError> {
        let m = Self {
            alpha,
            beta_db,
            gamma,
            gamma_fixed: false,
            sigma_db: None,
        };
        m.validate()?;
        Ok(m)
    }

    /// AB model: gamma pinned rather than estimated.
    pub fn with_fixed_gamma(alpha: f64, beta_db: f64, gamma: f64) -> Result<Self, ModelError> {
        let mut m = Self::new(alpha, beta_db, gamma)?;
        m.gamma_fixed = true;
        Ok(m)
    }

    pub fn with_sigma(self, sigma_db: f64) -> Result<Self, ModelError> {
        check_sigma(Some(sigma_db))?;
        Ok(Self {
            sigma_db: Some(sigma_db),
            ..self
        })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check_coefficient("alpha", self.alpha)?;
        check_coefficient("beta_db", self.beta_db)?;
        check_coefficient("gamma", self.gamma)?;
        check_sigma(self.sigma_db)
    }
}

/// Either of the two model families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PathLossModel {
    Ci(CiModel),
    Abg(AbgModel),
}

impl PathLossModel {
    pub fn eval(&self, f: FrequencyGhz, d: DistanceM) -> PathLossDb {
        match self {
            PathLossModel::Ci(m) => eval_ci(m, f, d),
            PathLossModel::Abg(m) => eval_abg(m, f, d),
        }
    }

    /// At a fixed frequency both models are affine in log10(d):
    /// `PL = slope * log10(d) + intercept`. Returns `(slope, intercept)`.
    pub fn log_distance_line(&self, f: FrequencyGhz) -> (f64, f64) {
        match self {
            PathLossModel::Ci(m) => (10.0 * m.ple, fspl_1m(f).value()),
            PathLossModel::Abg(m) => (
                10.0 * m.alpha,
                m.beta_db + 10.0 * m.gamma * f.value().log10(),
            ),
        }
    }

    pub fn sigma_db(&self) -> Option<f64> {
        match self {
            PathLossModel::Ci(m) => m.sigma_db,
            PathLossModel::Abg(m) => m.sigma_db,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            PathLossModel::Ci(m) => m.validate(),
            PathLossModel::Abg(m) => m.validate(),
        }
    }
}

impl From<CiModel> for PathLossModel {
    fn from(m: CiModel) -> Self {
        PathLossModel::Ci(m)
    }
}

impl From<AbgModel> for PathLossModel {
    fn from(m: AbgModel) -> Self {
        PathLossModel::Abg(m)
    }
}

/// Renders the model in the CLI's model-spec grammar (`ci:<n>`,
/// `ab:<a>,<b>`, `abg:<a>,<b>,<g>`).
impl fmt::Display for PathLossModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathLossModel::Ci(m) => write!(f, "ci:{}", m.ple),
            PathLossModel::Abg(m) if m.gamma_fixed && m.gamma == 2.0 => {
                write!(f, "ab:{},{}", m.alpha, m.beta_db)
            }
            PathLossModel::Abg(m) => write!(f, "abg:{},{},{}", m.alpha, m.beta_db, m.gamma),
        }
    }
}

/// Free-space path loss at the 1 m reference distance: `20 log10(4 pi f / c)`
/// with `f` converted from GHz to Hz.
pub fn fspl_1m(f: FrequencyGhz) -> PathLossDb {
    PathLossDb(20.0 * (4.0 * std::f64::consts::PI * f.hz() / SPEED_OF_LIGHT_M_S).log10())
}

/// `fspl_1m(f) + 10 n log10(d)`.
pub fn eval_ci(m: &CiModel, f: FrequencyGhz, d: DistanceM) -> PathLossDb {
    PathLossDb(fspl_1m(f).value() + 10.0 * m.ple * d.value().log10())
}

/// `10 alpha log10(d) + beta + 10 gamma log10(f)`.
pub fn eval_abg(m: &AbgModel, f: FrequencyGhz, d: DistanceM) -> PathLossDb {
    PathLossDb(10.0 * m.alpha * d.value().log10() + m.beta_db + 10.0 * m.gamma * f.value().log10())
}

/// Intercept that makes ABG reproduce CI: FSPL at 1 m and 1 GHz.
pub fn ci_equivalent_beta_db() -> f64 {
    fspl_1m(FrequencyGhz(1.0)).value()
}

/// Exact ABG form of a CI model: alpha = n, gamma = 2, beta = FSPL(1 GHz, 1 m).
/// The returned model carries no sigma; sigma belongs to a fit, not a form.
pub fn ci_to_abg(m: &CiModel) -> AbgModel {
    AbgModel {
        alpha: m.ple,
        beta_db: ci_equivalent_beta_db(),
        gamma: 2.0,
        gamma_fixed: true,
        sigma_db: None,
    }
}
