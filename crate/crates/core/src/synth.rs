//! Seeded synthetic measurement campaigns.
//!
//! Generator: ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64(seed)`. Sample `i` reads three 64-bit words starting at
//! 32-bit word position `6 * i`, so every sample can be produced independently
//! of the others:
//!
//! 1. frequency index `floor(u1 * len)` into the frequency list,
//! 2. distance from `u2` (log-uniform or uniform on the range),
//! 3. shadow fading `sigma * Phi^-1(u3)` with `Phi^-1(u) = -sqrt(2) erfc^-1(2u)`.
//!
//! Each `u` is `((word >> 12) + 0.5) / 2^52`, strictly inside (0, 1).

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::erf::erfc_inv;
use thiserror::Error;

use crate::dataset::{DataType, Dataset, Environment, LineageStep, PathLossSample, Scenario};
use crate::models::{DistanceM, FrequencyGhz, PathLossDb, PathLossModel};

pub const GENERATOR_NAME: &str = "chacha20-wordpos6/inverse-cdf";

const WORDS_PER_SAMPLE: u128 = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceSampling {
    /// `log10(d)` uniform on `[log10 lo, log10 hi]`.
    #[default]
    LogUniform,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub truth: PathLossModel,
    pub frequencies_ghz: Vec<f64>,
    pub dist_range_m: (f64, f64),
    pub dist_sampling: DistanceSampling,
    pub sigma_db: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub scenario: Scenario,
    pub environment: Environment,
    pub source_tag: String,
}

impl SynthConfig {
    /// Log-uniform distances, `OTHER`/`NLOS` labels, tag `synth`.
    pub fn new(
        truth: impl Into<PathLossModel>,
        frequencies_ghz: Vec<f64>,
        dist_range_m: (f64, f64),
        sigma_db: f64,
        n_samples: usize,
        seed: u64,
    ) -> Self {
        Self {
            truth: truth.into(),
            frequencies_ghz,
            dist_range_m,
            dist_sampling: DistanceSampling::LogUniform,
            sigma_db,
            n_samples,
            seed,
            scenario: Scenario::Other,
            environment: Environment::Nlos,
            source_tag: "synth".to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidConfig(msg));
        self.truth
            .validate()
            .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
        if self.frequencies_ghz.is_empty() {
            return bad("frequency list is empty".into());
        }
        if let Some(f) = self.frequencies_ghz.iter().find(|f| FrequencyGhz::new(**f).is_err()) {
            return bad(format!("frequency {f} GHz is not finite and positive"));
        }
        let (lo, hi) = self.dist_range_m;
        if !(lo.is_finite() && hi.is_finite() && lo >= 1.0 && hi > lo) {
            return bad(format!("distance range [{lo}, {hi}] must satisfy 1 <= lo < hi"));
        }
        if !(self.sigma_db.is_finite() && self.sigma_db >= 0.0) {
            return bad(format!("sigma {} dB must be finite and >= 0", self.sigma_db));
        }
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        Ok(())
    }
}

fn unit_open(word: u64) -> f64 {
    ((word >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Standard normal quantile.
pub fn standard_normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

fn draw_distance(u: f64, (lo, hi): (f64, f64), sampling: DistanceSampling) -> f64 {
    let d = match sampling {
        DistanceSampling::LogUniform => {
            let (a, b) = (lo.log10(), hi.log10());
            10f64.powf(a + u * (b - a))
        }
        DistanceSampling::Uniform => lo + u * (hi - lo),
    };
    d.clamp(lo, hi)
}

/// Sample `index` of the campaign described by `cfg`. Assumes `cfg` is valid.
fn sample_at(cfg: &SynthConfig, rng: &mut ChaCha20Rng, index: usize) -> PathLossSample {
    rng.set_word_pos(index as u128 * WORDS_PER_SAMPLE);
    let (u1, u2, u3) = (unit_open(rng.next_u64()), unit_open(rng.next_u64()), unit_open(rng.next_u64()));

    let k = ((u1 * cfg.frequencies_ghz.len() as f64) as usize).min(cfg.frequencies_ghz.len() - 1);
    let frequency = FrequencyGhz::new(cfg.frequencies_ghz[k]).expect("validated frequency");
    let distance = DistanceM::new(draw_distance(u2, cfg.dist_range_m, cfg.dist_sampling)).expect("validated range");
    let mean = cfg.truth.eval(frequency, distance).value();
    let path_loss = PathLossDb::new(mean + cfg.sigma_db * standard_normal_quantile(u3)).expect("finite draw");

    PathLossSample {
        frequency,
        distance,
        path_loss,
        scenario: cfg.scenario,
        environment: cfg.environment,
        data_type: DataType::Synthetic,
        source_tag: cfg.source_tag.clone(),
    }
}

/// Draws `cfg.n_samples` samples around the truth model with Gaussian (in dB)
/// shadow fading. Identical configs give bit-identical datasets.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let samples = (0..cfg.n_samples).map(|i| sample_at(cfg, &mut rng, i)).collect();

    let config = serde_json::to_string(cfg).expect("config serializes");
    let id = hex::encode(&Sha256::digest(config.as_bytes())[..8]);
    let step = LineageStep::Generated {
        generator: GENERATOR_NAME.to_string(),
        seed: cfg.seed,
        rows: cfg.n_samples,
        config,
    };
    Ok(Dataset::with_root(id, samples, step))
}

/// Adds `offset_db` to `round(fraction * N)` samples chosen by a seeded
/// partial Fisher-Yates shuffle.
pub fn inject_outliers(data: &Dataset, fraction: f64, offset_db: f64, seed: u64) -> Result<Dataset, SynthError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(SynthError::InvalidConfig(format!("outlier fraction {fraction} outside [0, 1]")));
    }
    if !offset_db.is_finite() {
        return Err(SynthError::InvalidConfig(format!("outlier offset {offset_db} dB is not finite")));
    }
    let n = data.len();
    let k = ((fraction * n as f64).round() as usize).min(n);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + ((unit_open(rng.next_u64()) * (n - i) as f64) as usize).min(n - i - 1);
        order.swap(i, j);
    }
    let mut samples = data.samples().to_vec();
    for &i in &order[..k] {
        let shifted = samples[i].path_loss_db() + offset_db;
        samples[i].path_loss = PathLossDb::new(shifted).expect("finite shift");
    }
    Ok(data.derive(
        samples,
        LineageStep::Outliers {
            fraction,
            offset_db,
            seed,
            affected: k,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{fit_abg, fit_ci, sigma_for};
    use crate::models::{AbgModel, CiModel};

    fn ci(n: f64) -> PathLossModel {
        CiModel::new(n).unwrap().into()
    }

    #[test]
    fn quantile_matches_known_values() {
        assert_eq!(standard_normal_quantile(0.5), 0.0);
        assert!((standard_normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((standard_normal_quantile(0.001) + 3.090_232_306_167_813_5).abs() < 1e-12);
        assert!(standard_normal_quantile(unit_open(0)).is_finite());
        assert!(unit_open(u64::MAX) < 1.0);
        assert!(standard_normal_quantile(unit_open(u64::MAX)).is_finite());
    }

    #[test]
    fn noise_free_free_space() {
        let cfg = SynthConfig::new(ci(2.0), vec![2.0, 28.0, 73.5], (5.0, 500.0), 0.0, 2000, 1);
        let data = generate(&cfg).unwrap();
        assert!(sigma_for(&cfg.truth, &data).unwrap() < 1e-12);
        assert!((fit_ci(&data).unwrap().ci().unwrap().ple - 2.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let cfg = SynthConfig::new(ci(3.1), vec![2.0, 28.0], (19.0, 272.0), 8.1, 500, 42);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let other = generate(&SynthConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.samples(), other.samples());
    }

    #[test]
    fn samples_respect_bounds_and_labels() {
        for sampling in [DistanceSampling::LogUniform, DistanceSampling::Uniform] {
            let cfg = SynthConfig {
                dist_sampling: sampling,
                ..SynthConfig::new(ci(3.0), vec![2.0, 18.0, 73.5], (19.0, 272.0), 9.0, 5000, 3)
            };
            let data = generate(&cfg).unwrap();
            assert_eq!(data.len(), 5000);
            for s in data.samples() {
                assert!((19.0..=272.0).contains(&s.distance_m()));
                assert!(cfg.frequencies_ghz.contains(&s.frequency_ghz()));
                assert_eq!(s.data_type, DataType::Synthetic);
            }
            assert_eq!(data.distinct_frequencies(), vec![2.0, 18.0, 73.5]);
        }
    }

    #[test]
    fn summary_matches_generator_bookkeeping() {
        let cfg = SynthConfig::new(ci(3.1), vec![2.0, 28.0], (19.0, 272.0), 8.1, 100_000, 9);
        let s = generate(&cfg).unwrap().summarize();
        assert_eq!(s.n_samples, 100_000);
        assert_eq!(s.frequencies_ghz, vec![2.0, 28.0]);
        let r = s.distance_range_m.unwrap();
        assert!(r.lo >= 19.0 && r.lo < 19.1 && r.hi <= 272.0 && r.hi > 271.0);
        assert_eq!(s.per_environment[&Environment::Nlos], 100_000);
    }

    #[test]
    fn residual_sigma_converges() {
        let cfg = SynthConfig::new(ci(3.1), vec![2.0, 28.0, 73.5], (19.0, 272.0), 8.0, 100_000, 11);
        let data = generate(&cfg).unwrap();
        let sigma = sigma_for(&cfg.truth, &data).unwrap();
        assert!((sigma - 8.0).abs() < 0.2, "{sigma}");
    }

    #[test]
    fn log_uniform_distances_pass_ks() {
        let (lo, hi) = (19.0f64, 272.0f64);
        let cfg = SynthConfig::new(ci(3.1), vec![28.0], (lo, hi), 0.0, 100_000, 5);
        let data = generate(&cfg).unwrap();
        let mut x: Vec<f64> = data
            .samples()
            .iter()
            .map(|s| (s.distance_m().log10() - lo.log10()) / (hi.log10() - lo.log10()))
            .collect();
        x.sort_by(f64::total_cmp);
        let n = x.len() as f64;
        let ks = x
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn invalid_configs() {
        let ok = SynthConfig::new(ci(3.1), vec![28.0], (19.0, 272.0), 8.1, 10, 1);
        assert!(ok.validate().is_ok());
        let cases = [
            SynthConfig { n_samples: 0, ..ok.clone() },
            SynthConfig { frequencies_ghz: vec![], ..ok.clone() },
            SynthConfig { frequencies_ghz: vec![28.0, -1.0], ..ok.clone() },
            SynthConfig { dist_range_m: (0.5, 10.0), ..ok.clone() },
            SynthConfig { dist_range_m: (100.0, 100.0), ..ok.clone() },
            SynthConfig { sigma_db: -1.0, ..ok.clone() },
            SynthConfig { truth: PathLossModel::Ci(CiModel { ple: f64::NAN, sigma_db: None }), ..ok.clone() },
        ];
        for cfg in cases {
            assert!(matches!(generate(&cfg), Err(SynthError::InvalidConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn outliers_zero_fraction_is_identity() {
        let data = generate(&SynthConfig::new(ci(3.1), vec![28.0], (19.0, 272.0), 4.0, 300, 2)).unwrap();
        let same = inject_outliers(&data, 0.0, 40.0, 7).unwrap();
        assert_eq!(same.samples(), data.samples());
        assert!(matches!(same.lineage().last(), Some(LineageStep::Outliers { affected: 0, .. })));
    }

    #[test]
    fn outliers_full_fraction_shifts_beta_only() {
        let truth = AbgModel::new(3.5, 24.4, 1.9).unwrap();
        let data = generate(&SynthConfig::new(truth, vec![2.0, 28.0, 73.5], (19.0, 272.0), 6.0, 3000, 4)).unwrap();
        let shifted = inject_outliers(&data, 1.0, 10.0, 8).unwrap();
        let (a, b) = (fit_abg(&data).unwrap(), fit_abg(&shifted).unwrap());
        let (ma, mb) = (a.abg().unwrap(), b.abg().unwrap());
        assert!((mb.beta_db - ma.beta_db - 10.0).abs() < 1e-9);
        assert!((mb.alpha - ma.alpha).abs() < 1e-9);
        assert!((mb.gamma - ma.gamma).abs() < 1e-9);
        assert!((a.sigma_db - b.sigma_db).abs() < 1e-9);
    }

    #[test]
    fn outliers_increase_sigma() {
        let data = generate(&SynthConfig::new(ci(3.1), vec![2.0, 28.0], (19.0, 272.0), 0.0, 2000, 6)).unwrap();
        let noisy = inject_outliers(&data, 0.01, 40.0, 1).unwrap();
        assert!(matches!(noisy.lineage().last(), Some(LineageStep::Outliers { affected: 20, .. })));
        assert!(fit_ci(&noisy).unwrap().sigma_db > fit_ci(&data).unwrap().sigma_db);
        assert!(inject_outliers(&data, 1.5, 1.0, 1).is_err());
    }
}
