//! Divergence lower-bound estimators and their threshold rules.

mod histogram;
mod hockey;
mod mmd;
mod renyi;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::{Method, ModelKind, Scaler};
use crate::runner::Estimator;
use crate::types::{PrivacyProperty, SampleBatch};

pub use histogram::{
    equal_frequency_edges, histogram_divergence, histogram_statistic, Binning, HistogramTester,
};
pub use hockey::{build_mixture_sample, hockey_stick_lower_bound, HockeyStickTester};
pub use mmd::{median_bandwidth, mmd_lower_bound, mmd_transform, GaussianKernel, MmdTester};
pub use renyi::{empirical_renyi, eta_from_n, renyi_correction, renyi_threshold, RenyiTester};

pub const ESTIMATOR_NAMES: [&str; 4] = ["renyi", "hockey_stick", "mmd", "histogram"];

pub const DEFAULT_SAMPLES: usize = 50_000;
pub const DEFAULT_BETA: f64 = 1.0 / 3.0;
pub const DEFAULT_ALPHA: f64 = 1.5;
pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_BOUND: f64 = 0.5;
pub const DEFAULT_UNIVERSE: usize = 100;
pub const DEFAULT_PILOT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Renyi,
    HockeyStick,
    Mmd,
    Histogram,
}

impl EstimatorKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "renyi" => Ok(EstimatorKind::Renyi),
            "hockey_stick" => Ok(EstimatorKind::HockeyStick),
            "mmd" => Ok(EstimatorKind::Mmd),
            "histogram" => Ok(EstimatorKind::Histogram),
            _ => Err(Error::Unknown {
                kind: "estimator",
                name: name.to_string(),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Renyi => "renyi",
            EstimatorKind::HockeyStick => "hockey_stick",
            EstimatorKind::Mmd => "mmd",
            EstimatorKind::Histogram => "histogram",
        }
    }

    pub fn accepts(self, p: &PrivacyProperty) -> bool {
        match self {
            EstimatorKind::Renyi => !matches!(p, PrivacyProperty::Approximate { .. }),
            _ => matches!(p, PrivacyProperty::Approximate { .. }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerChoice {
    #[default]
    Quantile,
    Affine,
}

impl ScalerChoice {
    pub(crate) fn fit(self, batches: &[&SampleBatch]) -> Result<Scaler> {
        match self {
            ScalerChoice::Quantile => {
                Scaler::fit_quantile(batches, crate::models::DEFAULT_QUANTILE_REFS)
            }
            ScalerChoice::Affine => Scaler::fit_affine(batches),
        }
    }
}

/// Network for vector outputs, Chebyshev sum for scalars, unless overridden.
pub(crate) fn pick_model(choice: &Option<ModelKind>, dim: usize) -> ModelKind {
    match choice {
        Some(k) => k.clone(),
        None if dim == 1 => ModelKind::chebyshev_default(),
        None => ModelKind::dense_default(),
    }
}

/// Optional overrides of the optimizer defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerOverrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub step_size: Option<f64>,
    pub method: Option<Method>,
}

impl OptimizerOverrides {
    pub(crate) fn apply(&self, mut c: crate::models::OptimizerConfig) -> crate::models::OptimizerConfig {
        if let Some(e) = self.epochs {
            c.epochs = e;
        }
        if let Some(b) = self.batch_size {
            c.batch_size = b;
        }
        if let Some(s) = self.step_size {
            c.step_size = s;
        }
        if let Some(m) = self.method {
            c.method = m;
        }
        c
    }
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_bound() -> f64 {
    DEFAULT_BOUND
}
fn default_universe() -> usize {
    DEFAULT_UNIVERSE
}
fn default_pilot() -> usize {
    DEFAULT_PILOT
}

/// Tester settings; `property` is the claim being checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub name: EstimatorKind,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Renyi order used when the property is pure DP.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Bound `C` on the Renyi witness function.
    #[serde(default = "default_bound")]
    pub bound: f64,
    #[serde(default)]
    pub model: Option<ModelKind>,
    #[serde(default)]
    pub scaler: ScalerChoice,
    #[serde(default)]
    pub optimizer: OptimizerOverrides,
    /// MMD kernel bandwidth; median heuristic when absent.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "default_universe")]
    pub universe: usize,
    /// Histogram accuracy; derived from `samples` when absent.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_pilot")]
    pub pilot: usize,
}

impl EstimatorConfig {
    pub fn new(name: EstimatorKind) -> Self {
        EstimatorConfig {
            name,
            samples: DEFAULT_SAMPLES,
            beta: DEFAULT_BETA,
            alpha: DEFAULT_ALPHA,
            bound: DEFAULT_BOUND,
            model: None,
            scaler: ScalerChoice::default(),
            optimizer: OptimizerOverrides::default(),
            bandwidth: None,
            universe: DEFAULT_UNIVERSE,
            eta: None,
            pilot: DEFAULT_PILOT,
        }
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return invalid(format!("beta {} outside (0, 1)", self.beta));
        }
        if self.samples == 0 {
            return invalid("sample size must be at least 1");
        }
        Ok(())
    }
}

/// Instantiates the tester for `property`, rejecting mismatched pairings.
pub fn build_estimator(cfg: &EstimatorConfig, property: PrivacyProperty) -> Result<Box<dyn Estimator>> {
    cfg.validate()?;
    property.validate()?;
    if !cfg.name.accepts(&property) {
        return invalid(format!(
            "the {} tester cannot check {property:?}",
            cfg.name.name()
        ));
    }
    Ok(match cfg.name {
        EstimatorKind::Renyi => Box::new(RenyiTester::from_config(cfg, property)?),
        EstimatorKind::HockeyStick => Box::new(HockeyStickTester::from_config(cfg, property)?),
        EstimatorKind::Mmd => Box::new(MmdTester::from_config(cfg, property)?),
        EstimatorKind::Histogram => Box::new(HistogramTester::from_config(cfg, property)?),
    })
}

pub(crate) fn approximate_params(p: PrivacyProperty) -> Result<(f64, f64)> {
    match p {
        PrivacyProperty::Approximate { epsilon, delta } => Ok((epsilon, delta)),
        other => invalid(format!("approximate-DP tester given {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_rules() {
        let pure = PrivacyProperty::Pure { epsilon: 1.0 };
        let approx = PrivacyProperty::Approximate { epsilon: 1.0, delta: 0.01 };
        for name in ESTIMATOR_NAMES {
            let kind = EstimatorKind::parse(name).unwrap();
            assert_eq!(kind.name(), name);
            let cfg = EstimatorConfig::new(kind);
            let ok_pure = build_estimator(&cfg, pure).is_ok();
            let ok_approx = build_estimator(&cfg, approx).is_ok();
            assert_eq!(ok_pure, kind == EstimatorKind::Renyi);
            assert_eq!(ok_approx, kind != EstimatorKind::Renyi);
        }
    }

    #[test]
    fn config_defaults_from_json() {
        let c: EstimatorConfig = serde_json::from_str(r#"{"name":"mmd"}"#).unwrap();
        assert_eq!(c, EstimatorConfig::new(EstimatorKind::Mmd));
        assert!(serde_json::from_str::<EstimatorConfig>(r#"{"name":"mmd","bogus":1}"#).is_err());
    }
}
