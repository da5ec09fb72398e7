//! Correct and deliberately broken mechanisms used as audit targets.

mod mean;
mod noisy_max;
mod response;
mod scaled_gd;
mod svt;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::AuditRng;
use crate::runner::Sampler;
use crate::types::{Dataset, PrivacyProperty, SampleBatch};

pub use mean::{
    dp_laplace_mean, non_dp_gaussian1, non_dp_gaussian2, non_dp_laplace1, non_dp_laplace2,
    MeanMechanism, MeanVariant,
};
pub use noisy_max::{noisy_max, NoisyMax};
pub use response::RandomizedResponse;
pub use scaled_gd::ScaledGd;
pub use svt::{signed_threshold_queries, svt, Svt, HALTED};

pub const MECHANISM_NAMES: [&str; 13] = [
    "dp_laplace",
    "non_dp_laplace1",
    "non_dp_laplace2",
    "non_dp_gaussian1",
    "non_dp_gaussian2",
    "svt1",
    "svt2",
    "svt3",
    "svt4",
    "svt5",
    "svt6",
    "noisy_max",
    "scaled_gd",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub name: String,
    pub claimed_property: PrivacyProperty,
    pub output_dimension: usize,
    pub parameters: BTreeMap<String, f64>,
}

pub trait Mechanism: Send + Sync {
    fn name(&self) -> &str;
    fn claimed_property(&self) -> PrivacyProperty;
    fn output_dim(&self) -> usize;
    fn parameters(&self) -> BTreeMap<String, f64>;
    fn sample(&self, d: &Dataset, n: usize, rng: &mut AuditRng) -> Result<SampleBatch>;

    fn spec(&self) -> MechanismSpec {
        MechanismSpec {
            name: self.name().to_string(),
            claimed_property: self.claimed_property(),
            output_dimension: self.output_dim(),
            parameters: self.parameters(),
        }
    }
}

/// Output distribution of a mechanism on one fixed dataset.
pub struct MechanismSampler<'a> {
    mech: &'a dyn Mechanism,
    data: &'a Dataset,
}

impl<'a> MechanismSampler<'a> {
    pub fn new(mech: &'a dyn Mechanism, data: &'a Dataset) -> Self {
        MechanismSampler { mech, data }
    }
}

impl Sampler for MechanismSampler<'_> {
    fn dim(&self) -> usize {
        self.mech.output_dim()
    }

    fn sample(&self, n: usize, rng: &mut AuditRng) -> Result<SampleBatch> {
        self.mech.sample(self.data, n, rng)
    }
}

/// Named real parameters with defaults; unknown keys are an error.
pub(crate) struct Params<'a> {
    map: &'a BTreeMap<String, f64>,
    allowed: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn new(map: &'a BTreeMap<String, f64>) -> Self {
        Params {
            map,
            allowed: Vec::new(),
        }
    }

    fn get(&mut self, key: &'static str, default: f64) -> f64 {
        self.allowed.push(key);
        self.map.get(key).copied().unwrap_or(default)
    }

    fn count(&mut self, key: &'static str, default: usize) -> Result<usize> {
        let v = self.get(key, default as f64);
        if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
            return Err(Error::InvalidInput(format!("parameter {key}={v} is not a count")));
        }
        Ok(v as usize)
    }

    fn finish(self, mech: &str) -> Result<()> {
        for k in self.map.keys() {
            if !self.allowed.contains(&k.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "mechanism {mech} has no parameter '{k}'"
                )));
            }
        }
        Ok(())
    }
}

pub const DEFAULT_EPSILON: f64 = 1.0;
pub const DEFAULT_ALPHA: f64 = 1.5;

/// Builds a registered mechanism; missing parameters take their defaults.
pub fn build_mechanism(name: &str, params: &BTreeMap<String, f64>) -> Result<Box<dyn Mechanism>> {
    let mut p = Params::new(params);
    let mech: Box<dyn Mechanism> = match name {
        "dp_laplace" | "non_dp_laplace1" | "non_dp_laplace2" | "non_dp_gaussian1"
        | "non_dp_gaussian2" => {
            let variant = match name {
                "dp_laplace" => MeanVariant::DpLaplace,
                "non_dp_laplace1" => MeanVariant::NonDpLaplace1,
                "non_dp_laplace2" => MeanVariant::NonDpLaplace2,
                "non_dp_gaussian1" => MeanVariant::NonDpGaussian1,
                _ => MeanVariant::NonDpGaussian2,
            };
            let eps = p.get("epsilon", DEFAULT_EPSILON);
            let alpha = p.get("alpha", DEFAULT_ALPHA);
            Box::new(MeanMechanism::new(variant, eps, alpha)?)
        }
        "svt1" | "svt2" | "svt3" | "svt4" | "svt5" | "svt6" => {
            let variant = name[3..].parse::<u8>().expect("svt digit");
            let eps = p.get("epsilon", DEFAULT_EPSILON);
            let threshold = p.get("threshold", svt::DEFAULT_THRESHOLD);
            let c = p.count("c", svt::DEFAULT_MAX_COUNT)?;
            let m = p.count("queries", svt::DEFAULT_QUERIES)?;
            Box::new(Svt::new(variant, eps, threshold, c, m)?)
        }
        "noisy_max" => {
            let eps = p.get("epsilon", DEFAULT_EPSILON);
            let k = p.count("bins", noisy_max::DEFAULT_BINS)?;
            Box::new(NoisyMax::new(eps, k)?)
        }
        "scaled_gd" => {
            let d = ScaledGd::default();
            Box::new(ScaledGd::new(
                p.get("alpha", d.alpha),
                p.get("clip", d.clip),
                p.get("sigma_theory", d.sigma_theory),
                p.get("scale", d.scale),
                p.count("steps", d.steps)?,
                p.get("lr", d.lr),
                p.get("batch_size", d.batch_size),
                p.get("noise", 1.0) != 0.0,
            )?)
        }
        "randomized_response" => Box::new(RandomizedResponse::new(p.get("epsilon", DEFAULT_EPSILON))?),
        _ => {
            return Err(Error::Unknown {
                kind: "mechanism",
                name: name.to_string(),
            })
        }
    };
    p.finish(name)?;
    Ok(mech)
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
    }
}
