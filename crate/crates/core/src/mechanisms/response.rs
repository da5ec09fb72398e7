use std::collections::BTreeMap;

use rand::Rng;

use crate::error::Result;
use crate::mechanisms::{check_positive, Mechanism};
use crate::rng::AuditRng;
use crate::types::{Dataset, PrivacyProperty, SampleBatch};

/// Randomized response on the bit "last record is positive".
///
/// Exactly `epsilon`-DP for any pair of datasets, so it is a clean negative
/// control. Not part of the named registry of audit targets.
#[derive(Debug, Clone)]
pub struct RandomizedResponse {
    epsilon: f64,
}

impl RandomizedResponse {
    pub fn new(epsilon: f64) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        Ok(RandomizedResponse { epsilon })
    }

    pub fn bit(d: &Dataset) -> bool {
        d.records().last().is_some_and(|&x| x > 0.0)
    }

    pub fn flip_probability(&self) -> f64 {
        1.0 / (1.0 + self.epsilon.exp())
    }
}

impl Mechanism for RandomizedResponse {
    fn name(&self) -> &str {
        "randomized_response"
    }

    fn claimed_property(&self) -> PrivacyProperty {
        PrivacyProperty::Pure {
            epsilon: self.epsilon,
        }
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn parameters(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        p.insert("epsilon".into(), self.epsilon);
        p
    }

    fn sample(&self, d: &Dataset, n: usize, rng: &mut AuditRng) -> Result<SampleBatch> {
        let b = Self::bit(d);
        let flip = self.flip_probability();
        let out = (0..n)
            .map(|_| if (rng.gen::<f64>() < flip) != b { 1.0 } else { 0.0 })
            .collect();
        SampleBatch::from_scalars(out)
    }
}
