//! One-dimensional noisy gradient descent with a mis-scaled noise multiplier.
//!
//! Accounting assumes noise `sigma_theory * G`; the implementation adds
//! `scale * sigma_theory * G`, so any `scale < 1` spends more budget than
//! claimed.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};
use crate::mechanisms::{check_positive, Mechanism};
use crate::rng::{gaussian, AuditRng};
use crate::types::{Dataset, PrivacyProperty, SampleBatch};

#[derive(Debug, Clone)]
pub struct ScaledGd {
    pub alpha: f64,
    pub clip: f64,
    pub sigma_theory: f64,
    pub scale: f64,
    pub steps: usize,
    pub lr: f64,
    /// Public normalizer for the gradient sum (the true count would leak).
    pub batch_size: f64,
    /// Test hook: disable the Gaussian term.
    pub noise: bool,
}

impl Default for ScaledGd {
    fn default() -> Self {
        ScaledGd {
            alpha: 1.5,
            clip: 1.0,
            sigma_theory: 2.0,
            scale: 1.0,
            steps: 1,
            lr: 1.0,
            batch_size: 1.0,
            noise: true,
        }
    }
}

impl ScaledGd {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha: f64,
        clip: f64,
        sigma_theory: f64,
        scale: f64,
        steps: usize,
        lr: f64,
        batch_size: f64,
        noise: bool,
    ) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return invalid(format!("alpha must exceed 1, got {alpha}"));
        }
        check_positive("clip", clip)?;
        check_positive("sigma_theory", sigma_theory)?;
        check_positive("lr", lr)?;
        check_positive("batch_size", batch_size)?;
        if !(scale > 0.0 && scale <= 1.0) {
            return invalid(format!("scale must lie in (0, 1], got {scale}"));
        }
        if steps == 0 {
            return invalid("scaled_gd needs at least one step");
        }
        Ok(ScaledGd {
            alpha,
            clip,
            sigma_theory,
            scale,
            steps,
            lr,
            batch_size,
            noise,
        })
    }

    /// `k * alpha / (2 sigma^2)`: Gaussian-mechanism composition at sensitivity G.
    pub fn claimed_epsilon(&self) -> f64 {
        self.steps as f64 * self.alpha / (2.0 * self.sigma_theory * self.sigma_theory)
    }

    /// Renyi level the implementation actually attains.
    pub fn true_epsilon(&self) -> f64 {
        self.claimed_epsilon() / (self.scale * self.scale)
    }

    pub fn run(&self, d: &Dataset, rng: &mut AuditRng) -> f64 {
        let noise_sd = self.scale * self.sigma_theory * self.clip / self.batch_size;
        let mut theta = 0.0;
        for _ in 0..self.steps {
            let g: f64 = d
                .records()
                .iter()
                .map(|&x| (theta - x).clamp(-self.clip, self.clip))
                .sum::<f64>()
                / self.batch_size;
            let z = if self.noise {
                gaussian(rng, noise_sd)
            } else {
                0.0
            };
            theta -= self.lr * (g + z);
        }
        theta
    }
}

impl Mechanism for ScaledGd {
    fn name(&self) -> &str {
        "scaled_gd"
    }

    fn claimed_property(&self) -> PrivacyProperty {
        PrivacyProperty::Renyi {
            alpha: self.alpha,
            epsilon: self.claimed_epsilon(),
        }
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn parameters(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        p.insert("alpha".into(), self.alpha);
        p.insert("clip".into(), self.clip);
        p.insert("sigma_theory".into(), self.sigma_theory);
        p.insert("scale".into(), self.scale);
        p.insert("steps".into(), self.steps as f64);
        p.insert("lr".into(), self.lr);
        p.insert("batch_size".into(), self.batch_size);
        p.insert("noise".into(), if self.noise { 1.0 } else { 0.0 });
        p
    }

    fn sample(&self, d: &Dataset, n: usize, rng: &mut AuditRng) -> Result<SampleBatch> {
        let out = (0..n).map(|_| self.run(d, rng)).collect();
        SampleBatch::from_scalars(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn noiseless_single_step() {
        let d = Dataset::with_range(vec![1.0, 1.0], -1.0, 1.0).unwrap();
        let m = ScaledGd::new(1.5, 10.0, 2.0, 1.0, 1, 1.0, 2.0, false).unwrap();
        assert_eq!(m.run(&d, &mut derive_rng(0, &[])), 1.0);
    }

    #[test]
    fn claimed_and_true_budget() {
        let m = ScaledGd::default();
        assert!((m.claimed_epsilon() - 0.1875).abs() < 1e-15);
        let half = ScaledGd { scale: 0.5, ..m };
        assert!((half.true_epsilon() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn empty_dataset_is_pure_noise() {
        let m = ScaledGd::default();
        let b = m.sample(&Dataset::empty(), 50_000, &mut derive_rng(1, &[])).unwrap();
        let xs = b.as_flat();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64 - mean * mean;
        assert!(mean.abs() < 0.05);
        assert!((var / 4.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn scale_range_checked() {
        assert!(ScaledGd::new(1.5, 1.0, 2.0, 0.0, 1, 1.0, 1.0, true).is_err());
        assert!(ScaledGd::new(1.5, 1.0, 2.0, 1.2, 1, 1.0, 1.0, true).is_err());
    }
}
