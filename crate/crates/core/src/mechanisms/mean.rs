//! Noisy mean estimators, one correct and four that leak the true count.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};
use crate::mechanisms::{check_positive, Mechanism};
use crate::rng::{gaussian, laplace, AuditRng};
use crate::types::{Dataset, PrivacyProperty, SampleBatch};

/// Floor on the noisy count so the division stays finite.
pub const COUNT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanVariant {
    DpLaplace,
    NonDpLaplace1,
    NonDpLaplace2,
    NonDpGaussian1,
    NonDpGaussian2,
}

fn noisy_count(n: usize, eps: f64, rng: &mut AuditRng) -> f64 {
    (n as f64 + laplace(rng, 2.0 / eps)).max(COUNT_FLOOR)
}

/// Gaussian scale for sensitivity `delta` at Renyi order `alpha`, budget `eps`.
fn gauss_sigma(delta: f64, alpha: f64, eps: f64) -> f64 {
    delta * (alpha / (2.0 * eps)).sqrt()
}

fn true_count(d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return invalid("mean over an empty dataset divides by the true count 0");
    }
    Ok(d.len() as f64)
}

pub fn dp_laplace_mean(d: &Dataset, eps: f64, rng: &mut AuditRng) -> f64 {
    let nt = noisy_count(d.len(), eps, rng);
    d.sum() / nt + laplace(rng, 2.0 / (nt * eps))
}

pub fn non_dp_laplace1(d: &Dataset, eps: f64, rng: &mut AuditRng) -> Result<f64> {
    let n = true_count(d)?;
    Ok(d.sum() / n + laplace(rng, 2.0 / (n * eps)))
}

/// Noise is scaled by the noisy count but the mean uses the true count.
pub fn non_dp_laplace2(d: &Dataset, eps: f64, rng: &mut AuditRng) -> Result<f64> {
    let n = true_count(d)?;
    let nt = noisy_count(d.len(), eps, rng);
    Ok(d.sum() / n + laplace(rng, 2.0 / (nt * eps)))
}

pub fn non_dp_gaussian1(d: &Dataset, alpha: f64, eps: f64, rng: &mut AuditRng) -> Result<f64> {
    let n = true_count(d)?;
    Ok(d.sum() / n + gaussian(rng, gauss_sigma(2.0 / n, alpha, eps)))
}

pub fn non_dp_gaussian2(d: &Dataset, alpha: f64, eps: f64, rng: &mut AuditRng) -> Result<f64> {
    let n = true_count(d)?;
    // count noise mirrors the Laplace variant's 2/eps scale
    let nt = (n + gaussian(rng, gauss_sigma(2.0, alpha, eps))).max(COUNT_FLOOR);
    Ok(d.sum() / n + gaussian(rng, gauss_sigma(2.0 / nt, alpha, eps)))
}

#[derive(Debug, Clone)]
pub struct MeanMechanism {
    variant: MeanVariant,
    epsilon: f64,
    alpha: f64,
}

impl MeanMechanism {
    pub fn new(variant: MeanVariant, epsilon: f64, alpha: f64) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        if !(alpha > 1.0 && alpha.is_finite()) {
            return invalid(format!("alpha must exceed 1, got {alpha}"));
        }
        Ok(MeanMechanism {
            variant,
            epsilon,
            alpha,
        })
    }

    pub fn variant(&self) -> MeanVariant {
        self.variant
    }

    fn draw(&self, d: &Dataset, rng: &mut AuditRng) -> Result<f64> {
        let (a, e) = (self.alpha, self.epsilon);
        match self.variant {
            MeanVariant::DpLaplace => Ok(dp_laplace_mean(d, e, rng)),
            MeanVariant::NonDpLaplace1 => non_dp_laplace1(d, e, rng),
            MeanVariant::NonDpLaplace2 => non_dp_laplace2(d, e, rng),
            MeanVariant::NonDpGaussian1 => non_dp_gaussian1(d, a, e, rng),
            MeanVariant::NonDpGaussian2 => non_dp_gaussian2(d, a, e, rng),
        }
    }
}

impl Mechanism for MeanMechanism {
    fn name(&self) -> &str {
        match self.variant {
            MeanVariant::DpLaplace => "dp_laplace",
            MeanVariant::NonDpLaplace1 => "non_dp_laplace1",
            MeanVariant::NonDpLaplace2 => "non_dp_laplace2",
            MeanVariant::NonDpGaussian1 => "non_dp_gaussian1",
            MeanVariant::NonDpGaussian2 => "non_dp_gaussian2",
        }
    }

    fn claimed_property(&self) -> PrivacyProperty {
        match self.variant {
            MeanVariant::NonDpGaussian1 | MeanVariant::NonDpGaussian2 => PrivacyProperty::Renyi {
                alpha: self.alpha,
                epsilon: self.epsilon,
            },
            _ => PrivacyProperty::Pure {
                epsilon: self.epsilon,
            },
        }
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn parameters(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("epsilon".into(), self.epsilon);
        if matches!(
            self.variant,
            MeanVariant::NonDpGaussian1 | MeanVariant::NonDpGaussian2
        ) {
            m.insert("alpha".into(), self.alpha);
        }
        m
    }

    fn sample(&self, d: &Dataset, n: usize, rng: &mut AuditRng) -> Result<SampleBatch> {
        let out = (0..n).map(|_| self.draw(d, rng)).collect::<Result<Vec<_>>>()?;
        SampleBatch::from_scalars(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn dp_laplace_on_empty_is_finite() {
        let mut rng = derive_rng(1, &[]);
        for _ in 0..1000 {
            assert!(dp_laplace_mean(&Dataset::empty(), 1.0, &mut rng).is_finite());
        }
    }

    #[test]
    fn dp_laplace_mean_is_unbiased_for_large_n() {
        let d = Dataset::new(vec![0.5; 1000]).unwrap();
        let mut rng = derive_rng(2, &[]);
        let xs: Vec<f64> = (0..100_000).map(|_| dp_laplace_mean(&d, 1.0, &mut rng)).collect();
        let (m, _) = mean_var(&xs);
        assert!((m - 0.5).abs() < 0.01, "mean {m}");
    }

    #[test]
    fn non_dp_variants_unbiased() {
        let d = Dataset::new(vec![0.2; 500]).unwrap();
        let mut rng = derive_rng(3, &[]);
        let a: Vec<f64> = (0..100_000)
            .map(|_| non_dp_laplace1(&d, 1.0, &mut rng).unwrap())
            .collect();
        let b: Vec<f64> = (0..100_000)
            .map(|_| non_dp_laplace2(&d, 1.0, &mut rng).unwrap())
            .collect();
        assert!((mean_var(&a).0 - 0.2).abs() < 0.01);
        assert!((mean_var(&b).0 - 0.2).abs() < 0.01);
    }

    #[test]
    fn variant1_is_value_plus_laplace_two() {
        let d = Dataset::new(vec![1.0]).unwrap();
        let mut a = derive_rng(4, &[]);
        let mut b = derive_rng(4, &[]);
        let x = non_dp_laplace1(&d, 1.0, &mut a).unwrap();
        assert_eq!(x, 1.0 + laplace(&mut b, 2.0));
    }

    #[test]
    fn empty_dataset_errors_for_true_count_variants() {
        let mut rng = derive_rng(5, &[]);
        let e = Dataset::empty();
        assert!(non_dp_laplace1(&e, 1.0, &mut rng).is_err());
        assert!(non_dp_laplace2(&e, 1.0, &mut rng).is_err());
        assert!(non_dp_gaussian1(&e, 1.5, 1.0, &mut rng).is_err());
        assert!(non_dp_gaussian2(&e, 1.5, 1.0, &mut rng).is_err());
    }

    #[test]
    fn gaussian1_mean_and_variance() {
        let d = Dataset::new(vec![0.0]).unwrap();
        let (alpha, eps) = (1.5f64, 0.5f64);
        let sigma = 2.0 * (alpha / (2.0 * eps)).sqrt();
        let mut rng = derive_rng(6, &[]);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| non_dp_gaussian1(&d, alpha, eps, &mut rng).unwrap())
            .collect();
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 3.0 * sigma / (n as f64).sqrt());
        assert!((v / (sigma * sigma) - 1.0).abs() < 0.05);
    }

    #[test]
    fn same_seed_same_output() {
        let d = Dataset::new(vec![0.3, -0.1]).unwrap();
        let m = MeanMechanism::new(MeanVariant::DpLaplace, 0.5, 1.5).unwrap();
        let a = m.sample(&d, 10, &mut derive_rng(9, &[])).unwrap();
        let b = m.sample(&d, 10, &mut derive_rng(9, &[])).unwrap();
        assert_eq!(a, b);
    }
}
