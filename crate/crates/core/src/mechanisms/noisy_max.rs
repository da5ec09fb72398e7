use std::collections::BTreeMap;

use crate::error::{invalid, Result};
use crate::mechanisms::{check_positive, Mechanism};
use crate::rng::{laplace, AuditRng};
use crate::types::{Dataset, PrivacyProperty, SampleBatch};

pub const DEFAULT_BINS: usize = 10;

fn bin_counts(d: &Dataset, k: usize) -> Vec<f64> {
    let (lo, hi) = d.range();
    let mut counts = vec![0.0; k];
    for &x in d.records() {
        let j = (((x - lo) / (hi - lo)) * k as f64).floor() as usize;
        counts[j.min(k - 1)] += 1.0;
    }
    counts
}

fn argmax_noisy(counts: &[f64], eps: f64, rng: &mut AuditRng) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, &c) in counts.iter().enumerate() {
        let v = c + laplace(rng, 2.0 / eps);
        // strict comparison keeps the lowest index on ties
        if v > best.1 {
            best = (j, v);
        }
    }
    best.0
}

/// Index of the bin with the largest Laplace-perturbed count.
pub fn noisy_max(d: &Dataset, eps: f64, k: usize, rng: &mut AuditRng) -> Result<usize> {
    let m = NoisyMax::new(eps, k)?;
    Ok(argmax_noisy(&bin_counts(d, m.k), eps, rng))
}

#[derive(Debug, Clone)]
pub struct NoisyMax {
    epsilon: f64,
    k: usize,
}

impl NoisyMax {
    pub fn new(epsilon: f64, k: usize) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        if k < 2 {
            return invalid(format!("noisy max needs at least 2 bins, got {k}"));
        }
        Ok(NoisyMax { epsilon, k })
    }
}

impl Mechanism for NoisyMax {
    fn name(&self) -> &str {
        "noisy_max"
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
        p.insert("bins".into(), self.k as f64);
        p
    }

    fn sample(&self, d: &Dataset, n: usize, rng: &mut AuditRng) -> Result<SampleBatch> {
        let counts = bin_counts(d, self.k);
        let out = (0..n)
            .map(|_| argmax_noisy(&counts, self.epsilon, rng) as f64)
            .collect();
        SampleBatch::from_scalars(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn concentrated_mass_wins_at_large_epsilon() {
        // bin 1 of 10 over [-1, 1] is [-0.8, -0.6)
        let d = Dataset::new(vec![-0.7; 5]).unwrap();
        let mut rng = derive_rng(1, &[]);
        let hits = (0..1000)
            .filter(|_| noisy_max(&d, 100.0, 10, &mut rng).unwrap() == 1)
            .count();
        assert!(hits >= 990);
    }

    #[test]
    fn empty_dataset_is_roughly_uniform() {
        let m = NoisyMax::new(1.0, 10).unwrap();
        let b = m.sample(&Dataset::empty(), 50_000, &mut derive_rng(2, &[])).unwrap();
        let mut hist = [0usize; 10];
        for &x in b.as_flat() {
            hist[x as usize] += 1;
        }
        for h in hist {
            // 5000 expected, sd about 67
            assert!((h as f64 - 5000.0).abs() < 400.0, "{hist:?}");
        }
    }

    #[test]
    fn argmax_relabeling_equivariance() {
        // moving the mass to another bin moves the output distribution with it
        let a = Dataset::new(vec![-0.7; 3]).unwrap();
        let b = Dataset::new(vec![0.5; 3]).unwrap();
        let m = NoisyMax::new(1.0, 10).unwrap();
        let xa = m.sample(&a, 20_000, &mut derive_rng(3, &[])).unwrap();
        let xb = m.sample(&b, 20_000, &mut derive_rng(4, &[])).unwrap();
        let fa = xa.as_flat().iter().filter(|&&x| x == 1.0).count() as f64 / 20_000.0;
        let fb = xb.as_flat().iter().filter(|&&x| x == 7.0).count() as f64 / 20_000.0;
        assert!((fa - fb).abs() < 0.03, "{fa} vs {fb}");
    }

    #[test]
    fn deterministic_and_checked() {
        let d = Dataset::new(vec![0.1, 0.2]).unwrap();
        let x = noisy_max(&d, 1.0, 10, &mut derive_rng(5, &[])).unwrap();
        let y = noisy_max(&d, 1.0, 10, &mut derive_rng(5, &[])).unwrap();
        assert_eq!(x, y);
        assert!(NoisyMax::new(1.0, 1).is_err());
    }
}
