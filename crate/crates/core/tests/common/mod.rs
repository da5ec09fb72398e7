#![allow(dead_code)]

use dpaudit::oracles::AnalyticDistribution;
use dpaudit::rng::{gaussian, laplace};
use dpaudit::{AuditRng, Result, SampleBatch, Sampler};
use rand::Rng;

/// Draws from an analytic distribution so estimators can be run against oracles.
pub struct DistSampler(pub AnalyticDistribution);

impl DistSampler {
    fn draw(&self, rng: &mut AuditRng) -> f64 {
        match &self.0 {
            AnalyticDistribution::Laplace { mu, b } => mu + laplace(rng, *b),
            AnalyticDistribution::Gaussian { mu, sigma } => mu + gaussian(rng, *sigma),
            AnalyticDistribution::Discrete { support, probs } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (x, p) in support.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *x;
                    }
                }
                *support.last().unwrap()
            }
        }
    }
}

impl Sampler for DistSampler {
    fn dim(&self) -> usize {
        1
    }

    fn sample(&self, n: usize, rng: &mut AuditRng) -> Result<SampleBatch> {
        SampleBatch::from_scalars((0..n).map(|_| self.draw(rng)).collect())
    }
}

pub fn bernoulli(p: f64) -> AnalyticDistribution {
    AnalyticDistribution::categorical(vec![1.0 - p, p]).unwrap()
}

/// The pairs used for the lower-bound validity checks.
pub fn oracle_suite() -> Vec<(&'static str, AnalyticDistribution, AnalyticDistribution)> {
    use AnalyticDistribution as D;
    vec![
        ("bernoulli(0.7) vs bernoulli(0.4)", bernoulli(0.7), bernoulli(0.4)),
        ("laplace(0,1) vs laplace(1,1)", D::laplace(0.0, 1.0).unwrap(), D::laplace(1.0, 1.0).unwrap()),
        ("gaussian(0,1) vs gaussian(1,1)", D::gaussian(0.0, 1.0).unwrap(), D::gaussian(1.0, 1.0).unwrap()),
        ("point mass 0 vs point mass 1", D::point_mass(0.0), D::point_mass(1.0)),
    ]
}
