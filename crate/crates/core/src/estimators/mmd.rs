//! Kernel two-sample lower bound on the approximate-DP gap.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::{approximate_params, EstimatorConfig};
use crate::rng::{split, AuditRng};
use crate::runner::{DivergenceEstimate, Estimator, PhaseTimes, Sampler, Stopwatch};
use crate::types::{PrivacyProperty, SampleBatch};

pub const BANDWIDTH_FLOOR: f64 = 1e-6;

/// `k(x, y) = exp(-|x - y|^2 / (2 s^2))`; `k(x, x) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub bandwidth: f64,
}

impl GaussianKernel {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return invalid(format!("kernel bandwidth must be positive, got {bandwidth}"));
        }
        Ok(GaussianKernel { bandwidth })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        (-d2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

/// Median pairwise Euclidean distance, floored.
pub fn median_bandwidth(pilot: &SampleBatch) -> f64 {
    let pts: Vec<&[f64]> = pilot.points().collect();
    let mut d = Vec::with_capacity(pts.len() * pts.len().saturating_sub(1) / 2);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let s: f64 = pts[i]
                .iter()
                .zip(pts[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.push(s.sqrt());
        }
    }
    if d.is_empty() {
        return BANDWIDTH_FLOOR;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    m.max(BANDWIDTH_FLOOR)
}

/// Maps a lower estimate `m_hat` of `MMD^2 - (e^eps - 1)^2` to a `delta` estimate.
pub fn mmd_transform(m_hat: f64, eps: f64) -> f64 {
    let b = eps.exp() - (-eps).exp();
    let a = 1.0 + (-eps).exp();
    ((b * b + a * m_hat).max(0.0).sqrt() - b) / a
}

/// Bernstein-corrected statistic for `n` paired draws.
pub fn mmd_lower_bound(
    p: &dyn Sampler,
    q: &dyn Sampler,
    eps: f64,
    beta: f64,
    kernel: &GaussianKernel,
    n: usize,
    rng: &mut AuditRng,
) -> Result<DivergenceEstimate> {
    if n < 2 {
        return invalid(format!("MMD estimator needs n >= 2, got {n}"));
    }
    if p.dim() != q.dim() {
        return invalid("samplers disagree on output dimension");
    }
    let mut times = PhaseTimes::default();
    let mut sw = Stopwatch::start();
    let x = p.sample(n, &mut split(rng, "x"))?;
    let x2 = p.sample(n, &mut split(rng, "x_prime"))?;
    let y = q.sample(n, &mut split(rng, "y"))?;
    let y2 = q.sample(n, &mut split(rng, "y_prime"))?;
    sw.lap(&mut times.sampling);
    let (mut s1, mut s2) = (0.0, 0.0);
    for i in 0..n {
        let h = kernel.eval(x.point(i), x2.point(i)) - 2.0 * kernel.eval(x.point(i), y.point(i))
            + kernel.eval(y.point(i), y2.point(i));
        s1 += h;
        s2 += h * h;
    }
    let nf = n as f64;
    let mu = s1 / nf;
    let var = (s2 / nf - mu * mu).max(0.0);
    let l = (2.0 / beta).ln();
    let slack = (2.0 * var * l / nf).sqrt() + 28.0 * l / (3.0 * (nf - 1.0));
    let shift = (eps.exp() - 1.0).powi(2);
    let m_hat = mu - slack - shift;
    sw.lap(&mut times.estimation);
    let value = mmd_transform(m_hat, eps);
    let mut metadata = BTreeMap::new();
    metadata.insert("mu".into(), mu);
    metadata.insert("variance".into(), var);
    metadata.insert("m_hat".into(), m_hat);
    metadata.insert("bandwidth".into(), kernel.bandwidth);
    Ok(DivergenceEstimate {
        value,
        correction: mmd_transform(mu - shift, eps) - value,
        statistic: mu,
        metadata,
        times,
    })
}

#[derive(Debug, Clone)]
pub struct MmdTester {
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub samples: usize,
    pub bandwidth: Option<f64>,
    pub pilot: usize,
}

impl MmdTester {
    pub fn from_config(cfg: &EstimatorConfig, property: PrivacyProperty) -> Result<Self> {
        let (epsilon, delta) = approximate_params(property)?;
        if cfg.samples < 2 {
            return invalid(format!("MMD estimator needs n >= 2, got {}", cfg.samples));
        }
        if let Some(b) = cfg.bandwidth {
            GaussianKernel::new(b)?;
        }
        Ok(MmdTester {
            epsilon,
            delta,
            beta: cfg.beta,
            samples: cfg.samples,
            bandwidth: cfg.bandwidth,
            pilot: cfg.pilot,
        })
    }
}

impl Estimator for MmdTester {
    fn name(&self) -> &'static str {
        "mmd"
    }

    fn property(&self) -> PrivacyProperty {
        PrivacyProperty::Approximate {
            epsilon: self.epsilon,
            delta: self.delta,
        }
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn threshold(&self) -> Result<f64> {
        Ok(self.delta)
    }

    fn estimate(
        &self,
        p: &dyn Sampler,
        q: &dyn Sampler,
        rng: &mut AuditRng,
    ) -> Result<DivergenceEstimate> {
        let mut pilot_time = 0.0;
        let bw = match self.bandwidth {
            Some(b) => b,
            None => {
                let mut sw = Stopwatch::start();
                let half = self.pilot / 2;
                let a = p.sample(self.pilot - half, &mut split(rng, "pilot_p"))?;
                let b = q.sample(half, &mut split(rng, "pilot_q"))?;
                let mut pooled = a.as_flat().to_vec();
                pooled.extend_from_slice(b.as_flat());
                sw.lap(&mut pilot_time);
                median_bandwidth(&SampleBatch::new(p.dim(), pooled)?)
            }
        };
        let kernel = GaussianKernel::new(bw)?;
        let mut est = mmd_lower_bound(
            p,
            q,
            self.epsilon,
            self.beta,
            &kernel,
            self.samples,
            &mut split(rng, "mmd"),
        )?;
        est.times.sampling += pilot_time;
        Ok(est)
    }
}
