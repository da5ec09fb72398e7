//! Poissonized histogram estimate of the approximate-DP gap.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Error, Result};
use crate::estimators::{approximate_params, EstimatorConfig};
use crate::rng::{split, AuditRng};
use crate::runner::{DivergenceEstimate, Estimator, PhaseTimes, Sampler, Stopwatch};
use crate::types::{PrivacyProperty, SampleBatch};

/// How scalar outputs map onto the universe `[m]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Binning {
    /// Bin `j` holds values with exactly `j` edges strictly below them.
    Edges(Vec<f64>),
    /// Outputs are already integers; bin = value - `first`, clamped.
    Index { first: i64, m: usize },
}

impl Binning {
    pub fn universe(&self) -> usize {
        match self {
            Binning::Edges(e) => e.len() + 1,
            Binning::Index { m, .. } => *m,
        }
    }

    pub fn bin(&self, x: f64) -> usize {
        match self {
            Binning::Edges(e) => e.partition_point(|&t| t < x),
            Binning::Index { first, m } => {
                let k = x.round() as i64 - first;
                k.clamp(0, *m as i64 - 1) as usize
            }
        }
    }
}

/// Edges at the `k/m` quantiles of the pooled pilot values, duplicates merged.
pub fn equal_frequency_edges(pilot: &[f64], m: usize) -> Result<Vec<f64>> {
    if pilot.is_empty() || m < 2 {
        return invalid("need a non-empty pilot sample and at least two bins");
    }
    let mut v = pilot.to_vec();
    v.sort_by(f64::total_cmp);
    let last = (v.len() - 1) as f64;
    let mut edges: Vec<f64> = (1..m)
        .map(|k| v[((k as f64 / m as f64) * last).round() as usize])
        .collect();
    edges.dedup();
    Ok(edges)
}

/// `sum_j max(0, (x_j - e^eps y_j) / r)` over the universe.
pub fn histogram_statistic(x: &[u64], y: &[u64], r: u64, eps: f64) -> f64 {
    let r = r as f64;
    let w = eps.exp();
    x.iter()
        .zip(y)
        .map(|(&a, &b)| ((a as f64 - w * b as f64) / r).max(0.0))
        .sum()
}

fn counts(b: &SampleBatch, binning: &Binning) -> Vec<u64> {
    let mut c = vec![0u64; binning.universe()];
    for &x in b.as_flat() {
        c[binning.bin(x)] += 1;
    }
    c
}

fn draw_r(lambda: f64, rng: &mut AuditRng) -> Result<u64> {
    let pois = Poisson::new(lambda)
        .map_err(|e| Error::InvalidInput(format!("Poisson rate {lambda}: {e}")))?;
    for _ in 0..2 {
        let r = pois.sample(rng) as u64;
        if r > 0 {
            return Ok(r);
        }
    }
    Err(Error::Infeasible(format!("Poisson({lambda}) drew 0 twice")))
}

/// Poisson rate for universe `m`.
pub fn histogram_lambda(m: usize, eps: f64, beta: f64, eta: f64) -> f64 {
    let k = 1.0 + (2.0 * eps).exp();
    (4.0 * m as f64 * k / (beta * beta)).max(12.0 * k / (eta * eta))
}

/// `-eta + sum_j max(0, z_j)` from `r ~ Poisson(lambda)` draws of each side.
#[allow(clippy::too_many_arguments)]
pub fn histogram_divergence(
    p: &dyn Sampler,
    q: &dyn Sampler,
    binning: &Binning,
    eps: f64,
    beta: f64,
    eta: f64,
    rng: &mut AuditRng,
) -> Result<DivergenceEstimate> {
    if p.dim() != 1 || q.dim() != 1 {
        return Err(Error::Incompatible(
            "histogram tester needs scalar outputs".into(),
        ));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return invalid(format!("eta must be positive, got {eta}"));
    }
    let m = binning.universe();
    let lambda = histogram_lambda(m, eps, beta, eta);
    let mut times = PhaseTimes::default();
    let mut sw = Stopwatch::start();
    let r = draw_r(lambda, rng)?;
    let xs = p.sample(r as usize, &mut split(rng, "p"))?;
    let ys = q.sample(r as usize, &mut split(rng, "q"))?;
    sw.lap(&mut times.sampling);
    let stat = histogram_statistic(&counts(&xs, binning), &counts(&ys, binning), r, eps);
    sw.lap(&mut times.estimation);
    let mut metadata = BTreeMap::new();
    metadata.insert("lambda".into(), lambda);
    metadata.insert("r".into(), r as f64);
    metadata.insert("eta".into(), eta);
    Ok(DivergenceEstimate {
        value: stat - eta,
        correction: eta,
        statistic: stat,
        metadata,
        times,
    })
}

#[derive(Debug, Clone)]
pub struct HistogramTester {
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub samples: usize,
    pub universe: usize,
    pub eta: Option<f64>,
    pub pilot: usize,
}

impl HistogramTester {
    pub fn from_config(cfg: &EstimatorConfig, property: PrivacyProperty) -> Result<Self> {
        let (epsilon, delta) = approximate_params(property)?;
        if cfg.universe < 2 {
            return invalid("histogram universe needs at least two bins");
        }
        if cfg.pilot == 0 {
            return invalid("pilot sample must be non-empty");
        }
        Ok(HistogramTester {
            epsilon,
            delta,
            beta: cfg.beta,
            samples: cfg.samples,
            universe: cfg.universe,
            eta: cfg.eta,
            pilot: cfg.pilot,
        })
    }

    /// Accuracy matching `samples` draws: `12 (1 + e^{2 eps}) / eta^2 = n`.
    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or_else(|| {
            (12.0 * (1.0 + (2.0 * self.epsilon).exp()) / self.samples as f64).sqrt()
        })
    }
}

impl Estimator for HistogramTester {
    fn name(&self) -> &'static str {
        "histogram"
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
        if p.dim() != 1 || q.dim() != 1 {
            return Err(Error::Incompatible(format!(
                "histogram tester needs scalar outputs, mechanism emits dimension {}",
                p.dim()
            )));
        }
        let mut sw = Stopwatch::start();
        let mut pilot = p.sample(self.pilot, &mut split(rng, "pilot_p"))?.as_flat().to_vec();
        pilot.extend_from_slice(q.sample(self.pilot, &mut split(rng, "pilot_q"))?.as_flat());
        let mut pilot_time = 0.0;
        sw.lap(&mut pilot_time);
        let binning = Binning::Edges(equal_frequency_edges(&pilot, self.universe)?);
        let mut est = histogram_divergence(
            p,
            q,
            &binning,
            self.epsilon,
            self.beta,
            self.eta(),
            &mut split(rng, "histogram"),
        )?;
        est.times.sampling += pilot_time;
        Ok(est)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand::Rng;

    struct Const(f64);

    impl Sampler for Const {
        fn dim(&self) -> usize {
            1
        }
        fn sample(&self, n: usize, _: &mut AuditRng) -> Result<SampleBatch> {
            SampleBatch::from_scalars(vec![self.0; n])
        }
    }

    struct Coin(f64);

    impl Sampler for Coin {
        fn dim(&self) -> usize {
            1
        }
        fn sample(&self, n: usize, rng: &mut AuditRng) -> Result<SampleBatch> {
            SampleBatch::from_scalars(
                (0..n)
                    .map(|_| if rng.gen::<f64>() < self.0 { 1.0 } else { 0.0 })
                    .collect(),
            )
        }
    }

    #[test]
    fn identical_point_masses_give_minus_eta() {
        let b = Binning::Index { first: 1, m: 2 };
        let e = histogram_divergence(&Const(1.0), &Const(1.0), &b, 0.5, 0.1, 0.1, &mut derive_rng(1, &[])).unwrap();
        assert!((e.value + 0.1).abs() < 1e-12);
    }

    #[test]
    fn disjoint_point_masses() {
        let b = Binning::Index { first: 1, m: 2 };
        let e = histogram_divergence(&Const(1.0), &Const(2.0), &b, 0.0, 0.1, 0.1, &mut derive_rng(2, &[])).unwrap();
        assert!((e.value - 0.9).abs() < 1e-12);
    }

    #[test]
    fn statistic_is_plugin_hockey_stick() {
        let mut rng = derive_rng(3, &[]);
        let b = Binning::Index { first: 0, m: 2 };
        let e = histogram_divergence(&Coin(0.9), &Coin(0.5), &b, 0.2, 0.1, 0.05, &mut rng).unwrap();
        // plug-in H on the same draws, recomputed independently from frequencies
        let r = e.metadata["r"];
        assert!(r > 0.0);
        assert!(e.statistic > 0.2 && e.statistic < 0.35, "{}", e.statistic);
        let x = [3u64, 7];
        let y = [5u64, 5];
        let direct = (0.3f64 - 0.2f64.exp() * 0.5).max(0.0) + (0.7f64 - 0.2f64.exp() * 0.5).max(0.0);
        assert!((histogram_statistic(&x, &y, 10, 0.2) - direct).abs() < 1e-12);
    }

    #[test]
    fn edges_put_ties_together() {
        let e = equal_frequency_edges(&[0.0, 0.0, 0.0, 1.0], 4).unwrap();
        let b = Binning::Edges(e);
        assert_eq!(b.bin(0.0), b.bin(0.0));
        assert_ne!(b.bin(0.0), b.bin(1.0));
        assert_eq!(b.bin(-5.0), 0);
        assert_eq!(b.bin(7.0), b.universe() - 1);
    }

    #[test]
    fn vectors_are_incompatible() {
        struct Vec2;
        impl Sampler for Vec2 {
            fn dim(&self) -> usize {
                2
            }
            fn sample(&self, n: usize, _: &mut AuditRng) -> Result<SampleBatch> {
                SampleBatch::new(2, vec![0.0; 2 * n])
            }
        }
        let cfg = EstimatorConfig::new(crate::estimators::EstimatorKind::Histogram);
        let t = HistogramTester::from_config(&cfg, PrivacyProperty::Approximate { epsilon: 1.0, delta: 0.01 }).unwrap();
        assert!(matches!(
            t.estimate(&Vec2, &Vec2, &mut derive_rng(0, &[])),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn lambda_formula() {
        let l = histogram_lambda(100, 0.01, 1.0 / 3.0, 0.1);
        let k = 1.0 + 0.02f64.exp();
        assert!((l - (400.0 * k * 9.0).max(1200.0 * k)).abs() < 1e-9);
    }
}
