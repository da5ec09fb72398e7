//! Variational Renyi lower bound with a held-out evaluation.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::estimators::{pick_model, EstimatorConfig, ScalerChoice};
use crate::models::{
    maximize, objective_value, BoundedModel, ModelKind, Objective, OptimizerConfig, TrainingData,
};
use crate::rng::{split, AuditRng};
use crate::runner::{DivergenceEstimate, Estimator, PhaseTimes, Sampler, Stopwatch};
use crate::types::{PrivacyProperty, SampleBatch};

/// `R^{h,n}_alpha(X0, X1)` for a fitted witness `h`.
pub fn empirical_renyi(
    h: &BoundedModel,
    x0: &SampleBatch,
    x1: &SampleBatch,
    alpha: f64,
) -> Result<f64> {
    if !(alpha > 1.0) {
        return invalid(format!("alpha must exceed 1, got {alpha}"));
    }
    objective_value(
        h,
        Objective::EmpiricalRenyi { alpha },
        TrainingData::Pair { x0, x1 },
    )
}

/// Accuracy `eta` reached by `n` samples for a witness bounded by `C`.
pub fn eta_from_n(n: usize, alpha: f64, bound: f64, beta: f64) -> Result<f64> {
    if n == 0 {
        return invalid("sample size must be at least 1");
    }
    let a = 3.0 * (2.0 * (alpha - 1.0) * bound).exp();
    let b = 2.0 * (alpha * bound).exp();
    let eta = (a.max(b) * (2.0 / beta).ln() / n as f64).sqrt();
    if eta > 1.0 {
        return Err(Error::Infeasible(format!(
            "eta = {eta:.4} > 1: {n} samples are too few for C = {bound}, alpha = {alpha}, beta = {beta}"
        )));
    }
    Ok(eta)
}

/// `log((1 + eta) / (1 - eta))`, the amount taken off the plug-in value.
pub fn renyi_correction(eta: f64) -> f64 {
    ((1.0 + eta) / (1.0 - eta)).ln()
}

/// Renyi level that a claimed property implies at order `alpha`.
pub fn renyi_threshold(property: PrivacyProperty, alpha: f64) -> Result<f64> {
    match property {
        PrivacyProperty::Renyi { epsilon, .. } => Ok(epsilon),
        PrivacyProperty::Pure { epsilon } => Ok(epsilon.min(2.0 * alpha * epsilon * epsilon)),
        PrivacyProperty::Approximate { .. } => {
            invalid("the Renyi tester cannot check approximate DP")
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenyiTester {
    pub property: PrivacyProperty,
    pub alpha: f64,
    pub samples: usize,
    pub beta: f64,
    pub bound: f64,
    pub model: Option<ModelKind>,
    pub scaler: ScalerChoice,
    pub optimizer: OptimizerConfig,
}

impl RenyiTester {
    pub fn new(property: PrivacyProperty, samples: usize, beta: f64, bound: f64) -> Result<Self> {
        let mut cfg = EstimatorConfig::new(crate::estimators::EstimatorKind::Renyi);
        cfg.samples = samples;
        cfg.beta = beta;
        cfg.bound = bound;
        Self::from_config(&cfg, property)
    }

    pub fn from_config(cfg: &EstimatorConfig, property: PrivacyProperty) -> Result<Self> {
        let alpha = match property {
            PrivacyProperty::Renyi { alpha, .. } => alpha,
            _ => cfg.alpha,
        };
        renyi_threshold(property, alpha)?;
        if !(cfg.bound > 0.0 && cfg.bound.is_finite()) {
            return invalid(format!("bound C must be positive, got {}", cfg.bound));
        }
        Ok(RenyiTester {
            property,
            alpha,
            samples: cfg.samples,
            beta: cfg.beta,
            bound: cfg.bound,
            model: cfg.model.clone(),
            scaler: cfg.scaler,
            optimizer: cfg.optimizer.apply(OptimizerConfig::renyi(alpha)),
        })
    }

    /// Fits `h*` on fresh training batches from `p` and `q`.
    pub fn fit(
        &self,
        p: &dyn Sampler,
        q: &dyn Sampler,
        rng: &mut AuditRng,
        times: &mut PhaseTimes,
    ) -> Result<BoundedModel> {
        let mut sw = Stopwatch::start();
        let x0 = p.sample(self.samples, &mut split(rng, "train_p"))?;
        let x1 = q.sample(self.samples, &mut split(rng, "train_q"))?;
        sw.lap(&mut times.sampling);
        let scaler = self.scaler.fit(&[&x0, &x1])?;
        let kind = pick_model(&self.model, p.dim());
        let mut h = BoundedModel::new(kind, self.bound, p.dim(), scaler)?;
        let mut fit_rng = split(rng, "fit");
        h.init_random(&mut fit_rng);
        let mut cfg = self.optimizer;
        cfg.objective = Objective::EmpiricalRenyi { alpha: self.alpha };
        maximize(&mut h, TrainingData::Pair { x0: &x0, x1: &x1 }, &cfg, &mut fit_rng)?;
        sw.lap(&mut times.fitting);
        Ok(h)
    }
}

impl Estimator for RenyiTester {
    fn name(&self) -> &'static str {
        "renyi"
    }

    fn property(&self) -> PrivacyProperty {
        self.property
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn threshold(&self) -> Result<f64> {
        renyi_threshold(self.property, self.alpha)
    }

    fn estimate(
        &self,
        p: &dyn Sampler,
        q: &dyn Sampler,
        rng: &mut AuditRng,
    ) -> Result<DivergenceEstimate> {
        if p.dim() != q.dim() {
            return invalid("samplers disagree on output dimension");
        }
        let eta = eta_from_n(self.samples, self.alpha, self.bound, self.beta)?;
        let correction = renyi_correction(eta);
        let mut times = PhaseTimes::default();
        let h = self.fit(p, q, rng, &mut times)?;
        let mut sw = Stopwatch::start();
        let e0 = p.sample(self.samples, &mut split(rng, "eval_p"))?;
        let e1 = q.sample(self.samples, &mut split(rng, "eval_q"))?;
        sw.lap(&mut times.sampling);
        let stat = empirical_renyi(&h, &e0, &e1, self.alpha)?;
        sw.lap(&mut times.estimation);
        let mut metadata = BTreeMap::new();
        metadata.insert("eta".into(), eta);
        metadata.insert("alpha".into(), self.alpha);
        metadata.insert("bound".into(), self.bound);
        Ok(DivergenceEstimate {
            value: stat - correction,
            correction,
            statistic: stat,
            metadata,
            times,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Scaler;

    #[test]
    fn eta_example_and_scaling() {
        let e = eta_from_n(100_000, 1.5, 1.0, 0.05).unwrap();
        assert!((e - 0.0182).abs() < 5e-5, "{e}");
        let e4 = eta_from_n(400_000, 1.5, 1.0, 0.05).unwrap();
        assert!((e / e4 - 2.0).abs() < 1e-12);
        assert!(matches!(
            eta_from_n(10, 1.5, 5.0, 0.05),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn thresholds() {
        assert_eq!(renyi_threshold(PrivacyProperty::Pure { epsilon: 1.0 }, 1.5).unwrap(), 1.0);
        let t = renyi_threshold(PrivacyProperty::Pure { epsilon: 0.1 }, 1.5).unwrap();
        assert!((t - 0.03).abs() < 1e-15);
        let r = PrivacyProperty::Renyi { alpha: 1.5, epsilon: 0.25 };
        assert_eq!(renyi_threshold(r, 1.5).unwrap(), 0.25);
        let a = PrivacyProperty::Approximate { epsilon: 1.0, delta: 0.1 };
        assert!(renyi_threshold(a, 1.5).is_err());
    }

    #[test]
    fn identity_witness_hand_value() {
        // h(x) = C tanh(atanh(x/C)) = x via a degree-1 Chebyshev sum with C large
        let c = 50.0;
        let mut h = BoundedModel::new(ModelKind::Chebyshev { degree: 1 }, c, 1, Scaler::Identity).unwrap();
        // f(z) = z, so h = C tanh(z); pick z with C tanh(z) = 1
        let z = (1.0f64 / c).atanh();
        h.set_params(&[0.0, 1.0]).unwrap();
        let x0 = SampleBatch::from_scalars(vec![z]).unwrap();
        let x1 = SampleBatch::from_scalars(vec![0.0]).unwrap();
        let v = empirical_renyi(&h, &x0, &x1, 2.0).unwrap();
        // 2 log e^1 - log e^0 = 2
        assert!((v - 2.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn correction_monotone_in_n() {
        let mut last = f64::INFINITY;
        for n in [1_000, 10_000, 100_000, 1_000_000] {
            let c = renyi_correction(eta_from_n(n, 1.5, 0.5, 1.0 / 3.0).unwrap());
            assert!(c < last);
            last = c;
        }
    }
}
