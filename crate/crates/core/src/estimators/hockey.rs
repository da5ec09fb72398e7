//! Hockey-stick lower bound through a weighted classification task.
//!
//! Label 0 marks a draw from `Q` (weight `e^eps`), label 1 a draw from `P`.
//! The Bayes classifier predicts 1 exactly where `dP/dQ > e^eps`, and its
//! accuracy `a` satisfies `(1 + e^eps) a - e^eps = H_eps(P || Q)`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::estimators::{approximate_params, pick_model, EstimatorConfig, ScalerChoice};
use crate::models::{
    maximize, BoundedModel, ModelKind, Objective, OptimizerConfig, TrainingData, Workspace,
};
use crate::rng::{split, AuditRng};
use crate::runner::{DivergenceEstimate, Estimator, PhaseTimes, Sampler, Stopwatch};
use crate::types::{PrivacyProperty, SampleBatch};

/// Bound on the classifier logit, keeping probabilities inside (0, 1).
const LOGIT_BOUND: f64 = 20.0;

/// `m` labeled draws; `true` means label 1 (drawn from `P`).
pub fn build_mixture_sample(
    p: &dyn Sampler,
    q: &dyn Sampler,
    eps: f64,
    m: usize,
    rng: &mut AuditRng,
) -> Result<(SampleBatch, Vec<bool>)> {
    if !(eps >= 0.0) {
        return invalid(format!("epsilon must be non-negative, got {eps}"));
    }
    if p.dim() != q.dim() {
        return invalid("samplers disagree on output dimension");
    }
    let p0 = eps.exp() / (1.0 + eps.exp());
    let labels: Vec<bool> = (0..m).map(|_| rng.gen::<f64>() >= p0).collect();
    let n1 = labels.iter().filter(|&&l| l).count();
    let xp = p.sample(n1, &mut split(rng, "p"))?;
    let xq = q.sample(m - n1, &mut split(rng, "q"))?;
    let d = p.dim();
    let mut data = Vec::with_capacity(m * d);
    let (mut ip, mut iq) = (xp.points(), xq.points());
    for &l in &labels {
        let pt = if l { ip.next() } else { iq.next() };
        data.extend_from_slice(pt.expect("counts match labels"));
    }
    Ok((SampleBatch::new(d, data)?, labels))
}

/// A fitted decision rule `g(x) = 1{sigmoid(f(x)) > 1/2}`.
enum Rule {
    Constant(bool),
    Model(BoundedModel),
}

impl Rule {
    fn accuracy(&self, x: &SampleBatch, labels: &[bool]) -> Result<f64> {
        let hits = match self {
            Rule::Constant(c) => labels.iter().filter(|&&l| l == *c).count(),
            Rule::Model(m) => {
                let z = m.scale_batch(x)?;
                let mut ws = Workspace::default();
                z.chunks_exact(x.dim())
                    .zip(labels)
                    .filter(|(p, &l)| (m.raw(p, &mut ws) > 0.0) == l)
                    .count()
            }
        };
        Ok(hits as f64 / labels.len() as f64)
    }
}

/// Hoeffding slack `sqrt(log(1/beta) / (2m))`.
pub fn hoeffding_gamma(m: usize, beta: f64) -> f64 {
    ((1.0 / beta).ln() / (2.0 * m as f64)).sqrt()
}

#[allow(clippy::too_many_arguments)]
pub fn hockey_stick_lower_bound(
    p: &dyn Sampler,
    q: &dyn Sampler,
    eps: f64,
    beta: f64,
    m: usize,
    model: &Option<ModelKind>,
    scaler: ScalerChoice,
    optimizer: &OptimizerConfig,
    rng: &mut AuditRng,
) -> Result<DivergenceEstimate> {
    if m == 0 {
        return invalid("sample size must be at least 1");
    }
    let mut times = PhaseTimes::default();
    let mut sw = Stopwatch::start();
    let (xt, yt) = build_mixture_sample(p, q, eps, m, &mut split(rng, "train"))?;
    let (xe, ye) = build_mixture_sample(p, q, eps, m, &mut split(rng, "eval"))?;
    sw.lap(&mut times.sampling);
    let ones = yt.iter().filter(|&&l| l).count();
    let rule = if ones == 0 || ones == m {
        Rule::Constant(ones == m)
    } else {
        let kind = pick_model(model, p.dim());
        let mut h = BoundedModel::new(kind, LOGIT_BOUND, p.dim(), scaler.fit(&[&xt])?)?;
        let mut fit_rng = split(rng, "fit");
        h.init_random(&mut fit_rng);
        let mut cfg = *optimizer;
        cfg.objective = Objective::LogisticLoss;
        maximize(&mut h, TrainingData::Labeled { x: &xt, labels: &yt }, &cfg, &mut fit_rng)?;
        Rule::Model(h)
    };
    sw.lap(&mut times.fitting);
    let acc = rule.accuracy(&xe, &ye)?;
    sw.lap(&mut times.estimation);
    let w = eps.exp();
    let gamma = hoeffding_gamma(m, beta);
    let stat = (1.0 + w) * acc - w;
    let mut metadata = BTreeMap::new();
    metadata.insert("accuracy".into(), acc);
    metadata.insert("gamma".into(), gamma);
    metadata.insert(
        "constant_rule".into(),
        if matches!(rule, Rule::Constant(_)) { 1.0 } else { 0.0 },
    );
    Ok(DivergenceEstimate {
        value: (1.0 + w) * (acc - gamma) - w,
        correction: (1.0 + w) * gamma,
        statistic: stat,
        metadata,
        times,
    })
}

#[derive(Debug, Clone)]
pub struct HockeyStickTester {
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub samples: usize,
    pub model: Option<ModelKind>,
    pub scaler: ScalerChoice,
    pub optimizer: OptimizerConfig,
}

impl HockeyStickTester {
    pub fn from_config(cfg: &EstimatorConfig, property: PrivacyProperty) -> Result<Self> {
        let (epsilon, delta) = approximate_params(property)?;
        Ok(HockeyStickTester {
            epsilon,
            delta,
            beta: cfg.beta,
            samples: cfg.samples,
            model: cfg.model.clone(),
            scaler: cfg.scaler,
            optimizer: cfg.optimizer.apply(OptimizerConfig::logistic()),
        })
    }
}

impl Estimator for HockeyStickTester {
    fn name(&self) -> &'static str {
        "hockey_stick"
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
        hockey_stick_lower_bound(
            p,
            q,
            self.epsilon,
            self.beta,
            self.samples,
            &self.model,
            self.scaler,
            &self.optimizer,
            rng,
        )
    }
}
