//! Mini-batch first-order fitting of a [`BoundedModel`].

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{squash, BoundedModel, Workspace};
use crate::error::{invalid, Error, Result};
use crate::rng::AuditRng;
use crate::types::SampleBatch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// Maximize `R^{h,n}_alpha` over a pair of batches.
    EmpiricalRenyi { alpha: f64 },
    /// Minimize mean logistic loss on a labeled batch (maximize its negation).
    LogisticLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub objective: Objective,
    pub method: Method,
}

impl OptimizerConfig {
    pub fn renyi(alpha: f64) -> Self {
        OptimizerConfig {
            epochs: 5,
            batch_size: 256,
            step_size: 0.01,
            objective: Objective::EmpiricalRenyi { alpha },
            method: Method::Sgd,
        }
    }

    /// Adam rather than plain SGD: the logit is `20 tanh(f)`, which makes fixed
    /// SGD steps either too timid or unstable on weak signals.
    pub fn logistic() -> Self {
        OptimizerConfig {
            epochs: 30,
            batch_size: 256,
            step_size: 0.001,
            objective: Objective::LogisticLoss,
            method: Method::Adam,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return invalid("epochs and batch size must be positive");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return invalid(format!("step size {} must be positive", self.step_size));
        }
        if let Objective::EmpiricalRenyi { alpha } = self.objective {
            if !(alpha > 1.0 && alpha.is_finite()) {
                return invalid(format!("alpha must exceed 1, got {alpha}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum TrainingData<'a> {
    Pair {
        x0: &'a SampleBatch,
        x1: &'a SampleBatch,
    },
    Labeled {
        x: &'a SampleBatch,
        labels: &'a [bool],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub initial: f64,
    pub best: f64,
    /// Full-batch objective after each epoch.
    pub epoch_values: Vec<f64>,
    /// 0 means the initial parameters were never improved on.
    pub best_epoch: usize,
}

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `(max h, log mean exp(c (h - max h)))` for `c > 0`.
fn log_mean_exp_shifted(h: &[f64], c: f64, n: f64) -> (f64, f64) {
    let m = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = h.iter().map(|x| (c * (x - m)).exp()).sum();
    (m, (s / n).ln())
}

/// Softmax weights of `v`, written in place.
fn softmax(v: &mut [f64]) {
    let lse = logsumexp(v);
    for x in v.iter_mut() {
        *x = (*x - lse).exp();
    }
}

/// `R^{h,n}_alpha` on scaled inputs, optionally adding its gradient into `grad`.
fn renyi_core(
    model: &BoundedModel,
    z0: &[f64],
    z1: &[f64],
    alpha: f64,
    grad: Option<&mut [f64]>,
    ws: &mut Workspace,
) -> f64 {
    let d = model.input_dim();
    let eval = |z: &[f64], ws: &mut Workspace| -> (Vec<f64>, Vec<f64>) {
        z.chunks_exact(d)
            .map(|p| squash(model.bound(), model.raw(p, ws)))
            .unzip()
    };
    let (h0, dh0) = eval(z0, ws);
    let (h1, dh1) = eval(z1, ws);
    let (n0, n1) = (h0.len() as f64, h1.len() as f64);
    let mut a: Vec<f64> = h0.iter().map(|h| (alpha - 1.0) * h).collect();
    let mut b: Vec<f64> = h1.iter().map(|h| alpha * h).collect();
    // max(h) is pulled out before scaling so a constant witness scores exactly 0
    let (m0, r0) = log_mean_exp_shifted(&h0, alpha - 1.0, n0);
    let (m1, r1) = log_mean_exp_shifted(&h1, alpha, n1);
    let value = alpha * (m0 - m1) + alpha / (alpha - 1.0) * r0 - r1;
    if let Some(g) = grad {
        softmax(&mut a);
        softmax(&mut b);
        for (i, p) in z0.chunks_exact(d).enumerate() {
            let c = alpha * a[i] * dh0[i];
            if c != 0.0 {
                model.accumulate_grad(p, ws, g, |_| c);
            }
        }
        for (j, p) in z1.chunks_exact(d).enumerate() {
            let c = -alpha * b[j] * dh1[j];
            if c != 0.0 {
                model.accumulate_grad(p, ws, g, |_| c);
            }
        }
    }
    value
}

fn sigmoid(f: f64) -> f64 {
    1.0 / (1.0 + (-f).exp())
}

fn softplus(f: f64) -> f64 {
    if f > 0.0 {
        f + (-f).exp().ln_1p()
    } else {
        f.exp().ln_1p()
    }
}

/// Negative mean logistic loss of `sigmoid(h)` predicting the label.
fn logistic_core(
    model: &BoundedModel,
    z: &[f64],
    labels: &[bool],
    mut grad: Option<&mut [f64]>,
    ws: &mut Workspace,
) -> f64 {
    let d = model.input_dim();
    let c = model.bound();
    let n = labels.len() as f64;
    let mut loss = 0.0;
    for (p, &y) in z.chunks_exact(d).zip(labels) {
        let yv = if y { 1.0 } else { 0.0 };
        let f = match grad.as_deref_mut() {
            Some(g) => model.accumulate_grad(p, ws, g, |f| {
                let (h, dh) = squash(c, f);
                -(sigmoid(h) - yv) * dh / n
            }),
            None => model.raw(p, ws),
        };
        let h = squash(c, f).0;
        loss += softplus(h) - yv * h;
    }
    -loss / n
}

fn check_pair(x0: &SampleBatch, x1: &SampleBatch, model: &BoundedModel) -> Result<()> {
    if x0.is_empty() || x1.is_empty() {
        return invalid("both batches must be non-empty");
    }
    if x0.dim() != model.input_dim() || x1.dim() != model.input_dim() {
        return invalid("batch dimension does not match the model");
    }
    Ok(())
}

/// Full-batch empirical Renyi objective and its gradient.
pub fn renyi_objective(
    model: &BoundedModel,
    x0: &SampleBatch,
    x1: &SampleBatch,
    alpha: f64,
) -> Result<(f64, Vec<f64>)> {
    check_pair(x0, x1, model)?;
    let (z0, z1) = (model.scale_batch(x0)?, model.scale_batch(x1)?);
    let mut g = vec![0.0; model.n_params()];
    let v = renyi_core(model, &z0, &z1, alpha, Some(&mut g), &mut Workspace::default());
    Ok((v, g))
}

/// Full-batch negative logistic loss and its gradient.
pub fn logistic_objective(
    model: &BoundedModel,
    x: &SampleBatch,
    labels: &[bool],
) -> Result<(f64, Vec<f64>)> {
    if x.len() != labels.len() || x.is_empty() {
        return invalid("labeled batch must be non-empty with one label per point");
    }
    let z = model.scale_batch(x)?;
    let mut g = vec![0.0; model.n_params()];
    let v = logistic_core(model, &z, labels, Some(&mut g), &mut Workspace::default());
    Ok((v, g))
}

pub fn objective_value(
    model: &BoundedModel,
    objective: Objective,
    data: TrainingData<'_>,
) -> Result<f64> {
    let mut ws = Workspace::default();
    match (objective, data) {
        (Objective::EmpiricalRenyi { alpha }, TrainingData::Pair { x0, x1 }) => {
            check_pair(x0, x1, model)?;
            let (z0, z1) = (model.scale_batch(x0)?, model.scale_batch(x1)?);
            Ok(renyi_core(model, &z0, &z1, alpha, None, &mut ws))
        }
        (Objective::LogisticLoss, TrainingData::Labeled { x, labels }) => {
            let z = model.scale_batch(x)?;
            Ok(logistic_core(model, &z, labels, None, &mut ws))
        }
        _ => invalid("objective does not match the training data"),
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Ascent step along `g`.
    fn step(&mut self, params: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            params[i] += lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

fn gather(z: &[f64], d: usize, idx: impl Iterator<Item = usize>, out: &mut Vec<f64>) {
    out.clear();
    for i in idx {
        out.extend_from_slice(&z[i * d..(i + 1) * d]);
    }
}

/// Mini-batch gradient ascent on `objective`; leaves the best full-batch
/// parameters (initial ones included) in `model`.
pub fn maximize(
    model: &mut BoundedModel,
    data: TrainingData<'_>,
    cfg: &OptimizerConfig,
    rng: &mut AuditRng,
) -> Result<FitSummary> {
    cfg.validate()?;
    let d = model.input_dim();
    let mut ws = Workspace::default();
    let (za, zb, labels): (Vec<f64>, Vec<f64>, Option<&[bool]>) = match (cfg.objective, data) {
        (Objective::EmpiricalRenyi { .. }, TrainingData::Pair { x0, x1 }) => {
            check_pair(x0, x1, model)?;
            (model.scale_batch(x0)?, model.scale_batch(x1)?, None)
        }
        (Objective::LogisticLoss, TrainingData::Labeled { x, labels }) => {
            if x.len() != labels.len() || x.is_empty() {
                return invalid("labeled batch must be non-empty with one label per point");
            }
            (model.scale_batch(x)?, Vec::new(), Some(labels))
        }
        _ => return invalid("objective does not match the training data"),
    };
    let full = |m: &BoundedModel, ws: &mut Workspace| -> Result<f64> {
        let v = match (cfg.objective, labels) {
            (Objective::EmpiricalRenyi { alpha }, _) => renyi_core(m, &za, &zb, alpha, None, ws),
            (_, Some(l)) => logistic_core(m, &za, l, None, ws),
            _ => unreachable!("checked above"),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("training objective became {v}")))
        }
    };
    let initial = full(model, &mut ws)?;
    let mut best = (initial, model.params().to_vec(), 0);
    let mut epoch_values = Vec::with_capacity(cfg.epochs);

    let na = za.len() / d;
    let nb = zb.len() / d;
    let mut perm_a: Vec<usize> = (0..na).collect();
    let mut perm_b: Vec<usize> = (0..nb).collect();
    let bs = cfg.batch_size;
    let steps = na.max(nb).div_ceil(bs);
    let mut params = model.params().to_vec();
    let mut grad = vec![0.0; params.len()];
    let mut adam = Adam::new(params.len());
    let (mut ba, mut bb, mut bl) = (Vec::new(), Vec::new(), Vec::new());

    for epoch in 1..=cfg.epochs {
        perm_a.shuffle(rng);
        perm_b.shuffle(rng);
        for k in 0..steps {
            let start = k * bs;
            grad.iter_mut().for_each(|g| *g = 0.0);
            let v = match (cfg.objective, labels) {
                (Objective::EmpiricalRenyi { alpha }, _) => {
                    gather(&za, d, (0..bs.min(na)).map(|i| perm_a[(start + i) % na]), &mut ba);
                    gather(&zb, d, (0..bs.min(nb)).map(|i| perm_b[(start + i) % nb]), &mut bb);
                    renyi_core(model, &ba, &bb, alpha, Some(&mut grad), &mut ws)
                }
                (_, Some(l)) => {
                    let end = (start + bs).min(na);
                    gather(&za, d, perm_a[start..end].iter().copied(), &mut ba);
                    bl.clear();
                    bl.extend(perm_a[start..end].iter().map(|&i| l[i]));
                    logistic_core(model, &ba, &bl, Some(&mut grad), &mut ws)
                }
                _ => unreachable!("checked above"),
            };
            if !v.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "objective {v} at epoch {epoch}, step {k}"
                )));
            }
            match cfg.method {
                Method::Sgd => {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p += cfg.step_size * g;
                    }
                }
                Method::Adam => adam.step(&mut params, &grad, cfg.step_size),
            }
            model.set_params(&params)?;
        }
        let v = full(model, &mut ws)?;
        epoch_values.push(v);
        if v > best.0 {
            best = (v, params.clone(), epoch);
        }
    }
    model.set_params(&best.1)?;
    Ok(FitSummary {
        initial,
        best: best.0,
        epoch_values,
        best_epoch: best.2,
    })
}
