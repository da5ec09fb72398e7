//! Bounded function classes `|h| < C` and the optimizer that fits them.

mod optim;
mod scaler;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::AuditRng;
use crate::types::SampleBatch;

pub use optim::{
    logistic_objective, maximize, objective_value, renyi_objective, FitSummary, Method, Objective,
    OptimizerConfig, TrainingData,
};
pub use scaler::{Scaler, DEFAULT_QUANTILE_REFS};

pub const DEFAULT_HIDDEN: [usize; 2] = [32, 32];
pub const DEFAULT_DEGREE: usize = 10;

/// Beyond this, `tanh` rounds to 1 and the bound would no longer be strict.
const SQUASH_LIMIT: f64 = 18.0;

/// `(C tanh(f), d/df)` with `f` clamped so that `|h| < C` holds in floating point.
pub fn squash(bound: f64, f: f64) -> (f64, f64) {
    if f.abs() >= SQUASH_LIMIT {
        (bound * SQUASH_LIMIT.copysign(f).tanh(), 0.0)
    } else {
        let t = f.tanh();
        (bound * t, bound * (1.0 - t * t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    DenseNet { hidden: Vec<usize> },
    Chebyshev { degree: usize },
}

impl ModelKind {
    pub fn dense_default() -> Self {
        ModelKind::DenseNet {
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }

    pub fn chebyshev_default() -> Self {
        ModelKind::Chebyshev {
            degree: DEFAULT_DEGREE,
        }
    }
}

/// Hidden-layer `tanh` via one `exp`; absolute error stays near `1e-16`.
#[inline]
fn tanh(x: f64) -> f64 {
    if x.abs() > 20.0 {
        return x.signum();
    }
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `h(x) = C * tanh(f(scale(x)))` with `f` a small network or a Chebyshev sum.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedModel {
    kind: ModelKind,
    bound: f64,
    input_dim: usize,
    scaler: Scaler,
    params: Vec<f64>,
    /// layer widths including input and the scalar output
    widths: Vec<usize>,
}

/// Scratch buffers reused across evaluations.
#[derive(Debug, Default)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl BoundedModel {
    pub fn new(kind: ModelKind, bound: f64, input_dim: usize, scaler: Scaler) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return invalid(format!("bound C must be positive, got {bound}"));
        }
        if input_dim == 0 {
            return invalid("input dimension must be positive");
        }
        if scaler.dim().is_some_and(|d| d != input_dim) {
            return invalid("scaler dimension does not match the model input");
        }
        let widths = match &kind {
            ModelKind::DenseNet { hidden } => {
                if hidden.contains(&0) {
                    return invalid("hidden layers must be non-empty");
                }
                let mut w = vec![input_dim];
                w.extend(hidden);
                w.push(1);
                w
            }
            ModelKind::Chebyshev { .. } if input_dim != 1 => {
                return invalid("Chebyshev model supports one-dimensional inputs only");
            }
            ModelKind::Chebyshev { degree } => vec![degree + 1],
        };
        let n = match &kind {
            ModelKind::DenseNet { .. } => widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum(),
            ModelKind::Chebyshev { degree } => degree + 1,
        };
        Ok(BoundedModel {
            kind,
            bound,
            input_dim,
            scaler,
            params: vec![0.0; n],
            widths,
        })
    }

    /// Glorot-uniform weights for networks; Chebyshev weights stay at zero.
    pub fn init_random(&mut self, rng: &mut AuditRng) {
        if let ModelKind::DenseNet { .. } = self.kind {
            let mut off = 0;
            for w in self.widths.windows(2) {
                let (fan_in, fan_out) = (w[0], w[1]);
                let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for p in &mut self.params[off..off + fan_in * fan_out] {
                    *p = rng.gen_range(-lim..lim);
                }
                off += fan_out * (fan_in + 1);
            }
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.params.len() {
            return invalid(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                p.len()
            ));
        }
        self.params.copy_from_slice(p);
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return invalid(format!(
                "input has dimension {}, model expects {}",
                x.len(),
                self.input_dim
            ));
        }
        let mut z = x.to_vec();
        self.scaler.apply(&mut z);
        Ok(squash(self.bound, self.raw(&z, &mut Workspace::default())).0)
    }

    /// Scaled copy of a whole batch, flat row-major.
    pub fn scale_batch(&self, b: &SampleBatch) -> Result<Vec<f64>> {
        if b.dim() != self.input_dim {
            return invalid(format!(
                "batch has dimension {}, model expects {}",
                b.dim(),
                self.input_dim
            ));
        }
        let mut z = b.as_flat().to_vec();
        for row in z.chunks_exact_mut(self.input_dim) {
            self.scaler.apply(row);
        }
        Ok(z)
    }

    /// Pre-squash output `f(z)` on an already scaled input.
    pub fn raw(&self, z: &[f64], ws: &mut Workspace) -> f64 {
        match self.kind {
            ModelKind::Chebyshev { .. } => {
                let t = z[0].clamp(-1.0, 1.0);
                let (mut prev, mut cur) = (1.0, t);
                let mut s = self.params[0];
                for (j, w) in self.params.iter().enumerate().skip(1) {
                    if j > 1 {
                        let next = 2.0 * t * cur - prev;
                        prev = cur;
                        cur = next;
                    }
                    s += w * cur;
                }
                s
            }
            ModelKind::DenseNet { .. } => self.forward(z, ws),
        }
    }

    /// `h = C tanh(f)` on a scaled input.
    pub fn h_scaled(&self, z: &[f64], ws: &mut Workspace) -> f64 {
        squash(self.bound, self.raw(z, ws)).0
    }

    fn forward(&self, z: &[f64], ws: &mut Workspace) -> f64 {
        let layers = self.widths.len() - 1;
        if ws.acts.len() != layers + 1 {
            ws.acts = self.widths.iter().map(|&w| vec![0.0; w]).collect();
            ws.deltas = self.widths.iter().map(|&w| vec![0.0; w]).collect();
        }
        ws.acts[0].copy_from_slice(z);
        let mut off = 0;
        for l in 0..layers {
            let (nin, nout) = (self.widths[l], self.widths[l + 1]);
            let (w, rest) = self.params[off..].split_at(nin * nout);
            let b = &rest[..nout];
            let (prev, next) = ws.acts.split_at_mut(l + 1);
            let a_in = &prev[l];
            let a_out = &mut next[0];
            for o in 0..nout {
                let s = b[o] + dot(&w[o * nin..(o + 1) * nin], a_in);
                a_out[o] = if l + 1 < layers { tanh(s) } else { s };
            }
            off += nout * (nin + 1);
        }
        ws.acts[layers][0]
    }

    /// Adds `upstream(f) * df/dtheta` into `grad`; returns `f`.
    pub fn accumulate_grad(
        &self,
        z: &[f64],
        ws: &mut Workspace,
        grad: &mut [f64],
        upstream: impl Fn(f64) -> f64,
    ) -> f64 {
        match self.kind {
            ModelKind::Chebyshev { .. } => {
                let f = self.raw(z, ws);
                let u = upstream(f);
                let t = z[0].clamp(-1.0, 1.0);
                let (mut prev, mut cur) = (1.0, t);
                grad[0] += u;
                for (j, g) in grad.iter_mut().enumerate().skip(1) {
                    if j > 1 {
                        let next = 2.0 * t * cur - prev;
                        prev = cur;
                        cur = next;
                    }
                    *g += u * cur;
                }
                f
            }
            ModelKind::DenseNet { .. } => {
                let f = self.forward(z, ws);
                let layers = self.widths.len() - 1;
                ws.deltas[layers][0] = upstream(f);
                let mut end = self.params.len();
                for l in (0..layers).rev() {
                    let (nin, nout) = (self.widths[l], self.widths[l + 1]);
                    let o0 = end - nout * (nin + 1);
                    end = o0;
                    let (dl, dnext) = ws.deltas.split_at_mut(l + 1);
                    let d_out = &dnext[0];
                    let a_in = &ws.acts[l];
                    let w = &self.params[o0..o0 + nin * nout];
                    let d_in = &mut dl[l];
                    if l > 0 {
                        d_in.fill(0.0);
                    }
                    for o in 0..nout {
                        let d = d_out[o];
                        let gw = &mut grad[o0 + o * nin..o0 + (o + 1) * nin];
                        for (g, a) in gw.iter_mut().zip(a_in) {
                            *g += d * a;
                        }
                        grad[o0 + nin * nout + o] += d;
                        if l > 0 {
                            for (di, wi) in d_in.iter_mut().zip(&w[o * nin..(o + 1) * nin]) {
                                *di += wi * d;
                            }
                        }
                    }
                    if l > 0 {
                        for (di, a) in d_in.iter_mut().zip(a_in) {
                            *di *= 1.0 - a * a;
                        }
                    }
                }
                f
            }
        }
    }
}
