//! Reference divergences for analytically tractable distribution pairs.
//!
//! These are exact sums or tight quadratures, independent of the sample-based
//! estimators, and serve as ground truth in tests and the `oracle` command.

mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{mmd_transform, GaussianKernel};

pub use quadrature::{integrate, DEFAULT_RTOL};

/// Half-width, in scale units, of the Renyi integration window.
pub const RENYI_WINDOW: f64 = 12.0;
/// Wider window for hockey-stick and kernel integrals, where the positive set
/// may be unbounded and truncation at 12 units would cost about `1e-6`.
pub const TAIL_WINDOW: f64 = 40.0;
const CROSSING_GRID: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticDistribution {
    Laplace { mu: f64, b: f64 },
    Gaussian { mu: f64, sigma: f64 },
    Discrete { support: Vec<f64>, probs: Vec<f64> },
}

use AnalyticDistribution::{Discrete, Gaussian, Laplace};

impl AnalyticDistribution {
    pub fn laplace(mu: f64, b: f64) -> Result<Self> {
        let d = Laplace { mu, b };
        d.validate()?;
        Ok(d)
    }

    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        let d = Gaussian { mu, sigma };
        d.validate()?;
        Ok(d)
    }

    pub fn discrete(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let d = Discrete { support, probs };
        d.validate()?;
        Ok(d)
    }

    pub fn point_mass(x: f64) -> Self {
        Discrete {
            support: vec![x],
            probs: vec![1.0],
        }
    }

    /// Probability vector on the support `0, 1, ..., k-1`.
    pub fn categorical(probs: Vec<f64>) -> Result<Self> {
        Self::discrete((0..probs.len()).map(|i| i as f64).collect(), probs)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Laplace { mu, b } => {
                if !(mu.is_finite() && *b > 0.0 && b.is_finite()) {
                    return invalid(format!("Laplace({mu}, {b}) needs finite mu and b > 0"));
                }
            }
            Gaussian { mu, sigma } => {
                if !(mu.is_finite() && *sigma > 0.0 && sigma.is_finite()) {
                    return invalid(format!("Gaussian({mu}, {sigma}) needs finite mu and sigma > 0"));
                }
            }
            Discrete { support, probs } => {
                if support.is_empty() || support.len() != probs.len() {
                    return invalid("discrete support and probabilities must be non-empty and equally long");
                }
                if support.iter().any(|x| !x.is_finite()) {
                    return invalid("discrete support must be finite");
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    return invalid("discrete probabilities must be non-negative");
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return invalid(format!("discrete probabilities sum to {s}, not 1"));
                }
            }
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Discrete { .. })
    }

    /// Merged, sorted atoms with positive mass.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let Discrete { support, probs } = self else {
            return Vec::new();
        };
        let mut a: Vec<(f64, f64)> = support
            .iter()
            .zip(probs)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&x, &p)| (x, p))
            .collect();
        a.sort_by(|u, v| u.0.total_cmp(&v.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(a.len());
        for (x, p) in a {
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 += p,
                _ => out.push((x, p)),
            }
        }
        out
    }

    /// Probability of the single point `x`.
    pub fn mass_at(&self, x: f64) -> f64 {
        self.atoms()
            .iter()
            .find(|(y, _)| *y == x)
            .map_or(0.0, |(_, p)| *p)
    }

    fn center(&self) -> f64 {
        match self {
            Laplace { mu, .. } | Gaussian { mu, .. } => *mu,
            Discrete { .. } => 0.0,
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Laplace { b, .. } => *b,
            Gaussian { sigma, .. } => *sigma,
            Discrete { .. } => 0.0,
        }
    }

    /// Log density of a continuous distribution.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            Laplace { mu, b } => -(x - mu).abs() / b - (2.0 * b).ln(),
            Gaussian { mu, sigma } => {
                let z = (x - mu) / sigma;
                -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            Discrete { .. } => f64::NEG_INFINITY,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Laplace { mu, b } => {
                if x < *mu {
                    0.5 * ((x - mu) / b).exp()
                } else {
                    1.0 - 0.5 * (-(x - mu) / b).exp()
                }
            }
            Gaussian { mu, sigma } => {
                0.5 * libm::erfc(-(x - mu) / (sigma * std::f64::consts::SQRT_2))
            }
            Discrete { .. } => self
                .atoms()
                .iter()
                .filter(|(y, _)| *y <= x)
                .map(|(_, p)| p)
                .sum(),
        }
    }

    /// `P(a < X <= b)`, computed from whichever tail is smaller.
    fn interval(&self, a: f64, b: f64) -> f64 {
        let upper = |x: f64| match self {
            Laplace { .. } | Gaussian { .. } => {
                let m = self.center();
                if x >= m {
                    self.survival(x)
                } else {
                    1.0 - self.cdf(x)
                }
            }
            Discrete { .. } => 1.0 - self.cdf(x),
        };
        if b <= self.center() {
            self.cdf(b) - self.cdf(a)
        } else {
            upper(a) - upper(b)
        }
    }

    fn survival(&self, x: f64) -> f64 {
        match self {
            Laplace { mu, b } if x >= *mu => 0.5 * (-(x - mu) / b).exp(),
            Gaussian { mu, sigma } => 0.5 * libm::erfc((x - mu) / (sigma * std::f64::consts::SQRT_2)),
            _ => 1.0 - self.cdf(x),
        }
    }
}

fn window(p: &AnalyticDistribution, q: &AnalyticDistribution, units: f64) -> (f64, f64) {
    let s = p.scale().max(q.scale());
    let lo = p.center().min(q.center()) - units * s;
    let hi = p.center().max(q.center()) + units * s;
    (lo, hi)
}

fn support_violation() -> Error {
    Error::InvalidInput("support violation: Q does not cover P".into())
}

/// `D_alpha(P || Q) = log(int p^alpha q^{1-alpha}) / (alpha - 1)`.
pub fn renyi_oracle(p: &AnalyticDistribution, q: &AnalyticDistribution, alpha: f64) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    if !(alpha > 1.0 && alpha.is_finite()) {
        return invalid(format!("alpha must exceed 1, got {alpha}"));
    }
    let s = match (p.is_discrete(), q.is_discrete()) {
        (true, true) => {
            let mut s = 0.0;
            for (x, px) in p.atoms() {
                let qx = q.mass_at(x);
                if qx == 0.0 {
                    return Err(support_violation());
                }
                s += px.powf(alpha) * qx.powf(1.0 - alpha);
            }
            s
        }
        (false, false) => {
            let (lo, hi) = window(p, q, RENYI_WINDOW);
            let f = |x: f64| (alpha * p.ln_pdf(x) + (1.0 - alpha) * q.ln_pdf(x)).exp();
            integrate(&f, lo, hi, &[p.center(), q.center()], DEFAULT_RTOL)?
        }
        _ => return Err(support_violation()),
    };
    Ok(s.ln() / (alpha - 1.0))
}

/// Breakpoints of `{ln p - ln q > eps}` inside `[lo, hi]`.
fn crossings(p: &AnalyticDistribution, q: &AnalyticDistribution, eps: f64, lo: f64, hi: f64) -> Vec<f64> {
    let g = |x: f64| p.ln_pdf(x) - q.ln_pdf(x) - eps;
    let mut out = Vec::new();
    let step = (hi - lo) / CROSSING_GRID as f64;
    let mut a = lo;
    let mut ga = g(a);
    for i in 1..=CROSSING_GRID {
        let b = lo + step * i as f64;
        let gb = g(b);
        if (ga > 0.0) != (gb > 0.0) {
            let (mut l, mut r) = (a, b);
            let pos_left = ga > 0.0;
            for _ in 0..200 {
                let m = 0.5 * (l + r);
                if m <= l || m >= r {
                    break;
                }
                if (g(m) > 0.0) == pos_left {
                    l = m;
                } else {
                    r = m;
                }
            }
            out.push(0.5 * (l + r));
        }
        a = b;
        ga = gb;
    }
    out
}

/// Interval endpoints splitting the real line at the crossings and both means.
fn partition(p: &AnalyticDistribution, q: &AnalyticDistribution, eps: f64) -> Vec<f64> {
    let (lo, hi) = window(p, q, TAIL_WINDOW);
    let mut pts = crossings(p, q, eps, lo, hi);
    pts.extend([lo, hi, p.center(), q.center()]);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `H_eps(P || Q) = E_Q[max(0, dP/dQ - e^eps)]`, summed or integrated directly.
pub fn hockey_stick_oracle(p: &AnalyticDistribution, q: &AnalyticDistribution, eps: f64) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return invalid(format!("epsilon must be non-negative, got {eps}"));
    }
    let w = eps.exp();
    match (p.is_discrete(), q.is_discrete()) {
        (true, true) => {
            let mut xs: Vec<f64> = p.atoms().iter().chain(q.atoms().iter()).map(|a| a.0).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            Ok(xs
                .iter()
                .map(|&x| (p.mass_at(x) - w * q.mass_at(x)).max(0.0))
                .sum())
        }
        (false, false) => {
            let pts = partition(p, q, eps);
            let f = |x: f64| (p.pdf(x) - w * q.pdf(x)).max(0.0);
            let mut total = 0.0;
            for seg in pts.windows(2) {
                total += integrate(&f, seg[0], seg[1], &[], DEFAULT_RTOL * 1e-3)?;
            }
            Ok(total)
        }
        // mutually singular parts: the atoms (or their complement) form a set with Q-mass 0
        _ => Ok(1.0),
    }
}

/// `P(A) - e^eps Q(A)` with `A = {dP/dQ > e^eps}`, the maximizing event.
pub fn hockey_stick_dual(p: &AnalyticDistribution, q: &AnalyticDistribution, eps: f64) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return invalid(format!("epsilon must be non-negative, got {eps}"));
    }
    let w = eps.exp();
    match (p.is_discrete(), q.is_discrete()) {
        (true, true) => {
            let (mut pa, mut qa) = (0.0, 0.0);
            for (x, px) in p.atoms() {
                let qx = q.mass_at(x);
                if px > w * qx {
                    pa += px;
                    qa += qx;
                }
            }
            Ok(pa - w * qa)
        }
        (false, false) => {
            let pts = partition(p, q, eps);
            let n = pts.len();
            let (mut pa, mut qa) = (0.0, 0.0);
            let mut add = |a: f64, b: f64| {
                pa += p.interval(a, b);
                qa += q.interval(a, b);
            };
            let inside = |x: f64| p.ln_pdf(x) - q.ln_pdf(x) > eps;
            if inside(pts[0] - 1.0) {
                add(f64::NEG_INFINITY, pts[0]);
            }
            for seg in pts.windows(2) {
                if inside(0.5 * (seg[0] + seg[1])) {
                    add(seg[0], seg[1]);
                }
            }
            if inside(pts[n - 1] + 1.0) {
                add(pts[n - 1], f64::INFINITY);
            }
            Ok(pa - w * qa)
        }
        _ => Ok(1.0),
    }
}

/// Gaussian components `(weight, mean, sd)`; atoms have `sd = 0`.
fn gaussian_components(d: &AnalyticDistribution) -> Option<Vec<(f64, f64, f64)>> {
    match d {
        Gaussian { mu, sigma } => Some(vec![(1.0, *mu, *sigma)]),
        Discrete { .. } => Some(d.atoms().into_iter().map(|(x, p)| (p, x, 0.0)).collect()),
        Laplace { .. } => None,
    }
}

/// `E k(x, Y)` for a fixed point `x`.
fn kernel_mean_at(x: f64, y: &AnalyticDistribution, h: f64) -> Result<f64> {
    match gaussian_components(y) {
        Some(c) => Ok(c
            .iter()
            .map(|&(w, m, s)| {
                let v = h * h + s * s;
                w * h / v.sqrt() * (-(x - m).powi(2) / (2.0 * v)).exp()
            })
            .sum()),
        None => {
            let (lo, hi) = window(y, y, TAIL_WINDOW);
            let f = |t: f64| y.pdf(t) * (-(x - t).powi(2) / (2.0 * h * h)).exp();
            integrate(&f, lo, hi, &[y.center(), x], DEFAULT_RTOL * 1e-2)
        }
    }
}

/// `E k(X, Y)` for independent `X ~ a`, `Y ~ b`.
fn kernel_mean(a: &AnalyticDistribution, b: &AnalyticDistribution, h: f64) -> Result<f64> {
    if let (Some(ca), Some(cb)) = (gaussian_components(a), gaussian_components(b)) {
        let mut s = 0.0;
        for &(wa, ma, sa) in &ca {
            for &(wb, mb, sb) in &cb {
                let v = h * h + sa * sa + sb * sb;
                s += wa * wb * h / v.sqrt() * (-(ma - mb).powi(2) / (2.0 * v)).exp();
            }
        }
        return Ok(s);
    }
    // keep the Laplace side inside so the closed form serves the outer side when possible
    let (outer, inner) = if matches!(a, Laplace { .. }) && !matches!(b, Laplace { .. }) {
        (b, a)
    } else {
        (a, b)
    };
    if outer.is_discrete() {
        let mut s = 0.0;
        for (x, p) in outer.atoms() {
            s += p * kernel_mean_at(x, inner, h)?;
        }
        return Ok(s);
    }
    let (lo, hi) = window(outer, outer, TAIL_WINDOW);
    let mut err = None;
    let f = |x: f64| match kernel_mean_at(x, inner, h) {
        Ok(v) => outer.pdf(x) * v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let f = std::cell::RefCell::new(f);
    let v = integrate(&|x| (f.borrow_mut())(x), lo, hi, &[outer.center(), inner.center()], DEFAULT_RTOL)?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `MMD^2 = E k(X,X') - 2 E k(X,Y) + E k(Y,Y')` under a Gaussian kernel.
pub fn mmd_squared(p: &AnalyticDistribution, q: &AnalyticDistribution, kernel: &GaussianKernel) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    let h = GaussianKernel::new(kernel.bandwidth)?.bandwidth;
    Ok(kernel_mean(p, p, h)? - 2.0 * kernel_mean(p, q, h)? + kernel_mean(q, q, h)?)
}

pub fn mmd_oracle(p: &AnalyticDistribution, q: &AnalyticDistribution, kernel: &GaussianKernel) -> Result<f64> {
    Ok(mmd_squared(p, q, kernel)?.max(0.0).sqrt())
}

/// Ceiling `e^eps - 1 + (1 + e^-eps) delta` on the MMD of an `(eps, delta)`-DP pair.
pub fn dp_bound_check(eps: f64, delta: f64) -> f64 {
    eps.exp() - 1.0 + (1.0 + (-eps).exp()) * delta
}

/// The value the MMD tester converges to as `n` grows: its `delta` transform
/// applied to the exact `MMD^2`.
pub fn mmd_implied_delta(
    p: &AnalyticDistribution,
    q: &AnalyticDistribution,
    kernel: &GaussianKernel,
    eps: f64,
) -> Result<f64> {
    let m = mmd_squared(p, q, kernel)?;
    Ok(mmd_transform(m - (eps.exp() - 1.0).powi(2), eps))
}
