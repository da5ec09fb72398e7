use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::finders::{check_t, History, SearchSpace};
use crate::rng::derive_rng;
use crate::runner::Finder;
use crate::types::Dataset;

pub const LENGTH_SCALE: f64 = 0.2;
pub const NOISE: f64 = 1e-4;
pub const UCB_COEFFICIENT: f64 = 2.0;
pub const CANDIDATES: usize = 64;
/// Trials proposed uniformly before the first fit.
pub const WARMUP: usize = 3;

fn rbf(a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / (2.0 * LENGTH_SCALE * LENGTH_SCALE)).exp()
}

/// Exact GP regression on normalized encodings with standardized targets.
pub struct GpPosterior {
    points: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    weights: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
}

impl GpPosterior {
    pub fn fit(points: Vec<Vec<f64>>, values: &[f64]) -> Result<Self> {
        let n = points.len();
        if n == 0 || n != values.len() {
            return Err(Error::InvalidInput("GP needs matching, non-empty data".into()));
        }
        let y_mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let k = DMatrix::from_fn(n, n, |i, j| {
            rbf(&points[i], &points[j]) + if i == j { NOISE } else { 0.0 }
        });
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::NonFinite("GP kernel matrix is not positive definite".into()))?;
        let y = DVector::from_iterator(n, values.iter().map(|v| (v - y_mean) / y_scale));
        let weights = chol.solve(&y);
        Ok(GpPosterior {
            points,
            chol,
            weights,
            y_mean,
            y_scale,
        })
    }

    /// Posterior mean and standard deviation at a normalized encoding, in target units.
    pub fn predict(&self, z: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(self.points.len(), self.points.iter().map(|p| rbf(p, z)));
        let mean = ks.dot(&self.weights);
        let v = self.chol.solve(&ks);
        let var = (1.0 - ks.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }

    pub fn ucb(&self, z: &[f64]) -> f64 {
        let (m, s) = self.predict(z);
        m + UCB_COEFFICIENT * s
    }
}

/// Uniform warm-up, then the UCB maximizer over a fresh candidate pool.
pub struct GpBanditFinder {
    space: SearchSpace,
    seed: u64,
    history: History,
}

impl GpBanditFinder {
    pub fn new(space: SearchSpace, seed: u64) -> Self {
        GpBanditFinder {
            space,
            seed,
            history: History::default(),
        }
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    fn posterior(&self) -> Result<Option<GpPosterior>> {
        if self.history.is_empty() {
            return Ok(None);
        }
        let pts = self.history.encodings().map(|e| self.space.normalize(e)).collect();
        let vals: Vec<f64> = self.history.values().collect();
        GpPosterior::fit(pts, &vals).map(Some)
    }

    /// UCB score of encoding `e` under the current history.
    pub fn acquisition(&self, e: &[f64]) -> Result<f64> {
        match self.posterior()? {
            Some(gp) => Ok(gp.ucb(&self.space.normalize(e))),
            None => Ok(UCB_COEFFICIENT),
        }
    }

    fn next_encoding(&self, t: usize) -> Result<Vec<f64>> {
        if t <= WARMUP || self.history.is_empty() {
            return Ok(self
                .space
                .uniform(&mut derive_rng(self.seed, &[("gp_warmup", t as u64)])));
        }
        let gp = self.posterior()?.expect("history is non-empty");
        let mut rng = derive_rng(self.seed, &[("gp_candidates", t as u64)]);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..CANDIDATES {
            let e = self.space.uniform(&mut rng);
            let score = gp.ucb(&self.space.normalize(&e));
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, e));
            }
        }
        Ok(best.expect("candidate pool is non-empty").1)
    }
}

impl Finder for GpBanditFinder {
    fn name(&self) -> &'static str {
        "gp_bandit"
    }

    fn propose(&mut self, t: usize) -> Result<(Dataset, Dataset)> {
        check_t(t)?;
        let e = self.next_encoding(t)?;
        let pair = self.space.decode(&e)?;
        self.history.set_pending(t, e);
        Ok(pair)
    }

    fn observe(&mut self, t: usize, value: f64) -> Result<()> {
        self.history.record(t, value)
    }
}
