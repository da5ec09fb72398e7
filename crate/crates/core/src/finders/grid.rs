use crate::error::{invalid, Result};
use crate::finders::{check_t, History, SearchSpace};
use crate::runner::Finder;
use crate::types::Dataset;

/// Row-major walk over an axis-aligned lattice on `[lo, hi]^{L+1}`.
#[derive(Debug, Clone)]
pub struct GridFinder {
    space: SearchSpace,
    resolution: usize,
    total: u128,
    history: History,
}

impl GridFinder {
    /// Smallest resolution `r >= 2` whose lattice has at least `trials` points.
    pub fn new(space: SearchSpace, trials: usize) -> Result<Self> {
        let dim = space.dim() as u32;
        let mut r = 2usize;
        while (r as u128).saturating_pow(dim) < trials as u128 {
            r += 1;
        }
        Self::with_resolution(space, r)
    }

    pub fn with_resolution(space: SearchSpace, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return invalid(format!("grid resolution must be at least 2, got {resolution}"));
        }
        let total = (resolution as u128).saturating_pow(space.dim() as u32);
        Ok(GridFinder {
            space,
            resolution,
            total,
            history: History::default(),
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    /// Lattice point visited at trial `t`.
    pub fn encoding(&self, t: usize) -> Vec<f64> {
        let mut k = (t as u128 - 1) % self.total;
        let r = self.resolution as u128;
        let step = (self.space.hi - self.space.lo) / (self.resolution - 1) as f64;
        let mut e = vec![0.0; self.space.dim()];
        for slot in e.iter_mut().rev() {
            *slot = self.space.lo + (k % r) as f64 * step;
            k /= r;
        }
        e
    }
}

impl Finder for GridFinder {
    fn name(&self) -> &'static str {
        "grid"
    }

    fn propose(&mut self, t: usize) -> Result<(Dataset, Dataset)> {
        check_t(t)?;
        if t as u128 > self.total && (t as u128 - 1).is_multiple_of(self.total) {
            log::warn!("grid of {} points exhausted, wrapping around", self.total);
        }
        let e = self.encoding(t);
        let pair = self.space.decode(&e)?;
        self.history.set_pending(t, e);
        Ok(pair)
    }

    fn observe(&mut self, t: usize, value: f64) -> Result<()> {
        self.history.record(t, value)
    }
}
