//! Generators of neighboring dataset pairs for the audit loop.
//!
//! Every finder searches the same domain: an encoding `e` in `[lo, hi]^{L+1}`
//! that a [`SearchSpace`] turns into a pair of datasets.

mod gp;
mod grid;
mod random;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::runner::Finder;
use crate::types::{Dataset, DEFAULT_HI, DEFAULT_LO};

pub use gp::{GpBanditFinder, GpPosterior};
pub use grid::GridFinder;
pub use random::RandomFinder;

pub const FINDER_NAMES: [&str; 3] = ["grid", "random", "gp_bandit"];

pub const DEFAULT_BASE_LENGTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborConstruction {
    /// `D0 = e[..L]`, `D1 = e[..=L]`.
    #[default]
    AppendRecord,
    /// `D0 = e[..=L]`, `D1 = e[..L]`.
    RemoveLast,
    /// `D0 = e[..L]`, `D1` equals `D0` with its last record replaced by `e[L]`.
    SwapLast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    #[serde(default = "default_base_length")]
    pub base_length: usize,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    #[serde(default)]
    pub construction: NeighborConstruction,
}

fn default_base_length() -> usize {
    DEFAULT_BASE_LENGTH
}

fn default_lo() -> f64 {
    DEFAULT_LO
}

fn default_hi() -> f64 {
    DEFAULT_HI
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            base_length: DEFAULT_BASE_LENGTH,
            lo: DEFAULT_LO,
            hi: DEFAULT_HI,
            construction: NeighborConstruction::AppendRecord,
        }
    }
}

impl SearchSpace {
    pub fn new(base_length: usize, lo: f64, hi: f64) -> Result<Self> {
        let s = SearchSpace {
            base_length,
            lo,
            hi,
            construction: NeighborConstruction::AppendRecord,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_length == 0 {
            return invalid("search space base_length must be at least 1");
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return invalid(format!(
                "search space range [{}, {}] is not a proper interval",
                self.lo, self.hi
            ));
        }
        Ok(())
    }

    /// Length of an encoding, `L + 1`.
    pub fn dim(&self) -> usize {
        self.base_length + 1
    }

    pub fn decode(&self, e: &[f64]) -> Result<(Dataset, Dataset)> {
        let l = self.base_length;
        if e.len() != l + 1 {
            return invalid(format!("encoding has length {}, expected {}", e.len(), l + 1));
        }
        let ds = |v: Vec<f64>| Dataset::with_range(v, self.lo, self.hi);
        match self.construction {
            NeighborConstruction::AppendRecord => Ok((ds(e[..l].to_vec())?, ds(e.to_vec())?)),
            NeighborConstruction::RemoveLast => Ok((ds(e.to_vec())?, ds(e[..l].to_vec())?)),
            NeighborConstruction::SwapLast => {
                let mut d1 = e[..l].to_vec();
                d1[l - 1] = e[l];
                Ok((ds(e[..l].to_vec())?, ds(d1)?))
            }
        }
    }

    /// Maps an encoding into `[0, 1]^{L+1}`.
    pub fn normalize(&self, e: &[f64]) -> Vec<f64> {
        e.iter().map(|x| (x - self.lo) / (self.hi - self.lo)).collect()
    }

    pub(crate) fn uniform(&self, rng: &mut impl rand::Rng) -> Vec<f64> {
        (0..self.dim())
            .map(|_| rng.gen_range(self.lo..=self.hi))
            .collect()
    }
}

/// `(encoding, observed value)` pairs in trial order, plus the pending proposal.
#[derive(Debug, Clone, Default)]
pub struct History {
    entries: Vec<(usize, Vec<f64>, f64)>,
    pending: Option<(usize, Vec<f64>)>,
}

impl History {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn encodings(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.iter().map(|(_, e, _)| e.as_slice())
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, _, v)| *v)
    }

    pub(crate) fn set_pending(&mut self, t: usize, e: Vec<f64>) {
        self.pending = Some((t, e));
    }

    /// Records the value for trial `t`; non-finite values become the running minimum minus one.
    pub(crate) fn record(&mut self, t: usize, value: f64) -> Result<()> {
        if self.entries.iter().any(|(s, _, _)| *s == t) {
            return invalid(format!("trial {t} was already observed"));
        }
        let e = match self.pending.take() {
            Some((s, e)) if s == t => e,
            other => {
                self.pending = other;
                return invalid(format!("trial {t} was observed without being proposed"));
            }
        };
        let v = if value.is_finite() {
            value
        } else {
            self.values().fold(f64::INFINITY, f64::min).min(0.0) - 1.0
        };
        self.entries.push((t, e, v));
        Ok(())
    }
}

fn check_t(t: usize) -> Result<()> {
    if t == 0 {
        return invalid("trials are numbered from 1");
    }
    Ok(())
}

/// Always proposes the same explicit pair.
#[derive(Debug, Clone)]
pub struct FixedPair {
    pair: (Dataset, Dataset),
    history: History,
}

impl FixedPair {
    pub fn new(d0: Dataset, d1: Dataset) -> Self {
        FixedPair {
            pair: (d0, d1),
            history: History::default(),
        }
    }

    pub fn history(&self) -> &History {
        &self.history
    }
}

impl Finder for FixedPair {
    fn name(&self) -> &'static str {
        "fixed"
    }

    fn propose(&mut self, t: usize) -> Result<(Dataset, Dataset)> {
        check_t(t)?;
        self.history.set_pending(t, Vec::new());
        Ok(self.pair.clone())
    }

    fn observe(&mut self, t: usize, value: f64) -> Result<()> {
        self.history.record(t, value)
    }
}

/// Finder selection as it appears in an audit configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinderConfig {
    pub name: String,
    #[serde(default)]
    pub space: SearchSpace,
    /// Grid lattice points per axis; chosen from the trial count when absent.
    #[serde(default)]
    pub resolution: Option<usize>,
    /// Explicit pair for the `fixed` finder.
    #[serde(default)]
    pub pair: Option<(Dataset, Dataset)>,
}

impl FinderConfig {
    pub fn named(name: &str) -> Self {
        FinderConfig {
            name: name.to_string(),
            space: SearchSpace::default(),
            resolution: None,
            pair: None,
        }
    }

    pub fn fixed(d0: Dataset, d1: Dataset) -> Self {
        FinderConfig {
            pair: Some((d0, d1)),
            ..Self::named("fixed")
        }
    }
}

/// Builds a finder; `trials` sizes the grid lattice, `seed` drives the random streams.
pub fn build_finder(cfg: &FinderConfig, trials: usize, seed: u64) -> Result<Box<dyn Finder>> {
    if cfg.name != "fixed" {
        cfg.space.validate()?;
    }
    match cfg.name.as_str() {
        "grid" => {
            let g = match cfg.resolution {
                Some(r) => GridFinder::with_resolution(cfg.space.clone(), r)?,
                None => GridFinder::new(cfg.space.clone(), trials)?,
            };
            Ok(Box::new(g))
        }
        "random" => Ok(Box::new(RandomFinder::new(cfg.space.clone(), seed))),
        "gp_bandit" => Ok(Box::new(GpBanditFinder::new(cfg.space.clone(), seed))),
        "fixed" => match &cfg.pair {
            Some((d0, d1)) => Ok(Box::new(FixedPair::new(d0.clone(), d1.clone()))),
            None => invalid("the fixed finder needs an explicit `pair`"),
        },
        other => Err(Error::Unknown {
            kind: "finder",
            name: other.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{is_neighbor, NeighborRelation};

    #[test]
    fn constructions_are_neighbors() {
        let e = [0.1, -0.2, 0.3];
        let mut s = SearchSpace::new(2, -1.0, 1.0).unwrap();
        for (c, rel) in [
            (NeighborConstruction::AppendRecord, NeighborRelation::AddRemove),
            (NeighborConstruction::RemoveLast, NeighborRelation::AddRemove),
            (NeighborConstruction::SwapLast, NeighborRelation::Swap),
        ] {
            s.construction = c;
            let (d0, d1) = s.decode(&e).unwrap();
            assert!(is_neighbor(&d0, &d1, rel), "{c:?}");
        }
        s.construction = NeighborConstruction::SwapLast;
        let (d0, d1) = s.decode(&e).unwrap();
        assert_eq!(d0.records(), &[0.1, -0.2]);
        assert_eq!(d1.records(), &[0.1, 0.3]);
    }

    #[test]
    fn observe_rules() {
        let d = Dataset::new(vec![]).unwrap();
        let mut f = FixedPair::new(d.clone(), Dataset::new(vec![0.0]).unwrap());
        assert!(f.observe(1, 0.0).is_err());
        f.propose(1).unwrap();
        f.observe(1, 2.0).unwrap();
        assert!(f.observe(1, 3.0).is_err());
        f.propose(2).unwrap();
        f.observe(2, f64::NAN).unwrap();
        let v: Vec<f64> = f.history().values().collect();
        assert_eq!(v, vec![2.0, -1.0]);
        f.propose(3).unwrap();
        f.observe(3, f64::NEG_INFINITY).unwrap();
        assert_eq!(f.history().values().last(), Some(-2.0));
    }

    #[test]
    fn registry() {
        for n in FINDER_NAMES {
            assert_eq!(build_finder(&FinderConfig::named(n), 10, 0).unwrap().name(), n);
        }
        assert!(build_finder(&FinderConfig::named("anneal"), 10, 0).is_err());
        assert!(build_finder(&FinderConfig::named("fixed"), 10, 0).is_err());
        let mut bad = FinderConfig::named("grid");
        bad.space.lo = 2.0;
        assert!(build_finder(&bad, 10, 0).is_err());
    }

    #[test]
    fn config_from_json() {
        let c: FinderConfig = serde_json::from_str(
            r#"{"name": "grid", "space": {"base_length": 1, "construction": "swap_last"}, "resolution": 3}"#,
        )
        .unwrap();
        assert_eq!(c.space.base_length, 1);
        assert_eq!(c.space.lo, -1.0);
        assert_eq!(c.resolution, Some(3));
        assert!(serde_json::from_str::<FinderConfig>(r#"{"name": "grid", "typo": 1}"#).is_err());
    }
}
