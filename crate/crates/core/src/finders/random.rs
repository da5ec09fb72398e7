use crate::error::Result;
use crate::finders::{check_t, History, SearchSpace};
use crate::rng::derive_rng;
use crate::runner::Finder;
use crate::types::Dataset;

/// I.i.d. uniform encodings; trial `t` uses its own stream, so observations never matter.
#[derive(Debug, Clone)]
pub struct RandomFinder {
    space: SearchSpace,
    seed: u64,
    history: History,
}

impl RandomFinder {
    pub fn new(space: SearchSpace, seed: u64) -> Self {
        RandomFinder {
            space,
            seed,
            history: History::default(),
        }
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn encoding(&self, t: usize) -> Vec<f64> {
        self.space
            .uniform(&mut derive_rng(self.seed, &[("random_finder", t as u64)]))
    }
}

impl Finder for RandomFinder {
    fn name(&self) -> &'static str {
        "random"
    }

    fn propose(&mut self, t: usize) -> Result<(Dataset, Dataset)> {
        check_t(t)?;
        let e = self.encoding(t);
        let pair = self.space.decode(&e)?;
        self.history.set_pending(t, e);
        Ok(pair)
    }

    fn observe(&mut self, t: usize, value: f64) -> Result<()> {
        self.history.record(t, value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_blind() {
        let s = SearchSpace::default();
        let mut a = RandomFinder::new(s.clone(), 9);
        let mut b = RandomFinder::new(s, 9);
        for t in 1..=10 {
            let pa = a.propose(t).unwrap();
            a.observe(t, t as f64 * 3.7).unwrap();
            assert_eq!(pa, b.propose(t).unwrap());
        }
        assert_eq!(a.history().len(), 10);
    }

    #[test]
    fn within_range() {
        let s = SearchSpace::new(3, 2.0, 5.0).unwrap();
        let f = RandomFinder::new(s, 1);
        for t in 1..50 {
            assert!(f.encoding(t).iter().all(|x| (2.0..=5.0).contains(x)));
        }
    }
}
