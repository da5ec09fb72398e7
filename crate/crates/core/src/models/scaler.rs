use crate::error::{invalid, Result};
use crate::types::SampleBatch;

/// Per-coordinate map of raw outputs into `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Scaler {
    Identity,
    /// `[lo, hi]` mapped linearly onto `[-1, 1]`, then clamped.
    Affine { lo: Vec<f64>, hi: Vec<f64> },
    /// Mid-rank empirical CDF against sorted reference values, mapped onto `[-1, 1]`.
    /// Insensitive to the extreme outliers some mechanisms emit.
    Quantile { refs: Vec<Vec<f64>> },
}

pub const DEFAULT_QUANTILE_REFS: usize = 4096;

fn check(batches: &[&SampleBatch]) -> Result<usize> {
    let Some(first) = batches.first() else {
        return invalid("no batches to fit a scaler on");
    };
    let d = first.dim();
    if batches.iter().any(|b| b.dim() != d) {
        return invalid("batches disagree on dimension");
    }
    if batches.iter().all(|b| b.is_empty()) {
        return invalid("cannot fit a scaler on empty batches");
    }
    Ok(d)
}

impl Scaler {
    pub fn dim(&self) -> Option<usize> {
        match self {
            Scaler::Identity => None,
            Scaler::Affine { lo, .. } => Some(lo.len()),
            Scaler::Quantile { refs } => Some(refs.len()),
        }
    }

    pub fn fit_affine(batches: &[&SampleBatch]) -> Result<Self> {
        let d = check(batches)?;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for b in batches {
            for p in b.points() {
                for j in 0..d {
                    lo[j] = lo[j].min(p[j]);
                    hi[j] = hi[j].max(p[j]);
                }
            }
        }
        Ok(Scaler::Affine { lo, hi })
    }

    /// Sorted pooled values per coordinate, thinned to at most `max_refs`
    /// evenly spaced order statistics.
    pub fn fit_quantile(batches: &[&SampleBatch], max_refs: usize) -> Result<Self> {
        let d = check(batches)?;
        if max_refs < 2 {
            return invalid("quantile scaler needs at least two reference points");
        }
        let refs = (0..d)
            .map(|j| {
                let mut v: Vec<f64> = batches.iter().flat_map(|b| b.column(j)).collect();
                v.sort_by(f64::total_cmp);
                if v.len() <= max_refs {
                    return v;
                }
                let last = (v.len() - 1) as f64;
                (0..max_refs)
                    .map(|k| v[(k as f64 * last / (max_refs - 1) as f64).round() as usize])
                    .collect()
            })
            .collect();
        Ok(Scaler::Quantile { refs })
    }

    pub fn apply(&self, x: &mut [f64]) {
        match self {
            Scaler::Identity => {}
            Scaler::Affine { lo, hi } => {
                for (j, v) in x.iter_mut().enumerate() {
                    let w = hi[j] - lo[j];
                    *v = if w > 0.0 {
                        (2.0 * (*v - lo[j]) / w - 1.0).clamp(-1.0, 1.0)
                    } else {
                        0.0
                    };
                }
            }
            Scaler::Quantile { refs } => {
                for (j, v) in x.iter_mut().enumerate() {
                    let r = &refs[j];
                    let below = r.partition_point(|&t| t < *v);
                    let upto = r.partition_point(|&t| t <= *v);
                    let u = (below + upto) as f64 / (2 * r.len()) as f64;
                    *v = 2.0 * u - 1.0;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_maps_range() {
        let b = SampleBatch::from_scalars(vec![2.0, 4.0, 3.0]).unwrap();
        let s = Scaler::fit_affine(&[&b]).unwrap();
        let mut x = [2.0];
        s.apply(&mut x);
        assert_eq!(x, [-1.0]);
        let mut x = [3.0];
        s.apply(&mut x);
        assert_eq!(x, [0.0]);
        let mut x = [9.0];
        s.apply(&mut x);
        assert_eq!(x, [1.0]);
    }

    #[test]
    fn quantile_ignores_outliers() {
        let mut v: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        v.push(1e14);
        let b = SampleBatch::from_scalars(v).unwrap();
        let s = Scaler::fit_quantile(&[&b], 4096).unwrap();
        let mut x = [0.5];
        s.apply(&mut x);
        assert!(x[0].abs() < 0.01);
    }

    #[test]
    fn quantile_ties_share_a_value() {
        let b = SampleBatch::from_scalars(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let s = Scaler::fit_quantile(&[&b], 16).unwrap();
        let mut a = [0.0];
        let mut c = [1.0];
        s.apply(&mut a);
        s.apply(&mut c);
        assert_eq!(a, [-0.5]);
        assert_eq!(c, [0.5]);
    }

    #[test]
    fn quantile_thins_references() {
        let b = SampleBatch::from_scalars((0..10_000).map(f64::from).collect()).unwrap();
        let Scaler::Quantile { refs } = Scaler::fit_quantile(&[&b], 100).unwrap() else {
            panic!()
        };
        assert_eq!(refs[0].len(), 100);
        assert_eq!(refs[0][0], 0.0);
        assert_eq!(refs[0][99], 9999.0);
    }
}
