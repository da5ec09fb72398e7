use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_LO: f64 = -1.0;
pub const DEFAULT_HI: f64 = 1.0;

/// An ordered sequence of bounded real records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct Dataset {
    records: Vec<f64>,
    lo: f64,
    hi: f64,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    records: Vec<f64>,
    #[serde(default = "default_lo")]
    lo: f64,
    #[serde(default = "default_hi")]
    hi: f64,
}

fn default_lo() -> f64 {
    DEFAULT_LO
}

fn default_hi() -> f64 {
    DEFAULT_HI
}

impl TryFrom<DatasetRepr> for Dataset {
    type Error = Error;

    fn try_from(r: DatasetRepr) -> Result<Self> {
        Dataset::with_range(r.records, r.lo, r.hi)
    }
}

impl From<Dataset> for DatasetRepr {
    fn from(d: Dataset) -> Self {
        DatasetRepr {
            records: d.records,
            lo: d.lo,
            hi: d.hi,
        }
    }
}

impl Dataset {
    /// Records in the default range `[-1, 1]`.
    pub fn new(records: Vec<f64>) -> Result<Self> {
        Self::with_range(records, DEFAULT_LO, DEFAULT_HI)
    }

    pub fn with_range(records: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return invalid(format!("record range [{lo}, {hi}] is not a proper interval"));
        }
        if let Some(x) = records.iter().find(|x| !(lo..=hi).contains(*x)) {
            return invalid(format!("record {x} outside [{lo}, {hi}]"));
        }
        Ok(Dataset { records, lo, hi })
    }

    pub fn empty() -> Self {
        Dataset {
            records: Vec::new(),
            lo: DEFAULT_LO,
            hi: DEFAULT_HI,
        }
    }

    pub fn records(&self) -> &[f64] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn sum(&self) -> f64 {
        self.records.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborRelation {
    AddRemove,
    Swap,
}

/// True iff the pair differs by one added/removed record, or in at most one
/// position for `Swap`.
pub fn is_neighbor(d0: &Dataset, d1: &Dataset, rel: NeighborRelation) -> bool {
    let (a, b) = (d0.records(), d1.records());
    match rel {
        NeighborRelation::AddRemove => {
            let (short, long) = if a.len() < b.len() { (a, b) } else { (b, a) };
            if long.len() != short.len() + 1 {
                return false;
            }
            // first mismatch is the removed position; the rest must line up shifted
            let k = short
                .iter()
                .zip(long)
                .position(|(x, y)| x != y)
                .unwrap_or(short.len());
            short[k..] == long[k + 1..]
        }
        // replacing a record by an equal value still counts as a swap
        NeighborRelation::Swap => {
            a.len() == b.len() && !a.is_empty() && a.iter().zip(b).filter(|(x, y)| x != y).count() <= 1
        }
    }
}

/// The claim under audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrivacyProperty {
    Pure { epsilon: f64 },
    Approximate { epsilon: f64, delta: f64 },
    Renyi { alpha: f64, epsilon: f64 },
}

impl PrivacyProperty {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PrivacyProperty::Pure { epsilon } => epsilon > 0.0 && epsilon.is_finite(),
            PrivacyProperty::Approximate { epsilon, delta } => {
                epsilon > 0.0 && epsilon.is_finite() && (0.0..1.0).contains(&delta)
            }
            PrivacyProperty::Renyi { alpha, epsilon } => {
                alpha > 1.0 && alpha.is_finite() && epsilon > 0.0 && epsilon.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("privacy property {self:?} out of range"))
        }
    }

    pub fn epsilon(&self) -> f64 {
        match *self {
            PrivacyProperty::Pure { epsilon }
            | PrivacyProperty::Approximate { epsilon, .. }
            | PrivacyProperty::Renyi { epsilon, .. } => epsilon,
        }
    }
}

/// Mechanism outputs: `len` points of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    dim: usize,
    data: Vec<f64>,
}

impl SampleBatch {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("sample dimension must be positive");
        }
        if !data.len().is_multiple_of(dim) {
            return invalid(format!(
                "{} values do not split into points of dimension {dim}",
                data.len()
            ));
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("mechanism emitted {x}")));
        }
        Ok(SampleBatch { dim, data })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Values of coordinate `j` across all points.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.points().map(|p| p[j]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub pair: (Dataset, Dataset),
    pub estimate_forward: f64,
    pub estimate_backward: f64,
    pub threshold: f64,
    pub violation: bool,
    pub seed: u64,
}

impl TrialRecord {
    pub fn max_estimate(&self) -> f64 {
        self.estimate_forward.max(self.estimate_backward)
    }
}
