//! Black-box auditing of differential privacy claims.
//!
//! A mechanism is sampled on pairs of neighboring datasets and a divergence
//! lower-bound estimator is compared against the threshold implied by the
//! claimed guarantee. Passing an audit never certifies privacy; a flagged
//! trial means the claim is false with probability at least `1 - beta`.

pub mod error;
pub mod estimators;
pub mod finders;
pub mod harness;
pub mod mechanisms;
pub mod models;
pub mod oracles;
pub mod rng;
pub mod runner;
pub mod types;

pub use error::{Error, Result};
pub use mechanisms::{Mechanism, MechanismSampler};
pub use rng::{derive_rng, derive_seed, AuditRng};
pub use runner::{
    run_generalized_test, AuditReport, DivergenceEstimate, Estimator, Finder, PhaseTimes,
    RunOptions, Sampler, Verdict,
};
pub use types::{is_neighbor, Dataset, NeighborRelation, PrivacyProperty, SampleBatch, TrialRecord};
