//! The generalized lower-bound test loop and the interfaces it runs against.

use std::collections::BTreeMap;
use std::ops::AddAssign;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mechanisms::{Mechanism, MechanismSampler};
use crate::rng::{derive_rng, derive_seed, fingerprint, AuditRng};
use crate::types::{Dataset, PrivacyProperty, SampleBatch, TrialRecord};

/// Anything that can draw i.i.d. output vectors.
pub trait Sampler {
    fn dim(&self) -> usize;
    fn sample(&self, n: usize, rng: &mut AuditRng) -> Result<SampleBatch>;
}

/// Wall-clock seconds spent per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub sampling: f64,
    pub fitting: f64,
    pub estimation: f64,
}

impl AddAssign for PhaseTimes {
    fn add_assign(&mut self, o: PhaseTimes) {
        self.sampling += o.sampling;
        self.fitting += o.fitting;
        self.estimation += o.estimation;
    }
}

/// Accumulates elapsed time into one phase.
pub(crate) struct Stopwatch(Instant);

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Stopwatch(Instant::now())
    }

    pub(crate) fn lap(&mut self, slot: &mut f64) {
        let now = Instant::now();
        *slot += (now - self.0).as_secs_f64();
        self.0 = now;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    /// The lower bound compared against the threshold.
    pub value: f64,
    /// Amount subtracted from the raw statistic for the confidence guarantee.
    pub correction: f64,
    /// Raw plug-in statistic before correction.
    pub statistic: f64,
    pub metadata: BTreeMap<String, f64>,
    pub times: PhaseTimes,
}

/// A divergence lower-bound estimator `D(P || Q)` paired with its threshold rule.
pub trait Estimator {
    fn name(&self) -> &'static str;
    fn property(&self) -> PrivacyProperty;
    fn beta(&self) -> f64;
    fn threshold(&self) -> Result<f64>;
    fn estimate(
        &self,
        p: &dyn Sampler,
        q: &dyn Sampler,
        rng: &mut AuditRng,
    ) -> Result<DivergenceEstimate>;
}

/// Proposes neighboring dataset pairs; `observe` feeds back the trial outcome.
pub trait Finder {
    fn name(&self) -> &'static str;
    fn propose(&mut self, t: usize) -> Result<(Dataset, Dataset)>;
    fn observe(&mut self, t: usize, value: f64) -> Result<()>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub continue_after_violation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Violation,
    NoViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub config: serde_json::Value,
    pub mechanism: String,
    pub estimator: String,
    pub finder: String,
    pub property: PrivacyProperty,
    pub threshold: f64,
    pub beta: f64,
    pub base_seed: u64,
    pub trials: Vec<TrialRecord>,
    pub verdict: Verdict,
    pub message: String,
    pub metadata: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<PhaseTimes>,
}

impl AuditReport {
    pub fn violation(&self) -> bool {
        self.verdict == Verdict::Violation
    }

    /// Index (1-based) of the first flagged trial.
    pub fn first_violation(&self) -> Option<usize> {
        self.trials
            .iter()
            .find(|r| r.violation)
            .map(|r| r.trial_index)
    }

    /// JSON document without wall-clock fields; identical runs give identical bytes.
    pub fn to_json_deterministic(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.timings = None;
        Ok(serde_json::to_string_pretty(&copy)?)
    }
}

/// One direction of a trial; the stream depends on the ordered pair so that
/// swapping `(D0, D1)` swaps the two estimates exactly.
fn directed_estimate(
    mech: &dyn Mechanism,
    est: &dyn Estimator,
    p: &Dataset,
    q: &Dataset,
    trial_seed: u64,
) -> Result<DivergenceEstimate> {
    let key = fingerprint(&[p.records(), q.records()]);
    let mut rng = derive_rng(trial_seed, &[("estimate", key)]);
    let ps = MechanismSampler::new(mech, p);
    let qs = MechanismSampler::new(mech, q);
    let e = est.estimate(&ps, &qs, &mut rng)?;
    if !e.value.is_finite() {
        return Err(Error::NonFinite(format!("estimate {}", e.value)));
    }
    Ok(e)
}

/// Runs up to `trials` rounds of propose / estimate both directions / compare.
pub fn run_generalized_test(
    mech: &dyn Mechanism,
    trials: usize,
    finder: &mut dyn Finder,
    est: &dyn Estimator,
    tau: f64,
    base_seed: u64,
    opts: RunOptions,
) -> Result<AuditReport> {
    if trials == 0 {
        return invalid("trial count must be at least 1");
    }
    if !tau.is_finite() {
        return invalid(format!("threshold {tau} is not finite"));
    }
    let mut records = Vec::new();
    let mut times = PhaseTimes::default();
    let mut any_violation = false;
    for t in 1..=trials {
        let wrap = |e: Error| Error::Trial {
            index: t,
            source: Box::new(e),
        };
        let (d0, d1) = finder.propose(t).map_err(wrap)?;
        let seed = derive_seed(base_seed, &[("trial", t as u64)]);
        let fwd = directed_estimate(mech, est, &d0, &d1, seed).map_err(wrap)?;
        let bwd = directed_estimate(mech, est, &d1, &d0, seed).map_err(wrap)?;
        times += fwd.times;
        times += bwd.times;
        let best = fwd.value.max(bwd.value);
        let violation = best > tau;
        log::debug!(
            "trial {t}: forward {:.6} backward {:.6} tau {tau:.6}",
            fwd.value,
            bwd.value
        );
        records.push(TrialRecord {
            trial_index: t,
            pair: (d0, d1),
            estimate_forward: fwd.value,
            estimate_backward: bwd.value,
            threshold: tau,
            violation,
            seed,
        });
        finder.observe(t, best).map_err(wrap)?;
        if violation {
            any_violation = true;
            if !opts.continue_after_violation {
                break;
            }
        }
    }
    let beta = est.beta();
    let (verdict, message) = if any_violation {
        (
            Verdict::Violation,
            format!("not private with probability at least {}", 1.0 - beta),
        )
    } else {
        (
            Verdict::NoViolation,
            format!("could not find privacy violation in {} trials", records.len()),
        )
    };
    let mut metadata = BTreeMap::new();
    metadata.insert("beta_split".into(), "none".into());
    metadata.insert(
        "beta_scope".into(),
        "each direction of each trial is a separate estimate at confidence 1-beta".into(),
    );
    Ok(AuditReport {
        config: serde_json::Value::Null,
        mechanism: mech.name().to_string(),
        estimator: est.name().to_string(),
        finder: finder.name().to_string(),
        property: est.property(),
        threshold: tau,
        beta,
        base_seed,
        trials: records,
        verdict,
        message,
        metadata,
        timings: Some(times),
    })
}
