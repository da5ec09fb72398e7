//! Drivers for the detection-rate and trials-to-violation tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind};
use crate::finders::{FinderConfig, SearchSpace};
use crate::harness::config::{run_audit, AuditConfig, MechanismConfig};
use crate::rng::derive_seed;
use crate::types::{Dataset, PrivacyProperty};

pub const TRIAL_CAP: usize = 50;

/// A pair on which each shipped buggy mechanism is known to misbehave.
pub fn shipped_pair(mechanism: &str) -> Result<(Dataset, Dataset)> {
    let ds = |v: Vec<f64>| Dataset::new(v);
    match mechanism {
        // the appended -1 moves the true count without moving the sum
        "dp_laplace" | "non_dp_laplace1" | "non_dp_laplace2" | "non_dp_gaussian1"
        | "non_dp_gaussian2" | "randomized_response" => Ok((ds(vec![1.0])?, ds(vec![1.0, -1.0])?)),
        // one record at the middle of the range flips half of the threshold queries
        m if m.starts_with("svt") || m == "noisy_max" => Ok((ds(vec![])?, ds(vec![0.0])?)),
        "scaled_gd" => Ok((ds(vec![])?, ds(vec![1.0])?)),
        other => Err(Error::Unknown {
            kind: "mechanism",
            name: other.to_string(),
        }),
    }
}

/// Search space for the trials-to-violation table: one base record, so each
/// proposal is `[a]` against `[a, b]`. With five base records the mean
/// mechanisms' count-dependent noise changes by only a factor 6/5 across a pair,
/// which the Renyi tester cannot resolve at high privacy.
pub fn finder_space() -> SearchSpace {
    SearchSpace::new(1, crate::types::DEFAULT_LO, crate::types::DEFAULT_HI).expect("valid space")
}

/// A finder over [`finder_space`].
pub fn finder_config(name: &str) -> FinderConfig {
    let mut f = FinderConfig::named(name);
    f.space = finder_space();
    f
}

/// One table cell; `value` is `None` when the tester cannot run on the mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub mechanism: String,
    pub tester: String,
    pub finder: String,
    pub epsilon: f64,
    pub n: usize,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCell {
    pub mechanism: MechanismConfig,
    pub tester: EstimatorKind,
    pub epsilon: f64,
    pub samples: usize,
    /// Explicit claim; the mechanism's own claim at `epsilon` when absent.
    pub property: Option<PrivacyProperty>,
}

impl DetectionCell {
    pub fn new(mechanism: &str, tester: EstimatorKind, epsilon: f64, samples: usize) -> Self {
        let mut m = MechanismConfig::named(mechanism);
        if mechanism != "scaled_gd" {
            m = m.with("epsilon", epsilon);
        }
        DetectionCell {
            mechanism: m,
            tester,
            epsilon,
            samples,
            property: None,
        }
    }

    fn config(&self, finder: FinderConfig, trials: usize, seed: u64) -> AuditConfig {
        let mut cfg = AuditConfig::new(
            self.mechanism.clone(),
            EstimatorConfig::new(self.tester).with_samples(self.samples),
            finder,
        );
        cfg.property = self.property;
        cfg.trials = trials;
        cfg.seed = seed;
        cfg
    }
}

fn is_incompatible(e: &Error) -> bool {
    match e {
        Error::Incompatible(_) => true,
        Error::Trial { source, .. } => is_incompatible(source),
        _ => false,
    }
}

/// Detections out of `runs` single-trial audits on the shipped pair.
pub fn detection_count(cell: &DetectionCell, runs: usize, base_seed: u64) -> Result<Option<usize>> {
    let (d0, d1) = shipped_pair(&cell.mechanism.name)?;
    let mut hits = 0;
    for r in 0..runs {
        let seed = derive_seed(base_seed, &[("run", r as u64)]);
        let cfg = cell.config(FinderConfig::fixed(d0.clone(), d1.clone()), 1, seed);
        match run_audit(&cfg) {
            Ok(rep) => hits += rep.violation() as usize,
            Err(e) if is_incompatible(&e) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(hits))
}

pub fn detection_rate_experiment(cells: &[DetectionCell], runs: usize, base_seed: u64) -> Result<Vec<TableRow>> {
    cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let v = detection_count(c, runs, derive_seed(base_seed, &[("cell", i as u64)]))?;
            log::info!("{} / {}: {v:?} of {runs}", c.mechanism.name, c.tester.name());
            Ok(TableRow {
                mechanism: c.mechanism.name.clone(),
                tester: c.tester.name().to_string(),
                finder: "fixed".into(),
                epsilon: c.epsilon,
                n: c.samples,
                value: v.map(|h| h as f64),
            })
        })
        .collect()
}

/// Trials until the first violation in each repeat, `cap` when none is found.
pub fn trials_to_violation(
    cell: &DetectionCell,
    finder: &FinderConfig,
    repeats: usize,
    cap: usize,
    base_seed: u64,
) -> Result<Option<Vec<usize>>> {
    let mut out = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let seed = derive_seed(base_seed, &[("repeat", r as u64)]);
        match run_audit(&cell.config(finder.clone(), cap, seed)) {
            Ok(rep) => out.push(rep.first_violation().unwrap_or(cap)),
            Err(e) if is_incompatible(&e) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(out))
}

pub fn finder_experiment(
    cells: &[(DetectionCell, FinderConfig)],
    repeats: usize,
    base_seed: u64,
) -> Result<Vec<TableRow>> {
    cells
        .iter()
        .enumerate()
        .map(|(i, (c, f))| {
            let t = trials_to_violation(c, f, repeats, TRIAL_CAP, derive_seed(base_seed, &[("cell", i as u64)]))?;
            Ok(TableRow {
                mechanism: c.mechanism.name.clone(),
                tester: c.tester.name().to_string(),
                finder: f.name.clone(),
                epsilon: c.epsilon,
                n: c.samples,
                value: t.map(|v| v.iter().sum::<usize>() as f64 / v.len() as f64),
            })
        })
        .collect()
}

/// CSV with header `mechanism,tester,finder,epsilon,n,value`; blank cells print `-`.
pub fn write_csv<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["mechanism", "tester", "finder", "epsilon", "n", "value"])
        .map_err(io)?;
    for r in rows {
        let v = r.value.map_or("-".to_string(), |v| v.to_string());
        w.write_record([
            r.mechanism.as_str(),
            r.tester.as_str(),
            r.finder.as_str(),
            &r.epsilon.to_string(),
            &r.n.to_string(),
            &v,
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
