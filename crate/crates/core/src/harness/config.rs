use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{build_estimator, EstimatorConfig, EstimatorKind, DEFAULT_DELTA};
use crate::finders::{build_finder, FinderConfig, FINDER_NAMES};
use crate::mechanisms::{build_mechanism, Mechanism};
use crate::rng::derive_seed;
use crate::runner::{run_generalized_test, AuditReport, Estimator, Finder, RunOptions};
use crate::types::PrivacyProperty;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl MechanismConfig {
    pub fn named(name: &str) -> Self {
        MechanismConfig {
            name: name.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn build(&self) -> Result<Box<dyn Mechanism>> {
        build_mechanism(&self.name, &self.params)
    }
}

fn default_trials() -> usize {
    10
}

/// Everything one audit run needs; the on-disk form is a JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub mechanism: MechanismConfig,
    pub estimator: EstimatorConfig,
    pub finder: FinderConfig,
    /// Claim under audit; derived from the mechanism when absent.
    #[serde(default)]
    pub property: Option<PrivacyProperty>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub continue_after_violation: bool,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mechanism: Option<String>,
    pub tester: Option<String>,
    pub finder: Option<String>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub samples: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub continue_after_violation: bool,
}

impl AuditConfig {
    pub fn new(mechanism: MechanismConfig, estimator: EstimatorConfig, finder: FinderConfig) -> Self {
        AuditConfig {
            mechanism,
            estimator,
            finder,
            property: None,
            trials: default_trials(),
            seed: 0,
            output: None,
            continue_after_violation: false,
        }
    }

    /// Parses a config document; errors carry the line, column and offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Builds a config from an optional file plus flags.
    pub fn assemble(file: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => {
                let mech = o
                    .mechanism
                    .as_deref()
                    .ok_or_else(|| Error::Config("`mechanism` is required without --config".into()))?;
                let tester = o
                    .tester
                    .as_deref()
                    .ok_or_else(|| Error::Config("`estimator` is required without --config".into()))?;
                AuditConfig::new(
                    MechanismConfig::named(mech),
                    EstimatorConfig::new(EstimatorKind::parse(tester)?),
                    FinderConfig::named(o.finder.as_deref().unwrap_or("random")),
                )
            }
        };
        cfg.apply(o)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(m) = &o.mechanism {
            if *m != self.mechanism.name {
                self.mechanism = MechanismConfig::named(m);
            }
        }
        if let Some(t) = &o.tester {
            self.estimator.name = EstimatorKind::parse(t)?;
        }
        if let Some(f) = &o.finder {
            self.finder.name = f.clone();
        }
        if let Some(eps) = o.epsilon {
            if mechanism_takes(&self.mechanism.name, "epsilon")? {
                self.mechanism.params.insert("epsilon".into(), eps);
            }
            self.property = self.property.map(|p| match p {
                PrivacyProperty::Pure { .. } => PrivacyProperty::Pure { epsilon: eps },
                PrivacyProperty::Approximate { delta, .. } => {
                    PrivacyProperty::Approximate { epsilon: eps, delta }
                }
                PrivacyProperty::Renyi { alpha, .. } => PrivacyProperty::Renyi { alpha, epsilon: eps },
            });
        }
        if let Some(a) = o.alpha {
            self.estimator.alpha = a;
            if mechanism_takes(&self.mechanism.name, "alpha")? {
                self.mechanism.params.insert("alpha".into(), a);
            }
            if let Some(PrivacyProperty::Renyi { epsilon, .. }) = self.property {
                self.property = Some(PrivacyProperty::Renyi { alpha: a, epsilon });
            }
        }
        if let Some(d) = o.delta {
            let eps = match self.property {
                Some(p) => p.epsilon(),
                None => self.mechanism.build()?.claimed_property().epsilon(),
            };
            self.property = Some(PrivacyProperty::Approximate { epsilon: eps, delta: d });
        }
        if let Some(n) = o.samples {
            self.estimator.samples = n;
        }
        if let Some(t) = o.trials {
            self.trials = t;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.output {
            self.output = Some(p.clone());
        }
        self.continue_after_violation |= o.continue_after_violation;
        Ok(())
    }

    /// The explicit property, or the mechanism's claim in the form the tester checks.
    pub fn resolved_property(&self, mech: &dyn Mechanism) -> PrivacyProperty {
        if let Some(p) = self.property {
            return p;
        }
        let claim = mech.claimed_property();
        match self.estimator.name {
            EstimatorKind::Renyi => claim,
            _ => match claim {
                PrivacyProperty::Approximate { .. } => claim,
                other => PrivacyProperty::Approximate {
                    epsilon: other.epsilon(),
                    delta: DEFAULT_DELTA,
                },
            },
        }
    }

    /// Instantiates every component, reporting the first field that is wrong.
    pub fn build(&self) -> Result<(Box<dyn Mechanism>, Box<dyn Estimator>, Box<dyn Finder>)> {
        let field = |name: &str, e: Error| Error::Config(format!("field `{name}`: {e}"));
        if self.trials == 0 {
            return Err(Error::Config("field `trials`: must be at least 1".into()));
        }
        let mech = self.mechanism.build().map_err(|e| field("mechanism", e))?;
        let property = self.resolved_property(mech.as_ref());
        property.validate().map_err(|e| field("property", e))?;
        let est = build_estimator(&self.estimator, property).map_err(|e| field("estimator", e))?;
        if !FINDER_NAMES.contains(&self.finder.name.as_str()) && self.finder.name != "fixed" {
            return Err(field(
                "finder",
                Error::Unknown {
                    kind: "finder",
                    name: self.finder.name.clone(),
                },
            ));
        }
        let finder = build_finder(&self.finder, self.trials, derive_seed(self.seed, &[("finder", 0)]))
            .map_err(|e| field("finder", e))?;
        Ok((mech, est, finder))
    }
}

fn mechanism_takes(name: &str, key: &str) -> Result<bool> {
    Ok(build_mechanism(name, &BTreeMap::new())?
        .parameters()
        .contains_key(key))
}

/// Runs the audit loop as configured and echoes the config into the report.
pub fn run_audit(cfg: &AuditConfig) -> Result<AuditReport> {
    let (mech, est, mut finder) = cfg.build()?;
    let tau = est.threshold()?;
    let mut report = run_generalized_test(
        mech.as_ref(),
        cfg.trials,
        finder.as_mut(),
        est.as_ref(),
        tau,
        cfg.seed,
        RunOptions {
            continue_after_violation: cfg.continue_after_violation,
        },
    )?;
    report.config = serde_json::to_value(cfg)?;
    Ok(report)
}
