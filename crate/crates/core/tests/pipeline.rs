use dpaudit::estimators::{EstimatorConfig, EstimatorKind};
use dpaudit::finders::FinderConfig;
use dpaudit::harness::{read_report, run_audit, timings_path, write_report, AuditConfig, MechanismConfig};
use dpaudit::{AuditReport, Dataset, Verdict};

fn small(tester: EstimatorKind, finder: &str) -> AuditConfig {
    let mut c = AuditConfig::new(
        MechanismConfig::named("non_dp_laplace1").with("epsilon", 0.5),
        EstimatorConfig::new(tester).with_samples(2_000),
        FinderConfig::named(finder),
    );
    c.trials = 3;
    c.seed = 17;
    c.continue_after_violation = true;
    c
}

#[test]
fn identical_configs_give_identical_reports() {
    for tester in [
        EstimatorKind::Renyi,
        EstimatorKind::HockeyStick,
        EstimatorKind::Mmd,
        EstimatorKind::Histogram,
    ] {
        for finder in ["grid", "random", "gp_bandit"] {
            let cfg = small(tester, finder);
            let a = run_audit(&cfg).unwrap().to_json_deterministic().unwrap();
            let b = run_audit(&cfg).unwrap().to_json_deterministic().unwrap();
            assert_eq!(a, b, "{} / {finder}", tester.name());
        }
    }
}

#[test]
fn seed_changes_the_estimates() {
    let cfg = small(EstimatorKind::Renyi, "random");
    let mut other = cfg.clone();
    other.seed += 1;
    let (a, b) = (run_audit(&cfg).unwrap(), run_audit(&other).unwrap());
    assert_ne!(a.trials[0].estimate_forward, b.trials[0].estimate_forward);
}

#[test]
fn report_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let report = run_audit(&small(EstimatorKind::Renyi, "gp_bandit")).unwrap();
    write_report(&report, &path).unwrap();
    assert!(timings_path(&path).exists());
    assert_eq!(read_report(&path).unwrap(), report);

    let text = serde_json::to_string(&report).unwrap();
    let back: AuditReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
}

#[test]
fn timings_are_populated() {
    let report = run_audit(&small(EstimatorKind::HockeyStick, "random")).unwrap();
    let t = report.timings.expect("timings recorded");
    assert!(t.sampling >= 0.0 && t.fitting >= 0.0 && t.estimation >= 0.0);
    assert!(t.sampling + t.fitting + t.estimation > 0.0);
    assert!(!report.to_json_deterministic().unwrap().contains("fitting"));
}

#[test]
fn report_echoes_config_and_trials() {
    let cfg = small(EstimatorKind::Mmd, "grid");
    let r = run_audit(&cfg).unwrap();
    assert_eq!(r.trials.len(), 3);
    assert_eq!(r.config, serde_json::to_value(&cfg).unwrap());
    assert_eq!(AuditConfig::from_json(&r.config.to_string()).unwrap(), cfg);
    for (i, t) in r.trials.iter().enumerate() {
        assert_eq!(t.trial_index, i + 1);
        assert_eq!(t.violation, t.max_estimate() > r.threshold);
    }
}

#[test]
fn early_exit_on_violation() {
    let mut cfg = AuditConfig::new(
        MechanismConfig::named("non_dp_laplace1").with("epsilon", 0.01),
        EstimatorConfig::new(EstimatorKind::Renyi).with_samples(20_000),
        FinderConfig::fixed(Dataset::new(vec![1.0]).unwrap(), Dataset::new(vec![1.0, -1.0]).unwrap()),
    );
    cfg.trials = 5;
    let r = run_audit(&cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Violation);
    assert_eq!(r.trials.len(), 1);
    assert!(r.message.starts_with("not private with probability at least"));
}
