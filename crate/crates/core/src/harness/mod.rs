//! Configuration, reports and experiment drivers.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{run_audit, AuditConfig, MechanismConfig, Overrides};
pub use experiments::{
    detection_count, detection_rate_experiment, finder_config, finder_experiment, finder_space, shipped_pair, trials_to_violation,
    write_csv, DetectionCell, TableRow, TRIAL_CAP,
};
pub use report::{read_report, timings_path, write_report};
