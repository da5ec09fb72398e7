use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpaudit::estimators::{GaussianKernel, ESTIMATOR_NAMES};
use dpaudit::finders::{FinderConfig, FINDER_NAMES};
use dpaudit::harness::{run_audit, write_report, AuditConfig, Overrides};
use dpaudit::mechanisms::MECHANISM_NAMES;
use dpaudit::oracles::{self, AnalyticDistribution};
use dpaudit::{AuditReport, Dataset, Error, Result};

#[derive(Parser)]
#[command(name = "dpaudit", version, about = "Black-box differential privacy auditing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the test loop over finder-proposed dataset pairs.
    Audit(AuditArgs),
    /// Run one tester on one explicit dataset pair.
    Estimate {
        #[command(flatten)]
        common: AuditArgs,
        /// Comma-separated records of the first dataset (may be empty).
        #[arg(long, allow_hyphen_values = true)]
        d0: String,
        /// Comma-separated records of the second dataset.
        #[arg(long, allow_hyphen_values = true)]
        d1: String,
    },
    /// Evaluate a reference divergence between two analytic distributions.
    Oracle {
        #[arg(long, value_enum)]
        divergence: OracleKind,
        /// Distribution as JSON, e.g. '{"kind":"laplace","mu":0,"b":1}'.
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 1.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        bandwidth: f64,
    },
    /// Print the registered mechanisms, testers and finders.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Renyi,
    HockeyStick,
    Mmd,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mechanism: Option<String>,
    #[arg(long)]
    tester: Option<String>,
    #[arg(long)]
    finder: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    continue_after_violation: bool,
}

impl AuditArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            mechanism: self.mechanism.clone(),
            tester: self.tester.clone(),
            finder: self.finder.clone(),
            epsilon: self.epsilon,
            delta: self.delta,
            alpha: self.alpha,
            samples: self.samples,
            trials: self.trials,
            seed: self.seed,
            output: self.output.clone(),
            continue_after_violation: self.continue_after_violation,
        }
    }
}

fn parse_records(s: &str) -> Result<Dataset> {
    let v = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("record '{t}': {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(v)
}

fn emit(report: &AuditReport, cfg: &AuditConfig) -> Result<ExitCode> {
    match &cfg.output {
        Some(p) => write_report(report, p)?,
        None => println!("{}", report.to_json_deterministic()?),
    }
    eprintln!("{}", report.message);
    Ok(if report.violation() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::List => {
            println!("mechanisms:");
            for m in MECHANISM_NAMES {
                println!("  {m}");
            }
            println!("estimators:");
            for e in ESTIMATOR_NAMES {
                println!("  {e}");
            }
            println!("finders:");
            for f in FINDER_NAMES {
                println!("  {f}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit(a) => {
            let cfg = AuditConfig::assemble(a.config.as_deref(), &a.overrides())?;
            let report = run_audit(&cfg)?;
            emit(&report, &cfg)
        }
        Command::Estimate { common, d0, d1 } => {
            let mut cfg = AuditConfig::assemble(common.config.as_deref(), &common.overrides())?;
            cfg.finder = FinderConfig::fixed(parse_records(&d0)?, parse_records(&d1)?);
            cfg.trials = 1;
            let report = run_audit(&cfg)?;
            emit(&report, &cfg)
        }
        Command::Oracle {
            divergence,
            p,
            q,
            alpha,
            epsilon,
            bandwidth,
        } => {
            let parse = |s: &str| -> Result<AnalyticDistribution> {
                serde_json::from_str(s).map_err(|e| Error::Config(format!("distribution: {e}")))
            };
            let (p, q) = (parse(&p)?, parse(&q)?);
            let v = match divergence {
                OracleKind::Renyi => oracles::renyi_oracle(&p, &q, alpha)?,
                OracleKind::HockeyStick => oracles::hockey_stick_oracle(&p, &q, epsilon)?,
                OracleKind::Mmd => oracles::mmd_oracle(&p, &q, &GaussianKernel::new(bandwidth)?)?,
            };
            println!("{v}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
