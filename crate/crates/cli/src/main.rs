use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use haarsep::harness::{self, ExperimentConfig, RunReport};
use haarsep::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CAP: u8 = 2;
const EXIT_AUDIT: u8 = 3;

#[derive(Parser)]
#[command(name = "haarsep", version, about = "Seeded experiment runner for QDS attacks and Haar-oracle tooling")]
struct Cli {
    /// Worker threads for the trial pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and print its summary table.
    Run(RunArgs),
    /// Re-run a stored report's config and compare trials byte for byte.
    Replay { report: PathBuf },
    /// Write the x,y,ci_low,ci_high table for one metric.
    Plot {
        report: PathBuf,
        #[arg(long)]
        metric: String,
        /// Destination file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check attack trajectories stored in a report.
    Audit { report: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(self) -> haarsep::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(e) = self.experiment {
            cfg.experiment = e;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(l) = self.lambda {
            cfg.lambda = l;
            cfg.lambdas.clear();
        }
        if let Some(s) = self.scheme {
            cfg.scheme = s;
        }
        if self.out.is_some() {
            cfg.output = self.out;
        }
        Ok(cfg)
    }
}

fn execute(command: Command) -> haarsep::Result<u8> {
    match command {
        Command::Run(args) => {
            let cfg = args.config()?;
            let report = harness::run_experiment(&cfg)?;
            print!("{}", harness::summary_table(&report));
            if let Some(path) = &cfg.output {
                println!("report written to {}", path.display());
            }
            Ok(0)
        }
        Command::Replay { report } => {
            let stored = RunReport::load(&report)?;
            let outcome = harness::replay(&stored)?;
            if outcome.identical() {
                println!("replay identical: {} trials", outcome.trials);
                Ok(0)
            } else {
                println!("replay mismatch in {} of {} trials: {:?}", outcome.mismatched.len(), outcome.trials, outcome.mismatched);
                Ok(EXIT_AUDIT)
            }
        }
        Command::Plot { report, metric, out } => {
            let stored = RunReport::load(&report)?;
            match out {
                Some(path) => harness::emit_plot_data(&stored, &metric, &path)?,
                None => print!("{}", harness::plot_table(&stored, &metric)?),
            }
            Ok(0)
        }
        Command::Audit { report } => {
            let stored = RunReport::load(&report)?;
            let a = harness::audit(&stored);
            println!("audited {} trials, {} trajectories, {} steps", a.trials, a.trajectories, a.steps);
            for v in &a.violations {
                println!("violation: {v}");
            }
            Ok(if a.passed() { 0 } else { EXIT_AUDIT })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::CapViolation(_)) { EXIT_CAP } else { EXIT_FAILURE })
        }
    }
}
