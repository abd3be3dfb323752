use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;

use mtslab::adversaries::{AdversaryParams, DEFAULT_SIZE_CAP};
use mtslab::cost::parse_rational;
use mtslab::harness::{self, ExperimentSpec, Grid, DEFAULT_CAP};
use mtslab::metric::{self, MetricSpace};
use mtslab::offline::{optimal_rle, Start};
use mtslab::{Error, Instance, Result};

#[derive(Parser)]
#[command(name = "mtslab", version, about = "Metrical task systems with few request types")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a metric description for the metric and HST axioms.
    Validate { metric: PathBuf },
    /// Exact offline optimum of an instance.
    Solve {
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an algorithm against an adversary (or a fixed instance) and report.
    Simulate(SimulateArgs),
    /// Like simulate, but print only the inequality ledger; fails if any row fails.
    Verify(SimulateArgs),
    /// Run a parameter grid and write one CSV row per point.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the instance an adversary plays on, with its policy.
    Construct {
        #[command(flatten)]
        adversary: AdversaryArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a JSON report.
    Report {
        report: PathBuf,
        #[arg(long)]
        pretty: bool,
    },
}

#[derive(Args)]
struct AdversaryArgs {
    #[arg(long)]
    adversary: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "C", value_parser = rational)]
    c: Option<BigRational>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    phases: usize,
    /// Largest metric a construction may build, in points.
    #[arg(long, default_value_t = DEFAULT_SIZE_CAP)]
    size_cap: usize,
}

impl AdversaryArgs {
    fn params(&self) -> AdversaryParams {
        AdversaryParams {
            n: self.n,
            m: self.m,
            c: self.c.clone(),
            levels: self.levels,
            seed: self.seed,
            phases: self.phases,
            size_cap: self.size_cap,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, required_unless_present = "instance")]
    adversary: Option<String>,
    /// Serve this fixed instance instead of an adversary.
    #[arg(long, conflicts_with = "adversary")]
    instance: Option<PathBuf>,
    #[arg(long)]
    algorithm: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "C", value_parser = rational)]
    c: Option<BigRational>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, default_value_t = 10)]
    phases: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Budget of individually simulated steps per trial.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
    #[arg(long, default_value_t = DEFAULT_SIZE_CAP)]
    size_cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn rational(s: &str) -> std::result::Result<BigRational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
            Ok(())
        }
    }
}

fn simulate(a: &SimulateArgs) -> Result<harness::RatioReport> {
    if let Some(path) = &a.instance {
        let inst = Instance::from_json(&read(path)?)?;
        return harness::run_fixed(&inst, &a.algorithm, a.seed, a.cap);
    }
    let spec = ExperimentSpec {
        adversary: a.adversary.clone().expect("clap requires it"),
        algorithm: a.algorithm.clone(),
        params: AdversaryParams {
            n: a.n,
            m: a.m,
            c: a.c.clone(),
            levels: a.levels,
            seed: a.seed,
            phases: a.phases,
            size_cap: a.size_cap,
        },
        trials: a.trials,
        cap: a.cap,
    };
    harness::run(&spec)
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { metric } => {
            let space = MetricSpace::from_json(&read(&metric)?)?;
            match metric::validate(&space) {
                Ok(()) => {
                    println!("valid {} metric on {} points", space.kind_name(), space.n());
                    Ok(true)
                }
                Err(v) => {
                    println!("invalid: {v}");
                    Ok(false)
                }
            }
        }
        Command::Solve { instance, out } => {
            let inst = Instance::from_json(&read(&instance)?)?;
            let opt = optimal_rle(&inst.metric, &inst.requests, Start::At(inst.initial_state), &inst.sequence)?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&opt)?)?;
            Ok(true)
        }
        Command::Simulate(a) => {
            let report = simulate(&a)?;
            emit(a.out.as_deref(), &report.to_json())?;
            Ok(true)
        }
        Command::Verify(a) => {
            let report = simulate(&a)?;
            let ledger = harness::Ledger { passed: report.passed, rows: report.checks };
            let mut text = String::new();
            for r in &ledger.rows {
                let tag = if r.pass { "pass" } else { "FAIL" };
                text.push_str(&format!("{tag}  {} [{}]: {} {}\n", r.check, r.scope, r.observed, r.bound));
            }
            text.push_str(if ledger.passed { "all rows pass" } else { "some rows fail" });
            emit(a.out.as_deref(), &text)?;
            Ok(ledger.passed)
        }
        Command::Sweep { grid, out } => {
            let grid: Grid = serde_json::from_str(&read(&grid)?)?;
            match out {
                Some(p) => {
                    let file = fs::File::create(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                    harness::sweep(&grid, file)?;
                }
                None => harness::sweep(&grid, std::io::stdout().lock())?,
            }
            Ok(true)
        }
        Command::Construct { adversary, out } => {
            let value = harness::construct(&adversary.adversary, &adversary.params())?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&value)?)?;
            Ok(true)
        }
        Command::Report { report, pretty } => {
            let value: serde_json::Value = serde_json::from_str(&read(&report)?)?;
            if pretty {
                print!("{}", harness::pretty(&value));
            } else {
                println!("{}", serde_json::to_string(&value)?);
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
