use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gyrokin::flow::read_trace;
use gyrokin::harness::{run_epsilon_sweep, run_norm_checks, run_stability, ScenarioConfig};
use gyrokin::measures::{read_snapshot, Snapshot};
use gyrokin::transport::w1_exact;
use gyrokin::verify::{run_suite, Budget};
use gyrokin::{Error, Result};

/// Gyrokinetic particle simulations and checks of their stability estimates.
#[derive(Parser, Debug)]
#[command(name = "gyrokin", version)]
struct Cli {
    /// Scenario configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "gyrokin-out")]
    out: PathBuf,
    /// Overrides the configured sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run on a single thread so output bits do not depend on the machine.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a base and shifted solutions and compare Q(t) with the stability envelope.
    RunStability,
    /// Compare solutions at ε and ε/2 for every configured ε.
    SweepEpsilon,
    /// Tabulate L^p and weighted norms of the transported density.
    CheckNorms,
    /// W1 distance between two snapshot or trace files.
    W1 {
        a: PathBuf,
        b: PathBuf,
        /// Snapshot time to use when an input is a trace (default: last).
        #[arg(long)]
        time: Option<f64>,
    },
    /// Run the sampled property checks.
    Verify {
        /// Smaller samples for a fast smoke run.
        #[arg(long)]
        quick: bool,
    },
}

enum Outcome {
    Held,
    Violated,
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::from_file(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_snapshot(path: &Path, time: Option<f64>) -> Result<Snapshot> {
    let mut r = BufReader::new(File::open(path)?);
    let is_trace = r.fill_buf()?.starts_with(b"#trace");
    if !is_trace {
        return read_snapshot(&mut r)?
            .ok_or_else(|| Error::Parse(format!("{} holds no snapshot", path.display())));
    }
    let trace = read_trace(&mut r)?;
    let found = match time {
        Some(t) => trace.at(t).cloned(),
        None => trace.snapshots.last().cloned(),
    };
    found.ok_or_else(|| Error::Parse(format!("{} has no snapshot at the requested time", path.display())))
}

fn run(cli: &Cli) -> Result<Outcome> {
    let held = |v: usize| if v == 0 { Outcome::Held } else { Outcome::Violated };
    match &cli.command {
        Command::RunStability => {
            let cfg = load_config(cli)?;
            let out = run_stability(&cfg, &cli.out)?;
            for (h, rep) in &out.reports {
                let last = rep.rows.last().expect("at least one row");
                println!(
                    "shift {h}: Q(T) = {:.6e}, W1(T) = {:.6e}, envelope(T) = {:.6e}, {} violations",
                    last.q,
                    last.w1,
                    last.envelope,
                    rep.violations().len()
                );
            }
            Ok(held(out.violations))
        }
        Command::SweepEpsilon => {
            let cfg = load_config(cli)?;
            let out = run_epsilon_sweep(&cfg, &cli.out)?;
            let s = &out.summary;
            for (e, w) in s.eps.iter().zip(&s.final_w1) {
                println!("eps {e}: W1(T) = {w:.6e}");
            }
            match s.slope {
                Some(k) => println!("log-log slope {k:.3}, monotone {}", s.monotone),
                None => println!("log-log slope undefined, monotone {}", s.monotone),
            }
            Ok(held(s.envelope_violations))
        }
        Command::CheckNorms => {
            let cfg = load_config(cli)?;
            let out = run_norm_checks(&cfg, &cli.out)?;
            let s = &out.summary;
            println!(
                "max relative drift: L1 {:.3e}, L2 {:.3e}, Linf {:.3e}",
                s.max_drift[0], s.max_drift[1], s.max_drift[2]
            );
            println!("weighted norm above bound at {} snapshots", s.gamma_violations);
            Ok(held(s.drift_violations + s.gamma_violations))
        }
        Command::W1 { a, b, time } => {
            let sa = load_snapshot(a, *time)?;
            let sb = load_snapshot(b, *time)?;
            let (w, _) = w1_exact(&sa.ensemble, &sb.ensemble)?;
            println!("{w}");
            Ok(Outcome::Held)
        }
        Command::Verify { quick } => {
            let seed = cli.seed.unwrap_or(7);
            let budget = if *quick { Budget::quick() } else { Budget::full() };
            let results = run_suite(budget, seed)?;
            for r in &results {
                println!("{r}");
            }
            Ok(held(results.iter().filter(|r| !r.passed).count()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = if cli.deterministic { Some(1) } else { cli.threads };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(Outcome::Held) => ExitCode::SUCCESS,
        Ok(Outcome::Violated) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
