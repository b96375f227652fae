use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cohevo::artifacts::{execute, write_study};
use cohevo::config::RunConfig;
use cohevo::evolution::RunStatus;
use cohevo::harness::{convergence_study, StudySpec};
use cohevo::verify::verify_run;
use cohevo::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser)]
#[command(name = "cohevo", version, about = "Quasistatic cohesive crack growth along a prescribed path")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an evolution and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's output_dir, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop at the first non-converged step and exit with status 2.
        #[arg(long)]
        strict: bool,
        /// Seed for the stability competitors.
        #[arg(long)]
        seed: Option<u64>,
        /// Snapshot times, comma separated.
        #[arg(long, value_delimiter = ',')]
        snapshots: Option<Vec<f64>>,
    },
    /// Check the invariants of an existing run directory.
    Verify {
        /// Run directory produced by `run`.
        #[arg(long = "out", alias = "dir")]
        dir: Option<PathBuf>,
        #[arg(value_name = "DIR")]
        positional: Option<PathBuf>,
    },
    /// Run a time-refinement study and write the convergence table.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("COHEVO_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("COHEVO_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn cmd_run(config: &Path, out: Option<PathBuf>, strict: bool, seed: Option<u64>, snapshots: Option<Vec<f64>>) -> u8 {
    let mut cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    cfg.continue_on_nonconvergence = !strict;
    if let Some(s) = seed {
        cfg.verification.seed = s;
    }
    if let Some(s) = snapshots {
        cfg.snapshots = s;
    }
    let dir = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(e @ Error::NotConverged { .. }) => {
            eprintln!("error: {e}");
            return EXIT_NOT_CONVERGED;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = outcome.write(&dir) {
        eprintln!("error: cannot write artifacts to {}: {e}", dir.display());
        return EXIT_CONFIG;
    }
    let r = &outcome.report;
    println!(
        "{} steps, max |balance residual| {:.3e} (peak energy {:.6e}), artifacts in {}",
        r.steps,
        r.balance.max_abs_residual,
        r.balance.peak_energy,
        dir.display()
    );
    match &r.status {
        RunStatus::Complete => 0,
        RunStatus::Aborted { step } => {
            eprintln!("error: step {step} did not converge; run aborted");
            EXIT_NOT_CONVERGED
        }
        RunStatus::Poisoned { steps } => {
            log::warn!("non-converged steps {steps:?}; the trace is marked poisoned");
            eprintln!("warning: {} non-converged steps: {steps:?}", steps.len());
            0
        }
    }
}

fn cmd_verify(dir: &Path) -> u8 {
    let report = match verify_run(dir) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    for c in &report.checks {
        let knot = c.knot.map(|k| format!(" (knot {k})")).unwrap_or_default();
        println!(
            "{} {}: measured {:.6e}, threshold {:.6e}{knot}; {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.threshold,
            c.detail
        );
    }
    if report.passed() {
        0
    } else {
        for c in report.failures() {
            let knot = c.knot.map(|k| format!(" at knot {k}")).unwrap_or_default();
            eprintln!("invariant violated: {}{knot}", c.name);
        }
        EXIT_INVARIANT
    }
}

fn cmd_study(config: &Path, out: Option<PathBuf>) -> u8 {
    let spec = match StudySpec::load(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = match convergence_study(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let dir = out.unwrap_or_else(|| PathBuf::from("study"));
    if let Err(e) = write_study(&dir, &result) {
        eprintln!("error: cannot write the study to {}: {e}", dir.display());
        return EXIT_CONFIG;
    }
    for l in &result.levels {
        println!(
            "steps {:>6}: max |balance residual| {:.6e}{}",
            l.steps,
            l.max_abs_balance_residual,
            l.balance_factor.map(|f| format!(", reduction {f:.3}")).unwrap_or_default()
        );
    }
    for r in result.rows.iter().filter(|r| r.energy_rate.is_some() || r.gamma_rate.is_some() || r.h1_rate.is_some()) {
        let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "t = {}, steps {}: rates energy {}, gamma {}, h1 {}",
            r.checkpoint,
            r.steps,
            show(r.energy_rate),
            show(r.gamma_rate),
            show(r.h1_rate)
        );
    }
    if result.passed() {
        println!("study passed; table in {}", dir.display());
        0
    } else {
        for f in &result.failures {
            eprintln!("threshold missed: {f}");
        }
        EXIT_CONFIG
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let code = match cli.command {
        Command::Run {
            config,
            out,
            strict,
            seed,
            snapshots,
        } => cmd_run(&config, out, strict, seed, snapshots),
        Command::Verify { dir, positional } => match dir.or(positional) {
            Some(d) => cmd_verify(&d),
            None => {
                eprintln!("error: verify needs a run directory");
                EXIT_CONFIG
            }
        },
        Command::Study { config, out } => cmd_study(&config, out),
    };
    ExitCode::from(code)
}

