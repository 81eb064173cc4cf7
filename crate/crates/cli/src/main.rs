use std::path::PathBuf;
use std::process::ExitCode;

use alesbm_core::cases::{manufactured_residual, Kidder};
use alesbm_core::config::RunConfig;
use alesbm_core::runner::{convergence_sweep, run};
use clap::{Parser, Subcommand};

/// Worker-thread count for the parallel stages; unset means one per core.
const THREADS_ENV: &str = "ALESBM_THREADS";

const VERIFY_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(
    name = "alesbm",
    version,
    about = "High-order ALE finite-volume Euler solver with shifted-boundary correction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case to its final time.
    Run { config: PathBuf },
    /// Run the case on every `[[sweep]]` mesh and print the convergence table.
    Sweep { config: PathBuf },
    /// Check the analytic reference solutions.
    Verify,
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV}={value:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn verify() -> Result<(), String> {
    let mut worst = 0.0f64;
    let n = 16;
    for i in 0..=n {
        for j in 0..=n {
            let x = [-1.5 + 3.0 * i as f64 / n as f64, -1.5 + 3.0 * j as f64 / n as f64];
            let r = manufactured_residual(x, 1e-5).map_err(|e| e.to_string())?;
            worst = r.iter().fold(worst, |m, v| m.max(v.abs()));
        }
    }
    let (entropy, compression) = Kidder::default().identity_errors(40);
    let checks = [
        ("manufactured residual", worst),
        ("kidder entropy", entropy),
        ("kidder self-similarity", compression),
    ];
    let mut ok = true;
    for (name, err) in checks {
        let pass = err <= VERIFY_TOL;
        ok &= pass;
        println!(
            "{} {name}: max error {err:.3e} (tolerance {VERIFY_TOL:.0e})",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    ok.then_some(()).ok_or_else(|| "verification failed".to_string())
}

fn execute(cli: Cli) -> Result<(), String> {
    configure_threads()?;
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config).map_err(|e| e.to_string())?;
            let report = run(&cfg).map_err(|e| e.to_string())?;
            print!("{}{}", report.summary(), report.timings());
        }
        Command::Sweep { config } => {
            let cfg = RunConfig::load(&config).map_err(|e| e.to_string())?;
            let table = convergence_sweep(&cfg).map_err(|e| e.to_string())?;
            print!("{}", table.to_csv());
        }
        Command::Verify => verify()?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
