use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use magsense::error::{Error, Result};
use magsense::harness::validate::{invariant_suite, suite_result};
use magsense::harness::{emit_outputs, run_ensemble, write_bound_csv, ScenarioConfig};

#[derive(Parser)]
#[command(name = "magsense", version, about = "Closed-loop atomic magnetometer simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Also write one CSV per trajectory.
    #[arg(long, global = true)]
    keep_trajectories: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the scenario ensemble and write CSV output plus a manifest.
    Run,
    /// Write the dephasing bound curve for the scenario grid.
    Bounds,
    /// Check the configuration (when given) and run the invariant suite.
    Validate,
}

fn load(cli: &Cli) -> Result<ScenarioConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    match cli.command {
        Command::Run => {
            let cfg = load(cli)?;
            let result = run_ensemble(&cfg, cli.workers)?;
            let paths = emit_outputs(&result, &cfg, &cli.out, cli.keep_trajectories)?;
            println!("{} trajectories, dt = {:e}, summary at {}", result.trajectories.len(), result.dt, paths.summary.display());
        }
        Command::Bounds => {
            let cfg = load(cli)?;
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("bound.csv");
            if !write_bound_csv(&path, &cfg)? {
                return Err(Error::Config("no dephasing bound is defined for this signal model".into()));
            }
            println!("bound written to {}", path.display());
        }
        Command::Validate => {
            if cli.config.is_some() {
                let cfg = load(cli)?;
                println!("config ok: dt = {:e}, {} steps, {} trajectories", cfg.dt(), cfg.n_steps(), cfg.ensemble);
            }
            let checks = invariant_suite();
            for c in &checks {
                println!("{} {:<28} {:.3e} (limit {:.0e})", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value, c.limit);
            }
            std::fs::create_dir_all(&cli.out)?;
            std::fs::write(cli.out.join("validate.json"), serde_json::to_string_pretty(&checks)?)?;
            suite_result(&checks)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
