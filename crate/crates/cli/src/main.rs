use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spinsqueeze::harness::{
    delta_sweep, imperfection_sweep, run_husimi, run_scenario, scaling_sweep, write_husimi_outputs,
    write_scenario_outputs, ScenarioConfig,
};
use spinsqueeze::{Error, Result};

/// Spin squeezing of a collective spin coupled to a driven partner ensemble.
#[derive(Parser)]
#[command(name = "spinsqueeze", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one scenario and write its squeezing trace and summary.
    Evolve(Common),
    /// Optimal squeezing versus N over `n_list`, with log-log fits.
    SweepScaling(Common),
    /// Optimal squeezing versus `epsilon` or `epsilon_prime` over `values`.
    SweepImperfection(Common),
    /// Full versus effective optimal squeezing over `delta_list`.
    SweepDelta(Common),
    /// Husimi Q maps at `husimi_fractions` of the optimal squeezing time.
    Husimi(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output prefix; overrides `output_prefix` in the file.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads for sweeps and Husimi grids.
    #[arg(long)]
    workers: Option<usize>,
}

fn load(c: &Common) -> Result<(ScenarioConfig, String)> {
    let config = ScenarioConfig::from_file(&c.config)?;
    if c.workers == Some(0) {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let prefix = c.out.clone().unwrap_or_else(|| config.output_prefix.clone());
    Ok((config, prefix))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Evolve(c) => {
            let (config, prefix) = load(&c)?;
            let outcome = run_scenario(&config)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            write_scenario_outputs(&config, &outcome, &prefix)
        }
        Command::SweepScaling(c) => {
            let (config, prefix) = load(&c)?;
            scaling_sweep(&config, &config.n_list, c.workers)?.write_outputs(&prefix)
        }
        Command::SweepImperfection(c) => {
            let (config, prefix) = load(&c)?;
            let vary = config
                .vary
                .ok_or_else(|| Error::Config("missing required key `vary`".into()))?;
            imperfection_sweep(&config, vary, &config.values, c.workers)?.write_outputs(&prefix)
        }
        Command::SweepDelta(c) => {
            let (config, prefix) = load(&c)?;
            delta_sweep(&config, &config.delta_list, c.workers)?.write_outputs(&prefix)
        }
        Command::Husimi(c) => {
            let (config, prefix) = load(&c)?;
            let h = run_husimi(&config, c.workers)?;
            write_husimi_outputs(&config, &h, &prefix)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
