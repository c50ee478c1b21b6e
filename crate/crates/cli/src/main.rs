use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinosc_cli::{compare, config::ScenarioConfig, presets, runner, RunError};

/// Spin-oscillator work-exchange scenarios: exact dynamics, work/heat
/// decomposition and work-source quality measures, emitted as CSV.
#[derive(Parser)]
#[command(name = "spinosc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a TOML config file.
    Run {
        config: PathBuf,
        /// Output base directory (default: $SPINOSC_OUT or the working directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named preset scenario.
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the shipped preset names.
    ListPresets,
    /// Compare the CSV outputs of two finished runs.
    Compare { run_a: PathBuf, run_b: PathBuf },
}

fn out_base(cli_out: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os("SPINOSC_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn execute(config: &ScenarioConfig, out: Option<PathBuf>) -> Result<(), RunError> {
    let base = out_base(out);
    let outcome = runner::run_scenario(config, &base)?;
    println!("{}: wrote {} file(s) to {}", config.name, outcome.files.len(), outcome.dir.display());
    for f in &outcome.files {
        println!("  {f}");
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config, out } => {
            let config = ScenarioConfig::from_path(&config)?;
            execute(&config, out)
        }
        Command::Preset { name, out } => {
            let config = presets::by_name(&name).ok_or_else(|| {
                RunError::Validation(format!(
                    "unknown preset '{name}'; available: {}",
                    presets::names().join(", ")
                ))
            })?;
            execute(&config, out)
        }
        Command::ListPresets => {
            for name in presets::names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Compare { run_a, run_b } => {
            let report = compare::compare_report(&run_a, &run_b)?;
            print!("{report}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
