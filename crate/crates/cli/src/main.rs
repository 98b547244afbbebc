use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use fast_cli::commands::{self, BenchArgs, DetectArgs, FitArgs, PhantomExportArgs, SimulateArgs};
use fast_core::evt::Sided;
use fast_core::fast::Variant;

#[derive(Parser)]
#[command(name = "fast", version, about = "Activation detection in statistical parametric maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phantom utilities.
    Phantom {
        #[command(subcommand)]
        action: PhantomAction,
    },
    /// Simulate phantom time series from a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the AR GLM voxelwise and write the t map.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        design: PathBuf,
        #[arg(long = "pmax", default_value_t = 5)]
        p_max: usize,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Threshold a t map with FAST.
    Detect {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.025)]
        alpha: f64,
        #[arg(long, default_value = "am")]
        variant: Variant,
        #[arg(long, default_value = "one")]
        sided: Sided,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        h_min: f64,
        #[arg(long, default_value_t = 20.0)]
        h_max: f64,
        #[arg(long, default_value_t = 20)]
        max_iter: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Jaccard index of a binary map against a truth map.
    Score {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run the simulation benchmark.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PhantomAction {
    /// Write the label map, truth mask and brain mask.
    Export {
        #[arg(long)]
        out: PathBuf,
        /// Label file to use instead of the bundled phantom.
        #[arg(long)]
        phantom: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Phantom { action: PhantomAction::Export { out, phantom } } => {
            commands::phantom_export(&PhantomExportArgs { out, phantom })?
        }
        Command::Simulate { config, out } => commands::simulate(&SimulateArgs { config, out })?,
        Command::Fit { input, design, p_max, mask, out } => {
            commands::fit(&FitArgs { input, design, p_max, mask, out })?
        }
        Command::Detect { input, alpha, variant, sided, mask, h_min, h_max, max_iter, out } => {
            let state = commands::detect(&DetectArgs { input, alpha, variant, sided, mask, h_min, h_max, max_iter, out })?;
            eprintln!("{} sites active after {} iterations ({:?})", state.n_active(), state.iterations(), state.status());
        }
        Command::Score { map, truth } => println!("{}", commands::score(&map, &truth)?),
        Command::Bench { config, out } => {
            let failures = commands::bench(&BenchArgs { config, out })?;
            if failures > 0 {
                eprintln!("{failures} replicate(s) failed");
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
