use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;

use commands::Outputs;
use config::RunConfig;
use error::CliError;

/// Sectional solver for collision-induced breakage.
#[derive(Parser, Debug)]
#[command(name = "collbreak", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output_dir`, default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for random grids (overrides `grid.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one problem and write moments, densities and diagnostics.
    Run,
    /// Grid refinement study over the configured families.
    Eoc {
        /// Number of doublings (overrides `eoc.doublings`).
        #[arg(long)]
        doublings: Option<u32>,
    },
    /// Build the configured grid and write it out.
    Grid,
    /// Check a kernel's defining properties.
    ValidateKernel {
        /// `<collision>/<breakage>`, e.g. `product_xy/binary_2_over_y`.
        name: String,
        /// Number of sample pairs.
        #[arg(long, default_value_t = 24)]
        samples: usize,
    },
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cfg.apply_seed(cli.seed);
    let dir = cfg.output_dir(cli.out.as_deref());
    let out = Outputs {
        dir: &dir,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Run => commands::run(&cfg, &out),
        Command::Eoc { doublings } => commands::eoc(&cfg, *doublings, cli.seed, &out),
        Command::Grid => commands::grid(&cfg, &out),
        Command::ValidateKernel { name, samples } => commands::validate_kernel(name, *samples, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("collbreak: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
