use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use soliton_cli::{CliResult, Source, Status};
use soliton_core::PetviashviliOptions;

/// Stationary nonlinear Schrödinger solitons on periodic lattices.
#[derive(Debug, Parser)]
#[command(name = "soliton", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Built-in experiment (see `soliton presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML experiment description.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a previously written `field_<λ>.f64`.
    #[arg(long)]
    seed_field: Option<PathBuf>,
    /// Halve points per axis and box length (same spacing).
    #[arg(long)]
    half_box: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl SourceArgs {
    fn source(&self) -> Source {
        Source {
            preset: self.preset.clone(),
            config: self.config.clone(),
            seed_field: self.seed_field.clone(),
            half_box: self.half_box,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Newton–GMRES solve at one λ.
    Solve {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
    },
    /// Continuation in λ along every path of the experiment.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        /// Halve the λ step after a failed point (a few times at most).
        #[arg(long)]
        auto_refine: bool,
    },
    /// Solve for (u, λ) at prescribed power ‖u‖² = norm².
    FixedNorm {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        norm: f64,
        #[arg(long, allow_hyphen_values = true)]
        lambda0: Option<f64>,
    },
    /// Petviashvili baseline (Kerr models).
    Petviashvili {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1.5)]
        gamma: f64,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
    },
    /// List the built-in experiments.
    Presets,
}

fn run(cli: Cli) -> CliResult<Status> {
    match cli.command {
        Command::Solve { source, lambda } => soliton_cli::solve(&source.source(), lambda, &source.out),
        Command::Sweep { source, auto_refine } => soliton_cli::sweep(&source.source(), auto_refine, &source.out),
        Command::FixedNorm { source, norm, lambda0 } => {
            soliton_cli::fixed_norm(&source.source(), norm, lambda0, &source.out)
        }
        Command::Petviashvili {
            source,
            lambda,
            gamma,
            max_iters,
        } => {
            let opts = PetviashviliOptions {
                gamma,
                max_iters,
                ..PetviashviliOptions::default()
            };
            soliton_cli::petviashvili_run(&source.source(), lambda, opts, &source.out)
        }
        Command::Presets => {
            print!("{}", soliton_cli::preset_listing());
            Ok(Status::Success)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Usage as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Status::Usage as u8)
        }
    }
}
