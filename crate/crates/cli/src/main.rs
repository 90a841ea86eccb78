//! `sivsim`: run silicon-vacancy simulations from a config file.
//!
//! Exit codes: 0 on success, 2 for any configuration problem (unreadable
//! file, syntax errors, unknown keys, out-of-range values), 3 for runtime
//! failures (integrator breakdown, failed fits, unwritable output).

use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use sivsim_cli::config::{self, Format, Overrides};
use sivsim_cli::runner;
use sivsim_core::error::SimError;
use sivsim_core::phonon::RateMode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    /// Comma-separated values.
    Csv,
    /// Pretty-printed JSON.
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Low-temperature rate forms.
    AsWritten,
    /// Detailed-balance rate forms.
    DetailedBalance,
}

/// Silicon-vacancy center simulator.
#[derive(Debug, Parser)]
#[command(name = "sivsim", version, about)]
struct Cli {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format (overrides `[output] format`).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,

    /// Worker threads for sweeps.
    #[arg(long, default_value = "1")]
    jobs: NonZeroUsize,

    /// Force the phonon rate mode for every command that uses one.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

fn real_main() -> u8 {
    let cli = Cli::parse();

    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", cli.config.display());
            return 2;
        }
    };

    let overrides = Overrides {
        mode: cli.mode.map(|m| match m {
            ModeArg::AsWritten => RateMode::AsWritten,
            ModeArg::DetailedBalance => RateMode::DetailedBalance,
        }),
        format: cli.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
        out_dir: cli.out.map(|p| p.display().to_string()),
    };

    let raw = match config::parse_text(&text) {
        Ok(r) => r,
        Err(errors) => {
            for e in errors {
                eprintln!("config error: {e}");
            }
            return 2;
        }
    };

    let run = match config::extract(raw, &overrides) {
        Ok(r) => r,
        Err(errors) => {
            for e in errors {
                eprintln!("config error: {e}");
            }
            return 2;
        }
    };

    let artifacts = match runner::artifacts(&run, cli.jobs.get()) {
        Ok(a) => a,
        // Parameter rejections from the core are still configuration
        // problems; everything else is a numerical/runtime failure.
        Err(e @ SimError::InvalidParameter(_)) => {
            eprintln!("config error: {e}");
            return 2;
        }
        Err(e) => {
            eprintln!("run error: {e}");
            return 3;
        }
    };

    let dir = PathBuf::from(&run.out_dir);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("run error: cannot create {}: {e}", dir.display());
        return 3;
    }
    for artifact in &artifacts {
        let path = dir.join(&artifact.name);
        if let Err(e) = std::fs::write(&path, &artifact.content) {
            eprintln!("run error: cannot write {}: {e}", path.display());
            return 3;
        }
        println!("wrote {}", path.display());
    }
    0
}

fn main() -> ExitCode {
    ExitCode::from(real_main())
}
