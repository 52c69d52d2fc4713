mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use plateau_core::reflection::Half;
use plateau_core::solver::GluingMode;

/// Three glued minimal sheets spanning a three-arc boundary graph.
///
/// Exit status: 0 success, 1 input or runtime error, 2 solver stopped at the
/// iteration limit or a check threshold failed, 3 the chosen reflection point
/// is a branch point, 4 a curve fit residual exceeded its threshold.
#[derive(Parser, Debug)]
#[command(name = "plateau", version, after_long_help = config::defaults_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize the weighted energy and write sheet_{1,2,3}.obj and report.json.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Radial resolution R of each sheet; the angular resolution is 2R.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Recompute diagnostics from exported sheets and compare with thresholds.
    Check {
        /// Directory holding sheet_{1,2,3}.obj and optionally report.json.
        solution: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Reflect one sheet across the junction and certify harmonicity.
    Reflect {
        solution: PathBuf,
        /// Sheet to reflect, 1 to 3.
        #[arg(long, default_value_t = 1)]
        sheet: usize,
        /// Junction node to test for branching; defaults to the middle node.
        #[arg(long)]
        node: Option<usize>,
        /// Output directory; defaults to the solution directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Extend a curve with three balanced conormals into minimal patches.
    Bjorling {
        /// Curve JSON with keys t, gamma, normal and optionally kind.
        curve: PathBuf,
        #[arg(long, value_enum, default_value_t = HalfArg::Plus)]
        half: HalfArg,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Identity,
    Sliding,
}

impl From<ModeArg> for GluingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Identity => GluingMode::Identity,
            ModeArg::Sliding => GluingMode::Sliding,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HalfArg {
    Plus,
    Minus,
}

impl From<HalfArg> for Half {
    fn from(h: HalfArg) -> Self {
        match h {
            HalfArg::Plus => Half::Plus,
            HalfArg::Minus => Half::Minus,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, out, mode, seed, resolution } => {
            commands::solve(config.as_deref(), &out, mode.map(Into::into), seed, resolution)
        }
        Command::Check { solution, config } => commands::check(&solution, config.as_deref()),
        Command::Reflect { solution, sheet, node, out, config } => {
            commands::reflect(&solution, sheet, node, out.as_deref(), config.as_deref())
        }
        Command::Bjorling { curve, half, out, config } => commands::bjorling(&curve, half.into(), &out, config.as_deref()),
    };
    match result {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::Status::Error as u8)
        }
    }
}
