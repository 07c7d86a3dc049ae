//! `finsler`: command-line front end for the `finsler` crate.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for
//! usage or configuration errors.

mod commands;
mod config;
mod output;
mod pond_demo;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Format;

#[derive(Parser)]
#[command(name = "finsler", version, about = "Finsler geometry checks, scans and wavefronts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// Preset name or path to a metric spec JSON file.
    #[arg(long)]
    pub metric: Option<String>,
    /// Dimension for presets (default 2).
    #[arg(long)]
    pub n: Option<usize>,
    /// Curvature parameter C (default 1).
    #[arg(long = "C", value_name = "C")]
    pub c: Option<f64>,
    /// Run configuration JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed; overrides FINSLER_SEED and the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (or directory for multi-file commands).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a structure: positivity, homogeneity, convexity, Euler identity.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Flag-curvature scan over random flags.
    Curvature {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Fail unless the scan is constant and equal to this value.
        #[arg(long, allow_hyphen_values = true)]
        expect: Option<f64>,
    },
    /// Integrate a geodesic and write its samples as CSV.
    Geodesic {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, allow_hyphen_values = true)]
        y0: String,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = finsler::geodesics::DEFAULT_STEP)]
        step: f64,
    },
    /// Transnormality and wavefront radii on levels of a scalar field.
    Wavefront {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        profile: commands::ProfileArgs,
        /// Comma-separated level values.
        #[arg(long, default_value = "1,2,4", allow_hyphen_values = true)]
        levels: String,
        /// Sampled points per level.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Vertices per exported level polyline (planar, with critical point).
        #[arg(long, default_value_t = 64)]
        points: usize,
    },
    /// Rigidity verdict for the round-sphere model with parameter C.
    Rigidity {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Topological label of a transnormal profile.
    Classify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        profile: commands::ProfileArgs,
    },
    /// Reproduce the rotating-pond example and write all artifacts.
    PondDemo {
        /// Artifact directory.
        #[arg(long, default_value = "pond-demo")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sampled points per level.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { common, samples } => commands::check(&common, samples),
        Command::Curvature {
            common,
            samples,
            expect,
        } => commands::curvature(&common, samples, expect),
        Command::Geodesic {
            common,
            x0,
            y0,
            t_max,
            step,
        } => commands::geodesic(&common, &x0, &y0, t_max, step),
        Command::Wavefront {
            common,
            profile,
            levels,
            samples,
            points,
        } => commands::wavefront(&common, &profile, &levels, samples, points),
        Command::Rigidity { common, samples } => commands::rigidity(&common, samples),
        Command::Classify { common, profile } => commands::classify(&common, &profile),
        Command::PondDemo {
            out,
            seed,
            config,
            samples,
        } => pond_demo::run(&out, seed, config.as_deref(), samples),
    };
    match result {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(commands::CmdError::Failed(e)) => {
            eprintln!("check failed: {e:#}");
            ExitCode::from(1)
        }
        Err(commands::CmdError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
