mod commands;
mod error;
mod manifest;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "cpi", version, about = "Correlation plenoptic imaging with chaotic light")]
pub struct Cli {
    /// Scenario TOML file; the built-in reference setup when omitted.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Directory for all outputs and manifests.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Monte-Carlo seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct MaskArgs {
    /// Inline slit mask, e.g. `slits:n=3,a=99e-6,d=198e-6`.
    #[arg(long)]
    pub mask: Option<String>,
    /// File whose first non-comment line is a mask spec.
    #[arg(long)]
    pub mask_file: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Analytic correlation tensor of a mask.
    Gamma {
        #[command(flatten)]
        mask: MaskArgs,
        /// Object distance override (m).
        #[arg(long)]
        z_b: Option<f64>,
        /// S_a grid as `points,spacing`; sized from the mask when omitted.
        #[arg(long)]
        grid_a: Option<String>,
        /// S_b grid as `points,spacing`.
        #[arg(long)]
        grid_b: Option<String>,
        #[arg(long, default_value = "gamma.cpig")]
        output: String,
    },
    /// Refocused image of a tensor file.
    Refocus {
        tensor: PathBuf,
        #[arg(long, default_value = "refocused.csv")]
        output: String,
    },
    /// Ghost image (sum over S_b) of a tensor file.
    Ghost {
        tensor: PathBuf,
        #[arg(long, default_value = "ghost.csv")]
        output: String,
    },
    /// Monte-Carlo speckle frames and the estimated correlation tensor.
    Speckle {
        #[command(flatten)]
        mask: MaskArgs,
        #[arg(long)]
        z_b: Option<f64>,
        /// Total frames in the stack.
        #[arg(long, default_value_t = 10_000)]
        frames: usize,
        /// S_a pixels (each `pixel_dx` wide).
        #[arg(long, default_value_t = 128)]
        pixels_a: usize,
        /// S_b pixels (each `pixel_du` wide).
        #[arg(long, default_value_t = 64)]
        pixels_b: usize,
        /// Frames per chunk on disk.
        #[arg(long, default_value_t = cpi_core::io::DEFAULT_CHUNK_FRAMES)]
        chunk: usize,
        /// Continue an existing stack up to `--frames`.
        #[arg(long)]
        resume: bool,
        /// Fourier clean-up of the estimate: `lowpass=...,threshold=...` or `default`.
        #[arg(long)]
        postprocess: Option<String>,
        #[arg(long, default_value = "frames.cpfs")]
        output: String,
        #[arg(long, default_value = "gamma_estimate.cpig")]
        tensor_output: String,
    },
    /// Correlation tensor estimated from a frame stack.
    Estimate {
        frames: PathBuf,
        /// Bin S_a pixels by this factor first.
        #[arg(long, default_value_t = 1)]
        bin_a: usize,
        #[arg(long, default_value_t = 1)]
        bin_b: usize,
        #[arg(long)]
        postprocess: Option<String>,
        #[arg(long, default_value = "gamma_estimate.cpig")]
        output: String,
    },
    /// Double-slit visibility maps over separation and defocus.
    Vismap {
        /// Modalities: standard, standard-pi:N, cpi, cpi-coherent.
        #[arg(long, value_delimiter = ',', default_value = "standard,standard-pi:3,cpi")]
        modality: Vec<String>,
        /// Slit separations in units of the focused resolution.
        #[arg(long, default_value = "2:20:10")]
        d_range: String,
        /// Defocus z_b - z_a (m).
        #[arg(long, default_value = "-0.03:0.03:31")]
        z_range: String,
        #[arg(long, default_value = "vismap")]
        prefix: String,
    },
    /// Depth of field of standard, plenoptic and CPI imaging against resolution.
    Dof {
        /// Slit separations in units of the focused resolution.
        #[arg(long, default_value = "2:20:10")]
        d_range: String,
        /// Slit separations in metres; overrides --d-range.
        #[arg(long)]
        d: Option<String>,
        /// Pixels per microlens of the plenoptic comparison.
        #[arg(long, default_value_t = 3)]
        n_u: u32,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
        #[arg(long, default_value = "dof")]
        prefix: String,
    },
    /// Geometric refocusing range against slit separation.
    Bound {
        #[arg(long, default_value = "2:20:10")]
        d_range: String,
        #[arg(long)]
        d: Option<String>,
        #[arg(long, default_value = "bound.csv")]
        output: String,
    },
    /// Re-checks the output checksums of manifests (all in --out-dir by default).
    Verify { manifests: Vec<PathBuf> },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    commands::dispatch(&cli)
}
