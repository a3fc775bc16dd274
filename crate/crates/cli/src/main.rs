//! `spheresweep`: dataset generation, sweep volumes, α estimation, rendering,
//! evaluation and viewer export from one binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spheresweep::alpha::Activation;
use spheresweep::Error;

use config::{AlphaMethod, EvalSplit, PipelineConfig};

#[derive(Parser, Debug)]
#[command(name = "spheresweep", version, about = "Multi-sphere images from multi-fisheye rigs")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the config file.
#[derive(Args, Debug, Clone, Default)]
struct GlobalArgs {
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    layers: Option<usize>,
    #[arg(long, global = true, value_name = "M")]
    near: Option<f64>,
    #[arg(long, global = true, value_name = "M")]
    far: Option<f64>,
    #[arg(long, global = true, value_enum)]
    alpha_method: Option<AlphaMethod>,
    #[arg(long, global = true, value_parser = parse_activation)]
    activation: Option<Activation>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dataset root (directory holding manifest.json).
    #[arg(long, global = true, value_name = "DIR")]
    dataset: Option<PathBuf>,
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic dataset into the output directory.
    Gen,
    /// Build the sweep volume of one dataset location.
    Sweep {
        #[arg(long, default_value_t = 0)]
        location: u32,
    },
    /// Estimate α for a sweep volume and assemble the multi-sphere image.
    Alpha { wssv: PathBuf },
    /// Render a multi-sphere image from a world-space eye pose.
    Render(commands::RenderArgs),
    /// Run the pipeline on dataset locations and score renders at the sensor poses.
    Eval {
        #[arg(long, value_enum)]
        split: Option<EvalSplit>,
        /// Score this prebuilt multi-sphere image instead (needs --location).
        #[arg(long, requires = "location")]
        msi: Option<PathBuf>,
        #[arg(long)]
        location: Option<u32>,
    },
    /// Write a viewer bundle (PNG layers plus manifest).
    Export { msi: PathBuf },
}

fn resolve(global: &GlobalArgs) -> spheresweep::Result<PipelineConfig> {
    let mut cfg = match &global.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = global.seed {
        cfg.seed = v;
    }
    if let Some(v) = global.layers {
        cfg.sweep.layers = v;
    }
    if let Some(v) = global.near {
        cfg.sweep.near = v;
    }
    if let Some(v) = global.far {
        cfg.sweep.far = v;
    }
    if let Some(v) = global.alpha_method {
        cfg.alpha.method = v;
    }
    if let Some(v) = global.activation {
        cfg.alpha.activation = v;
    }
    if let Some(v) = &global.out {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = &global.dataset {
        cfg.dataset_dir = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Format { .. } | Error::MissingFile(_) | Error::Io(_) | Error::Image(_) | Error::Json(_) => 3,
        Error::Domain(_) | Error::Precondition(_) | Error::Shape(_) => 4,
    }
}

fn run(cli: Cli) -> spheresweep::Result<()> {
    let cfg = resolve(&cli.global)?;
    match cli.command {
        Command::Gen => commands::gen(&cfg),
        Command::Sweep { location } => commands::sweep(&cfg, location).map(drop),
        Command::Alpha { wssv } => commands::alpha(&cfg, &wssv).map(drop),
        Command::Render(args) => commands::render(&cfg, &args).map(drop),
        Command::Eval { split, msi, location } => commands::eval(&cfg, split, msi.as_deref(), location),
        Command::Export { msi } => commands::export(&cfg, &msi),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
