//! `wavegen` — autoregressive raw-audio generation over 8-bit, 16 kHz
//! waveforms.
//!
//! Subcommands mirror the pipeline: `prepare` caches quantized training
//! windows from a WAV manifest, `train` fits one of the model presets,
//! `eval` scores checkpoints with top-5 accuracy and NLL, and `generate`
//! samples new audio from a checkpoint. Options may come from a plain-text
//! key=value config file (`--config`); command-line flags win. Every run
//! directory receives the fully resolved configuration as
//! `config.resolved`, which together with the seed reproduces the run.
//! Thread count is controlled only by the RAYON_NUM_THREADS environment
//! variable.

mod commands;
mod runconfig;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "wavegen", version, about = "Raw-waveform generative models: causal transformer vs dilated-convolution baseline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode, resample, quantize and window a WAV corpus into a cache.
    Prepare(PrepareArgs),
    /// Train a model preset on a prepared cache or raw manifest.
    Train(TrainArgs),
    /// Score checkpoints on a test corpus (top-5 accuracy, mean NLL).
    Eval(EvalArgs),
    /// Sample audio autoregressively from a checkpoint.
    Generate(GenerateArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Plain-text key=value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for this run's artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for all randomness in the run.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct PrepareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Manifest: one WAV path per line, relative paths resolved against
    /// the manifest's directory.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Quantization scheme: linear | mu-law.
    #[arg(long)]
    scheme: Option<String>,
    /// Context length in samples (default 1600 = 100 ms).
    #[arg(long)]
    t_ctx: Option<usize>,
    /// Window stride in samples (default t_ctx/2).
    #[arg(long)]
    stride: Option<usize>,
    /// Also store the 4000-sample past window for the conditioned model.
    #[arg(long)]
    with_past: bool,
    /// Extra augmented variants (amplitude scale + time shift) per track.
    #[arg(long)]
    augment_copies: Option<usize>,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Prepared cache directory (from `prepare`).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Raw manifest; windows are prepared in memory when no cache is given.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Model preset: wavenet-vanilla | wavenet-stacked | xf-3 | xf-3-cond |
    /// xf-6 | xf-8 | custom (custom reads its architecture from --config).
    #[arg(long)]
    model: Option<String>,
    /// Quantization scheme: linear | mu-law.
    #[arg(long)]
    scheme: Option<String>,
    /// Context length in samples.
    #[arg(long)]
    t_ctx: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Extra augmented variants per track (manifest path only).
    #[arg(long)]
    augment_copies: Option<usize>,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Checkpoint(s) to score; repeat the flag for a multi-row report.
    #[arg(long = "checkpoint", required = true)]
    checkpoints: Vec<PathBuf>,
    /// Prepared test cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Raw test manifest (windows prepared in memory, never augmented).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Random subsample size, in windows, per the evaluation protocol.
    #[arg(long)]
    max_windows: Option<usize>,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Seed material: noise | silence | snippet:<wav-path>.
    #[arg(long)]
    seed_source: Option<String>,
    /// Number of samples to generate [default: 16000].
    #[arg(long)]
    n_samples: Option<usize>,
    /// Softmax temperature (> 0), or "argmax" [default: 1.0].
    #[arg(long)]
    temperature: Option<String>,
    /// Prepend the seed material to the emitted audio [default: true].
    #[arg(long)]
    include_seed: Option<bool>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(args) => commands::prepare(args),
        Command::Train(args) => commands::train(args),
        Command::Eval(args) => commands::eval(args),
        Command::Generate(args) => commands::generate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
