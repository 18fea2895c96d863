//! `ptq` — post-training quantization toolkit over tensor dumps.
//!
//! Subcommands wire the library pipeline to files: `calibrate` estimates
//! clipping ranges, `quantize` writes fake-quantized dumps, `analyze`
//! compares two dumps, `ablate` runs leave-one-out variants, `sweep` runs
//! axis grids, and `synth` generates synthetic dumps. All commands accept
//! `--seed` (falling back to the `PTQ_SEED` environment variable) and embed
//! their resolved configuration in every artifact they produce.
//!
//! Exit codes: 0 success, 2 usage/configuration error, 3 data error,
//! 4 numerical non-convergence.

use clap::{Parser, Subcommand};
use thiserror::Error;

mod atomic;
mod commands;
mod config;

use commands::{ablate, analyze, calibrate, quantize, sweep, synth};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    NonConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::NonConvergence(_) => 4,
        }
    }
}

impl From<ptq_core::manifest::ManifestError> for CliError {
    fn from(e: ptq_core::manifest::ManifestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ptq_core::npy::NpyError> for CliError {
    fn from(e: ptq_core::npy::NpyError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ptq_core::calibrate::CalibError> for CliError {
    fn from(e: ptq_core::calibrate::CalibError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ptq_core::ranges::RangesError> for CliError {
    fn from(e: ptq_core::ranges::RangesError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ptq_core::uniform::QuantError> for CliError {
    fn from(e: ptq_core::uniform::QuantError) -> Self {
        match e {
            ptq_core::uniform::QuantError::InvalidBitWidth(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ptq_core::piecewise::PwError> for CliError {
    fn from(e: ptq_core::piecewise::PwError) -> Self {
        match e {
            ptq_core::piecewise::PwError::NonConvergence(_) => CliError::NonConvergence(e.to_string()),
            ptq_core::piecewise::PwError::Quant(q) => q.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ptq_core::metrics::AnalysisError> for CliError {
    fn from(e: ptq_core::metrics::AnalysisError) -> Self {
        match e {
            ptq_core::metrics::AnalysisError::Piecewise(pw) => pw.into(),
            ptq_core::metrics::AnalysisError::Quant(q) => q.into(),
            ptq_core::metrics::AnalysisError::EmptyAxis(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "ptq", version, about = "Post-training quantization toolkit for tensor dumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate clipping ranges from a calibration subset and write the
    /// ranges JSON file.
    Calibrate(calibrate::CalibrateArgs),
    /// Fake-quantize a dump against a ranges file, mirroring its layout.
    Quantize(quantize::QuantizeArgs),
    /// Compare an original dump against a reconstructed one and write an
    /// error report.
    Analyze(analyze::AnalyzeArgs),
    /// Run leave-one-out ablation variants from a plan file.
    Ablate(ablate::AblateArgs),
    /// Run a Cartesian sweep over calibration and quantization axes.
    Sweep(sweep::SweepArgs),
    /// Generate a synthetic tensor dump from a distribution spec file.
    Synth(synth::SynthArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate(args) => calibrate::run(args),
        Command::Quantize(args) => quantize::run(args),
        Command::Analyze(args) => analyze::run(args),
        Command::Ablate(args) => ablate::run(args),
        Command::Sweep(args) => sweep::run(args),
        Command::Synth(args) => synth::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
