//! Axis sweeps: Cartesian products of calibration and quantization settings,
//! one full calibrate → quantize → measure run per cell.
//!
//! Cell seeds derive from `(global seed, cell index)`, so extending an axis
//! appends cells without perturbing existing ones. A failing cell records an
//! error string in its row instead of aborting the sweep.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ablation::{QuantizerSelect, SchemeKind, TensorQuantizer};
use crate::calibrate::{calibrate_all, sample_calibration, ClipConfig, ClipStrategy, SamplingKind, SamplingMode};
use crate::manifest::{DumpManifest, WEIGHT_TAG};
use crate::metrics::{AnalysisError, MetricAccumulator, MetricTuple};
use crate::piecewise::BreakpointMode;
use crate::seed::derive_seed;
use crate::tensor::Tensor;

impl std::fmt::Display for ClipStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClipStrategy::Median => write!(f, "median"),
            ClipStrategy::Average => write!(f, "average"),
        }
    }
}

impl std::fmt::Display for SamplingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SamplingKind::Random => "random",
            SamplingKind::PreferShort => "prefer-short",
            SamplingKind::PreferLong => "prefer-long",
            SamplingKind::Uniform => "uniform",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub strategies: Vec<ClipStrategy>,
    pub k_values: Vec<usize>,
    pub bit_widths: Vec<u32>,
    pub schemes: Vec<SchemeKind>,
    pub calib_sizes: Vec<usize>,
    pub sampling_modes: Vec<SamplingKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub axes: SweepAxes,
    pub seed: u64,
    /// Bin count for Uniform sampling cells.
    pub bins: usize,
    pub group_by_tag: bool,
    pub breakpoint_mode: BreakpointMode,
    pub m: f64,
    pub n: f64,
}

impl SweepConfig {
    pub fn new(axes: SweepAxes, seed: u64) -> Self {
        Self {
            axes,
            seed,
            bins: 10,
            group_by_tag: true,
            breakpoint_mode: BreakpointMode::ClosedForm,
            m: crate::piecewise::DEFAULT_BREAK_M,
            n: crate::piecewise::DEFAULT_BREAK_N,
        }
    }
}

/// One cell of the sweep: the axis values plus the measured metrics, or an
/// error string when the cell failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: ClipStrategy,
    pub k: usize,
    pub bits: u32,
    pub scheme: SchemeKind,
    pub calib_size: usize,
    pub sampling: SamplingKind,
    pub cell_seed: u64,
    #[serde(flatten)]
    pub metrics: Option<MetricTuple>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub config_echo: serde_json::Value,
}

/// Run the Cartesian product of all axes. Row order is the odometer order of
/// the axes as listed in [`SweepAxes`], sampling mode fastest.
pub fn run_sweep(manifest: &DumpManifest, config: &SweepConfig) -> Result<SweepTable, AnalysisError> {
    let axes = &config.axes;
    check_axis("strategies", axes.strategies.len())?;
    check_axis("k_values", axes.k_values.len())?;
    check_axis("bit_widths", axes.bit_widths.len())?;
    check_axis("schemes", axes.schemes.len())?;
    check_axis("calib_sizes", axes.calib_sizes.len())?;
    check_axis("sampling_modes", axes.sampling_modes.len())?;

    let mut tensors: BTreeMap<&str, Tensor> = BTreeMap::new();
    for entry in manifest.entries() {
        tensors.insert(&entry.tensor_id, manifest.load_tensor(&entry.tensor_id)?);
    }

    let mut rows = Vec::new();
    let mut cell_index = 0u64;
    for &strategy in &axes.strategies {
        for &k in &axes.k_values {
            for &bits in &axes.bit_widths {
                for &scheme in &axes.schemes {
                    for &calib_size in &axes.calib_sizes {
                        for &sampling in &axes.sampling_modes {
                            let cell_seed = derive_seed(config.seed, cell_index);
                            cell_index += 1;
                            let outcome = run_cell(
                                manifest, &tensors, config, strategy, k, bits, scheme, calib_size,
                                sampling, cell_seed,
                            );
                            let (metrics, error) = match outcome {
                                Ok(m) => (Some(m), None),
                                Err(e) => (None, Some(e.to_string())),
                            };
                            rows.push(SweepRow {
                                strategy,
                                k,
                                bits,
                                scheme,
                                calib_size,
                                sampling,
                                cell_seed,
                                metrics,
                                error,
                            });
                        }
                    }
                }
            }
        }
    }

    Ok(SweepTable {
        rows,
        config_echo: serde_json::to_value(config).expect("config serializes"),
    })
}

fn check_axis(name: &'static str, len: usize) -> Result<(), AnalysisError> {
    if len == 0 {
        return Err(AnalysisError::EmptyAxis(name));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    manifest: &DumpManifest,
    tensors: &BTreeMap<&str, Tensor>,
    config: &SweepConfig,
    strategy: ClipStrategy,
    k: usize,
    bits: u32,
    scheme: SchemeKind,
    calib_size: usize,
    sampling: SamplingKind,
    cell_seed: u64,
) -> Result<MetricTuple, AnalysisError> {
    let mode = SamplingMode::new(sampling, cell_seed).with_bins(config.bins);
    let selected = sample_calibration(manifest, calib_size, &mode)?;
    let clip = ClipConfig { strategy, k };
    let registry = calibrate_all(manifest, &selected, &clip, config.group_by_tag)?;
    let select = QuantizerSelect {
        scheme,
        breakpoint_mode: config.breakpoint_mode,
        m: config.m,
        n: config.n,
    };

    // Activations quantized at the cell's bit-width; weights pass through.
    let mut acc = MetricAccumulator::default();
    for entry in manifest.entries() {
        let tensor = &tensors[entry.tensor_id.as_str()];
        if entry.tag == WEIGHT_TAG {
            acc.add_passthrough(tensor);
            continue;
        }
        let record = registry
            .lookup(&entry.tensor_id, &entry.tag)
            .ok_or_else(|| AnalysisError::MissingRange(entry.tag.clone()))?;
        let quantizer = TensorQuantizer::build(&select, bits, record)?;
        let recon = quantizer.fake_quantize_tensor(tensor);
        acc.add_tensors(tensor, &recon)?;
    }
    Ok(acc.finalize())
}

impl SweepTable {
    /// Flat CSV: axis columns, metric columns, then the error column. UTF-8,
    /// LF line endings, header row first.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<(), AnalysisError> {
        let mut csv = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        csv.write_record([
            "strategy", "k", "bits", "scheme", "calib_size", "sampling", "cell_seed", "mse",
            "max_abs", "sqnr_db", "count", "error",
        ])
        .map_err(csv_io)?;
        for row in &self.rows {
            let (mse, max_abs, sqnr, count) = match &row.metrics {
                Some(m) => (
                    format!("{}", m.mse),
                    format!("{}", m.max_abs),
                    format!("{}", m.sqnr_db),
                    format!("{}", m.count),
                ),
                None => (String::new(), String::new(), String::new(), String::new()),
            };
            csv.write_record([
                row.strategy.to_string(),
                row.k.to_string(),
                row.bits.to_string(),
                row.scheme.to_string(),
                row.calib_size.to_string(),
                row.sampling.to_string(),
                row.cell_seed.to_string(),
                mse,
                max_abs,
                sqnr,
                count,
                row.error.clone().unwrap_or_default(),
            ])
            .map_err(csv_io)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(&serde_json::json!({
            "version": 1,
            "config": self.config_echo,
            "rows": self.rows,
        }))
        .expect("table serializes");
        out.push('\n');
        out
    }
}

fn csv_io(err: csv::Error) -> AnalysisError {
    AnalysisError::Io(std::io::Error::other(err))
}
