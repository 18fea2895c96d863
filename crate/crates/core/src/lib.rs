//! Post-training quantization toolkit for dumped tensors.
//!
//! The crate is organized around a small pipeline:
//!
//! 1. [`tensor`] / [`npy`] / [`manifest`] — load and persist tensors in the
//!    NPY v1.0 format and describe dump directories with a JSON manifest.
//! 2. [`calibrate`] — estimate clipping ranges from calibration data with
//!    Top-k average/median strategies, and pick calibration subsets with
//!    seeded sampling modes.
//! 3. [`uniform`] / [`piecewise`] — b-bit uniform affine fake quantization
//!    and the two-region piecewise linear scheme with breakpoint selection
//!    (fast closed form or numerically optimized under a Gaussian model).
//! 4. [`metrics`] / [`ablation`] / [`sweep`] / [`synth`] — reconstruction
//!    error reports, leave-one-out ablations, axis sweeps, and synthetic
//!    distribution generation for desk-scale experiments.

pub mod ablation;
pub mod calibrate;
pub mod distortion;
pub mod golden;
pub mod manifest;
pub mod metrics;
pub mod npy;
pub mod piecewise;
pub mod ranges;
pub mod seed;
pub mod sweep;
pub mod synth;
pub mod tensor;
pub mod uniform;

pub use calibrate::{estimate_range, sample_calibration, ClipConfig, ClipStrategy, RangeEstimate, SamplingKind, SamplingMode};
pub use manifest::{load_manifest, DumpManifest, ManifestEntry};
pub use metrics::{error_metrics, ErrorReport, MetricTuple};
pub use npy::{load_npy, save_npy, Precision};
pub use piecewise::{
    breakpoints_closed_form, breakpoints_oracle, make_piecewise_params, pw_fake_quantize_tensor,
    BreakpointMode, Piece, PiecewiseCode, PiecewiseParams, DEFAULT_BREAK_M, DEFAULT_BREAK_N,
};
pub use ranges::{RangeRecord, RangeRegistry};
pub use tensor::{DtypeOrigin, Tensor};
pub use uniform::{fake_quantize_tensor, quantize_tensor, QuantizedTensor, UniformParams};
