//! b-bit uniform affine fake quantization.
//!
//! A real value is clamped to the clipping range, shifted by the offset,
//! divided by the scale `s = (r_u - r_l)/(2^b - 1)`, rounded half-to-even,
//! and saturated to the integer domain. The signed variant keeps offset 0
//! with domain `{-2^(b-1), ..., 2^(b-1)-1}`; the unsigned variant uses
//! offset `r_l` with domain `{0, ..., 2^b - 1}`.
//!
//! Rounding ties break to even: the rounding operator leaves ties
//! unspecified, and half-to-even is deterministic and bias-free, so tests
//! can assert exact codes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Tensor;

/// Bit-widths accepted by the public constructors.
pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 32;

/// Parameters of a b-bit uniform affine quantizer over `[r_l, r_u]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformParams {
    b: u32,
    r_l: f64,
    r_u: f64,
    s: f64,
    z: f64,
    signed: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum QuantError {
    #[error("bit-width {0} outside supported range {MIN_BITS}..={MAX_BITS}")]
    InvalidBitWidth(u32),
    #[error("inverted clipping range: r_l={r_l} > r_u={r_u}")]
    InvertedRange { r_l: f64, r_u: f64 },
    #[error("non-finite clipping range: r_l={r_l}, r_u={r_u}")]
    NonFiniteRange { r_l: f64, r_u: f64 },
    #[error("code {code} outside integer domain [{min}, {max}]")]
    CodeOutOfDomain { code: i64, min: i64, max: i64 },
}

impl UniformParams {
    /// Build quantizer parameters. A degenerate range (`r_l == r_u`) is
    /// allowed: every input maps to code 0 and dequantizes to `r_l`, since
    /// constant tensors occur in practice.
    pub fn new(b: u32, r_l: f64, r_u: f64, signed: bool) -> Result<Self, QuantError> {
        if !(MIN_BITS..=MAX_BITS).contains(&b) {
            return Err(QuantError::InvalidBitWidth(b));
        }
        Self::with_bits_unchecked(b, r_l, r_u, signed)
    }

    /// Piecewise sub-quantizers need (b-1)-bit grids, so 1-bit is allowed
    /// here but not through [`UniformParams::new`].
    pub(crate) fn with_bits_unchecked(b: u32, r_l: f64, r_u: f64, signed: bool) -> Result<Self, QuantError> {
        if !r_l.is_finite() || !r_u.is_finite() {
            return Err(QuantError::NonFiniteRange { r_l, r_u });
        }
        if r_l > r_u {
            return Err(QuantError::InvertedRange { r_l, r_u });
        }
        let levels = (1u64 << b) as f64;
        let s = (r_u - r_l) / (levels - 1.0);
        let z = if signed { 0.0 } else { r_l };
        Ok(Self { b, r_l, r_u, s, z, signed })
    }

    pub fn bits(&self) -> u32 {
        self.b
    }

    pub fn range(&self) -> (f64, f64) {
        (self.r_l, self.r_u)
    }

    pub fn scale(&self) -> f64 {
        self.s
    }

    pub fn offset(&self) -> f64 {
        self.z
    }

    pub fn signed(&self) -> bool {
        self.signed
    }

    /// Number of quantization levels, `N = 2^b`.
    pub fn levels(&self) -> u64 {
        1u64 << self.b
    }

    pub fn is_degenerate(&self) -> bool {
        self.s == 0.0
    }

    pub fn code_min(&self) -> i64 {
        if self.signed {
            -(1i64 << (self.b - 1))
        } else {
            0
        }
    }

    pub fn code_max(&self) -> i64 {
        if self.signed {
            (1i64 << (self.b - 1)) - 1
        } else {
            (1i64 << self.b) - 1
        }
    }

    /// Quantize one value: clamp, round half-to-even, saturate.
    pub fn quantize(&self, r: f64) -> i64 {
        if self.is_degenerate() {
            return 0;
        }
        let clamped = r.clamp(self.r_l, self.r_u);
        let code = ((clamped - self.z) / self.s).round_ties_even() as i64;
        code.clamp(self.code_min(), self.code_max())
    }

    /// Dequantize a code back to a real value (`s * code + z`).
    pub fn dequantize(&self, code: i64) -> Result<f64, QuantError> {
        if code < self.code_min() || code > self.code_max() {
            return Err(QuantError::CodeOutOfDomain {
                code,
                min: self.code_min(),
                max: self.code_max(),
            });
        }
        if self.is_degenerate() {
            return Ok(self.r_l);
        }
        Ok(self.s * code as f64 + self.z)
    }

    /// Quantize-then-dequantize one value.
    pub fn fake_quantize(&self, r: f64) -> f64 {
        let code = self.quantize(r);
        self.dequantize(code).expect("own code is in domain")
    }

    /// Worst-case |fake_quantize(r) - r| over r in the clipping range.
    ///
    /// For the unsigned variant the grid spans the range exactly, so this is
    /// s/2. The signed grid is anchored at 0 and need not reach the range
    /// endpoints, so endpoint misalignment is added where saturation bites.
    pub fn max_in_range_error(&self) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        if !self.signed {
            return self.s / 2.0;
        }
        let reach_hi = self
            .code_max()
            .min((self.r_u / self.s).round_ties_even() as i64);
        let reach_lo = self
            .code_min()
            .max((self.r_l / self.s).round_ties_even() as i64);
        let hi_gap = (self.r_u - self.s * reach_hi as f64).abs();
        let lo_gap = (self.r_l - self.s * reach_lo as f64).abs();
        (self.s / 2.0).max(hi_gap).max(lo_gap)
    }
}

/// Integer codes for a whole tensor plus the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    codes: Vec<i64>,
    shape: Vec<usize>,
    params: UniformParams,
}

impl QuantizedTensor {
    pub fn codes(&self) -> &[i64] {
        &self.codes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn params(&self) -> &UniformParams {
        &self.params
    }

    pub fn dequantize(&self, origin: crate::tensor::DtypeOrigin) -> Tensor {
        let data: Vec<f64> = self
            .codes
            .iter()
            .map(|&c| self.params.dequantize(c).expect("stored codes are in domain"))
            .collect();
        Tensor::new(self.shape.clone(), data, origin).expect("dequantized values are finite")
    }
}

/// Quantize a tensor to integer codes.
pub fn quantize_tensor(t: &Tensor, params: &UniformParams) -> QuantizedTensor {
    QuantizedTensor {
        codes: t.data().iter().map(|&v| params.quantize(v)).collect(),
        shape: t.shape().to_vec(),
        params: *params,
    }
}

/// Elementwise quantize-then-dequantize; shape and dtype origin preserved.
pub fn fake_quantize_tensor(t: &Tensor, params: &UniformParams) -> Tensor {
    t.map(|v| params.fake_quantize(v))
        .expect("dequantized values are finite")
}
