//! The in-memory tensor type shared by every stage of the pipeline.
//!
//! All internal arithmetic is 64-bit regardless of on-disk precision, so any
//! reconstruction error measured downstream is attributable to the quantizer
//! rather than the I/O path. Non-finite values are rejected at construction:
//! range statistics (min/max/Top-k) are undefined under NaN or infinity.

use thiserror::Error;

/// On-disk element precision a tensor was loaded from (or should be saved as).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtypeOrigin {
    F32,
    F64,
}

/// A shaped, immutable array of finite 64-bit reals in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    dtype_origin: DtypeOrigin,
}

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("shape {shape:?} implies {expected} elements but data has {actual}")]
    ShapeDataMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value at flat index {index}")]
    NonFiniteValue { index: usize },
}

/// Number of elements implied by a shape; an empty shape is a scalar (1).
pub fn element_count(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    /// Build a tensor, checking the shape/data contract and finiteness.
    pub fn new(shape: Vec<usize>, data: Vec<f64>, dtype_origin: DtypeOrigin) -> Result<Self, TensorError> {
        let expected = element_count(&shape);
        if expected != data.len() {
            return Err(TensorError::ShapeDataMismatch {
                shape,
                expected,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFiniteValue { index });
        }
        Ok(Self { shape, data, dtype_origin })
    }

    /// 1-D tensor of f64 origin.
    pub fn from_vec(data: Vec<f64>) -> Result<Self, TensorError> {
        let shape = vec![data.len()];
        Self::new(shape, data, DtypeOrigin::F64)
    }

    /// Scalar tensor (empty shape, single element).
    pub fn scalar(value: f64) -> Result<Self, TensorError> {
        Self::new(Vec::new(), vec![value], DtypeOrigin::F64)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn dtype_origin(&self) -> DtypeOrigin {
        self.dtype_origin
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// New tensor with the same shape and a value-mapped payload.
    ///
    /// The map must produce finite values; this is enforced.
    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Result<Self, TensorError> {
        let data: Vec<f64> = self.data.iter().copied().map(f).collect();
        Self::new(self.shape.clone(), data, self.dtype_origin)
    }
}
