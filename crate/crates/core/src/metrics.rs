//! Reconstruction-error metrics and report assembly.
//!
//! The optimization objective the whole toolkit measures is reconstruction
//! error: the distance between tensors before and after fake quantization.
//! Reported per key (tag or tensor id) and in aggregate as MSE, max absolute
//! error, and SQNR in dB. A zero-error comparison has infinite SQNR, which
//! serializes as the string `"inf"` (JSON numbers cannot carry infinities).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::CalibError;
use crate::manifest::ManifestError;
use crate::piecewise::PwError;
use crate::tensor::Tensor;
use crate::uniform::QuantError;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("plan references tag {0:?} which does not occur in the manifest")]
    UnknownTag(String),
    #[error("no calibrated range for key {0:?}")]
    MissingRange(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("sweep axis {0:?} is empty")]
    EmptyAxis(&'static str),
    #[error(transparent)]
    Calib(#[from] CalibError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Piecewise(#[from] PwError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// MSE / max-abs / SQNR over `count` elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTuple {
    pub mse: f64,
    pub max_abs: f64,
    #[serde(with = "sqnr_serde")]
    pub sqnr_db: f64,
    pub count: usize,
}

impl MetricTuple {
    pub fn zero() -> Self {
        Self { mse: 0.0, max_abs: 0.0, sqnr_db: f64::INFINITY, count: 0 }
    }
}

/// Running sums from which a [`MetricTuple`] is finalized. Aggregation is a
/// keyed merge, so the result does not depend on accumulation order beyond
/// float addition over identical inputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct MetricAccumulator {
    sum_sq_err: f64,
    sum_sq_signal: f64,
    max_abs: f64,
    count: usize,
}

impl MetricAccumulator {
    pub fn add_pair(&mut self, original: f64, reconstructed: f64) {
        let err = original - reconstructed;
        self.sum_sq_err += err * err;
        self.sum_sq_signal += original * original;
        self.max_abs = self.max_abs.max(err.abs());
        self.count += 1;
    }

    pub fn add_tensors(&mut self, original: &Tensor, reconstructed: &Tensor) -> Result<(), AnalysisError> {
        if original.shape() != reconstructed.shape() {
            return Err(AnalysisError::ShapeMismatch {
                left: original.shape().to_vec(),
                right: reconstructed.shape().to_vec(),
            });
        }
        for (&o, &r) in original.data().iter().zip(reconstructed.data()) {
            self.add_pair(o, r);
        }
        Ok(())
    }

    /// Identical tensor passed through untouched: zero error, counted signal.
    pub fn add_passthrough(&mut self, tensor: &Tensor) {
        for &v in tensor.data() {
            self.sum_sq_signal += v * v;
            self.count += 1;
        }
    }

    pub fn merge(&mut self, other: &MetricAccumulator) {
        self.sum_sq_err += other.sum_sq_err;
        self.sum_sq_signal += other.sum_sq_signal;
        self.max_abs = self.max_abs.max(other.max_abs);
        self.count += other.count;
    }

    pub fn finalize(&self) -> MetricTuple {
        if self.count == 0 {
            return MetricTuple::zero();
        }
        let mse = self.sum_sq_err / self.count as f64;
        let signal_power = self.sum_sq_signal / self.count as f64;
        let sqnr_db = if mse == 0.0 {
            f64::INFINITY
        } else if signal_power == 0.0 {
            f64::NEG_INFINITY
        } else {
            10.0 * (signal_power / mse).log10()
        };
        MetricTuple { mse, max_abs: self.max_abs, sqnr_db, count: self.count }
    }
}

/// Compare two tensors of equal shape.
pub fn error_metrics(original: &Tensor, reconstructed: &Tensor) -> Result<MetricTuple, AnalysisError> {
    let mut acc = MetricAccumulator::default();
    acc.add_tensors(original, reconstructed)?;
    Ok(acc.finalize())
}

/// Per-key metrics, the aggregate over all keys, and the configuration the
/// run used (echoed for provenance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub per_key: BTreeMap<String, MetricTuple>,
    pub aggregate: MetricTuple,
    pub config_echo: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    version: u32,
    config: serde_json::Value,
    per_key: BTreeMap<String, MetricTuple>,
    aggregate: MetricTuple,
}

impl ErrorReport {
    pub fn to_json(&self) -> String {
        let file = ReportFile {
            version: REPORT_VERSION,
            config: self.config_echo.clone(),
            per_key: self.per_key.clone(),
            aggregate: self.aggregate,
        };
        let mut out = serde_json::to_string_pretty(&file).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        let file: ReportFile = serde_json::from_str(json)?;
        Ok(Self {
            per_key: file.per_key,
            aggregate: file.aggregate,
            config_echo: file.config,
        })
    }
}

/// SQNR serialization: finite values as numbers, infinities as the strings
/// "inf" / "-inf".
mod sqnr_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            value.serialize(serializer)
        } else if *value > 0.0 {
            "inf".serialize(serializer)
        } else {
            "-inf".serialize(serializer)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("bad sqnr value {other:?}"))),
            },
        }
    }
}
