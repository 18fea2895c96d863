//! Leave-one-out ablation over tagged tensor dumps.
//!
//! Each variant names the set of tags whose tensors get fake-quantized;
//! everything else passes through untouched. Weight-tagged tensors stay in
//! full precision unless the variant sets `weight_bits`, mirroring ablations
//! run with full-precision weights. Per-tag and aggregate metrics use the
//! whole dump as the denominator, so quantizing strictly more tags can never
//! lower the aggregate error.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::manifest::{DumpManifest, WEIGHT_TAG};
use crate::metrics::{AnalysisError, ErrorReport, MetricAccumulator};
use crate::piecewise::{breakpoints_closed_form, breakpoints_oracle, BreakpointMode, PiecewiseParams};
use crate::ranges::{RangeRecord, RangeRegistry};
use crate::tensor::Tensor;
use crate::uniform::UniformParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    UniformSymmetric,
    UniformAsymmetric,
    Piecewise,
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SchemeKind::UniformSymmetric => "uniform-symmetric",
            SchemeKind::UniformAsymmetric => "uniform-asymmetric",
            SchemeKind::Piecewise => "piecewise",
        };
        write!(f, "{s}")
    }
}

/// Quantizer selector: which scheme to apply and how piecewise breakpoints
/// are derived when a range record does not already carry them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSelect {
    pub scheme: SchemeKind,
    pub breakpoint_mode: BreakpointMode,
    pub m: f64,
    pub n: f64,
}

impl QuantizerSelect {
    pub fn uniform_symmetric() -> Self {
        Self {
            scheme: SchemeKind::UniformSymmetric,
            breakpoint_mode: BreakpointMode::ClosedForm,
            m: crate::piecewise::DEFAULT_BREAK_M,
            n: crate::piecewise::DEFAULT_BREAK_N,
        }
    }

    pub fn uniform_asymmetric() -> Self {
        Self { scheme: SchemeKind::UniformAsymmetric, ..Self::uniform_symmetric() }
    }

    pub fn piecewise(mode: BreakpointMode) -> Self {
        Self {
            scheme: SchemeKind::Piecewise,
            breakpoint_mode: mode,
            ..Self::uniform_symmetric()
        }
    }
}

/// A concrete per-tensor quantizer derived from a range record.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorQuantizer {
    Uniform(UniformParams),
    Piecewise(PiecewiseParams),
}

impl TensorQuantizer {
    /// Build the quantizer for one range record at the given bit-width.
    ///
    /// Piecewise prefers breakpoints stored in the record's extension; absent
    /// that they are derived from the record's sigma. The numerical oracle
    /// only models ranges straddling zero, so one-sided ranges (and
    /// degenerate pools with sigma 0) fall back to the closed form or a
    /// collapsed central region.
    pub fn build(select: &QuantizerSelect, bits: u32, record: &RangeRecord) -> Result<Self, AnalysisError> {
        let r_l = record.estimate.r_l;
        let r_u = record.estimate.r_u;
        match select.scheme {
            SchemeKind::UniformSymmetric => {
                Ok(TensorQuantizer::Uniform(UniformParams::new(bits, r_l, r_u, true)?))
            }
            SchemeKind::UniformAsymmetric => {
                Ok(TensorQuantizer::Uniform(UniformParams::new(bits, r_l, r_u, false)?))
            }
            SchemeKind::Piecewise => {
                if let Some(ext) = &record.piecewise {
                    return Ok(TensorQuantizer::Piecewise(PiecewiseParams::with_breakpoints(
                        bits, ext.r_l, ext.r_u, ext.p_l, ext.p_u, ext.m, ext.n,
                    )?));
                }
                let (p_l, p_u) = if record.sigma <= 0.0 {
                    (r_l, r_u)
                } else {
                    match select.breakpoint_mode {
                        BreakpointMode::ClosedForm => {
                            breakpoints_closed_form(r_l, r_u, record.sigma, select.m, select.n)?
                        }
                        BreakpointMode::Oracle if r_l < 0.0 && r_u > 0.0 => {
                            let sol = breakpoints_oracle(bits, r_l, r_u, record.sigma)?;
                            (sol.p_l, sol.p_u)
                        }
                        BreakpointMode::Oracle => {
                            breakpoints_closed_form(r_l, r_u, record.sigma, select.m, select.n)?
                        }
                    }
                };
                Ok(TensorQuantizer::Piecewise(PiecewiseParams::with_breakpoints(
                    bits, r_l, r_u, p_l, p_u, select.m, select.n,
                )?))
            }
        }
    }

    pub fn fake_quantize_tensor(&self, t: &Tensor) -> Tensor {
        match self {
            TensorQuantizer::Uniform(p) => crate::uniform::fake_quantize_tensor(t, p),
            TensorQuantizer::Piecewise(p) => crate::piecewise::pw_fake_quantize_tensor(t, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationVariant {
    pub name: String,
    pub quantize_tags: BTreeSet<String>,
    #[serde(default)]
    pub weight_bits: Option<u32>,
    #[serde(default)]
    pub act_bits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPlan {
    pub variants: Vec<AblationVariant>,
}

impl AblationPlan {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let mut names = BTreeSet::new();
        for v in &self.variants {
            if !names.insert(v.name.as_str()) {
                return Err(AnalysisError::InvalidSpec(format!(
                    "duplicate variant name {:?}",
                    v.name
                )));
            }
        }
        Ok(())
    }
}

/// Run every variant of the plan, returning one report per variant in plan
/// order. Preconditions: every tag named by the plan occurs in the manifest,
/// and every quantized tensor has a calibrated range (tensor-id entries win
/// over tag entries).
pub fn run_ablation(
    manifest: &DumpManifest,
    plan: &AblationPlan,
    ranges: &RangeRegistry,
    select: &QuantizerSelect,
    default_act_bits: u32,
) -> Result<Vec<ErrorReport>, AnalysisError> {
    plan.validate()?;
    let manifest_tags: BTreeSet<&str> = manifest.entries().iter().map(|e| e.tag.as_str()).collect();
    for variant in &plan.variants {
        for tag in &variant.quantize_tags {
            if !manifest_tags.contains(tag.as_str()) {
                return Err(AnalysisError::UnknownTag(tag.clone()));
            }
        }
    }

    let mut tensors: BTreeMap<&str, Tensor> = BTreeMap::new();
    for entry in manifest.entries() {
        tensors.insert(&entry.tensor_id, manifest.load_tensor(&entry.tensor_id)?);
    }

    let mut reports = Vec::with_capacity(plan.variants.len());
    for variant in &plan.variants {
        let mut per_tag: BTreeMap<String, MetricAccumulator> = BTreeMap::new();
        for entry in manifest.entries() {
            let acc = per_tag.entry(entry.tag.clone()).or_default();
            let tensor = &tensors[entry.tensor_id.as_str()];
            let is_weight = entry.tag == WEIGHT_TAG;
            let quantized = variant.quantize_tags.contains(&entry.tag)
                && (!is_weight || variant.weight_bits.is_some());
            if !quantized {
                acc.add_passthrough(tensor);
                continue;
            }
            let bits = if is_weight {
                variant.weight_bits.expect("checked above")
            } else {
                variant.act_bits.unwrap_or(default_act_bits)
            };
            let record = ranges
                .lookup(&entry.tensor_id, &entry.tag)
                .ok_or_else(|| AnalysisError::MissingRange(entry.tag.clone()))?;
            let quantizer = TensorQuantizer::build(select, bits, record)?;
            let recon = quantizer.fake_quantize_tensor(tensor);
            acc.add_tensors(tensor, &recon)?;
        }

        let mut aggregate = MetricAccumulator::default();
        let mut per_key = BTreeMap::new();
        for (tag, acc) in &per_tag {
            aggregate.merge(acc);
            per_key.insert(tag.clone(), acc.finalize());
        }
        reports.push(ErrorReport {
            per_key,
            aggregate: aggregate.finalize(),
            config_echo: serde_json::json!({
                "variant": variant.name,
                "quantize_tags": variant.quantize_tags,
                "scheme": select.scheme.to_string(),
                "act_bits": variant.act_bits.unwrap_or(default_act_bits),
                "weight_bits": variant.weight_bits,
            }),
        });
    }
    Ok(reports)
}
