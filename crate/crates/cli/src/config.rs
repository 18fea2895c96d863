//! Shared CLI configuration: bit-width notation, quantizer selection flags,
//! seeds, and the resolved-configuration echo embedded in every artifact.

use clap::{Args, ValueEnum};
use ptq_core::ablation::{QuantizerSelect, SchemeKind};
use ptq_core::calibrate::{ClipConfig, ClipStrategy, SamplingKind};
use ptq_core::piecewise::{BreakpointMode, DEFAULT_BREAK_M, DEFAULT_BREAK_N};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// One side of the `WxAy` notation: a bit-width in 2..=16, or `fp` for
/// full precision (leave unquantized).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitsSpec {
    Fp,
    Bits(u32),
}

impl BitsSpec {
    pub fn bits(self) -> Option<u32> {
        match self {
            BitsSpec::Fp => None,
            BitsSpec::Bits(b) => Some(b),
        }
    }
}

impl std::fmt::Display for BitsSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BitsSpec::Fp => write!(f, "fp"),
            BitsSpec::Bits(b) => write!(f, "{b}"),
        }
    }
}

/// The `WxAy` configuration notation, e.g. `W8A8`, `W8Afp`, `WfpA6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaBits {
    pub weights: BitsSpec,
    pub acts: BitsSpec,
}

impl Default for WaBits {
    fn default() -> Self {
        Self { weights: BitsSpec::Bits(8), acts: BitsSpec::Bits(8) }
    }
}

impl std::fmt::Display for WaBits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "W{}A{}", self.weights, self.acts)
    }
}

pub fn parse_wa_bits(s: &str) -> Result<WaBits, String> {
    let upper = s.to_ascii_uppercase();
    let rest = upper
        .strip_prefix('W')
        .ok_or_else(|| format!("expected WxAy notation (e.g. W8A8), got {s:?}"))?;
    let (w, a) = rest
        .split_once('A')
        .ok_or_else(|| format!("expected WxAy notation (e.g. W8A8), got {s:?}"))?;
    Ok(WaBits { weights: parse_bits_side(w, s)?, acts: parse_bits_side(a, s)? })
}

fn parse_bits_side(side: &str, whole: &str) -> Result<BitsSpec, String> {
    if side.eq_ignore_ascii_case("fp") {
        return Ok(BitsSpec::Fp);
    }
    let bits: u32 = side
        .parse()
        .map_err(|_| format!("bad bit-width {side:?} in {whole:?}"))?;
    if bits == 32 {
        return Err(format!("32 means full precision; write \"fp\" (in {whole:?})"));
    }
    if !(2..=16).contains(&bits) {
        return Err(format!("bit-width {bits} outside 2..=16 (in {whole:?})"));
    }
    Ok(BitsSpec::Bits(bits))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Median,
    Average,
}

impl From<StrategyArg> for ClipStrategy {
    fn from(v: StrategyArg) -> Self {
        match v {
            StrategyArg::Median => ClipStrategy::Median,
            StrategyArg::Average => ClipStrategy::Average,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    Uniform,
    Random,
    PreferShort,
    PreferLong,
}

impl From<SamplingArg> for SamplingKind {
    fn from(v: SamplingArg) -> Self {
        match v {
            SamplingArg::Uniform => SamplingKind::Uniform,
            SamplingArg::Random => SamplingKind::Random,
            SamplingArg::PreferShort => SamplingKind::PreferShort,
            SamplingArg::PreferLong => SamplingKind::PreferLong,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    UniformSymmetric,
    UniformAsymmetric,
    Piecewise,
}

impl From<SchemeArg> for SchemeKind {
    fn from(v: SchemeArg) -> Self {
        match v {
            SchemeArg::UniformSymmetric => SchemeKind::UniformSymmetric,
            SchemeArg::UniformAsymmetric => SchemeKind::UniformAsymmetric,
            SchemeArg::Piecewise => SchemeKind::Piecewise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BreakpointArg {
    ClosedForm,
    Oracle,
}

impl From<BreakpointArg> for BreakpointMode {
    fn from(v: BreakpointArg) -> Self {
        match v {
            BreakpointArg::ClosedForm => BreakpointMode::ClosedForm,
            BreakpointArg::Oracle => BreakpointMode::Oracle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupByArg {
    Tag,
    Tensor,
}

/// Flags shared by every command that applies a quantization scheme.
#[derive(Debug, Clone, Args)]
pub struct SchemeFlags {
    /// Quantization scheme for activations.
    #[arg(long, value_enum, default_value = "piecewise")]
    pub scheme: SchemeArg,
    /// How piecewise breakpoints are derived.
    #[arg(long = "breakpoints", value_enum, default_value = "closed-form")]
    pub breakpoints: BreakpointArg,
    /// Breakpoint formula slope override.
    #[arg(long = "pw-m", default_value_t = DEFAULT_BREAK_M)]
    pub pw_m: f64,
    /// Breakpoint formula intercept override.
    #[arg(long = "pw-n", default_value_t = DEFAULT_BREAK_N)]
    pub pw_n: f64,
}

impl SchemeFlags {
    pub fn select(&self) -> QuantizerSelect {
        QuantizerSelect {
            scheme: self.scheme.into(),
            breakpoint_mode: self.breakpoints.into(),
            m: self.pw_m,
            n: self.pw_n,
        }
    }
}

/// Flags shared by every command that estimates clipping ranges.
#[derive(Debug, Clone, Args)]
pub struct ClipFlags {
    /// Top-k clipping strategy.
    #[arg(long, value_enum, default_value = "median")]
    pub strategy: StrategyArg,
    /// Top-k count.
    #[arg(long = "topk", default_value_t = 5)]
    pub topk: usize,
}

impl ClipFlags {
    pub fn config(&self) -> ClipConfig {
        ClipConfig { strategy: self.strategy.into(), k: self.topk }
    }
}

/// Resolve the run seed: explicit flag, then the PTQ_SEED environment
/// variable, then 0.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("PTQ_SEED") {
        Ok(text) => text
            .parse()
            .map_err(|_| CliError::Usage(format!("PTQ_SEED must be an unsigned integer, got {text:?}"))),
        Err(_) => Ok(0),
    }
}

/// Resolved-configuration echo: the full settings of the run, plus the tool
/// version and a hash of the settings, embedded in every output artifact.
pub fn config_echo<T: Serialize>(command: &str, settings: &T) -> serde_json::Value {
    let mut value = serde_json::json!({
        "tool": "ptq",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "settings": serde_json::to_value(settings).expect("settings serialize"),
    });
    let canonical = serde_json::to_string(&value).expect("echo serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    value["config_hash"] = serde_json::Value::String(hash);
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wa_bits_parses_paper_style_strings() {
        assert_eq!(
            parse_wa_bits("W8A8").unwrap(),
            WaBits { weights: BitsSpec::Bits(8), acts: BitsSpec::Bits(8) }
        );
        assert_eq!(
            parse_wa_bits("w6a6").unwrap(),
            WaBits { weights: BitsSpec::Bits(6), acts: BitsSpec::Bits(6) }
        );
        assert_eq!(
            parse_wa_bits("WfpA8").unwrap(),
            WaBits { weights: BitsSpec::Fp, acts: BitsSpec::Bits(8) }
        );
        assert_eq!(
            parse_wa_bits("W8Afp").unwrap(),
            WaBits { weights: BitsSpec::Bits(8), acts: BitsSpec::Fp }
        );
    }

    #[test]
    fn wa_bits_rejects_bad_strings() {
        assert!(parse_wa_bits("8A8").is_err());
        assert!(parse_wa_bits("W1A8").is_err());
        assert!(parse_wa_bits("W17A8").is_err());
        assert!(parse_wa_bits("W32A8").unwrap_err().contains("fp"));
        assert!(parse_wa_bits("WxAy").is_err());
    }

    #[test]
    fn config_echo_is_deterministic_and_hashed() {
        let a = config_echo("calibrate", &serde_json::json!({"size": 100}));
        let b = config_echo("calibrate", &serde_json::json!({"size": 100}));
        assert_eq!(a, b);
        assert_eq!(a["config_hash"].as_str().unwrap().len(), 16);
        let c = config_echo("calibrate", &serde_json::json!({"size": 64}));
        assert_ne!(a["config_hash"], c["config_hash"]);
    }
}
