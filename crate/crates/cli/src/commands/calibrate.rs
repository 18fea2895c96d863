//! `ptq calibrate`: sample a calibration subset, estimate clipping ranges,
//! and write the ranges JSON file.
//!
//! Activation ranges come from the sampled subset (grouped per tag by
//! default). Weight-tagged tensors are not part of length-based sampling;
//! they get per-tensor ranges so weight quantization always has one. When
//! the scheme is piecewise and activations have a numeric bit-width, each
//! activation entry also gets a piecewise extension with breakpoints derived
//! from the pooled sigma.

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;
use ptq_core::calibrate::{calibrate_all, estimate_range, population_std, sample_calibration, ClipConfig, SamplingMode};
use ptq_core::manifest::{load_manifest, WEIGHT_TAG};
use ptq_core::piecewise::{breakpoints_closed_form, breakpoints_oracle, BreakpointMode};
use ptq_core::ranges::{PiecewiseExt, RangeRecord, RangeRegistry};

use crate::atomic::write_atomic;
use crate::config::{
    config_echo, parse_wa_bits, resolve_seed, ClipFlags, GroupByArg, SamplingArg, SchemeArg,
    SchemeFlags, WaBits,
};
use crate::CliError;

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Dump manifest to calibrate against.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output path for the ranges JSON file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub clip: ClipFlags,
    /// Calibration subset size.
    #[arg(long, default_value_t = 100)]
    pub size: usize,
    /// Sampling mode for the calibration subset.
    #[arg(long, value_enum, default_value = "uniform")]
    pub sampling: SamplingArg,
    /// Bin count for uniform length sampling.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Pool values per tag or per tensor.
    #[arg(long = "group-by", value_enum, default_value = "tag")]
    pub group_by: GroupByArg,
    #[command(flatten)]
    pub scheme: SchemeFlags,
    /// WxAy bit widths; the activation width is recorded in piecewise
    /// extensions.
    #[arg(long, value_parser = parse_wa_bits, default_value = "W8A8")]
    pub bits: WaBits,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: CalibrateArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed)?;
    let manifest = load_manifest(&args.manifest)?;
    let clip = args.clip.config();

    let mode = SamplingMode::new(args.sampling.into(), seed).with_bins(args.bins);
    let selected = sample_calibration(&manifest, args.size, &mode)?;
    let mut registry = calibrate_all(&manifest, &selected, &clip, matches!(args.group_by, GroupByArg::Tag))?;

    // Weights are calibrated per tensor over their own values, with k capped
    // at the tensor size.
    let mut weight_keys = BTreeSet::new();
    for entry in manifest.entries().iter().filter(|e| e.tag == WEIGHT_TAG) {
        let tensor = manifest.load_tensor(&entry.tensor_id)?;
        let capped = ClipConfig { strategy: clip.strategy, k: clip.k.min(tensor.len()) };
        let estimate = estimate_range(tensor.data(), &capped)?;
        let sigma = population_std(tensor.data());
        weight_keys.insert(entry.tensor_id.clone());
        registry.insert(entry.tensor_id.clone(), RangeRecord { estimate, sigma, piecewise: None });
    }

    if matches!(args.scheme.scheme, SchemeArg::Piecewise) {
        if let Some(b) = args.bits.acts.bits() {
            attach_piecewise_extensions(&mut registry, &weight_keys, b, &args)?;
        }
    }

    let echo = config_echo("calibrate", &settings(&args, seed));
    let mut file: serde_json::Value = serde_json::from_str(&registry.to_json())
        .expect("registry json parses");
    file["config"] = echo;
    let mut text = serde_json::to_string_pretty(&file).expect("ranges serialize");
    text.push('\n');
    write_atomic(&args.out, text.as_bytes())?;

    for (key, rec) in registry.iter() {
        let pw = rec
            .piecewise
            .map(|ext| format!(" p_l={} p_u={}", ext.p_l, ext.p_u))
            .unwrap_or_default();
        println!(
            "{key}: r_l={} r_u={} samples={} sigma={}{pw}",
            rec.estimate.r_l, rec.estimate.r_u, rec.estimate.sample_count, rec.sigma
        );
    }
    println!("wrote {} range entries to {}", registry.len(), args.out.display());
    Ok(())
}

fn attach_piecewise_extensions(
    registry: &mut RangeRegistry,
    weight_keys: &BTreeSet<String>,
    b: u32,
    args: &CalibrateArgs,
) -> Result<(), CliError> {
    let mode: BreakpointMode = args.scheme.breakpoints.into();
    let (m, n) = (args.scheme.pw_m, args.scheme.pw_n);
    let keys: Vec<String> = registry
        .iter()
        .map(|(k, _)| k.clone())
        .filter(|k| !weight_keys.contains(k))
        .collect();
    for key in keys {
        let rec = registry.get(&key).expect("key just listed");
        let (r_l, r_u, sigma) = (rec.estimate.r_l, rec.estimate.r_u, rec.sigma);
        let (p_l, p_u) = if sigma <= 0.0 {
            (r_l, r_u)
        } else {
            match mode {
                BreakpointMode::ClosedForm => breakpoints_closed_form(r_l, r_u, sigma, m, n)
                    .map_err(|e| CliError::Data(format!("breakpoints for {key:?}: {e}")))?,
                BreakpointMode::Oracle if r_l < 0.0 && r_u > 0.0 => {
                    let sol = breakpoints_oracle(b, r_l, r_u, sigma)?;
                    (sol.p_l, sol.p_u)
                }
                // The oracle models zero-centered Gaussians; one-sided
                // ranges use the closed form, which defines that case.
                BreakpointMode::Oracle => breakpoints_closed_form(r_l, r_u, sigma, m, n)
                    .map_err(|e| CliError::Data(format!("breakpoints for {key:?}: {e}")))?,
            }
        };
        registry.get_mut(&key).expect("key exists").piecewise =
            Some(PiecewiseExt { b, r_l, r_u, p_l, p_u, sigma, m, n });
    }
    Ok(())
}

fn settings(args: &CalibrateArgs, seed: u64) -> serde_json::Value {
    serde_json::json!({
        "manifest": args.manifest.display().to_string(),
        "out": args.out.display().to_string(),
        "strategy": format!("{}", ptq_core::calibrate::ClipStrategy::from(args.clip.strategy)),
        "topk": args.clip.topk,
        "size": args.size,
        "sampling": format!("{}", ptq_core::calibrate::SamplingKind::from(args.sampling)),
        "bins": args.bins,
        "group_by": match args.group_by { GroupByArg::Tag => "tag", GroupByArg::Tensor => "tensor" },
        "scheme": ptq_core::ablation::SchemeKind::from(args.scheme.scheme).to_string(),
        "breakpoints": match args.scheme.breakpoints {
            crate::config::BreakpointArg::ClosedForm => "closed-form",
            crate::config::BreakpointArg::Oracle => "oracle",
        },
        "pw_m": args.scheme.pw_m,
        "pw_n": args.scheme.pw_n,
        "bits": args.bits.to_string(),
        "seed": seed,
    })
}
