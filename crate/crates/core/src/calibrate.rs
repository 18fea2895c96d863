//! Calibration: clipping-range estimation and calibration-set sampling.
//!
//! Ranges come from the Top-k strategies: sort the pooled values ascending,
//! take the k largest and k smallest, and reduce each set with the mean
//! (Average) or the median (Median). The median of an even count is the mean
//! of the two middle values. Median is the default since it is insensitive to
//! the magnitude of a single outlier once k >= 3.
//!
//! Sampling modes pick which dump entries contribute calibration data. All
//! modes are fully determined by `(manifest, size, mode, seed)`; Random mode
//! additionally guarantees that for a fixed seed a larger size yields a
//! superset of a smaller one (it shuffles once and takes a prefix).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{DumpManifest, ManifestError, ManifestEntry};
use crate::ranges::{RangeRecord, RangeRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipStrategy {
    Median,
    Average,
}

/// Top-k clipping configuration. Default: Median, k = 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipConfig {
    pub strategy: ClipStrategy,
    pub k: usize,
}

impl Default for ClipConfig {
    fn default() -> Self {
        Self { strategy: ClipStrategy::Median, k: 5 }
    }
}

/// An estimated clipping range `[r_l, r_u]` with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate {
    pub r_l: f64,
    pub r_u: f64,
    pub sample_count: usize,
    pub config_used: ClipConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingKind {
    Random,
    PreferShort,
    PreferLong,
    Uniform,
}

/// A sampling mode: the kind, the seed that fully determines the draw, and
/// the bin count used by `Uniform` (ignored by the other kinds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingMode {
    pub kind: SamplingKind,
    pub seed: u64,
    pub bins: usize,
}

impl SamplingMode {
    pub fn new(kind: SamplingKind, seed: u64) -> Self {
        Self { kind, seed, bins: 10 }
    }

    pub fn with_bins(mut self, bins: usize) -> Self {
        self.bins = bins;
        self
    }
}

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("cannot estimate a range from zero samples")]
    EmptySamples,
    #[error("top-k count {k} exceeds the {available} available samples")]
    KExceedsSamples { k: usize, available: usize },
    #[error("requested {requested} calibration entries but only {available} have sequence data")]
    SizeExceedsPopulation { requested: usize, available: usize },
    #[error("no manifest entry has seq_len > 0")]
    NoLengthData,
    #[error("sampling bins must be >= 1")]
    ZeroBins,
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

/// Estimate a clipping range from pooled values with a Top-k strategy.
pub fn estimate_range(samples: &[f64], config: &ClipConfig) -> Result<RangeEstimate, CalibError> {
    if samples.is_empty() {
        return Err(CalibError::EmptySamples);
    }
    if config.k == 0 || config.k > samples.len() {
        return Err(CalibError::KExceedsSamples { k: config.k, available: samples.len() });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let minima = &sorted[..config.k];
    let maxima = &sorted[sorted.len() - config.k..];
    let (r_l, r_u) = match config.strategy {
        ClipStrategy::Average => (mean(minima), mean(maxima)),
        ClipStrategy::Median => (median_sorted(minima), median_sorted(maxima)),
    };
    Ok(RangeEstimate {
        r_l,
        r_u,
        sample_count: samples.len(),
        config_used: *config,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median of an already-sorted slice; even counts average the middle two.
fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Population standard deviation of pooled values (the breakpoint formula's
/// normalization premise needs one).
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mu = mean(values);
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

/// Select `size` entry ids for calibration. Only entries with `seq_len > 0`
/// participate; the result is deterministic given `(manifest, size, mode)`.
pub fn sample_calibration(
    manifest: &DumpManifest,
    size: usize,
    mode: &SamplingMode,
) -> Result<Vec<String>, CalibError> {
    let mut population: Vec<&ManifestEntry> =
        manifest.entries().iter().filter(|e| e.seq_len > 0).collect();
    if population.is_empty() {
        return Err(CalibError::NoLengthData);
    }
    if size > population.len() {
        return Err(CalibError::SizeExceedsPopulation {
            requested: size,
            available: population.len(),
        });
    }
    // Canonical base order, independent of manifest entry order.
    population.sort_by(|a, b| a.tensor_id.cmp(&b.tensor_id));

    let ids = match mode.kind {
        SamplingKind::Random => {
            let mut rng = ChaCha12Rng::seed_from_u64(mode.seed);
            let mut shuffled = population;
            shuffled.shuffle(&mut rng);
            shuffled[..size].iter().map(|e| e.tensor_id.clone()).collect()
        }
        SamplingKind::PreferShort => {
            let mut by_len = population;
            by_len.sort_by(|a, b| a.seq_len.cmp(&b.seq_len).then(a.tensor_id.cmp(&b.tensor_id)));
            by_len[..size].iter().map(|e| e.tensor_id.clone()).collect()
        }
        SamplingKind::PreferLong => {
            let mut by_len = population;
            by_len.sort_by(|a, b| b.seq_len.cmp(&a.seq_len).then(a.tensor_id.cmp(&b.tensor_id)));
            by_len[..size].iter().map(|e| e.tensor_id.clone()).collect()
        }
        SamplingKind::Uniform => sample_uniform(&population, size, mode)?,
    };
    Ok(ids)
}

/// Equal-width seq_len bins, one seeded draw per non-empty bin per pass.
fn sample_uniform(
    population: &[&ManifestEntry],
    size: usize,
    mode: &SamplingMode,
) -> Result<Vec<String>, CalibError> {
    if mode.bins == 0 {
        return Err(CalibError::ZeroBins);
    }
    let min_len = population.iter().map(|e| e.seq_len).min().unwrap();
    let max_len = population.iter().map(|e| e.seq_len).max().unwrap();
    let width = (max_len - min_len) as f64 / mode.bins as f64;

    let mut bins: Vec<Vec<&ManifestEntry>> = vec![Vec::new(); mode.bins];
    for entry in population {
        let idx = if width == 0.0 {
            0
        } else {
            (((entry.seq_len - min_len) as f64 / width) as usize).min(mode.bins - 1)
        };
        bins[idx].push(entry);
    }

    let mut rng = ChaCha12Rng::seed_from_u64(mode.seed);
    let mut picked = Vec::with_capacity(size);
    while picked.len() < size {
        for bin in bins.iter_mut() {
            if picked.len() == size {
                break;
            }
            if bin.is_empty() {
                continue;
            }
            let i = rng.random_range(0..bin.len());
            picked.push(bin.swap_remove(i).tensor_id.clone());
        }
    }
    Ok(picked)
}

/// Estimate ranges for the selected tensors, pooling values per tag when
/// `group_by_tag` or per tensor otherwise. The result serializes to the
/// ranges JSON file.
pub fn calibrate_all(
    manifest: &DumpManifest,
    selected: &[String],
    config: &ClipConfig,
    group_by_tag: bool,
) -> Result<RangeRegistry, CalibError> {
    let mut registry = RangeRegistry::default();
    let mut pools: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for id in selected {
        let entry = manifest.entry(id)?;
        let key = if group_by_tag { entry.tag.clone() } else { entry.tensor_id.clone() };
        let tensor = manifest.load_tensor(id)?;
        pools.entry(key).or_default().extend_from_slice(tensor.data());
    }
    for (key, pool) in pools {
        let estimate = estimate_range(&pool, config)?;
        let sigma = population_std(&pool);
        registry.insert(key, RangeRecord { estimate, sigma, piecewise: None });
    }
    Ok(registry)
}
