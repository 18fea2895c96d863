//! The ranges registry and its JSON file format.
//!
//! A registry maps a key (a tag when calibration grouped by tag, otherwise a
//! tensor id) to an estimated clipping range. Entries may carry a piecewise
//! extension object recording breakpoints and the Gaussian sigma they were
//! derived from, so a quantize run can rebuild piecewise parameters without
//! re-reading calibration data.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{ClipConfig, ClipStrategy, RangeEstimate};

pub const RANGES_VERSION: u32 = 1;

/// Piecewise extension attached to a range entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseExt {
    pub b: u32,
    pub r_l: f64,
    pub r_u: f64,
    pub p_l: f64,
    pub p_u: f64,
    pub sigma: f64,
    pub m: f64,
    pub n: f64,
}

/// One calibrated entry: the range estimate plus the pooled population
/// standard deviation (needed to derive breakpoints later).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeRecord {
    pub estimate: RangeEstimate,
    pub sigma: f64,
    pub piecewise: Option<PiecewiseExt>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RangeRegistry {
    entries: BTreeMap<String, RangeRecord>,
}

#[derive(Debug, Error)]
pub enum RangesError {
    #[error("malformed ranges file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RangeRegistry {
    pub fn insert(&mut self, key: String, record: RangeRecord) {
        self.entries.insert(key, record);
    }

    pub fn get(&self, key: &str) -> Option<&RangeRecord> {
        self.entries.get(key)
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut RangeRecord> {
        self.entries.get_mut(key)
    }

    /// Range lookup for a tensor: an exact tensor-id entry wins over its tag.
    pub fn lookup(&self, tensor_id: &str, tag: &str) -> Option<&RangeRecord> {
        self.entries.get(tensor_id).or_else(|| self.entries.get(tag))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &RangeRecord)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Merge another registry in; identical keys are overwritten.
    pub fn extend(&mut self, other: RangeRegistry) {
        self.entries.extend(other.entries);
    }

    pub fn to_json(&self) -> String {
        let file = RangesFile {
            version: RANGES_VERSION,
            entries: self
                .entries
                .iter()
                .map(|(key, rec)| RangeEntryJson {
                    key: key.clone(),
                    r_l: rec.estimate.r_l,
                    r_u: rec.estimate.r_u,
                    sample_count: rec.estimate.sample_count,
                    strategy: rec.estimate.config_used.strategy,
                    k: rec.estimate.config_used.k,
                    sigma: rec.sigma,
                    piecewise: rec.piecewise.map(PiecewiseExtJson::from),
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("registry serializes");
        out.push('\n');
        out
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, RangesError> {
        let file: RangesFile =
            serde_json::from_reader(reader).map_err(|e| RangesError::Malformed(e.to_string()))?;
        if file.version != RANGES_VERSION {
            return Err(RangesError::Malformed(format!(
                "unsupported ranges version {}",
                file.version
            )));
        }
        let mut registry = RangeRegistry::default();
        for entry in file.entries {
            if entry.r_l > entry.r_u {
                return Err(RangesError::Malformed(format!(
                    "entry {:?} has r_l > r_u",
                    entry.key
                )));
            }
            registry.insert(
                entry.key.clone(),
                RangeRecord {
                    estimate: RangeEstimate {
                        r_l: entry.r_l,
                        r_u: entry.r_u,
                        sample_count: entry.sample_count,
                        config_used: ClipConfig { strategy: entry.strategy, k: entry.k },
                    },
                    sigma: entry.sigma,
                    piecewise: entry.piecewise.map(PiecewiseExt::from),
                },
            );
        }
        Ok(registry)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RangesError> {
        let mut writer = BufWriter::new(File::create(path)?);
        writer.write_all(self.to_json().as_bytes())?;
        writer.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RangesError> {
        let file = File::open(path)?;
        Self::from_reader(BufReader::new(file))
    }
}

#[derive(Serialize, Deserialize)]
struct RangesFile {
    version: u32,
    entries: Vec<RangeEntryJson>,
}

#[derive(Serialize, Deserialize)]
struct RangeEntryJson {
    key: String,
    r_l: f64,
    r_u: f64,
    sample_count: usize,
    strategy: ClipStrategy,
    k: usize,
    sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    piecewise: Option<PiecewiseExtJson>,
}

/// Wire form of the extension object, carrying its scheme discriminator.
#[derive(Serialize, Deserialize)]
struct PiecewiseExtJson {
    scheme: String,
    b: u32,
    r_l: f64,
    r_u: f64,
    p_l: f64,
    p_u: f64,
    sigma: f64,
    m: f64,
    n: f64,
}

impl From<PiecewiseExt> for PiecewiseExtJson {
    fn from(ext: PiecewiseExt) -> Self {
        Self {
            scheme: "piecewise".to_string(),
            b: ext.b,
            r_l: ext.r_l,
            r_u: ext.r_u,
            p_l: ext.p_l,
            p_u: ext.p_u,
            sigma: ext.sigma,
            m: ext.m,
            n: ext.n,
        }
    }
}

impl From<PiecewiseExtJson> for PiecewiseExt {
    fn from(ext: PiecewiseExtJson) -> Self {
        Self {
            b: ext.b,
            r_l: ext.r_l,
            r_u: ext.r_u,
            p_l: ext.p_l,
            p_u: ext.p_u,
            sigma: ext.sigma,
            m: ext.m,
            n: ext.n,
        }
    }
}
