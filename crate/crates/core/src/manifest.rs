//! Dump-directory manifests.
//!
//! A manifest is a JSON file listing every tensor in a dump: a unique id, a
//! path (relative paths resolve against the manifest's directory), a tag
//! naming the network location class (e.g. `"layernorm_input"`, `"weight"`),
//! and the sequence length the tensor was produced from (0 for weights).
//! Missing tensor files are reported lazily at first access so a manifest can
//! be inspected without touching the payload files.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::npy::{load_npy, NpyError};
use crate::tensor::Tensor;

pub const MANIFEST_VERSION: u32 = 1;

/// Tag identifying weight tensors; everything else is treated as activations.
pub const WEIGHT_TAG: &str = "weight";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ManifestEntry {
    pub tensor_id: String,
    pub path: String,
    pub tag: String,
    pub seq_len: u64,
}

#[derive(Debug, Clone)]
pub struct DumpManifest {
    entries: Vec<ManifestEntry>,
    base_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("duplicate tensor_id {0:?}")]
    DuplicateTensorId(String),
    #[error("unknown tensor_id {0:?}")]
    UnknownTensorId(String),
    #[error("missing tensor file for {tensor_id:?}: {path}")]
    MissingTensorFile { tensor_id: String, path: String },
    #[error("while loading {tensor_id:?}: {source}")]
    Npy {
        tensor_id: String,
        #[source]
        source: NpyError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    version: u32,
    entries: Vec<ManifestEntry>,
}

/// Load and validate a manifest; relative entry paths resolve against the
/// manifest file's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DumpManifest, ManifestError> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let parsed: ManifestFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| ManifestError::MalformedManifest(e.to_string()))?;
    if parsed.version != MANIFEST_VERSION {
        return Err(ManifestError::MalformedManifest(format!(
            "unsupported manifest version {}",
            parsed.version
        )));
    }
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    DumpManifest::with_base_dir(parsed.entries, base_dir)
}

impl DumpManifest {
    /// Manifest over in-memory entries, paths relative to the working directory.
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, ManifestError> {
        Self::with_base_dir(entries, PathBuf::from("."))
    }

    pub fn with_base_dir(entries: Vec<ManifestEntry>, base_dir: PathBuf) -> Result<Self, ManifestError> {
        let mut seen = HashSet::new();
        for entry in &entries {
            if !seen.insert(entry.tensor_id.as_str()) {
                return Err(ManifestError::DuplicateTensorId(entry.tensor_id.clone()));
            }
            if entry.tag.is_empty() {
                return Err(ManifestError::MalformedManifest(format!(
                    "entry {:?} has an empty tag",
                    entry.tensor_id
                )));
            }
        }
        Ok(Self { entries, base_dir })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn entry(&self, tensor_id: &str) -> Result<&ManifestEntry, ManifestError> {
        self.entries
            .iter()
            .find(|e| e.tensor_id == tensor_id)
            .ok_or_else(|| ManifestError::UnknownTensorId(tensor_id.to_string()))
    }

    /// Absolute (or cwd-relative) path of an entry's tensor file.
    pub fn resolve_path(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Load an entry's tensor. Missing files are reported with the tensor id.
    pub fn load_tensor(&self, tensor_id: &str) -> Result<Tensor, ManifestError> {
        let entry = self.entry(tensor_id)?;
        let path = self.resolve_path(entry);
        if !path.exists() {
            return Err(ManifestError::MissingTensorFile {
                tensor_id: tensor_id.to_string(),
                path: path.display().to_string(),
            });
        }
        load_npy(&path).map_err(|source| ManifestError::Npy {
            tensor_id: tensor_id.to_string(),
            source,
        })
    }

    /// Manifest JSON text (entry paths are written as stored).
    pub fn to_json(&self) -> String {
        let file = ManifestFile {
            version: MANIFEST_VERSION,
            entries: self.entries.clone(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("manifest serializes");
        out.push('\n');
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ManifestError> {
        let mut writer = BufWriter::new(File::create(path)?);
        writer.write_all(self.to_json().as_bytes())?;
        writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, tag: &str, seq_len: u64) -> ManifestEntry {
        ManifestEntry {
            tensor_id: id.to_string(),
            path: format!("{id}.npy"),
            tag: tag.to_string(),
            seq_len,
        }
    }

    #[test]
    fn two_unique_entries_accepted() {
        let m = DumpManifest::new(vec![entry("a", "ln_in", 10), entry("b", "ln_in", 20)]).unwrap();
        assert_eq!(m.entries().len(), 2);
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = DumpManifest::new(vec![entry("a", "x", 1), entry("a", "y", 2)]).unwrap_err();
        assert!(matches!(err, ManifestError::DuplicateTensorId(id) if id == "a"));
    }

    #[test]
    fn empty_manifest_is_valid() {
        let m = DumpManifest::new(Vec::new()).unwrap();
        assert!(m.entries().is_empty());
    }

    #[test]
    fn empty_tag_rejected() {
        let err = DumpManifest::new(vec![entry("a", "", 1)]).unwrap_err();
        assert!(matches!(err, ManifestError::MalformedManifest(_)));
    }

    #[test]
    fn missing_file_reported_lazily_with_id() {
        let dir = tempfile::tempdir().unwrap();
        let m = DumpManifest::with_base_dir(vec![entry("a", "x", 1)], dir.path().to_path_buf()).unwrap();
        let err = m.load_tensor("a").unwrap_err();
        assert!(matches!(err, ManifestError::MissingTensorFile { tensor_id, .. } if tensor_id == "a"));
    }

    #[test]
    fn save_load_roundtrip_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor::from_vec(vec![1.0, 2.0]).unwrap();
        crate::npy::save_npy(&t, dir.path().join("a.npy"), crate::npy::Precision::F64).unwrap();
        let m = DumpManifest::new(vec![entry("a", "x", 4)]).unwrap();
        let mpath = dir.path().join("manifest.json");
        m.save(&mpath).unwrap();

        let loaded = load_manifest(&mpath).unwrap();
        assert_eq!(loaded.entries(), m.entries());
        assert_eq!(loaded.load_tensor("a").unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn version_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mpath = dir.path().join("manifest.json");
        std::fs::write(&mpath, r#"{"version": 2, "entries": []}"#).unwrap();
        assert!(matches!(
            load_manifest(&mpath).unwrap_err(),
            ManifestError::MalformedManifest(_)
        ));
    }
}
