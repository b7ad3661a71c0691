//! On-disk layout shared by the pipeline, the CLI and the service.
//!
//! ```text
//! <root>/manifest.json            artifact path -> config hash
//! <root>/input.csv
//! <root>/model/model.json         stochastic process model
//! <root>/model/structure.json     winning structure configuration
//! <root>/model/overlay.json       what-if edits (service only)
//! <root>/arrival/<variant>/...
//! <root>/time/...
//! <root>/reports/*.json
//! <root>/simulated/*.csv
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arrival::ArrivalVariant;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: BTreeMap<String, String>,
}

/// Hex SHA-256 of the JSON form of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("configuration serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectStore {
    root: PathBuf,
}

impl ProjectStore {
    pub const MANIFEST: &'static str = "manifest.json";
    pub const INPUT: &'static str = "input.csv";
    pub const MODEL: &'static str = "model/model.json";
    pub const STRUCTURE: &'static str = "model/structure.json";
    pub const OVERLAY: &'static str = "model/overlay.json";
    pub const TIME_DIR: &'static str = "time";
    pub const SEARCH_REPORT: &'static str = "reports/search.json";
    pub const TRAIN_REPORT: &'static str = "reports/train.json";
    pub const PIPELINE_REPORT: &'static str = "reports/pipeline.json";

    /// Creates the directory if needed.
    pub fn create(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("project directory {} does not exist", root.display()),
            ));
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    pub fn arrival_dir(&self, variant: ArrivalVariant) -> PathBuf {
        self.root.join("arrival").join(match variant {
            ArrivalVariant::Multimodal => "multimodal",
            ArrivalVariant::Recurrent => "recurrent",
        })
    }

    pub fn time_dir(&self) -> PathBuf {
        self.root.join(Self::TIME_DIR)
    }

    pub fn simulated(&self, name: &str) -> PathBuf {
        self.root.join("simulated").join(format!("{name}.csv"))
    }

    pub fn manifest(&self) -> std::io::Result<Manifest> {
        match std::fs::read_to_string(self.path(Self::MANIFEST)) {
            Ok(text) => serde_json::from_str(&text).map_err(std::io::Error::other),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Manifest::default()),
            Err(e) => Err(e),
        }
    }

    /// Writes `bytes` to `relative` and records `hash` for it in the manifest.
    pub fn write(&self, relative: &str, bytes: &[u8], hash: &str) -> std::io::Result<()> {
        let path = self.path(relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, bytes)?;
        self.record(relative, hash)
    }

    pub fn write_json<T: Serialize>(&self, relative: &str, value: &T, hash: &str) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        self.write(relative, text.as_bytes(), hash)
    }

    pub fn read_json<T: for<'de> Deserialize<'de>>(&self, relative: &str) -> std::io::Result<T> {
        let text = std::fs::read_to_string(self.path(relative))?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Records a file or directory written by other means.
    pub fn record(&self, relative: &str, hash: &str) -> std::io::Result<()> {
        let mut manifest = self.manifest()?;
        manifest.artifacts.insert(relative.to_string(), hash.to_string());
        let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        std::fs::write(self.path(Self::MANIFEST), text)
    }

    pub fn remove(&self, relative: &str) -> std::io::Result<()> {
        match std::fs::remove_file(self.path(relative)) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
        let mut manifest = self.manifest()?;
        if manifest.artifacts.remove(relative).is_some() {
            let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
            std::fs::write(self.path(Self::MANIFEST), text)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_tracks_writes_and_removals() {
        let dir = tempfile::tempdir().unwrap();
        let store = ProjectStore::create(dir.path().join("p")).unwrap();
        store.write_json(ProjectStore::MODEL, &vec![1, 2], "abc").unwrap();
        assert_eq!(store.read_json::<Vec<i32>>(ProjectStore::MODEL).unwrap(), vec![1, 2]);
        assert_eq!(store.manifest().unwrap().artifacts[ProjectStore::MODEL], "abc");
        store.remove(ProjectStore::MODEL).unwrap();
        assert!(store.manifest().unwrap().artifacts.is_empty());
        assert!(ProjectStore::open(dir.path().join("missing")).is_err());
    }

    #[test]
    fn hash_depends_on_content() {
        assert_eq!(config_hash(&(1, "a")), config_hash(&(1, "a")));
        assert_ne!(config_hash(&(1, "a")), config_hash(&(2, "a")));
        assert_eq!(config_hash(&0).len(), 64);
    }
}
