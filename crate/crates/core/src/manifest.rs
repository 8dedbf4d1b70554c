//! Run manifests: what a command was asked to do, hashed and stamped into
//! every file it writes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::ExtractionParams;
use crate::vpnn::{NetworkConfig, TrainingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Ivid,
    Sf,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Ivid => "ivid",
            ModelKind::Sf => "sf",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ivid" => Ok(ModelKind::Ivid),
            "sf" => Ok(ModelKind::Sf),
            other => Err(Error::InvalidParams(format!("unknown model `{other}` (expected ivid or sf)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scene: Option<PathBuf>,
    pub data: Vec<PathBuf>,
    pub extraction: Option<ExtractionParams>,
    pub network: Option<NetworkConfig>,
    pub training: Option<TrainingConfig>,
    pub model: Option<ModelKind>,
    /// Master seed; every random draw comes from a named sub-stream of it.
    pub seed: u64,
    pub out: PathBuf,
    /// Command-specific settings (fps, unit scale, grids, ...).
    pub settings: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, out: impl Into<PathBuf>) -> Self {
        RunManifest {
            tool: "ivid".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            scene: None,
            data: Vec::new(),
            extraction: None,
            network: None,
            training: None,
            model: None,
            seed,
            out: out.into(),
            settings: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn setting(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.settings.insert(key.into(), value.to_string());
        self
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let m = message.into();
        log::warn!("{m}");
        self.warnings.push(m);
    }

    /// Referenced input paths must exist.
    pub fn check_paths(&self) -> Result<()> {
        for p in self.scene.iter().chain(&self.data) {
            if !p.exists() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "referenced input does not exist"),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn sha256(&self) -> String {
        let json = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Comment lines for CSV and text outputs.
    pub fn header_lines(&self) -> Vec<String> {
        vec![
            format!("ivid {} {}", self.version, self.command),
            format!("manifest_sha256={}", self.sha256()),
            format!("seed={}", self.seed),
        ]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_content() {
        let a = RunManifest::new("train", 1, "out");
        let mut b = a.clone();
        assert_eq!(a.sha256(), b.sha256());
        b.seed = 2;
        assert_ne!(a.sha256(), b.sha256());
        assert!(a.header_lines()[1].ends_with(&a.sha256()));
    }

    #[test]
    fn model_kind_parses() {
        assert_eq!("SF".parse::<ModelKind>().unwrap(), ModelKind::Sf);
        assert!("vid".parse::<ModelKind>().is_err());
        assert_eq!(ModelKind::Ivid.to_string(), "ivid");
    }

    #[test]
    fn missing_input_is_reported() {
        let mut m = RunManifest::new("ingest", 0, "out");
        m.data.push("/definitely/not/here.txt".into());
        assert!(matches!(m.check_paths(), Err(Error::Io { .. })));
    }
}
