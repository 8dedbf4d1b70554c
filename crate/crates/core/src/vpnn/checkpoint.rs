//! Self-describing JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::{Network, NetworkConfig};
use crate::error::{Error, Result};
use crate::features::ExtractionParams;

pub const CHECKPOINT_FORMAT: &str = "ivid-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub network: NetworkConfig,
    pub extraction: ExtractionParams,
    /// Free-form provenance (manifest hash, seed, ...).
    #[serde(default)]
    pub meta: std::collections::BTreeMap<String, String>,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(network: &Network, extraction: ExtractionParams) -> Result<Self> {
        if network.config().input_dim != extraction.step_dim() || network.config().window != extraction.window {
            return Err(Error::CheckpointMismatch(format!(
                "network expects {}×{} windows but extraction yields {}×{}",
                network.config().window,
                network.config().input_dim,
                extraction.window,
                extraction.step_dim()
            )));
        }
        let tensors = network
            .tensors()
            .iter()
            .map(|t| Tensor {
                name: t.name.clone(),
                shape: t.shape.clone(),
                data: network.params()[t.offset..t.offset + t.len()].to_vec(),
            })
            .collect();
        Ok(Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            network: network.config().clone(),
            extraction,
            meta: Default::default(),
            tensors,
        })
    }

    pub fn network(&self) -> Result<Network> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        let mut net = Network::init(self.network.clone(), 0)?;
        let expected = net.tensors().to_vec();
        if expected.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for (want, have) in expected.iter().zip(&self.tensors) {
            if want.name != have.name || want.shape != have.shape || have.data.len() != want.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{}` {:?} does not match expected `{}` {:?}",
                    have.name, have.shape, want.name, want.shape
                )));
            }
            net.tensor_mut(&want.name).expect("layout tensor").copy_from_slice(&have.data);
        }
        Network::from_params(self.network.clone(), net.params().to_vec())
    }

    /// Fails unless `params` matches the extraction settings the network was
    /// trained with.
    pub fn check_extraction(&self, params: &ExtractionParams) -> Result<()> {
        if self.extraction != *params {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint was trained with {:?}, requested {:?}",
                self.extraction, params
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn sha256(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", ck.format)));
        }
        Ok(ck)
    }
}
