//! Versioned JSON checkpoints of trained networks.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::nn::Mlp;
use super::train::{PolicySet, Scheme, TrainConfig, TrainOutcome};
use crate::error::{Error, Result};
use crate::NetworkConfig;

pub const FORMAT: &str = "ucmec-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub scheme: Scheme,
    pub seed: u64,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub policy: PolicySet,
    pub critics: Vec<Mlp>,
}

impl Checkpoint {
    pub fn new(outcome: &TrainOutcome, seed: u64, network: &NetworkConfig, train: &TrainConfig) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            scheme: outcome.scheme,
            seed,
            network: network.clone(),
            train: train.clone(),
            policy: outcome.policy.clone(),
            critics: outcome.critics.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Checkpoint {
            path: path.to_path_buf(),
            reason,
        };
        let text = fs::read_to_string(path)?;
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        match (raw.get("format").and_then(|v| v.as_str()), raw.get("version").and_then(|v| v.as_u64())) {
            (Some(FORMAT), Some(v)) if v == u64::from(VERSION) => {}
            (Some(FORMAT), Some(v)) => return Err(bad(format!("unsupported version {v}"))),
            _ => return Err(bad("not a checkpoint file".into())),
        }
        let ck: Checkpoint = serde_json::from_value(raw).map_err(|e| bad(e.to_string()))?;
        let width = ck.policy.heads.width();
        if ck.policy.actors.iter().any(|a| a.output_width() != width || !a.is_finite()) {
            return Err(bad("actor shape or weights invalid".into()));
        }
        Ok(ck)
    }
}
