//! The single run configuration shared by every command, and its hash.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::ModelDims;
use crate::scene::{DataConfig, NODE_FEATURES};
use crate::synth::SynthConfig;
use crate::training::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Corpus directory holding clips, manifest and calibration.
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Overrides the corpus calibration file.
    pub calibration: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelDims,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub paths: Paths,
    /// Fraction of the training split held out for validation instead of the
    /// corpus validation split.
    pub val_fraction: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.synth.validate()?;
        if self.model.m_max != self.data.m_max {
            return Err(Error::invalid(format!(
                "model.m_max = {} but data.m_max = {}",
                self.model.m_max, self.data.m_max
            )));
        }
        if self.model.d_in != NODE_FEATURES {
            return Err(Error::invalid(format!("model.d_in must be {NODE_FEATURES}")));
        }
        if let Some(f) = self.val_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(format!("val_fraction must lie in (0, 1), got {f}")));
            }
        }
        Ok(())
    }

    /// Data and model settings after the ablation switches.
    pub fn effective(&self) -> (DataConfig, ModelDims) {
        self.train.ablation.apply(&self.data, &self.model)
    }

    /// SHA-256 of the compact JSON form, as lowercase hex. Paths are left
    /// out so that relocating a run does not change its identity.
    pub fn hash(&self) -> String {
        let mut keyed = self.clone();
        keyed.paths = Paths::default();
        let bytes = serde_json::to_vec(&keyed).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
