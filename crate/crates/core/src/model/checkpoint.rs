//! JSON checkpoint: a header with the model dims and the hash of the
//! effective run config, then every parameter block in declared order as
//! row-major 64-bit floats.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelDims, ModelParams};
use crate::error::{Error, Result};

const FORMAT: &str = "igcn-checkpoint";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    /// Effective configuration the parameters were trained with.
    pub config: serde_json::Value,
    pub params: ModelParams<f64>,
}

#[derive(Serialize, Deserialize)]
struct Block {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Wire {
    format: String,
    version: u32,
    dims: ModelDims,
    config_hash: String,
    config: serde_json::Value,
    blocks: Vec<Block>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let wire = Wire {
            format: FORMAT.into(),
            version: VERSION,
            dims: self.params.dims,
            config_hash: self.config_hash.clone(),
            config: self.config.clone(),
            blocks: self
                .params
                .blocks()
                .into_iter()
                .map(|(name, m)| Block {
                    name,
                    rows: m.rows(),
                    cols: m.cols(),
                    data: m.as_slice().to_vec(),
                })
                .collect(),
        };
        serde_json::to_string(&wire).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: Wire = serde_json::from_str(text)?;
        if wire.format != FORMAT || wire.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format {} v{}",
                wire.format, wire.version
            )));
        }
        let mut params = ModelParams::zeros(wire.dims)?;
        let expected = params.blocks_mut();
        if expected.len() != wire.blocks.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} blocks, found {}",
                expected.len(),
                wire.blocks.len()
            )));
        }
        for ((name, dst), block) in expected.into_iter().zip(wire.blocks) {
            if name != block.name || dst.shape() != (block.rows, block.cols) || block.data.len() != block.rows * block.cols {
                return Err(Error::Checkpoint(format!(
                    "block `{}` ({}x{}) does not match expected `{name}` {:?}",
                    block.name,
                    block.rows,
                    block.cols,
                    dst.shape()
                )));
            }
            if block.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!("block `{name}` has non-finite values")));
            }
            dst.as_mut_slice().copy_from_slice(&block.data);
        }
        Ok(Self {
            config_hash: wire.config_hash,
            config: wire.config,
            params,
        })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ckpt.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json(&text)
}
