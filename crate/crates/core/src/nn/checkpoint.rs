use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::optim::OptState;
use crate::error::{open_file, Error, Result};

pub const CHECKPOINT_FORMAT: &str = "ergan-checkpoint/1";

/// A network, its optimizer state and the run seed, stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub seed: u64,
    pub layer_dims: Vec<usize>,
    pub model: Mlp,
    pub optimizer: Option<OptState>,
}

impl Checkpoint {
    pub fn new(model: &Mlp, optimizer: Option<&OptState>, seed: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            seed,
            layer_dims: model.dims(),
            model: model.clone(),
            optimizer: optimizer.cloned(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ctx = path.display().to_string();
        let ck: Checkpoint = serde_json::from_reader(std::io::BufReader::new(open_file(path)?))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::format(ctx, format!("unsupported checkpoint format {:?}", ck.format)));
        }
        ck.model.validate().map_err(|e| Error::format(&ctx, e.to_string()))?;
        if ck.layer_dims != ck.model.dims() {
            return Err(Error::format(ctx, "layer_dims disagree with stored parameters"));
        }
        if let Some(opt) = &ck.optimizer {
            if !opt.first_moment.same_shape(&ck.model) || !opt.second_moment.same_shape(&ck.model) {
                return Err(Error::format(ctx, "optimizer state shape disagrees with model"));
            }
        }
        Ok(ck)
    }
}
