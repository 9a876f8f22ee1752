//! Flat `key = value` run configuration shared by every CLI stage.
//!
//! Values are layered: built-in defaults, then a config file, then
//! command-line flags, each later layer overriding the earlier ones.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::SplitSpec;
use crate::nn::OptimizerKind;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub instances: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub partition: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub split: Option<SplitSpec>,
    pub split_features: Option<Vec<usize>>,
    pub workers: Option<usize>,
}

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "batch_size",
    "lambda",
    "inner_iters",
    "gamma",
    "seed",
    "generator_hidden",
    "discriminator_hidden",
    "optimizer",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "generator_lr_ratio",
    "discriminator_steps",
    "label_noise",
    "generator_objective",
    "prior_init",
    "variant",
    "instances",
    "gold",
    "partition",
    "out_dir",
    "split",
    "split_features",
    "workers",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value {value:?} for {key}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "batch_size" => t.batch_size = parse(key, value)?,
            "lambda" => t.lambda = parse(key, value)?,
            "inner_iters" => t.inner_iters = parse(key, value)?,
            "gamma" => t.gamma = value.parse()?,
            "seed" => t.seed = parse(key, value)?,
            "generator_hidden" => t.generator_hidden = parse_list(key, value)?,
            "discriminator_hidden" => t.discriminator_hidden = parse_list(key, value)?,
            "optimizer" => {
                t.optimizer.kind = match value {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    _ => return Err(Error::InvalidConfig(format!("unknown optimizer {value:?}"))),
                }
            }
            "learning_rate" => t.optimizer.learning_rate = parse(key, value)?,
            "beta1" => t.optimizer.beta1 = parse(key, value)?,
            "beta2" => t.optimizer.beta2 = parse(key, value)?,
            "epsilon" => t.optimizer.epsilon = parse(key, value)?,
            "generator_lr_ratio" => t.generator_lr_ratio = parse(key, value)?,
            "discriminator_steps" => t.discriminator_steps = parse(key, value)?,
            "label_noise" => t.label_noise = parse(key, value)?,
            "generator_objective" => t.generator_objective = value.parse()?,
            "prior_init" => t.prior_init = parse(key, value)?,
            "variant" => t.variant = value.parse()?,
            "instances" => self.instances = Some(value.into()),
            "gold" => self.gold = Some(value.into()),
            "partition" => self.partition = Some(value.into()),
            "out_dir" => self.out_dir = Some(value.into()),
            "split" => self.split = Some(value.parse()?),
            "split_features" => self.split_features = Some(parse_list(key, value)?),
            "workers" => self.workers = Some(parse(key, value)?),
            _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. `#` starts a comment; blank lines are
    /// ignored. Dashes in keys are read as underscores.
    pub fn apply_text(&mut self, text: &str, context: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(format!("{context}:{}", n + 1), "expected key = value"))?;
            self.set(&key.trim().replace('-', "_"), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies overrides in order.
    pub fn apply_pairs<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, String)>) -> Result<()> {
        pairs.into_iter().try_for_each(|(k, v)| self.set(k, &v))
    }
}
