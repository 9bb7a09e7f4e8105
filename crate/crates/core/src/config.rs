//! The single JSON document describing a run. Every section rejects unknown
//! keys and the whole document is validated before any work starts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderConfig, OptimConfig};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::quadruple::QuadrupleConfig;
use crate::synthdata::DatasetConfig;
use crate::trainer::{PretrainConfig, ScheduleConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub quadruple: QuadrupleConfig,
    pub encoder: EncoderConfig,
    pub optim: OptimConfig,
    pub schedule: ScheduleConfig,
    pub eval: EvalConfig,
    /// Where `gen` writes and everything else reads the dataset.
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Run seed for initialization, batching and the probe. The dataset has
    /// its own seed.
    pub seed: u64,
    /// Forces single-threaded execution.
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            quadruple: QuadrupleConfig::default(),
            encoder: EncoderConfig::default(),
            optim: OptimConfig::default(),
            schedule: ScheduleConfig::default(),
            eval: EvalConfig::default(),
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("runs/default"),
            seed: 0,
            deterministic: false,
        }
    }
}

fn section<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{name}: {m}")),
        other => other,
    })
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Missing(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        section("dataset", self.dataset.validate())?;
        section("quadruple", self.quadruple.validate())?;
        section("encoder", self.encoder.validate())?;
        section("optim", self.optim.validate())?;
        section("schedule", self.schedule.validate())?;
        if self.encoder.clip_length != self.quadruple.clip_length {
            return Err(Error::Config(format!(
                "encoder.clip_length {} differs from quadruple.clip_length {}",
                self.encoder.clip_length, self.quadruple.clip_length
            )));
        }
        if self.encoder.channels != self.dataset.channels {
            return Err(Error::Config(format!(
                "encoder.channels {} differs from dataset.channels {}",
                self.encoder.channels, self.dataset.channels
            )));
        }
        if self.eval.num_clips == 0 || self.eval.dilation == 0 {
            return Err(Error::Config("eval.num_clips and eval.dilation must be positive".into()));
        }
        if self.schedule.batch_size > self.dataset.num_train {
            return Err(Error::Config(format!(
                "schedule.batch_size {} exceeds dataset.num_train {}",
                self.schedule.batch_size, self.dataset.num_train
            )));
        }
        Ok(())
    }

    pub fn pretrain(&self) -> PretrainConfig {
        PretrainConfig {
            quadruple: self.quadruple.clone(),
            encoder: self.encoder.clone(),
            optim: self.optim.clone(),
            schedule: self.schedule.clone(),
            seed: self.seed,
        }
    }

    /// Errors with `Mismatch` when a checkpoint's architecture differs from
    /// this config's encoder. The init seed is not compared.
    pub fn check_checkpoint(&self, ckpt: &EncoderConfig) -> Result<()> {
        let ours = EncoderConfig { seed: ckpt.seed, ..self.encoder.clone() };
        if &ours != ckpt {
            return Err(Error::Mismatch(format!(
                "checkpoint encoder {} does not match config encoder {}",
                serde_json::to_string(ckpt)?,
                serde_json::to_string(&self.encoder)?
            )));
        }
        Ok(())
    }
}
