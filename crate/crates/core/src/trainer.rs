//! Two-stage pre-training.
//!
//! Epoch `e` of `E` runs the appearance task while `e < floor(p·E)`: each
//! video contributes two undisturbed clips at different dilations and the
//! two-clip loss pulls them together. Later epochs train on quadruples with
//! the grouped loss (hard-negative mining only in this stage, when enabled).
//!
//! Each step optimizes the per-anchor mean of the loss. The learning rate
//! follows a half-period cosine over all `E · steps_per_epoch` steps.
//!
//! Every random draw comes from a stream derived from the run seed and the
//! epoch/step/video indices, so a run is a pure function of its config.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encoder::{self, EncoderConfig, ModelParams, OptimConfig};
use crate::error::{Error, Result};
use crate::losses::{self, LossConfig, LossReport};
use crate::quadruple::{self, QuadrupleConfig};
use crate::seed;
use crate::synthdata::VideoRecord;

const STREAM_INIT: u64 = 0x1;
const STREAM_EPOCH: u64 = 0x2;
const STREAM_STEP: u64 = 0x3;
const STREAM_HELDOUT: u64 = 0x4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticsSource {
    /// Ranks from the training batches of the epoch, before each update.
    Train,
    /// Ranks from one fixed batch of held-out videos at the end of the epoch.
    Heldout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub total_epochs: usize,
    pub warmup_ratio: f64,
    pub batch_size: usize,
    /// Zero means `floor(train videos / batch_size)`.
    pub steps_per_epoch: usize,
    pub loss: LossConfig,
    pub diagnostics: DiagnosticsSource,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            total_epochs: 60,
            warmup_ratio: 0.2,
            batch_size: 16,
            steps_per_epoch: 0,
            loss: LossConfig::default(),
            diagnostics: DiagnosticsSource::Train,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.total_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("total_epochs and batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(Error::Config(format!("warmup_ratio must lie in [0, 1), got {}", self.warmup_ratio)));
        }
        Ok(())
    }

    /// `floor(p·E)`, with a 1e-9 slack so e.g. `0.1 * 30` counts as 3.
    pub fn warmup_epochs(&self) -> usize {
        ((self.warmup_ratio * self.total_epochs as f64 + 1e-9).floor() as usize).min(self.total_epochs)
    }

    pub fn stage(&self, epoch: usize) -> Stage {
        if epoch < self.warmup_epochs() {
            Stage::Appearance
        } else {
            Stage::Quadruple
        }
    }

    pub fn steps_for(&self, train_videos: usize) -> Result<usize> {
        if self.batch_size > train_videos {
            return Err(Error::Config(format!(
                "batch_size {} exceeds the {train_videos} training videos",
                self.batch_size
            )));
        }
        let max = train_videos / self.batch_size;
        Ok(if self.steps_per_epoch == 0 { max } else { self.steps_per_epoch.min(max) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Appearance,
    Quadruple,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub quadruple: QuadrupleConfig,
    pub encoder: EncoderConfig,
    pub optim: OptimConfig,
    pub schedule: ScheduleConfig,
    pub seed: u64,
}


impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.quadruple.validate()?;
        self.encoder.validate()?;
        self.optim.validate()?;
        self.schedule.validate()?;
        if self.encoder.clip_length != self.quadruple.clip_length {
            return Err(Error::Config(format!(
                "encoder.clip_length {} differs from quadruple.clip_length {}",
                self.encoder.clip_length, self.quadruple.clip_length
            )));
        }
        Ok(())
    }
}

/// Mean 1-based ranks of the positive and of the intra-video negatives in
/// each anchor's descending-similarity ordering of all its candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankDiagnostics {
    pub mean_rank_ad_pos: f64,
    /// `None` when the construction has no intra-video negatives.
    pub mean_rank_intra_negs: Option<f64>,
}

/// Ranks candidates by similarity, descending; equal similarities keep
/// candidate order (positive, intra negatives, then flat inter index).
pub fn candidate_ranks(similarities: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..similarities.len()).collect();
    order.sort_by(|&a, &b| similarities[b].total_cmp(&similarities[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; similarities.len()];
    for (pos, &c) in order.iter().enumerate() {
        ranks[c] = pos + 1;
    }
    ranks
}

/// `members` is the per-video member count of the batch behind `report`.
pub fn compute_rank_diagnostics(report: &LossReport, videos: usize, members: usize) -> Result<RankDiagnostics> {
    if members < 2 || report.similarities.len() != videos {
        return Err(Error::Usage(format!(
            "report has {} anchors, layout says {videos} videos",
            report.similarities.len()
        )));
    }
    let candidates = (members - 1) + members * (videos - 1);
    let intra = members - 2;
    let mut pos_sum = 0.0;
    let mut intra_sum = 0.0;
    for sims in &report.similarities {
        if sims.len() != candidates {
            return Err(Error::Usage(format!("anchor has {} candidates, layout implies {candidates}", sims.len())));
        }
        let ranks = candidate_ranks(sims);
        pos_sum += ranks[0] as f64;
        intra_sum += ranks[1..1 + intra].iter().map(|&r| r as f64).sum::<f64>();
    }
    Ok(RankDiagnostics {
        mean_rank_ad_pos: pos_sum / videos as f64,
        mean_rank_intra_negs: (intra > 0).then(|| intra_sum / (videos * intra) as f64),
    })
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub stage: Stage,
    /// Mean per-anchor loss over the epoch's steps.
    pub mean_loss: f64,
    pub mean_rank_ad_pos: Option<f64>,
    pub mean_rank_intra_negs: Option<f64>,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochMetrics>,
}

/// Batch clips, embeds them and evaluates the loss for one step.
struct StepResult {
    report: LossReport,
    cache: encoder::ForwardCache,
    videos: usize,
    members: usize,
}

fn run_step(
    params: &ModelParams,
    batch: &[&VideoRecord],
    pool: &[VideoRecord],
    cfg: &PretrainConfig,
    stage: Stage,
    batch_seed: u64,
) -> Result<StepResult> {
    let b = batch.len();
    match stage {
        Stage::Appearance => {
            let pairs = quadruple::build_warmup_batch(batch, &cfg.quadruple, batch_seed)?;
            let clips: Vec<_> = pairs.iter().flat_map(|p| [&p.clip_n, &p.clip_m]).collect();
            let (emb, cache) = encoder::embed(params, &clips, b, 2)?;
            let report = losses::appearance_loss(&emb, cfg.schedule.loss.tau)?;
            Ok(StepResult { report, cache, videos: b, members: 2 })
        }
        Stage::Quadruple => {
            let qb = quadruple::build_batch(batch, pool, &cfg.quadruple, batch_seed)?;
            let members = qb.members();
            let (emb, cache) = encoder::embed(params, &qb.clips(), b, members)?;
            let loss = &cfg.schedule.loss;
            let report = match (members, loss.mining_enabled) {
                (4, false) => losses::moquad_loss(&emb, loss)?,
                (4, true) => losses::moquad_loss_mined(&emb, loss)?,
                _ => losses::grouped_contrastive_loss(&emb, loss)?,
            };
            Ok(StepResult { report, cache, videos: b, members })
        }
    }
}

/// Loss of an untouched model on exactly the batches a run with this config
/// would see in `epoch`. Used as the frozen-initialization baseline.
pub fn frozen_epoch_loss(params: &ModelParams, train: &[VideoRecord], cfg: &PretrainConfig, epoch: usize) -> Result<f64> {
    let steps = cfg.schedule.steps_for(train.len())?;
    let order = epoch_order(train.len(), cfg.seed, epoch);
    let stage = cfg.schedule.stage(epoch);
    let mut total = 0.0;
    for s in 0..steps {
        let batch = batch_videos(train, &order, s, cfg.schedule.batch_size);
        let t = epoch * steps + s;
        let r = run_step(params, &batch, train, cfg, stage, seed::derive(cfg.seed, &[STREAM_STEP, t as u64]))?;
        total += r.report.loss / r.videos as f64;
    }
    Ok(total / steps as f64)
}

fn epoch_order(n: usize, run_seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng_from(run_seed, &[STREAM_EPOCH, epoch as u64]));
    order
}

fn batch_videos<'a>(train: &'a [VideoRecord], order: &[usize], step: usize, b: usize) -> Vec<&'a VideoRecord> {
    order[step * b..(step + 1) * b].iter().map(|&i| &train[i]).collect()
}

/// Initial parameters for a run: the encoder config with its seed replaced by
/// one derived from the run seed.
pub fn initial_params(cfg: &PretrainConfig) -> Result<ModelParams> {
    let enc = EncoderConfig { seed: seed::derive(cfg.seed, &[STREAM_INIT]), ..cfg.encoder.clone() };
    ModelParams::init(&enc)
}

pub fn run_pretraining(train: &[VideoRecord], heldout: &[VideoRecord], cfg: &PretrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Input("no training videos".into()));
    }
    let steps = cfg.schedule.steps_for(train.len())?;
    let total_epochs = cfg.schedule.total_epochs;
    let mut optim = cfg.optim.clone();
    if optim.total_steps == 0 {
        optim.total_steps = total_epochs * steps;
    }

    let mut params = initial_params(cfg)?;
    let mut log = Vec::with_capacity(total_epochs);

    for epoch in 0..total_epochs {
        let stage = cfg.schedule.stage(epoch);
        let order = epoch_order(train.len(), cfg.seed, epoch);
        let mut loss_sum = 0.0;
        let mut pos_rank_sum = 0.0;
        let mut intra_rank_sum = 0.0;
        let mut has_intra = false;
        let mut lr = 0.0;

        for s in 0..steps {
            let t = epoch * steps + s;
            let batch = batch_videos(train, &order, s, cfg.schedule.batch_size);
            let result = run_step(&params, &batch, train, cfg, stage, seed::derive(cfg.seed, &[STREAM_STEP, t as u64]))
                .map_err(|e| match e {
                    Error::Numeric(msg) => Error::Numeric(format!(
                        "epoch {epoch} step {s} ({stage:?} stage, parameter checksum {:016x}): {msg}",
                        params.checksum()
                    )),
                    other => other,
                })?;
            let b = result.videos as f64;
            loss_sum += result.report.loss / b;

            let ranks = compute_rank_diagnostics(&result.report, result.videos, result.members)?;
            pos_rank_sum += ranks.mean_rank_ad_pos;
            if let Some(r) = ranks.mean_rank_intra_negs {
                intra_rank_sum += r;
                has_intra = true;
            }

            let d = result.cache_dim();
            let grad_z = Array2::from_shape_vec((result.videos * result.members, d), result.report.grads.clone())
                .map_err(|e| Error::Shape(e.to_string()))?
                / b;
            let grads = encoder::backward(&params, &result.cache, &grad_z)?;
            lr = encoder::step(&mut params, &grads, &optim, t)?;
        }

        let n = steps as f64;
        let mut metrics = EpochMetrics {
            epoch,
            stage,
            mean_loss: loss_sum / n,
            mean_rank_ad_pos: Some(pos_rank_sum / n),
            mean_rank_intra_negs: has_intra.then(|| intra_rank_sum / n),
            lr,
        };
        if cfg.schedule.diagnostics == DiagnosticsSource::Heldout && stage == Stage::Quadruple {
            let ranks = heldout_ranks(&params, heldout, cfg)?;
            metrics.mean_rank_ad_pos = Some(ranks.mean_rank_ad_pos);
            metrics.mean_rank_intra_negs = ranks.mean_rank_intra_negs;
        }
        log.push(metrics);
    }
    Ok(TrainOutcome { params, log })
}

impl StepResult {
    fn cache_dim(&self) -> usize {
        self.report.grads.len() / (self.videos * self.members)
    }
}

/// Ranks on the first `batch_size` held-out videos with a fixed batch seed.
fn heldout_ranks(params: &ModelParams, heldout: &[VideoRecord], cfg: &PretrainConfig) -> Result<RankDiagnostics> {
    let b = cfg.schedule.batch_size.min(heldout.len());
    if b == 0 {
        return Err(Error::Input("held-out diagnostics need held-out videos".into()));
    }
    let batch: Vec<&VideoRecord> = heldout[..b].iter().collect();
    let r = run_step(params, &batch, heldout, cfg, Stage::Quadruple, seed::derive(cfg.seed, &[STREAM_HELDOUT]))?;
    compute_rank_diagnostics(&r.report, r.videos, r.members)
}

pub fn write_metrics_log(log: &[EpochMetrics], path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    for m in log {
        serde_json::to_writer(&mut out, m)?;
        out.push(b'\n');
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

pub fn read_metrics_log(path: impl AsRef<Path>) -> Result<Vec<EpochMetrics>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::Missing(path.to_path_buf()));
    }
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
