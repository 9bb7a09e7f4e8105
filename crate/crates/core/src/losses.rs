//! InfoNCE-family losses over per-video groups of unit embeddings, with
//! analytic gradients.
//!
//! An [`EmbeddingBatch`] holds `B` videos with `S` members each. Member 0 is
//! the anchor, member 1 the positive, members `2..S` are intra-video
//! negatives. For anchor `i` the candidates, in this order, are
//!
//! 1. the positive `z[i][1]`,
//! 2. the intra-video negatives `z[i][2..S]`,
//! 3. every member of every other video, `z[j][s]` for `j ≠ i` ascending,
//!    `s` ascending (the "flat" inter index used for tie-breaking).
//!
//! The per-anchor loss is `-log(e^{pos} / Σ_c w_c e^{sim_c/τ})` where `w_c`
//! is 1, except that with hard-negative mining the intra negatives and the
//! top-K inter negatives get weight `α`. The batch loss is the sum over
//! anchors.
//!
//! With `S = 4` this is the quadruple loss; with `S = 2` and no mining it is
//! the two-clip appearance loss, whose negatives are both clips of every
//! other video.
//!
//! Gradients treat every input vector as a free variable; the Jacobian of the
//! normalization that produced them belongs to the encoder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-norm tolerance on loss inputs.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    videos: usize,
    members: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingBatch {
    pub fn new(videos: usize, members: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if videos == 0 || members < 2 || dim == 0 {
            return Err(Error::Shape(format!("invalid batch shape ({videos}, {members}, {dim})")));
        }
        if data.len() != videos * members * dim {
            return Err(Error::Shape(format!(
                "expected {} values for shape ({videos}, {members}, {dim}), got {}",
                videos * members * dim,
                data.len()
            )));
        }
        Ok(Self { videos, members, dim, data })
    }

    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let videos = nested.len();
        let members = nested.first().map_or(0, Vec::len);
        let dim = nested.first().and_then(|v| v.first()).map_or(0, Vec::len);
        let mut data = Vec::with_capacity(videos * members * dim);
        for video in nested {
            if video.len() != members {
                return Err(Error::Shape("ragged member count".into()));
            }
            for v in video {
                if v.len() != dim {
                    return Err(Error::Shape("ragged embedding dimension".into()));
                }
                data.extend_from_slice(v);
            }
        }
        Self::new(videos, members, dim, data)
    }

    pub fn videos(&self) -> usize {
        self.videos
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn vector(&self, video: usize, member: usize) -> &[f64] {
        let off = (video * self.members + member) * self.dim;
        &self.data[off..off + self.dim]
    }

    fn check_inputs(&self) -> Result<()> {
        if let Some(pos) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite embedding value at flat index {pos}")));
        }
        for i in 0..self.videos {
            for s in 0..self.members {
                let norm = dot(self.vector(i, s), self.vector(i, s)).sqrt();
                if (norm - 1.0).abs() > UNIT_NORM_TOL {
                    return Err(Error::Input(format!("embedding ({i}, {s}) has norm {norm}, expected 1")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mining_enabled: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { tau: 0.1, alpha: 1.5, beta: 0.01, mining_enabled: false }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.mining_enabled {
            if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
                return Err(Error::Config(format!("alpha must be >= 1 with mining, got {}", self.alpha)));
            }
            if !(0.0..=1.0).contains(&self.beta) {
                return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    /// Same layout as the input batch.
    pub grads: Vec<f64>,
    /// Per anchor, similarities in candidate order (positive, intra, inter).
    pub similarities: Vec<Vec<f64>>,
    /// Per anchor, flat inter indices of the mined hard negatives, best first.
    pub topk_indices: Vec<Vec<usize>>,
    /// Per-anchor loss terms.
    pub per_anchor: Vec<f64>,
}

/// Which loss a gradient check exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossVariant {
    Quadruple,
    QuadrupleMined,
    Appearance,
    /// Any member count; mining per `LossConfig::mining_enabled`.
    Grouped,
}

/// K for a candidate set of size `n`: `floor(β·n)`, at least 1 when `β > 0`
/// and `n ≥ 1`. A 1e-9 slack absorbs products like `0.29 * 100`.
pub fn hard_negative_count(beta: f64, n: usize) -> usize {
    if n == 0 || beta <= 0.0 {
        return 0;
    }
    ((beta * n as f64 + 1e-9).floor() as usize).clamp(1, n)
}

/// Indices of the `k` largest values, ties to the lower index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss, gradients and diagnostics without input validation.
fn grouped_loss(batch: &EmbeddingBatch, tau: f64, mining: Option<(f64, f64)>) -> LossReport {
    let (b, s, d) = (batch.videos, batch.members, batch.dim);
    let intra = s - 2;
    let inter = s * (b - 1);
    let mut grads = vec![0.0; batch.data.len()];
    let mut similarities = Vec::with_capacity(b);
    let mut topk_indices = Vec::with_capacity(b);
    let mut per_anchor = Vec::with_capacity(b);

    // candidate (video, member) pairs for anchor i, in candidate order
    let candidates = |i: usize| {
        (1..s).map(move |m| (i, m)).chain((0..b).filter(move |&j| j != i).flat_map(move |j| (0..s).map(move |m| (j, m))))
    };

    for i in 0..b {
        let anchor = batch.vector(i, 0);
        let sims: Vec<f64> = candidates(i).map(|(j, m)| dot(anchor, batch.vector(j, m))).collect();

        let mut log_w = vec![0.0; sims.len()];
        let hard = match mining {
            Some((alpha, beta)) => {
                let la = alpha.ln();
                for w in &mut log_w[1..1 + intra] {
                    *w = la;
                }
                let hard = top_k_indices(&sims[1 + intra..], hard_negative_count(beta, inter));
                for &h in &hard {
                    log_w[1 + intra + h] = la;
                }
                hard
            }
            None => Vec::new(),
        };

        let logits: Vec<f64> = sims.iter().zip(&log_w).map(|(sim, lw)| sim / tau + lw).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        let lse = max + sum.ln();
        // ln(1 + x) keeps full relative precision when the positive dominates
        per_anchor.push(if logits[0] == max {
            logits[1..].iter().map(|l| (l - max).exp()).sum::<f64>().ln_1p()
        } else {
            lse - logits[0]
        });

        for (c, (j, m)) in candidates(i).enumerate() {
            let p = (logits[c] - lse).exp();
            let g = (p - if c == 0 { 1.0 } else { 0.0 }) / tau;
            let cand_off = (j * s + m) * d;
            let anchor_off = i * s * d;
            for k in 0..d {
                grads[anchor_off + k] += g * batch.data[cand_off + k];
                grads[cand_off + k] += g * batch.data[anchor_off + k];
            }
        }

        similarities.push(sims);
        topk_indices.push(hard);
    }

    LossReport { loss: per_anchor.iter().sum(), grads, similarities, topk_indices, per_anchor }
}

fn finish(report: LossReport) -> Result<LossReport> {
    if !report.loss.is_finite() || report.grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite loss or gradient (loss = {})", report.loss)));
    }
    Ok(report)
}

fn expect_members(batch: &EmbeddingBatch, members: usize, what: &str) -> Result<()> {
    if batch.members != members {
        return Err(Error::Shape(format!("{what} expects {members} members per video, got {}", batch.members)));
    }
    Ok(())
}

/// Quadruple loss over a `(B, 4, d)` batch: positive, two intra negatives,
/// and all `4(B-1)` members of the other videos.
pub fn moquad_loss(batch: &EmbeddingBatch, cfg: &LossConfig) -> Result<LossReport> {
    expect_members(batch, 4, "moquad_loss")?;
    LossConfig { mining_enabled: false, ..*cfg }.validate()?;
    batch.check_inputs()?;
    finish(grouped_loss(batch, cfg.tau, None))
}

/// Quadruple loss with the intra negatives and the top-K inter negatives
/// weighted by `α`, K = `floor(β · 4(B-1))`.
pub fn moquad_loss_mined(batch: &EmbeddingBatch, cfg: &LossConfig) -> Result<LossReport> {
    expect_members(batch, 4, "moquad_loss_mined")?;
    LossConfig { mining_enabled: true, ..*cfg }.validate()?;
    batch.check_inputs()?;
    finish(grouped_loss(batch, cfg.tau, Some((cfg.alpha, cfg.beta))))
}

/// Two-clip appearance loss over a `(B, 2, d)` batch of `(z_n, z_m)` pairs.
pub fn appearance_loss(batch: &EmbeddingBatch, tau: f64) -> Result<LossReport> {
    expect_members(batch, 2, "appearance_loss")?;
    LossConfig { tau, ..Default::default() }.validate()?;
    batch.check_inputs()?;
    finish(grouped_loss(batch, tau, None))
}

/// The same loss for any member count `S ≥ 2`; ablated constructions
/// (pairs, triples) go through here.
pub fn grouped_contrastive_loss(batch: &EmbeddingBatch, cfg: &LossConfig) -> Result<LossReport> {
    cfg.validate()?;
    batch.check_inputs()?;
    let mining = cfg.mining_enabled.then_some((cfg.alpha, cfg.beta));
    finish(grouped_loss(batch, cfg.tau, mining))
}

fn unchecked(variant: LossVariant, batch: &EmbeddingBatch, cfg: &LossConfig) -> LossReport {
    match variant {
        LossVariant::Quadruple | LossVariant::Appearance => grouped_loss(batch, cfg.tau, None),
        LossVariant::QuadrupleMined => grouped_loss(batch, cfg.tau, Some((cfg.alpha, cfg.beta))),
        LossVariant::Grouped => grouped_loss(batch, cfg.tau, cfg.mining_enabled.then_some((cfg.alpha, cfg.beta))),
    }
}

/// Largest coordinate-wise relative error between the analytic gradient and
/// central differences with step `epsilon`. Coordinates are compared
/// relative to `max(|analytic|, |numeric|, GRADCHECK_FLOOR)`.
///
/// Perturbed inputs leave the unit sphere, so the loss is evaluated without
/// the unit-norm check. The mined variant is only smooth away from top-K
/// ties.
pub fn loss_gradcheck(variant: LossVariant, batch: &EmbeddingBatch, cfg: &LossConfig, epsilon: f64) -> f64 {
    let analytic = unchecked(variant, batch, cfg).grads;
    let mut probe = batch.clone();
    let mut worst: f64 = 0.0;
    for k in 0..batch.data.len() {
        let orig = probe.data[k];
        probe.data[k] = orig + epsilon;
        let plus = unchecked(variant, &probe, cfg).loss;
        probe.data[k] = orig - epsilon;
        let minus = unchecked(variant, &probe, cfg).loss;
        probe.data[k] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = analytic[k].abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    worst
}

/// Gradient magnitude below which errors are measured in absolute terms.
pub const GRADCHECK_FLOOR: f64 = 1e-3;
