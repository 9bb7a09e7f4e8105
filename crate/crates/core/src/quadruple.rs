//! Per-video sample construction.
//!
//! A quadruple holds, for one video:
//!
//! | member        | dilation      | appearance      |
//! |---------------|---------------|-----------------|
//! | anchor        | `n`           | untouched       |
//! | AD-Pos        | `n`           | noise, `λ > 0`  |
//! | Intra-Neg     | `m ≠ n`       | untouched       |
//! | AD-Intra-Neg  | `m' ≠ n`      | noise, `λ' > 0` |
//!
//! Every member uses its own random temporal window. AD-Pos and AD-Intra-Neg
//! get independently built noise images and independently drawn `λ`.
//! `n` is drawn uniformly from the feasible candidate dilations.
//!
//! [`Components`] switches members off for ablations: without AD-Pos the
//! positive is an undisturbed clip; without the negatives the result is a
//! plain two-view pair.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cliputil::{extract_clip, max_start, sample_clip_spec, Clip};
use crate::disturb::{
    alternative_dilations, apply_appearance_disturb, build_noise_image, make_motion_disturbed_clip,
    MotionDisturbKind, RadConfig,
};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::synthdata::VideoRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Components {
    pub ad_pos: bool,
    pub intra_neg: bool,
    pub ad_intra_neg: bool,
}

impl Default for Components {
    fn default() -> Self {
        Self::FULL
    }
}

impl Components {
    pub const SIMCLR: Self = Self { ad_pos: false, intra_neg: false, ad_intra_neg: false };
    pub const AD_POS: Self = Self { ad_pos: true, intra_neg: false, ad_intra_neg: false };
    pub const INTRA_NEG: Self = Self { ad_pos: true, intra_neg: true, ad_intra_neg: false };
    pub const FULL: Self = Self { ad_pos: true, intra_neg: true, ad_intra_neg: true };

    /// Embeddings per video: anchor, positive, then each enabled negative.
    pub fn members(&self) -> usize {
        2 + self.intra_negatives()
    }

    pub fn intra_negatives(&self) -> usize {
        self.intra_neg as usize + self.ad_intra_neg as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadrupleConfig {
    pub clip_length: usize,
    pub dilations: Vec<usize>,
    pub rad: RadConfig,
    pub motion: MotionDisturbKind,
    pub components: Components,
}

impl Default for QuadrupleConfig {
    fn default() -> Self {
        Self {
            clip_length: 8,
            dilations: vec![1, 2, 4],
            rad: RadConfig::default(),
            motion: MotionDisturbKind::Speed,
            components: Components::FULL,
        }
    }
}

impl QuadrupleConfig {
    pub fn validate(&self) -> Result<()> {
        self.rad.validate()?;
        if self.clip_length < 2 {
            return Err(Error::Config("clip_length must be >= 2".into()));
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return Err(Error::Config("dilations must be a non-empty set of positive integers".into()));
        }
        Ok(())
    }

    /// Anchor dilations that fit in `frames` and, when a speed-disturbed
    /// negative is needed, leave at least one feasible alternative.
    fn anchor_dilations(&self, frames: usize) -> Vec<usize> {
        let needs_alt = self.components.intra_negatives() > 0 && self.motion == MotionDisturbKind::Speed;
        let mut out: Vec<usize> = self
            .dilations
            .iter()
            .copied()
            .filter(|&n| max_start(frames, self.clip_length, n).is_some())
            .filter(|&n| !needs_alt || !alternative_dilations(&self.dilations, n, frames, self.clip_length).is_empty())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadMeta {
    pub anchor_dilation: usize,
    pub ad_pos_dilation: usize,
    pub intra_neg_dilation: Option<usize>,
    pub ad_intra_neg_dilation: Option<usize>,
    /// Zero for undisturbed members.
    pub lambda_anchor: f64,
    pub lambda_ad_pos: f64,
    pub lambda_intra_neg: f64,
    pub lambda_ad_intra_neg: f64,
    pub ad_pos_donors: Vec<(u64, usize)>,
    pub ad_intra_neg_donors: Vec<(u64, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadruple {
    pub video_id: u64,
    pub anchor: Clip,
    /// AD-Pos; an undisturbed positive when the component is disabled.
    pub ad_pos: Clip,
    pub intra_neg: Option<Clip>,
    pub ad_intra_neg: Option<Clip>,
    pub meta: QuadMeta,
}

impl Quadruple {
    /// Members in embedding order: anchor, positive, intra-neg, AD-intra-neg.
    pub fn members(&self) -> Vec<&Clip> {
        let mut out = vec![&self.anchor, &self.ad_pos];
        out.extend(self.intra_neg.iter());
        out.extend(self.ad_intra_neg.iter());
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadBatch {
    pub quads: Vec<Quadruple>,
}

impl QuadBatch {
    pub fn len(&self) -> usize {
        self.quads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quads.is_empty()
    }

    /// Members per video (identical across the batch).
    pub fn members(&self) -> usize {
        self.quads.first().map_or(0, |q| q.members().len())
    }

    /// All clips, video-major.
    pub fn clips(&self) -> Vec<&Clip> {
        self.quads.iter().flat_map(|q| q.members()).collect()
    }

    /// Inter-video negatives seen by each anchor.
    pub fn inter_negatives_per_anchor(&self) -> usize {
        self.members() * self.len().saturating_sub(1)
    }
}

fn disturbed(video: &VideoRecord, clip: Clip, pool: &[VideoRecord], rad: &RadConfig, rng: &mut Rng) -> Result<(Clip, f64, Vec<(u64, usize)>)> {
    let noise = build_noise_image(video, pool, rad, rng)?;
    let lambda = rad.sample_lambda(rng);
    Ok((apply_appearance_disturb(&clip, &noise, lambda)?, lambda, noise.donor_ids))
}

pub fn build_quadruple(video: &VideoRecord, pool: &[VideoRecord], cfg: &QuadrupleConfig, rng: &mut Rng) -> Result<Quadruple> {
    let frames = video.frames.frames;
    let len = cfg.clip_length;
    let n = *cfg.anchor_dilations(frames).choose(rng).ok_or_else(|| {
        Error::Config(format!("no usable dilation in {:?} for a {frames}-frame video", cfg.dilations))
    })?;

    let anchor_spec = sample_clip_spec(rng, frames, len, n)?;
    let anchor = extract_clip(video, anchor_spec)?;

    let pos_plain = extract_clip(video, sample_clip_spec(rng, frames, len, n)?)?;
    let (ad_pos, lambda_ad_pos, ad_pos_donors) = if cfg.components.ad_pos {
        disturbed(video, pos_plain, pool, &cfg.rad, rng)?
    } else {
        (pos_plain, 0.0, Vec::new())
    };

    let intra_neg = if cfg.components.intra_neg {
        Some(make_motion_disturbed_clip(video, anchor_spec, cfg.motion, &cfg.dilations, rng)?)
    } else {
        None
    };

    let mut lambda_ad_intra_neg = 0.0;
    let mut ad_intra_neg_donors = Vec::new();
    let ad_intra_neg = if cfg.components.ad_intra_neg {
        let plain = make_motion_disturbed_clip(video, anchor_spec, cfg.motion, &cfg.dilations, rng)?;
        let (clip, lambda, donors) = disturbed(video, plain, pool, &cfg.rad, rng)?;
        lambda_ad_intra_neg = lambda;
        ad_intra_neg_donors = donors;
        Some(clip)
    } else {
        None
    };

    Ok(Quadruple {
        video_id: video.id,
        meta: QuadMeta {
            anchor_dilation: n,
            ad_pos_dilation: ad_pos.spec.dilation,
            intra_neg_dilation: intra_neg.as_ref().map(|c| c.spec.dilation),
            ad_intra_neg_dilation: ad_intra_neg.as_ref().map(|c| c.spec.dilation),
            lambda_anchor: 0.0,
            lambda_ad_pos,
            lambda_intra_neg: 0.0,
            lambda_ad_intra_neg,
            ad_pos_donors,
            ad_intra_neg_donors,
        },
        anchor,
        ad_pos,
        intra_neg,
        ad_intra_neg,
    })
}

fn check_distinct(videos: &[&VideoRecord]) -> Result<()> {
    if videos.is_empty() {
        return Err(Error::Input("batch needs at least one video".into()));
    }
    let mut ids: Vec<u64> = videos.iter().map(|v| v.id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Input(format!("video {} appears twice in the batch", w[0])));
    }
    Ok(())
}

/// One quadruple per video. Video `id` draws from a stream derived from
/// `(batch_seed, id)`, so the result does not depend on thread scheduling.
pub fn build_batch(videos: &[&VideoRecord], pool: &[VideoRecord], cfg: &QuadrupleConfig, batch_seed: u64) -> Result<QuadBatch> {
    check_distinct(videos)?;
    let quads = videos
        .par_iter()
        .map(|v| build_quadruple(v, pool, cfg, &mut seed::rng_from(batch_seed, &[v.id])))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuadBatch { quads })
}

/// Two undisturbed clips of one video at distinct dilations `n ≠ m`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmupPair {
    pub video_id: u64,
    pub clip_n: Clip,
    pub clip_m: Clip,
}

pub fn build_warmup_pair(video: &VideoRecord, cfg: &QuadrupleConfig, rng: &mut Rng) -> Result<WarmupPair> {
    let frames = video.frames.frames;
    let len = cfg.clip_length;
    let mut feasible: Vec<usize> =
        cfg.dilations.iter().copied().filter(|&d| max_start(frames, len, d).is_some()).collect();
    feasible.sort_unstable();
    feasible.dedup();
    if feasible.len() < 2 {
        return Err(Error::Config(format!("warm-up needs two feasible dilations, have {feasible:?}")));
    }
    let picked: Vec<usize> = feasible.choose_multiple(rng, 2).copied().collect();
    let clip_n = extract_clip(video, sample_clip_spec(rng, frames, len, picked[0])?)?;
    let clip_m = extract_clip(video, sample_clip_spec(rng, frames, len, picked[1])?)?;
    Ok(WarmupPair { video_id: video.id, clip_n, clip_m })
}

pub fn build_warmup_batch(videos: &[&VideoRecord], cfg: &QuadrupleConfig, batch_seed: u64) -> Result<Vec<WarmupPair>> {
    check_distinct(videos)?;
    videos
        .par_iter()
        .map(|v| build_warmup_pair(v, cfg, &mut seed::rng_from(batch_seed, &[v.id])))
        .collect()
}
