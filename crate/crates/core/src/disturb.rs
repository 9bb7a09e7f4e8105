//! Appearance and motion disturbances.
//!
//! Appearance: a static noise image `D` is blended into every frame,
//! `out = (1 - λ)·clip + λ·D`. Because `D` does not change over time, every
//! temporal difference of the clip is scaled by exactly `1 - λ`.
//! `D` is built three ways:
//!
//! * **RAD (inter)**: the image is cut into a `k × k` grid; each window is
//!   filled with a different random frame of one donor video other than the
//!   target, area-downsampled to the window size.
//! * **RAD (intra)**: same tiling, donor frames from the target video itself.
//! * **BE baseline**: one whole random frame of the target video, no tiling.
//!
//! Window bounds use `size / k` per window; the last row and column absorb
//! the remainder.
//!
//! Motion: speed change (a different dilation), frame reversal, or a random
//! non-identity frame permutation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cliputil::{area_resize, extract_clip, max_start, sample_clip_spec, Clip, ClipSpec};
use crate::error::{Error, Result};
use crate::synthdata::VideoRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DonorMode {
    Inter,
    Intra,
    BeBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadConfig {
    pub k: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub donor_mode: DonorMode,
}

impl Default for RadConfig {
    fn default() -> Self {
        Self { k: 5, lambda_min: 0.1, lambda_max: 0.5, donor_mode: DonorMode::Inter }
    }
}

impl RadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("rad.k must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda_min)
            || !(0.0..=1.0).contains(&self.lambda_max)
            || self.lambda_min > self.lambda_max
        {
            return Err(Error::Config(format!(
                "rad lambda range [{}, {}] must be an interval inside [0, 1]",
                self.lambda_min, self.lambda_max
            )));
        }
        Ok(())
    }

    pub fn sample_lambda<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lambda_min == self.lambda_max {
            self.lambda_min
        } else {
            rng.gen_range(self.lambda_min..=self.lambda_max)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionDisturbKind {
    Speed,
    Reverse,
    Shuffle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseImage {
    pub pixels: Vec<f64>,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// `(video id, frame index)` per window in row-major window order; a
    /// single entry for the BE baseline.
    pub donor_ids: Vec<(u64, usize)>,
}

/// `(start, len)` of each of the `k` windows along an axis of `size` pixels.
pub fn window_bounds(size: usize, k: usize) -> Result<Vec<(usize, usize)>> {
    if k == 0 || size < k {
        return Err(Error::Config(format!("cannot split {size} pixels into {k} windows")));
    }
    let base = size / k;
    Ok((0..k)
        .map(|i| {
            let len = if i + 1 == k { size - base * (k - 1) } else { base };
            (i * base, len)
        })
        .collect())
}

/// Builds the noise image for `target` from `pool` (any set of videos; the
/// target itself may be in it and is skipped in inter mode).
pub fn build_noise_image<R: rand::Rng + ?Sized>(
    target: &VideoRecord,
    pool: &[VideoRecord],
    cfg: &RadConfig,
    rng: &mut R,
) -> Result<NoiseImage> {
    let f = &target.frames;
    let (h, w, c) = (f.height, f.width, f.channels);
    let frame_f64 = |v: &VideoRecord, t: usize| -> Vec<f64> {
        v.frames.frame(t).iter().map(|&p| p as f64 / 255.0).collect()
    };

    let donor: &VideoRecord = match cfg.donor_mode {
        DonorMode::BeBaseline => {
            let t = rng.gen_range(0..f.frames);
            return Ok(NoiseImage {
                pixels: frame_f64(target, t),
                height: h,
                width: w,
                channels: c,
                donor_ids: vec![(target.id, t)],
            });
        }
        DonorMode::Intra => target,
        DonorMode::Inter => {
            let others: Vec<&VideoRecord> = pool.iter().filter(|v| v.id != target.id).collect();
            let donor = others
                .choose(rng)
                .ok_or_else(|| Error::Config("donor pool has no video other than the target".into()))?;
            if (donor.frames.height, donor.frames.width, donor.frames.channels) != (h, w, c) {
                return Err(Error::Shape(format!("donor video {} has different frame dims", donor.id)));
            }
            donor
        }
    };

    let rows = window_bounds(h, cfg.k)?;
    let cols = window_bounds(w, cfg.k)?;
    let mut pixels = vec![0.0; h * w * c];
    let mut donor_ids = Vec::with_capacity(cfg.k * cfg.k);
    for &(y0, wh) in &rows {
        for &(x0, ww) in &cols {
            let t = rng.gen_range(0..donor.frames.frames);
            donor_ids.push((donor.id, t));
            let patch = area_resize(&frame_f64(donor, t), h, w, c, wh, ww);
            for y in 0..wh {
                let dst = ((y0 + y) * w + x0) * c;
                pixels[dst..dst + ww * c].copy_from_slice(&patch[y * ww * c..(y + 1) * ww * c]);
            }
        }
    }
    Ok(NoiseImage { pixels, height: h, width: w, channels: c, donor_ids })
}

/// `out[t] = (1 - λ)·clip[t] + λ·noise` for every frame.
pub fn apply_appearance_disturb(clip: &Clip, noise: &NoiseImage, lambda: f64) -> Result<Clip> {
    if (clip.height, clip.width, clip.channels) != (noise.height, noise.width, noise.channels) {
        return Err(Error::Shape(format!(
            "clip frames are {}x{}x{}, noise image is {}x{}x{}",
            clip.height, clip.width, clip.channels, noise.height, noise.width, noise.channels
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Range(format!("lambda {lambda} outside [0, 1]")));
    }
    let n = clip.frame_len();
    let keep = 1.0 - lambda;
    let pixels = clip
        .pixels
        .iter()
        .enumerate()
        .map(|(i, &p)| keep * p + lambda * noise.pixels[i % n])
        .collect();
    Ok(Clip { pixels, ..clip.clone() })
}

/// Dilations from `candidates` other than `anchor_dilation` whose window fits.
pub fn alternative_dilations(candidates: &[usize], anchor_dilation: usize, frames: usize, length: usize) -> Vec<usize> {
    let mut alts: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&m| m != anchor_dilation && m > 0 && max_start(frames, length, m).is_some())
        .collect();
    alts.sort_unstable();
    alts.dedup();
    alts
}

/// Seeded Fisher–Yates: for `i` from `n - 1` down to 1, swap `i` with a
/// uniform `j` in `0..=i`. Identity results are rejected and redrawn.
pub fn shuffled_order<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let identity: Vec<usize> = (0..n).collect();
    if n < 2 {
        return identity;
    }
    loop {
        let mut order = identity.clone();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        if order != identity {
            return order;
        }
    }
}

pub fn make_motion_disturbed_clip<R: rand::Rng + ?Sized>(
    video: &VideoRecord,
    anchor_spec: ClipSpec,
    kind: MotionDisturbKind,
    dilation_candidates: &[usize],
    rng: &mut R,
) -> Result<Clip> {
    let frames = video.frames.frames;
    match kind {
        MotionDisturbKind::Speed => {
            let alts = alternative_dilations(dilation_candidates, anchor_spec.dilation, frames, anchor_spec.length);
            let m = *alts.choose(rng).ok_or_else(|| {
                Error::Config(format!(
                    "no feasible dilation other than {} among {:?}",
                    anchor_spec.dilation, dilation_candidates
                ))
            })?;
            extract_clip(video, sample_clip_spec(rng, frames, anchor_spec.length, m)?)
        }
        MotionDisturbKind::Reverse => {
            let clip = extract_clip(video, sample_clip_spec(rng, frames, anchor_spec.length, anchor_spec.dilation)?)?;
            let order: Vec<usize> = (0..clip.length).rev().collect();
            Ok(clip.reordered(&order))
        }
        MotionDisturbKind::Shuffle => {
            let clip = extract_clip(video, sample_clip_spec(rng, frames, anchor_spec.length, anchor_spec.dilation)?)?;
            let order = shuffled_order(clip.length, rng);
            Ok(clip.reordered(&order))
        }
    }
}
