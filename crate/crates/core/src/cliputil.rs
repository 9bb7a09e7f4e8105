//! Fixed-length clip extraction with a frame stride ("dilation"), which is
//! how playback speed is varied. Pixels are scaled to `[0, 1]` by `x / 255`
//! with no mean subtraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthdata::VideoRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub start: usize,
    pub length: usize,
    pub dilation: usize,
}

impl ClipSpec {
    pub fn new(start: usize, length: usize, dilation: usize) -> Self {
        Self { start, length, dilation }
    }

    /// Index of the last source frame the clip touches.
    pub fn last_frame(&self) -> usize {
        self.start + (self.length.saturating_sub(1)) * self.dilation
    }

    pub fn frame_indices(&self) -> Vec<usize> {
        (0..self.length).map(|i| self.start + i * self.dilation).collect()
    }

    pub fn check(&self, video_frames: usize) -> Result<()> {
        if self.length < 2 {
            return Err(Error::Range(format!("clip length must be >= 2, got {}", self.length)));
        }
        if self.dilation == 0 {
            return Err(Error::Range("dilation must be >= 1".into()));
        }
        let last = self.last_frame();
        if last >= video_frames {
            return Err(Error::Range(format!(
                "clip needs frame {last} but the video has {video_frames} frames"
            )));
        }
        Ok(())
    }
}

/// A stack of `length` frames in `(L, H, W, C)` order with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub pixels: Vec<f64>,
    pub length: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub source_id: u64,
    pub spec: ClipSpec,
    /// Source frame behind each clip frame, in clip order. Equals
    /// `spec.frame_indices()` unless the frames were reordered.
    pub frame_indices: Vec<usize>,
}

impl Clip {
    pub fn frame_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let n = self.frame_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    /// Rebuilds the clip with its frames in the given order.
    pub fn reordered(&self, order: &[usize]) -> Clip {
        let n = self.frame_len();
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for &i in order {
            pixels.extend_from_slice(&self.pixels[i * n..(i + 1) * n]);
        }
        Clip {
            pixels,
            frame_indices: order.iter().map(|&i| self.frame_indices[i]).collect(),
            ..self.clone()
        }
    }
}

pub fn extract_clip(video: &VideoRecord, spec: ClipSpec) -> Result<Clip> {
    let f = &video.frames;
    spec.check(f.frames)?;
    let indices = spec.frame_indices();
    let mut pixels = Vec::with_capacity(spec.length * f.frame_len());
    for &t in &indices {
        pixels.extend(f.frame(t).iter().map(|&p| p as f64 / 255.0));
    }
    Ok(Clip {
        pixels,
        length: spec.length,
        height: f.height,
        width: f.width,
        channels: f.channels,
        source_id: video.id,
        spec,
        frame_indices: indices,
    })
}

/// Largest feasible start for a clip, if any.
pub fn max_start(video_frames: usize, length: usize, dilation: usize) -> Option<usize> {
    let span = length.checked_sub(1)?.checked_mul(dilation)?;
    video_frames.checked_sub(1)?.checked_sub(span)
}

/// Uniform random start over every feasible window.
pub fn sample_clip_spec<R: rand::Rng + ?Sized>(
    rng: &mut R,
    video_frames: usize,
    length: usize,
    dilation: usize,
) -> Result<ClipSpec> {
    if length < 2 || dilation == 0 {
        return Err(Error::Range(format!("invalid clip shape: length {length}, dilation {dilation}")));
    }
    let hi = max_start(video_frames, length, dilation).ok_or_else(|| {
        Error::Range(format!(
            "no window of {length} frames at dilation {dilation} fits in {video_frames} frames"
        ))
    })?;
    Ok(ClipSpec::new(rng.gen_range(0..=hi), length, dilation))
}

/// Area-weighted resampling of an `(h, w, c)` image to `(oh, ow, c)`. Every
/// output pixel is the mean of the source area it covers, with fractional
/// overlaps weighted by their extent.
pub fn area_resize(src: &[f64], h: usize, w: usize, c: usize, oh: usize, ow: usize) -> Vec<f64> {
    debug_assert_eq!(src.len(), h * w * c);
    let ys = overlap_weights(h, oh);
    let xs = overlap_weights(w, ow);
    let mut out = vec![0.0; oh * ow * c];
    for (oy, yw) in ys.iter().enumerate() {
        for (ox, xw) in xs.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for &(y, wy) in yw {
                    for &(x, wx) in xw {
                        acc += wy * wx * src[(y * w + x) * c + ch];
                    }
                }
                out[(oy * ow + ox) * c + ch] = acc;
            }
        }
    }
    out
}

/// For each output cell, the source indices it overlaps and normalized weights.
fn overlap_weights(n: usize, out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n as f64 / out as f64;
    (0..out)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let mut cells = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < n {
                let overlap = (hi.min((i + 1) as f64) - lo.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    cells.push((i, overlap / scale));
                }
                i += 1;
            }
            cells
        })
        .collect()
}
