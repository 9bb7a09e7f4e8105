//! Synthetic moving-sprite videos with independently controlled appearance
//! (a static value-noise background) and motion (a square sprite translating
//! at a fixed integer velocity on a wrap-around canvas).
//!
//! Motion class `c` selects compass direction `c % 8` (up, down, left, right,
//! then the four diagonals) and speed tier `c / 8`; the sprite moves
//! `(tier + 1) * speed` pixels per frame along that direction. Appearance
//! class selects the noise lattice scale and brightness of the background.
//! Motion labels cycle with the video id, appearance labels are drawn from
//! the per-video stream, so the two are independent.

mod manifest;
mod rawvid;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use manifest::{load_dataset, read_manifest, save_dataset, ManifestEntry, MANIFEST_FILE};
pub use rawvid::{read_rawvid, write_rawvid, RAWVID_HEADER_LEN, RAWVID_MAGIC, RAWVID_VERSION};

/// Pixel intensity of the sprite. Backgrounds stay at or below
/// [`BACKGROUND_MAX`] so the sprite is always the brightest thing in a frame.
pub const SPRITE_INTENSITY: u8 = 255;
pub const BACKGROUND_MAX: u8 = 160;

const DIRECTIONS: [(i64, i64); 8] =
    [(0, -1), (0, 1), (-1, 0), (1, 0), (-1, -1), (1, -1), (-1, 1), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundMode {
    /// Every video gets its own texture; appearance alone identifies a video.
    UniquePerVideo,
    /// All videos of one appearance class share a texture.
    SharedPerClass,
}

/// Frame tensor in (T, H, W, C) order, frame-major, row-major,
/// channel-interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoFrames {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl VideoFrames {
    pub fn frame_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn frame(&self, t: usize) -> &[u8] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn pixel(&self, t: usize, y: usize, x: usize, c: usize) -> u8 {
        self.data[((t * self.height + y) * self.width + x) * self.channels + c]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoRecord {
    pub id: u64,
    pub frames: VideoFrames,
    pub motion_class: u32,
    pub appearance_class: u32,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub num_train: usize,
    pub num_test: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub num_motion_classes: u32,
    pub num_appearance_classes: u32,
    pub background_mode: BackgroundMode,
    /// Side of the square sprite in pixels.
    pub sprite_size: usize,
    /// Pixels per frame at the lowest speed tier.
    pub speed: usize,
    /// The first this-many motion classes get a class-specific sprite size,
    /// making them recognizable from a single frame.
    pub appearance_cued_classes: u32,
    /// Sprite start offset range around the frame centre, per axis. `None`
    /// places the start uniformly anywhere in the frame.
    pub origin_jitter: Option<usize>,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            num_train: 200,
            num_test: 100,
            frames: 32,
            height: 32,
            width: 32,
            channels: 1,
            num_motion_classes: 4,
            num_appearance_classes: 4,
            background_mode: BackgroundMode::UniquePerVideo,
            sprite_size: 6,
            speed: 1,
            appearance_cued_classes: 0,
            origin_jitter: None,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::Config(format!("frames must be >= 2, got {}", self.frames)));
        }
        if self.num_train == 0 || self.num_test == 0 {
            return Err(Error::Config("num_train and num_test must be positive".into()));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::Config("frame height and width must be positive".into()));
        }
        if !matches!(self.channels, 1 | 3) {
            return Err(Error::Config(format!("channels must be 1 or 3, got {}", self.channels)));
        }
        if self.num_motion_classes < 2 {
            return Err(Error::Config("num_motion_classes must be >= 2".into()));
        }
        if self.num_appearance_classes == 0 {
            return Err(Error::Config("num_appearance_classes must be positive".into()));
        }
        if self.appearance_cued_classes > self.num_motion_classes {
            return Err(Error::Config(
                "appearance_cued_classes cannot exceed num_motion_classes".into(),
            ));
        }
        if self.speed == 0 {
            return Err(Error::Config("speed must be positive".into()));
        }
        let largest_sprite = self.sprite_side(self.appearance_cued_classes.saturating_sub(1));
        if self.sprite_size == 0 || largest_sprite >= self.height.min(self.width) {
            return Err(Error::Config("sprite must be non-empty and smaller than the frame".into()));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.num_train + self.num_test
    }

    /// Per-frame displacement (dx, dy) of a motion class.
    pub fn velocity(&self, motion_class: u32) -> (i64, i64) {
        let (dx, dy) = DIRECTIONS[(motion_class % 8) as usize];
        let step = ((motion_class / 8) as i64 + 1) * self.speed as i64;
        (dx * step, dy * step)
    }

    /// Sprite side for a motion class.
    pub fn sprite_side(&self, motion_class: u32) -> usize {
        if motion_class < self.appearance_cued_classes {
            self.sprite_size + 2 * (motion_class as usize + 1)
        } else {
            self.sprite_size
        }
    }

    /// Whether a motion class carries a single-frame appearance cue.
    pub fn is_appearance_cued(&self, motion_class: u32) -> bool {
        motion_class < self.appearance_cued_classes
    }
}

/// Builds `num_train + num_test` videos; ids `0..num_train` are the train
/// split. Each video is a pure function of `(config, id)`.
pub fn generate_dataset(config: &DatasetConfig) -> Result<Vec<VideoRecord>> {
    config.validate()?;
    Ok((0..config.total() as u64).into_par_iter().map(|id| generate_video(config, id)).collect())
}

fn generate_video(config: &DatasetConfig, id: u64) -> VideoRecord {
    let mut rng = seed::rng_from(config.seed, &[id]);
    let motion_class = (id % config.num_motion_classes as u64) as u32;
    let appearance_class = rng.gen_range(0..config.num_appearance_classes);
    let split = if (id as usize) < config.num_train { Split::Train } else { Split::Test };

    let texture_seed = match config.background_mode {
        BackgroundMode::UniquePerVideo => seed::derive(config.seed, &[id, 1]),
        BackgroundMode::SharedPerClass => seed::derive(config.seed, &[u64::MAX, appearance_class as u64]),
    };
    let background = value_noise_background(config, appearance_class, texture_seed);

    let (h, w, c) = (config.height, config.width, config.channels);
    let side = config.sprite_side(motion_class);
    let origin = match config.origin_jitter {
        None => (rng.gen_range(0..w) as i64, rng.gen_range(0..h) as i64),
        Some(j) => {
            let j = j as i64;
            let cx = (w as i64 - side as i64) / 2;
            let cy = (h as i64 - side as i64) / 2;
            (cx + rng.gen_range(-j..=j), cy + rng.gen_range(-j..=j))
        }
    };
    let (vx, vy) = config.velocity(motion_class);

    let mut data = Vec::with_capacity(config.frames * h * w * c);
    for t in 0..config.frames as i64 {
        let mut frame = background.clone();
        let x0 = (origin.0 + vx * t).rem_euclid(w as i64) as usize;
        let y0 = (origin.1 + vy * t).rem_euclid(h as i64) as usize;
        for dy in 0..side {
            let y = (y0 + dy) % h;
            for dx in 0..side {
                let x = (x0 + dx) % w;
                for ch in 0..c {
                    frame[(y * w + x) * c + ch] = SPRITE_INTENSITY;
                }
            }
        }
        data.extend_from_slice(&frame);
    }

    VideoRecord {
        id,
        frames: VideoFrames { frames: config.frames, height: h, width: w, channels: c, data },
        motion_class,
        appearance_class,
        split,
    }
}

/// Periodic value noise with smoothstep interpolation. The lattice cell size
/// and brightness depend on the appearance class; lattice values come from
/// `texture_seed`.
fn value_noise_background(config: &DatasetConfig, appearance_class: u32, texture_seed: u64) -> Vec<u8> {
    let (h, w, c) = (config.height, config.width, config.channels);
    let mut rng = seed::rng_from(texture_seed, &[]);
    let cell = [2usize, 4, 8][(appearance_class % 3) as usize];
    let gy = h.div_ceil(cell).max(1);
    let gx = w.div_ceil(cell).max(1);
    let lo = 10.0 * (appearance_class % 4) as f64;
    let hi = BACKGROUND_MAX as f64;

    let mut out = vec![0u8; h * w * c];
    for ch in 0..c {
        let lattice: Vec<f64> = (0..gy * gx).map(|_| rng.gen::<f64>()).collect();
        let at = |iy: usize, ix: usize| lattice[(iy % gy) * gx + (ix % gx)];
        for y in 0..h {
            let fy = y as f64 / cell as f64;
            let iy = fy.floor() as usize;
            let ty = smoothstep(fy - iy as f64);
            for x in 0..w {
                let fx = x as f64 / cell as f64;
                let ix = fx.floor() as usize;
                let tx = smoothstep(fx - ix as f64);
                let top = at(iy, ix) * (1.0 - tx) + at(iy, ix + 1) * tx;
                let bottom = at(iy + 1, ix) * (1.0 - tx) + at(iy + 1, ix + 1) * tx;
                let v = top * (1.0 - ty) + bottom * ty;
                out[(y * w + x) * c + ch] = (lo + v * (hi - lo)).round().clamp(0.0, hi) as u8;
            }
        }
    }
    out
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetConfig {
        DatasetConfig { num_train: 4, num_test: 2, frames: 8, height: 16, width: 16, ..Default::default() }
    }

    /// Top-left corner of the sprite on the wrap-around canvas.
    fn sprite_origin(v: &VideoFrames, t: usize) -> (usize, usize) {
        let (h, w) = (v.height, v.width);
        for y in 0..h {
            for x in 0..w {
                let on = |yy: usize, xx: usize| v.pixel(t, yy, xx, 0) == SPRITE_INTENSITY;
                if on(y, x) && !on((y + h - 1) % h, x) && !on(y, (x + w - 1) % w) {
                    return (x, y);
                }
            }
        }
        panic!("no sprite in frame {t}");
    }

    #[test]
    fn counts_and_ids() {
        let videos = generate_dataset(&small()).unwrap();
        assert_eq!(videos.len(), 6);
        assert_eq!(videos.iter().map(|v| v.id).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(videos.iter().filter(|v| v.split == Split::Test).count(), 2);
    }

    #[test]
    fn centred_origin() {
        // 16 px frame, 6 px sprite: centred corner at 5
        let videos = generate_dataset(&DatasetConfig { origin_jitter: Some(0), ..small() }).unwrap();
        for v in &videos {
            assert_eq!(sprite_origin(&v.frames, 0), (5, 5));
        }
        let videos = generate_dataset(&DatasetConfig { origin_jitter: Some(1), num_train: 40, ..small() }).unwrap();
        for v in &videos {
            let (x, y) = sprite_origin(&v.frames, 0);
            assert!((4..=6).contains(&x) && (4..=6).contains(&y));
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_dataset(&small()).unwrap();
        let b = generate_dataset(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&DatasetConfig { seed: 9, ..small() }).unwrap();
        assert_ne!(a[0].frames, c[0].frames);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(generate_dataset(&DatasetConfig { frames: 1, ..small() }), Err(Error::Config(_))));
        assert!(matches!(generate_dataset(&DatasetConfig { num_test: 0, ..small() }), Err(Error::Config(_))));
        assert!(matches!(generate_dataset(&DatasetConfig { channels: 2, ..small() }), Err(Error::Config(_))));
        assert!(matches!(
            generate_dataset(&DatasetConfig { num_motion_classes: 1, ..small() }),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sprite_moves_by_class_velocity() {
        let cfg = DatasetConfig { num_motion_classes: 8, num_train: 16, speed: 2, ..DatasetConfig::default() };
        for v in generate_dataset(&cfg).unwrap() {
            let (vx, vy) = cfg.velocity(v.motion_class);
            let (h, w) = (cfg.height as i64, cfg.width as i64);
            for t in 1..cfg.frames {
                let (x0, y0) = sprite_origin(&v.frames, t - 1);
                let (x1, y1) = sprite_origin(&v.frames, t);
                assert_eq!((x0 as i64 + vx).rem_euclid(w), x1 as i64, "video {} t {t}", v.id);
                assert_eq!((y0 as i64 + vy).rem_euclid(h), y1 as i64, "video {} t {t}", v.id);
            }
        }
    }

    #[test]
    fn unique_backgrounds_differ_and_shared_match() {
        let unique = generate_dataset(&small()).unwrap();
        assert_ne!(unique[0].frames.frame(0), unique[4].frames.frame(0));

        let cfg = DatasetConfig {
            background_mode: BackgroundMode::SharedPerClass,
            num_appearance_classes: 1,
            ..small()
        };
        let shared = generate_dataset(&cfg).unwrap();
        // away from the sprite the background is identical across videos
        let bg = |v: &VideoRecord| {
            let f = v.frames.frame(0);
            f.iter().map(|&p| if p == SPRITE_INTENSITY { None } else { Some(p) }).collect::<Vec<_>>()
        };
        let (a, b) = (bg(&shared[0]), bg(&shared[1]));
        assert!(a.iter().zip(&b).all(|(x, y)| x.is_none() || y.is_none() || x == y));
    }

    #[test]
    fn appearance_cued_sprites_are_larger() {
        let cfg = DatasetConfig { appearance_cued_classes: 2, ..small() };
        assert_eq!(cfg.sprite_side(0), 8);
        assert_eq!(cfg.sprite_side(1), 10);
        assert_eq!(cfg.sprite_side(2), 6);
        let videos = generate_dataset(&cfg).unwrap();
        let lit = |v: &VideoRecord| v.frames.frame(0).iter().filter(|&&p| p == SPRITE_INTENSITY).count();
        assert_eq!(lit(&videos[0]), 64);
        assert_eq!(lit(&videos[2]), 36);
    }

    #[test]
    fn pixels_and_colour_channels() {
        let cfg = DatasetConfig { channels: 3, ..small() };
        let videos = generate_dataset(&cfg).unwrap();
        assert_eq!(videos[0].frames.data.len(), 8 * 16 * 16 * 3);
        let bg_max = videos[0].frames.data.iter().filter(|&&p| p != SPRITE_INTENSITY).max().unwrap();
        assert!(*bg_max <= BACKGROUND_MAX);
    }
}
