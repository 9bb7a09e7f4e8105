//! Feed-forward clip encoder with hand-written backpropagation.
//!
//! Clips are area-downsampled to `input_height × input_width`, flattened
//! frame-major into one row, and passed through
//!
//! ```text
//! F: dense → ReLU → … → dense(feature_dim) → ReLU      (features)
//! H: dense → ReLU → … → dense(proj_out_dim)            (projection)
//! z = h / sqrt(|h|² + 1e-12)
//! ```
//!
//! Weights are stored `(in, out)` so a batch is `X · W + b`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::cliputil::{area_resize, Clip};
use crate::error::{Error, Result};
use crate::losses::EmbeddingBatch;
use crate::seed;

pub const NORM_EPS: f64 = 1e-12;
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MOQD";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub clip_length: usize,
    pub channels: usize,
    /// Spatial size frames are downsampled to before flattening.
    pub input_height: usize,
    pub input_width: usize,
    pub hidden_dims: Vec<usize>,
    pub feature_dim: usize,
    pub proj_dims: Vec<usize>,
    pub proj_out_dim: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            clip_length: 8,
            channels: 1,
            input_height: 16,
            input_width: 16,
            hidden_dims: vec![256],
            feature_dim: 128,
            proj_dims: vec![128],
            proj_out_dim: 64,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn input_dim(&self) -> usize {
        self.clip_length * self.input_height * self.input_width * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.clip_length, self.channels, self.input_height, self.input_width, self.feature_dim];
        if dims.contains(&0) || self.hidden_dims.contains(&0) || self.proj_dims.contains(&0) {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        if self.proj_out_dim < 2 {
            return Err(Error::Config("proj_out_dim must be >= 2".into()));
        }
        Ok(())
    }

    /// `(in, out, relu)` per layer, F first then H.
    fn layout(&self) -> Vec<(usize, usize, bool)> {
        let mut out = Vec::new();
        let mut prev = self.input_dim();
        for &h in self.hidden_dims.iter().chain(std::iter::once(&self.feature_dim)) {
            out.push((prev, h, true));
            prev = h;
        }
        for &h in &self.proj_dims {
            out.push((prev, h, true));
            prev = h;
        }
        out.push((prev, self.proj_out_dim, false));
        out
    }

    fn feature_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub base_lr: f64,
    pub momentum: f64,
    /// Filled in by the trainer from the schedule when zero.
    pub total_steps: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self { base_lr: 0.01, momentum: 0.9, total_steps: 0 }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::Config(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }

    /// Half-period cosine decay from `base_lr` at step 0 to 0 at `total_steps`.
    pub fn lr_at(&self, step: usize) -> Result<f64> {
        if step > self.total_steps {
            return Err(Error::Range(format!("step {step} beyond total_steps {}", self.total_steps)));
        }
        if self.total_steps == 0 {
            return Ok(self.base_lr);
        }
        Ok(self.base_lr * 0.5 * (1.0 + (PI * step as f64 / self.total_steps as f64).cos()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    relu: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: EncoderConfig,
    pub layers: Vec<Dense>,
    velocity: Vec<(Array2<f64>, Array1<f64>)>,
    version: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl ParamGrads {
    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b.iter()).copied()).collect()
    }
}

/// Activations kept from a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation output of each layer.
    pre: Vec<Array2<f64>>,
    z: Array2<f64>,
    norms: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedded {
    /// Unit-norm projections, one row per clip.
    pub z: Array2<f64>,
    /// Feature-extractor output (before the projection head).
    pub features: Array2<f64>,
}

impl ModelParams {
    pub fn init(config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        let layers: Vec<Dense> = config
            .layout()
            .into_iter()
            .enumerate()
            .map(|(l, (fan_in, fan_out, relu))| {
                let mut rng = seed::rng_from(config.seed, &[l as u64]);
                let bound = (6.0 / fan_in as f64).sqrt();
                let weight = Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound));
                Dense { weight, bias: Array1::zeros(fan_out), relu }
            })
            .collect();
        let velocity = zeros_like(&layers);
        Ok(Self { config: config.clone(), layers, velocity, version: 0 })
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// All weights and biases, layer by layer, weights row-major first.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied()).collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::Shape(format!("expected {} parameters, got {}", self.num_params(), values.len())));
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v = it.next().unwrap());
        }
        self.version += 1;
        Ok(())
    }

    /// FNV-1a over the bit patterns of every parameter.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.flatten() {
            for byte in v.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

fn zeros_like(layers: &[Dense]) -> Vec<(Array2<f64>, Array1<f64>)> {
    layers.iter().map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.len()))).collect()
}

/// Downsamples and flattens clips into an `(n, input_dim)` matrix.
pub fn prepare_inputs(clips: &[&Clip], config: &EncoderConfig) -> Result<Array2<f64>> {
    let dim = config.input_dim();
    let mut x = Array2::zeros((clips.len(), dim));
    for (row, clip) in clips.iter().enumerate() {
        if clip.length != config.clip_length || clip.channels != config.channels {
            return Err(Error::Shape(format!(
                "clip has {} frames x {} channels, encoder expects {} x {}",
                clip.length, clip.channels, config.clip_length, config.channels
            )));
        }
        let (oh, ow) = (config.input_height, config.input_width);
        let mut flat = Vec::with_capacity(dim);
        for t in 0..clip.length {
            flat.extend(area_resize(clip.frame(t), clip.height, clip.width, clip.channels, oh, ow));
        }
        x.row_mut(row).assign(&Array1::from(flat));
    }
    Ok(x)
}

pub fn forward(params: &ModelParams, x: &Array2<f64>) -> Result<(Embedded, ForwardCache)> {
    if x.ncols() != params.config.input_dim() {
        return Err(Error::Shape(format!("input has {} columns, encoder expects {}", x.ncols(), params.config.input_dim())));
    }
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut act = x.clone();
    let mut features = None;
    for (l, layer) in params.layers.iter().enumerate() {
        let y = act.dot(&layer.weight) + &layer.bias;
        let out = if layer.relu { y.mapv(|v| v.max(0.0)) } else { y.clone() };
        inputs.push(std::mem::replace(&mut act, out));
        pre.push(y);
        if l + 1 == params.config.feature_layers() {
            features = Some(act.clone());
        }
    }

    let norms = act.map_axis(Axis(1), |row| (row.dot(&row) + NORM_EPS).sqrt());
    let z = &act / &norms.view().insert_axis(Axis(1));
    for (r, row) in z.rows().into_iter().enumerate() {
        let n = row.dot(&row).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
            return Err(Error::Numeric(format!("projection {r} is degenerate (normalized length {n})")));
        }
    }

    let cache = ForwardCache { version: params.version, inputs, pre, z: z.clone(), norms };
    Ok((Embedded { z, features: features.expect("at least one feature layer") }, cache))
}

/// Feature-extractor output only.
pub fn extract_features(params: &ModelParams, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != params.config.input_dim() {
        return Err(Error::Shape(format!("input has {} columns, encoder expects {}", x.ncols(), params.config.input_dim())));
    }
    let mut act = x.clone();
    for layer in &params.layers[..params.config.feature_layers()] {
        act = (act.dot(&layer.weight) + &layer.bias).mapv(|v| v.max(0.0));
    }
    Ok(act)
}

/// Embeds `videos × members` clips (video-major) into a loss batch.
pub fn embed(params: &ModelParams, clips: &[&Clip], videos: usize, members: usize) -> Result<(EmbeddingBatch, ForwardCache)> {
    if clips.len() != videos * members {
        return Err(Error::Shape(format!("{} clips cannot form a ({videos}, {members}) batch", clips.len())));
    }
    let x = prepare_inputs(clips, &params.config)?;
    let (out, cache) = forward(params, &x)?;
    let d = out.z.ncols();
    let batch = EmbeddingBatch::new(videos, members, d, out.z.iter().copied().collect())?;
    Ok((batch, cache))
}

/// Gradients of the loss with respect to every parameter, given the loss
/// gradients with respect to the normalized projections (rows of `z`).
pub fn backward(params: &ModelParams, cache: &ForwardCache, grad_z: &Array2<f64>) -> Result<ParamGrads> {
    if cache.version != params.version {
        return Err(Error::Usage("forward cache is stale: parameters changed since the forward pass".into()));
    }
    if grad_z.dim() != cache.z.dim() {
        return Err(Error::Shape(format!("gradient shape {:?} does not match output {:?}", grad_z.dim(), cache.z.dim())));
    }
    // d/dh of h/n with n = sqrt(|h|² + eps): (g - (g·z) z) / n
    let gz = (grad_z * &cache.z).sum_axis(Axis(1)).insert_axis(Axis(1));
    let mut delta = (grad_z - (&cache.z * &gz)) / cache.norms.view().insert_axis(Axis(1));

    let mut grads = Vec::with_capacity(params.layers.len());
    for (l, layer) in params.layers.iter().enumerate().rev() {
        if layer.relu {
            delta.zip_mut_with(&cache.pre[l], |d, &p| {
                if p <= 0.0 {
                    *d = 0.0;
                }
            });
        }
        let dw = cache.inputs[l].t().dot(&delta);
        let db = delta.sum_axis(Axis(0));
        if l > 0 {
            delta = delta.dot(&layer.weight.t());
        }
        grads.push((dw, db));
    }
    grads.reverse();
    Ok(ParamGrads { layers: grads })
}

/// One momentum-SGD update at the learning rate of `step_index`.
/// Returns the learning rate used.
pub fn step(params: &mut ModelParams, grads: &ParamGrads, optim: &OptimConfig, step_index: usize) -> Result<f64> {
    let lr = optim.lr_at(step_index)?;
    if grads.layers.len() != params.layers.len() {
        return Err(Error::Shape("gradient layer count does not match the model".into()));
    }
    for ((layer, (vw, vb)), (gw, gb)) in params.layers.iter_mut().zip(&mut params.velocity).zip(&grads.layers) {
        if gw.dim() != layer.weight.dim() || gb.len() != layer.bias.len() {
            return Err(Error::Shape("gradient shape does not match layer".into()));
        }
        vw.zip_mut_with(gw, |v, &g| *v = optim.momentum * *v + g);
        vb.zip_mut_with(gb, |v, &g| *v = optim.momentum * *v + g);
        layer.weight.scaled_add(-lr, vw);
        layer.bias.scaled_add(-lr, vb);
    }
    params.version += 1;
    Ok(lr)
}

/// Checkpoint layout (little-endian):
///
/// ```text
/// "MOQD" | u32 version | u32 n | n bytes of EncoderConfig JSON |
/// u32 layer count | per layer: u32 in, u32 out, in·out f64 weights
/// (row-major, (in, out)), out f64 biases
/// ```
///
/// Optimizer state is not stored.
pub fn encode_checkpoint(params: &ModelParams) -> Result<Vec<u8>> {
    let config = serde_json::to_vec(&params.config)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(config.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config);
    buf.extend_from_slice(&(params.layers.len() as u32).to_le_bytes());
    for l in &params.layers {
        buf.extend_from_slice(&(l.weight.nrows() as u32).to_le_bytes());
        buf.extend_from_slice(&(l.weight.ncols() as u32).to_le_bytes());
        for v in l.weight.iter().chain(l.bias.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| Error::format(pos as u64, "truncated checkpoint"))?;
        let s = &bytes[pos..end];
        pos = end;
        Ok(s)
    };
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap()) as usize;

    if take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::format(0, "bad checkpoint magic"));
    }
    let version = u32_at(take(4)?);
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::format(4, format!("unsupported checkpoint version {version}")));
    }
    let n = u32_at(take(4)?);
    let config: EncoderConfig = serde_json::from_slice(take(n)?)?;
    let mut params = ModelParams::init(&config)?;
    let count = u32_at(take(4)?);
    if count != params.layers.len() {
        return Err(Error::Mismatch(format!("checkpoint has {count} layers, config implies {}", params.layers.len())));
    }
    for layer in &mut params.layers {
        let (rows, cols) = (u32_at(take(4)?), u32_at(take(4)?));
        if (rows, cols) != layer.weight.dim() {
            return Err(Error::Mismatch(format!("layer is {rows}x{cols}, config implies {:?}", layer.weight.dim())));
        }
        for v in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
            *v = f64::from_le_bytes(take(8)?.try_into().unwrap());
        }
    }
    if pos != bytes.len() {
        return Err(Error::format(pos as u64, "trailing bytes after checkpoint"));
    }
    Ok(params)
}

pub fn write_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(params)?)?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::Missing(path.to_path_buf()));
    }
    decode_checkpoint(&fs::read(path)?)
}
