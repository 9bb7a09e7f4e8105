#![allow(dead_code)]

use moquad_core::encoder::{EncoderConfig, ModelParams};
use moquad_core::losses::EmbeddingBatch;
use moquad_core::seed::{self, Rng};
use moquad_core::synthdata::{generate_dataset, DatasetConfig, Split, VideoRecord};
use moquad_core::trainer::{PretrainConfig, ScheduleConfig};
use ndarray::Array2;
use rand::Rng as _;

pub fn unit_vector(rng: &mut Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `b` videos of `s` random unit vectors in `d` dimensions.
pub fn random_nested(rng: &mut Rng, b: usize, s: usize, d: usize) -> Vec<Vec<Vec<f64>>> {
    (0..b).map(|_| (0..s).map(|_| unit_vector(rng, d)).collect()).collect()
}

pub fn batch(nested: &[Vec<Vec<f64>>]) -> EmbeddingBatch {
    EmbeddingBatch::from_nested(nested).unwrap()
}

pub fn rel_close(actual: f64, expected: f64, tol: f64) -> bool {
    (actual - expected).abs() <= tol * expected.abs().max(1e-300)
}

pub fn split(videos: Vec<VideoRecord>) -> (Vec<VideoRecord>, Vec<VideoRecord>) {
    videos.into_iter().partition(|v| v.split == Split::Train)
}

pub fn tiny_dataset(seed: u64) -> (Vec<VideoRecord>, Vec<VideoRecord>) {
    split(generate_dataset(&DatasetConfig { num_train: 8, num_test: 4, seed, ..Default::default() }).unwrap())
}

pub fn tiny_encoder() -> EncoderConfig {
    EncoderConfig {
        input_height: 8,
        input_width: 8,
        hidden_dims: vec![16],
        feature_dim: 8,
        proj_dims: vec![8],
        proj_out_dim: 4,
        ..Default::default()
    }
}

pub fn tiny_pretrain(seed: u64, epochs: usize, warmup_ratio: f64) -> PretrainConfig {
    PretrainConfig {
        encoder: tiny_encoder(),
        schedule: ScheduleConfig { total_epochs: epochs, warmup_ratio, batch_size: 4, steps_per_epoch: 1, ..Default::default() },
        seed,
        ..Default::default()
    }
}

/// The small model of the end-to-end gradient check: input 32, hidden 16, d = 8.
pub fn gradcheck_model(seed: u64) -> ModelParams {
    ModelParams::init(&EncoderConfig {
        clip_length: 2,
        channels: 1,
        input_height: 4,
        input_width: 4,
        hidden_dims: vec![16],
        feature_dim: 16,
        proj_dims: vec![16],
        proj_out_dim: 8,
        seed,
    })
    .unwrap()
}

pub fn random_inputs(rng: &mut Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen::<f64>())
}

pub fn rng(parent: u64, path: &[u64]) -> Rng {
    seed::rng_from(parent, path)
}
