//! Frozen-encoder evaluation: pooled video features, nearest-neighbour
//! retrieval of the motion class, a multinomial logistic-regression probe,
//! and per-class accuracy.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cliputil::{extract_clip, max_start, Clip, ClipSpec};
use crate::encoder::{self, ModelParams};
use crate::error::{Error, Result};
use crate::seed;
use crate::synthdata::VideoRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLayer {
    /// Feature-extractor output; the projection head is discarded.
    Backbone,
    /// Normalized projection-head output.
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { epochs: 300, lr: 0.5, l2: 1e-4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub num_clips: usize,
    pub dilation: usize,
    pub layer: FeatureLayer,
    pub probe: ProbeConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { num_clips: 10, dilation: 2, layer: FeatureLayer::Backbone, probe: ProbeConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoFeature {
    pub video_id: u64,
    pub motion_class: u32,
    pub appearance_class: u32,
    pub vector: Vec<f64>,
}

/// Clip starts spread evenly from 0 to the last feasible start, rounded to
/// the nearest frame. Short videos repeat starts.
pub fn clip_offsets(frames: usize, length: usize, dilation: usize, num_clips: usize) -> Result<Vec<usize>> {
    if num_clips == 0 {
        return Err(Error::Range("num_clips must be positive".into()));
    }
    let hi = max_start(frames, length, dilation).ok_or_else(|| {
        Error::Range(format!("a {length}-frame clip at dilation {dilation} does not fit in {frames} frames"))
    })?;
    if num_clips == 1 {
        return Ok(vec![hi / 2]);
    }
    Ok((0..num_clips).map(|j| ((j * hi) as f64 / (num_clips - 1) as f64).round() as usize).collect())
}

fn encode_clips(params: &ModelParams, clips: &[&Clip], layer: FeatureLayer) -> Result<Array2<f64>> {
    let x = encoder::prepare_inputs(clips, &params.config)?;
    match layer {
        FeatureLayer::Backbone => encoder::extract_features(params, &x),
        FeatureLayer::Projection => Ok(encoder::forward(params, &x)?.0.z),
    }
}

/// Mean feature over `num_clips` evenly placed clips.
pub fn pool_video_features(params: &ModelParams, video: &VideoRecord, cfg: &EvalConfig) -> Result<VideoFeature> {
    let length = params.config.clip_length;
    let offsets = clip_offsets(video.frames.frames, length, cfg.dilation, cfg.num_clips)?;
    let clips = offsets
        .iter()
        .map(|&s| extract_clip(video, ClipSpec::new(s, length, cfg.dilation)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Clip> = clips.iter().collect();
    let feats = encode_clips(params, &refs, cfg.layer)?;
    let mean = feats.mean_axis(Axis(0)).expect("at least one clip");
    Ok(VideoFeature {
        video_id: video.id,
        motion_class: video.motion_class,
        appearance_class: video.appearance_class,
        vector: mean.to_vec(),
    })
}

pub fn extract_all(params: &ModelParams, videos: &[VideoRecord], cfg: &EvalConfig) -> Result<Vec<VideoFeature>> {
    videos.par_iter().map(|v| pool_video_features(params, v, cfg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub top1: f64,
    pub top5: f64,
    pub top10: f64,
}

impl RetrievalResult {
    pub fn accuracy(&self, k: usize) -> Option<f64> {
        match k {
            1 => Some(self.top1),
            5 => Some(self.top5),
            10 => Some(self.top10),
            _ => None,
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// A query is correct at `k` if any of its `k` most cosine-similar gallery
/// videos (ties to the lower gallery index) shares its motion class.
pub fn retrieve(queries: &[VideoFeature], gallery: &[VideoFeature]) -> Result<RetrievalResult> {
    if gallery.is_empty() {
        return Err(Error::Input("retrieval gallery is empty".into()));
    }
    if queries.is_empty() {
        return Err(Error::Input("no retrieval queries".into()));
    }
    let ks = [1usize, 5, 10];
    let mut hits = [0usize; 3];
    for q in queries {
        let sims: Vec<f64> = gallery.iter().map(|g| cosine(&q.vector, &g.vector)).collect();
        let mut order: Vec<usize> = (0..gallery.len()).collect();
        order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
        let first_hit = order.iter().position(|&g| gallery[g].motion_class == q.motion_class);
        for (slot, &k) in ks.iter().enumerate() {
            if first_hit.is_some_and(|p| p < k) {
                hits[slot] += 1;
            }
        }
    }
    let n = queries.len() as f64;
    Ok(RetrievalResult { top1: hits[0] as f64 / n, top5: hits[1] as f64 / n, top10: hits[2] as f64 / n })
}

/// Softmax regression on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl LinearProbe {
    pub fn predict(&self, features: &[VideoFeature]) -> Vec<u32> {
        let x = self.standardize(&stack(features));
        let logits = x.dot(&self.weights) + &self.bias;
        logits
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                best as u32
            })
            .collect()
    }

    fn standardize(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.mean) / &self.scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub probe: LinearProbe,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub test_predictions: Vec<u32>,
}

fn stack(features: &[VideoFeature]) -> Array2<f64> {
    let d = features.first().map_or(0, |f| f.vector.len());
    Array2::from_shape_fn((features.len(), d), |(i, j)| features[i].vector[j])
}

fn accuracy(pred: &[u32], labels: &[u32]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64
}

/// Trains on `train` motion labels with full-batch gradient descent on the
/// mean cross-entropy plus `l2·|W|²/2`, then scores both splits.
pub fn linear_probe(train: &[VideoFeature], test: &[VideoFeature], cfg: &ProbeConfig) -> Result<ProbeResult> {
    let labels: Vec<u32> = train.iter().map(|f| f.motion_class).collect();
    let mut distinct = labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Input(format!("linear probe needs at least two classes, found {}", distinct.len())));
    }
    let classes = *distinct.last().unwrap() as usize + 1;
    let x = stack(train);
    let (n, d) = x.dim();
    if test.iter().any(|f| f.vector.len() != d) {
        return Err(Error::Shape("test features differ in dimension from train features".into()));
    }

    let mean = x.mean_axis(Axis(0)).unwrap();
    let scale = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-8 { s } else { 1.0 });
    let mut rng = seed::rng_from(cfg.seed, &[]);
    let mut probe = LinearProbe {
        weights: Array2::from_shape_fn((d, classes), |_| rng.gen_range(-1e-3..1e-3)),
        bias: Array1::zeros(classes),
        mean,
        scale,
    };
    let xs = probe.standardize(&x);
    let mut onehot = Array2::<f64>::zeros((n, classes));
    for (i, &l) in labels.iter().enumerate() {
        onehot[(i, l as usize)] = 1.0;
    }

    for _ in 0..cfg.epochs {
        let mut p = xs.dot(&probe.weights) + &probe.bias;
        for mut row in p.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row /= s;
        }
        let delta = (p - &onehot) / n as f64;
        let gw = xs.t().dot(&delta) + &probe.weights * cfg.l2;
        let gb = delta.sum_axis(Axis(0));
        probe.weights.scaled_add(-cfg.lr, &gw);
        probe.bias.scaled_add(-cfg.lr, &gb);
    }

    let train_pred = probe.predict(train);
    let test_pred = if test.is_empty() { Vec::new() } else { probe.predict(test) };
    let test_labels: Vec<u32> = test.iter().map(|f| f.motion_class).collect();
    Ok(ProbeResult {
        train_accuracy: accuracy(&train_pred, &labels),
        test_accuracy: accuracy(&test_pred, &test_labels),
        test_predictions: test_pred,
        probe,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryGroup {
    /// Recognizable from a single frame.
    AppearanceSeparable,
    /// Only the motion distinguishes the class.
    MotionOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub group: CategoryGroup,
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerCategoryReport {
    pub classes: BTreeMap<u32, ClassAccuracy>,
    pub overall: f64,
    /// Mean accuracy per group over the samples in that group.
    pub groups: BTreeMap<String, f64>,
}

pub fn per_category_report(labels: &[u32], predictions: &[u32], group_of: impl Fn(u32) -> CategoryGroup) -> PerCategoryReport {
    let mut classes: BTreeMap<u32, ClassAccuracy> = BTreeMap::new();
    for (&l, &p) in labels.iter().zip(predictions) {
        let e = classes.entry(l).or_insert(ClassAccuracy { group: group_of(l), count: 0, correct: 0, accuracy: 0.0 });
        e.count += 1;
        e.correct += (l == p) as usize;
    }
    let mut group_totals: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for c in classes.values_mut() {
        c.accuracy = c.correct as f64 / c.count as f64;
        let key = serde_json::to_value(c.group).unwrap().as_str().unwrap().to_string();
        let g = group_totals.entry(key).or_default();
        g.0 += c.correct;
        g.1 += c.count;
    }
    PerCategoryReport {
        classes,
        overall: accuracy(predictions, labels),
        groups: group_totals.into_iter().map(|(k, (c, n))| (k, c as f64 / n as f64)).collect(),
    }
}

/// The results document written by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResults {
    pub top1: f64,
    pub top5: f64,
    pub top10: f64,
    pub probe_train_acc: f64,
    pub probe_test_acc: f64,
    pub per_class: BTreeMap<u32, ClassAccuracy>,
}

/// Retrieval (test queries against the train gallery), probe and per-class
/// breakdown. Parameters are only read.
pub fn evaluate(
    params: &ModelParams,
    train: &[VideoRecord],
    test: &[VideoRecord],
    cfg: &EvalConfig,
    group_of: impl Fn(u32) -> CategoryGroup,
) -> Result<(EvalResults, Vec<VideoFeature>)> {
    let gallery = extract_all(params, train, cfg)?;
    let queries = extract_all(params, test, cfg)?;
    let retrieval = retrieve(&queries, &gallery)?;
    let probe = linear_probe(&gallery, &queries, &cfg.probe)?;
    let labels: Vec<u32> = queries.iter().map(|f| f.motion_class).collect();
    let report = per_category_report(&labels, &probe.test_predictions, group_of);
    let results = EvalResults {
        top1: retrieval.top1,
        top5: retrieval.top5,
        top10: retrieval.top10,
        probe_train_acc: probe.train_accuracy,
        probe_test_acc: probe.test_accuracy,
        per_class: report.classes,
    };
    let mut features = gallery;
    features.extend(queries);
    Ok((results, features))
}

pub fn write_features(features: &[VideoFeature], path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    for f in features {
        serde_json::to_writer(&mut out, f)?;
        out.push(b'\n');
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}
