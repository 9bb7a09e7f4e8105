use std::fs;
use std::path::Path;

use moquad_core::config::RunConfig;
use moquad_core::disturb::{DonorMode, MotionDisturbKind};
use moquad_core::encoder::{self, ModelParams};
use moquad_core::eval::{self, CategoryGroup, VideoFeature};
use moquad_core::quadruple::Components;
use moquad_core::synthdata::{self, Split, VideoRecord};
use moquad_core::trainer::{self, Stage};
use moquad_core::{Error, Result};
use serde::Serialize;

use crate::Grid;

pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.moqd";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const RESULTS_FILE: &str = "results.json";
pub const FEATURES_FILE: &str = "features.jsonl";
pub const RETRIEVAL_FILE: &str = "retrieval.json";
pub const DIAG_FILE: &str = "diag.csv";
pub const SWEEP_FILE: &str = "sweep.jsonl";

fn echo_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_json() + "\n")?;
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn load_splits(cfg: &RunConfig) -> Result<(Vec<VideoRecord>, Vec<VideoRecord>)> {
    let all = synthdata::load_dataset(&cfg.data_dir)?;
    Ok(all.into_iter().partition(|v| v.split == Split::Train))
}

fn load_checkpoint(cfg: &RunConfig, path: &Path) -> Result<ModelParams> {
    if !path.exists() {
        return Err(Error::Missing(path.to_path_buf()));
    }
    let params = encoder::read_checkpoint(path)?;
    cfg.check_checkpoint(&params.config)?;
    Ok(params)
}

pub fn gen(cfg: &RunConfig) -> Result<()> {
    let videos = synthdata::generate_dataset(&cfg.dataset)?;
    synthdata::save_dataset(&cfg.data_dir, &videos)?;
    echo_config(cfg, &cfg.data_dir)?;
    println!("wrote {} videos to {}", videos.len(), cfg.data_dir.display());
    Ok(())
}

fn train_into(cfg: &RunConfig, train: &[VideoRecord], test: &[VideoRecord]) -> Result<trainer::TrainOutcome> {
    echo_config(cfg, &cfg.out_dir)?;
    let outcome = trainer::run_pretraining(train, test, &cfg.pretrain())?;
    encoder::write_checkpoint(&outcome.params, cfg.out_dir.join(CHECKPOINT_FILE))?;
    trainer::write_metrics_log(&outcome.log, cfg.out_dir.join(METRICS_FILE))?;
    Ok(outcome)
}

pub fn pretrain(cfg: &RunConfig) -> Result<()> {
    let (train, test) = load_splits(cfg)?;
    let outcome = train_into(cfg, &train, &test)?;
    let last = outcome.log.last().expect("at least one epoch");
    println!("{}", serde_json::to_string(last)?);
    Ok(())
}

fn group_of(cfg: &RunConfig) -> impl Fn(u32) -> CategoryGroup + '_ {
    |c| {
        if cfg.dataset.is_appearance_cued(c) {
            CategoryGroup::AppearanceSeparable
        } else {
            CategoryGroup::MotionOnly
        }
    }
}

fn evaluate_into(cfg: &RunConfig, params: &ModelParams, train: &[VideoRecord], test: &[VideoRecord]) -> Result<eval::EvalResults> {
    let mut ecfg = cfg.eval.clone();
    ecfg.probe.seed = cfg.seed;
    let (results, features) = eval::evaluate(params, train, test, &ecfg, group_of(cfg))?;
    write_json(&results, &cfg.out_dir.join(RESULTS_FILE))?;
    eval::write_features(&features, cfg.out_dir.join(FEATURES_FILE))?;
    Ok(results)
}

pub fn evaluate(cfg: &RunConfig, checkpoint: &Path) -> Result<()> {
    let params = load_checkpoint(cfg, checkpoint)?;
    let (train, test) = load_splits(cfg)?;
    echo_config(cfg, &cfg.out_dir)?;
    let results = evaluate_into(cfg, &params, &train, &test)?;
    println!("{}", serde_json::to_string(&results)?);
    Ok(())
}

pub fn retrieve(cfg: &RunConfig, checkpoint: &Path) -> Result<()> {
    let params = load_checkpoint(cfg, checkpoint)?;
    let (train, test) = load_splits(cfg)?;
    echo_config(cfg, &cfg.out_dir)?;
    let gallery: Vec<VideoFeature> = eval::extract_all(&params, &train, &cfg.eval)?;
    let queries = eval::extract_all(&params, &test, &cfg.eval)?;
    let r = eval::retrieve(&queries, &gallery)?;
    write_json(&r, &cfg.out_dir.join(RETRIEVAL_FILE))?;
    println!("{}", serde_json::to_string(&r)?);
    Ok(())
}

#[derive(Serialize)]
struct DiagRow {
    epoch: usize,
    mean_rank_ad_pos: Option<f64>,
    mean_rank_intra_negs: Option<f64>,
}

pub fn diag(cfg: &RunConfig, checkpoint: &Path, metrics: &Path) -> Result<()> {
    load_checkpoint(cfg, checkpoint)?;
    if !metrics.exists() {
        return Err(Error::Missing(metrics.to_path_buf()));
    }
    let log = trainer::read_metrics_log(metrics)?;
    echo_config(cfg, &cfg.out_dir)?;
    let path = cfg.out_dir.join(DIAG_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    let mut rows = 0;
    for m in log.iter().filter(|m| m.stage == Stage::Quadruple) {
        w.serialize(DiagRow {
            epoch: m.epoch,
            mean_rank_ad_pos: m.mean_rank_ad_pos,
            mean_rank_intra_negs: m.mean_rank_intra_negs,
        })
        .map_err(csv_err)?;
        rows += 1;
    }
    w.flush()?;
    println!("wrote {rows} rows to {}", path.display());
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Input(format!("{other:?}")),
    }
}

/// Named settings of one ablation grid.
pub fn grid_settings(base: &RunConfig, grid: Grid) -> Vec<(String, RunConfig)> {
    let with = |name: &str, f: &dyn Fn(&mut RunConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c.out_dir = base.out_dir.join(name);
        (name.to_string(), c)
    };
    match grid {
        Grid::Components => [
            ("simclr", Components::SIMCLR),
            ("ad_pos", Components::AD_POS),
            ("intra_neg", Components::INTRA_NEG),
            ("full", Components::FULL),
        ]
        .iter()
        .map(|(n, comp)| with(n, &|c| c.quadruple.components = *comp))
        .collect(),
        Grid::Warmup => [0.0, 0.1, 0.2, 0.4, 0.6]
            .iter()
            .map(|&p| with(&format!("warmup_{p}"), &|c| c.schedule.warmup_ratio = p))
            .collect(),
        Grid::Motion => [
            ("speed", MotionDisturbKind::Speed),
            ("reverse", MotionDisturbKind::Reverse),
            ("shuffle", MotionDisturbKind::Shuffle),
        ]
        .iter()
        .map(|(n, k)| with(n, &|c| c.quadruple.motion = *k))
        .collect(),
        Grid::Appearance => [
            ("inter", DonorMode::Inter),
            ("intra", DonorMode::Intra),
            ("be_baseline", DonorMode::BeBaseline),
        ]
        .iter()
        .map(|(n, m)| with(n, &|c| c.quadruple.rad.donor_mode = *m))
        .collect(),
        Grid::Mining => {
            let mut v = vec![with("no_mining", &|c| c.schedule.loss.mining_enabled = false)];
            for beta in [0.0, 0.01, 0.05] {
                v.push(with(&format!("beta_{beta}"), &|c| {
                    c.schedule.loss.mining_enabled = true;
                    c.schedule.loss.beta = beta;
                }));
            }
            v
        }
    }
}

#[derive(Serialize)]
struct SweepRow<'a> {
    name: &'a str,
    top1: f64,
    top5: f64,
    top10: f64,
    probe_test_acc: f64,
    final_mean_loss: f64,
    final_mean_rank_intra_negs: Option<f64>,
}

pub fn sweep(cfg: &RunConfig, grid: Grid) -> Result<()> {
    let (train, test) = load_splits(cfg)?;
    echo_config(cfg, &cfg.out_dir)?;
    let mut lines = String::new();
    for (name, run) in grid_settings(cfg, grid) {
        run.validate()?;
        let outcome = train_into(&run, &train, &test)?;
        let r = evaluate_into(&run, &outcome.params, &train, &test)?;
        let last = outcome.log.last().expect("at least one epoch");
        let row = SweepRow {
            name: &name,
            top1: r.top1,
            top5: r.top5,
            top10: r.top10,
            probe_test_acc: r.probe_test_acc,
            final_mean_loss: last.mean_loss,
            final_mean_rank_intra_negs: last.mean_rank_intra_negs,
        };
        let line = serde_json::to_string(&row)?;
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
        // Rewritten after every setting so a partial sweep is still readable.
        fs::write(cfg.out_dir.join(SWEEP_FILE), &lines)?;
    }
    Ok(())
}
