use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use moquad_core::config::RunConfig;
use moquad_core::disturb::{DonorMode, MotionDisturbKind};
use moquad_core::quadruple::Components;
use moquad_core::Error;

mod commands;

#[derive(Parser)]
#[command(name = "moquad", version, about = "Synthetic-video contrastive pre-training with motion-focused quadruples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset into the data directory.
    Gen(Common),
    /// Pre-train an encoder; writes a checkpoint and a metrics log.
    Pretrain(Common),
    /// Retrieval, linear probe and per-class accuracy for a checkpoint.
    Evaluate(Common),
    /// Nearest-neighbour retrieval only.
    Retrieve(Common),
    /// Export per-epoch rank diagnostics of the quadruple stage as CSV.
    Diag {
        #[command(flatten)]
        common: Common,
        /// Metrics log to read; defaults to metrics.jsonl next to the checkpoint.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Pre-train and evaluate every setting of one ablation grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        grid: Grid,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Single-threaded execution.
    #[arg(long)]
    deterministic: bool,
    /// Checkpoint to read; defaults to checkpoint.moqd in the output directory.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    ablation: Option<Ablation>,
    #[arg(long)]
    warmup_ratio: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Enable hard-negative mining.
    #[arg(long)]
    mining: bool,
    /// Mining fraction; implies --mining.
    #[arg(long)]
    beta: Option<f64>,
    /// Mining weight; implies --mining.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    appearance_disturb: Option<AppearanceArg>,
    #[arg(long, value_enum)]
    motion_disturb: Option<MotionArg>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Ablation {
    Simclr,
    AdPos,
    IntraNeg,
    Full,
}

impl Ablation {
    fn components(self) -> Components {
        match self {
            Ablation::Simclr => Components::SIMCLR,
            Ablation::AdPos => Components::AD_POS,
            Ablation::IntraNeg => Components::INTRA_NEG,
            Ablation::Full => Components::FULL,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AppearanceArg {
    Inter,
    Intra,
    BeBaseline,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MotionArg {
    Speed,
    Reverse,
    Shuffle,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grid {
    Components,
    Warmup,
    Motion,
    Appearance,
    Mining,
}

impl Common {
    fn resolve(&self) -> moquad_core::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(d) = &self.data {
            cfg.data_dir = d.clone();
        }
        if self.deterministic {
            cfg.deterministic = true;
        }
        if let Some(a) = self.ablation {
            cfg.quadruple.components = a.components();
        }
        if let Some(p) = self.warmup_ratio {
            cfg.schedule.warmup_ratio = p;
        }
        if let Some(e) = self.epochs {
            cfg.schedule.total_epochs = e;
        }
        if self.mining || self.beta.is_some() || self.alpha.is_some() {
            cfg.schedule.loss.mining_enabled = true;
        }
        if let Some(b) = self.beta {
            cfg.schedule.loss.beta = b;
        }
        if let Some(a) = self.alpha {
            cfg.schedule.loss.alpha = a;
        }
        if let Some(m) = self.appearance_disturb {
            cfg.quadruple.rad.donor_mode = match m {
                AppearanceArg::Inter => DonorMode::Inter,
                AppearanceArg::Intra => DonorMode::Intra,
                AppearanceArg::BeBaseline => DonorMode::BeBaseline,
            };
        }
        if let Some(m) = self.motion_disturb {
            cfg.quadruple.motion = match m {
                MotionArg::Speed => MotionDisturbKind::Speed,
                MotionArg::Reverse => MotionDisturbKind::Reverse,
                MotionArg::Shuffle => MotionDisturbKind::Shuffle,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn checkpoint_path(&self, cfg: &RunConfig) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| cfg.out_dir.join(commands::CHECKPOINT_FILE))
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Usage(_) => 2,
        Error::Missing(_) => 3,
        Error::Mismatch(_) | Error::Format { .. } => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> moquad_core::Result<()> {
    let common = match &cli.command {
        Command::Gen(c) | Command::Pretrain(c) | Command::Evaluate(c) | Command::Retrieve(c) => c,
        Command::Diag { common, .. } | Command::Sweep { common, .. } => common,
    };
    let cfg = common.resolve()?;
    if cfg.deterministic {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    }
    match &cli.command {
        Command::Gen(_) => commands::gen(&cfg),
        Command::Pretrain(_) => commands::pretrain(&cfg),
        Command::Evaluate(c) => commands::evaluate(&cfg, &c.checkpoint_path(&cfg)),
        Command::Retrieve(c) => commands::retrieve(&cfg, &c.checkpoint_path(&cfg)),
        Command::Diag { common, metrics } => {
            let ckpt = common.checkpoint_path(&cfg);
            let metrics = metrics.clone().unwrap_or_else(|| {
                ckpt.parent().unwrap_or(std::path::Path::new(".")).join(commands::METRICS_FILE)
            });
            commands::diag(&cfg, &ckpt, &metrics)
        }
        Command::Sweep { grid, .. } => commands::sweep(&cfg, *grid),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
