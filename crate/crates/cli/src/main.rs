mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ovs_core::metrics::TieBreak;
use ovs_core::{ErrorClass, MiouMode, NormalizeMode, Pairing};

/// Open-vocabulary segmentation tooling: benchmark curation, embedding
/// fusion, proxy calibration and mIoU evaluation.
#[derive(Debug, Parser)]
#[command(name = "ovs", version)]
struct Cli {
    /// Worker threads for per-image work.
    #[arg(long, global = true, env = "OVS_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score candidate categories against a training vocabulary.
    Score(ScoreArgs),
    /// Filter an image inventory and remap categories into a manifest.
    Build(BuildArgs),
    /// Fuse query embeddings with CLIP features.
    Fuse(FuseArgs),
    /// Evaluate predicted masks against ground truth.
    Eval(EvalArgs),
    /// Measure mIoU as distractor categories are added.
    Sweep(SweepArgs),
    /// Build a proxy batch and write the mixed embeddings.
    PcSample(PcArgs),
    /// Compute the proxy losses, optionally checking the gradient.
    PcLoss(PcLossArgs),
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub train_vocab: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Row label for the printed statistics table.
    #[arg(long, default_value = "candidates")]
    pub dataset_name: String,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// JSON lines: {"image_id", "mask_path", "categories"}.
    #[arg(long)]
    pub inventory: PathBuf,
    /// Output of `ovs score`.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub sigma1: f64,
    #[arg(long)]
    pub sigma2: f64,
    /// Categories to fold into "others" regardless of score: a JSON array or
    /// one name per line.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub fq: PathBuf,
    #[arg(long)]
    pub fc: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    /// Run the fixed-point iteration.
    #[arg(long, conflicts_with = "closed_form")]
    pub iterate: bool,
    /// Solve for the limit directly (default).
    #[arg(long)]
    pub closed_form: bool,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = NormalizeArg::ColumnSoftmax)]
    pub normalize_mode: NormalizeArg,
    /// L2-normalize CLIP rows before fusing.
    #[arg(long)]
    pub normalize_clip: bool,
    /// Fused CLIP rows.
    #[arg(long)]
    pub out: PathBuf,
    /// Fused query rows.
    #[arg(long)]
    pub out_query: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = MiouArg::PresentClasses)]
    pub miou_mode: MiouArg,
    /// Count "others" in the mean.
    #[arg(long)]
    pub include_others: bool,
    /// Metrics JSON; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Region embeddings labeled "<image_id>:<class_id>"; each region covers
    /// the ground-truth pixels of that class in that image.
    #[arg(long)]
    pub regions: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    #[arg(long)]
    pub base_classes: PathBuf,
    #[arg(long)]
    pub distractors: PathBuf,
    /// Comma-separated, strictly increasing distractor counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub steps: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = MiouArg::PresentClasses)]
    pub miou_mode: MiouArg,
    #[arg(long)]
    pub include_others: bool,
    #[arg(long, value_enum, default_value_t = TieArg::LowestIndex)]
    pub tie_break: TieArg,
    /// CSV with columns count,miou.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PcArgs {
    #[arg(long)]
    pub fq: PathBuf,
    #[arg(long)]
    pub fc: PathBuf,
    #[arg(long)]
    pub ft: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = PairingArg::RandomDerangement)]
    pub pairing: PairingArg,
    /// Directory for mixed_{query,clip,text}.emb1 and batch.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PcLossArgs {
    #[command(flatten)]
    pub pc: PcArgs,
    /// Compare analytic gradients with central finite differences.
    #[arg(long)]
    pub check_grad: bool,
    #[arg(long, default_value_t = 1e-5)]
    pub fd_step: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizeArg {
    ColumnSoftmax,
    ColumnL1,
}

impl From<NormalizeArg> for NormalizeMode {
    fn from(v: NormalizeArg) -> Self {
        match v {
            NormalizeArg::ColumnSoftmax => NormalizeMode::ColumnSoftmax,
            NormalizeArg::ColumnL1 => NormalizeMode::ColumnL1,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MiouArg {
    PresentClasses,
    AllClasses,
}

impl From<MiouArg> for MiouMode {
    fn from(v: MiouArg) -> Self {
        match v {
            MiouArg::PresentClasses => MiouMode::PresentClasses,
            MiouArg::AllClasses => MiouMode::AllClasses,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TieArg {
    LowestIndex,
    Error,
}

impl From<TieArg> for TieBreak {
    fn from(v: TieArg) -> Self {
        match v {
            TieArg::LowestIndex => TieBreak::LowestIndex,
            TieArg::Error => TieBreak::Error,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PairingArg {
    RandomDerangement,
    AllPairs,
}

impl From<PairingArg> for Pairing {
    fn from(v: PairingArg) -> Self {
        match v {
            PairingArg::RandomDerangement => Pairing::RandomDerangement,
            PairingArg::AllPairs => Pairing::AllPairs,
        }
    }
}

/// A CLI-level validation failure (exit code 2).
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

const EXIT_VALIDATION: u8 = 2;
const EXIT_DATA: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ovs_core::Error>() {
            return match e.class() {
                ErrorClass::Validation => EXIT_VALIDATION,
                ErrorClass::Data => EXIT_DATA,
            };
        }
        if cause.downcast_ref::<Invalid>().is_some() {
            return EXIT_VALIDATION;
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("ovs: error: --jobs must be >= 1");
            return ExitCode::from(EXIT_VALIDATION);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("ovs: warning: could not size the worker pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Score(a) => commands::score::run(&a),
        Command::Build(a) => commands::build::run(&a),
        Command::Fuse(a) => commands::fuse::run(&a),
        Command::Eval(a) => commands::eval::run(&a),
        Command::Sweep(a) => commands::sweep::run(&a),
        Command::PcSample(a) => commands::pc::run_sample(&a),
        Command::PcLoss(a) => commands::pc::run_loss(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ovs: error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
