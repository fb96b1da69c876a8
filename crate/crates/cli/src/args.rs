use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "restore", version, about = "Dataset synthesis, enhancement training and evaluation")]
pub struct Cli {
    /// Output root; each command writes below it.
    #[arg(long, global = true, env = "RESTORE_OUT", default_value = "runs")]
    pub out: PathBuf,
    /// Also emit SVG plots where a command has them.
    #[arg(long, global = true)]
    pub plots: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a paired dataset from two generator backends.
    DatasetBuild(DatasetBuildArgs),
    /// Build a paired dataset from the procedural oracle.
    DatasetOracle(DatasetOracleArgs),
    /// Attribute distributions, distances and an optional t-SNE projection.
    Diversity(DiversityArgs),
    /// Train the U-Net head on aligned pairs.
    TrainPairwise(TrainPairwiseArgs),
    /// Train a CycleGAN (optionally with ESA) on unaligned domains.
    TrainCyclegan(TrainCycleganArgs),
    /// Sweep lambda_cycle and learning rate, or rank recorded sweeps.
    Grid(GridArgs),
    /// FID to both reference sets and their difference.
    EvalFidDiff(EvalFidDiffArgs),
    /// Mean SSIM and PSNR between aligned image sets.
    EvalPair(EvalPairArgs),
    /// Time generation pipelines at several sizes.
    Bench(BenchArgs),
    /// Write metric and timing reports.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set optim.learning_rate=1e-4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Args, Debug)]
pub struct DatasetOracleArgs {
    /// Number of pairs to generate.
    #[arg(long)]
    pub count: usize,
    /// Square image side.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Name list, one per line; defaults to a small built-in pool.
    #[arg(long)]
    pub names: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DatasetBuildArgs {
    #[command(flatten)]
    pub base: DatasetOracleArgs,
    /// Program serving the distilled (source) backend; oracle when absent.
    #[arg(long)]
    pub distilled_cmd: Option<PathBuf>,
    /// Program serving the baseline (target) backend; oracle when absent.
    #[arg(long)]
    pub baseline_cmd: Option<PathBuf>,
    /// Prompt template containing `[FULL NAME]`.
    #[arg(long)]
    pub template: Option<String>,
    #[arg(long, default_value_t = 3.0)]
    pub guidance: f64,
    #[arg(long, default_value_t = 0.7)]
    pub strength: f64,
    #[arg(long, default_value_t = 50)]
    pub steps: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    A,
    B,
}

#[derive(Args, Debug)]
pub struct DiversityArgs {
    /// `NAME=DIR` where DIR holds manifest.jsonl and attributes.jsonl. Repeatable.
    #[arg(long = "corpus", value_name = "NAME=DIR", required = true)]
    pub corpora: Vec<String>,
    /// Which side of each pair to analyse.
    #[arg(long, value_enum, default_value_t = DomainArg::B)]
    pub domain: DomainArg,
    /// Also embed the images and project them to 2-D.
    #[arg(long)]
    pub tsne: bool,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct TrainPairwiseArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Paired dataset directory (manifest.jsonl).
    #[arg(long)]
    pub data: PathBuf,
    /// Continue from the run's last checkpoint.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Args, Debug)]
pub struct UnpairedArgs {
    /// Dataset whose source images form domain A.
    #[arg(long)]
    pub data_a: PathBuf,
    /// Dataset whose target images form domain B.
    #[arg(long)]
    pub data_b: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainCycleganArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub data: UnpairedArgs,
    /// Continue from the run's last checkpoint.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RecordedGrid {
    /// CycleGAN sweep over three lambdas and three learning rates.
    Cyclegan,
    /// ESA-CycleGAN sweep at one learning rate.
    Esa,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Cycle-consistency weights to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 5.0, 2.0])]
    pub lambda: Vec<f64>,
    /// Learning rates to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 2e-4, 3e-4])]
    pub lr: Vec<f64>,
    /// Dataset whose source images form domain A.
    #[arg(long)]
    pub data_a: Option<PathBuf>,
    /// Dataset whose target images form domain B.
    #[arg(long)]
    pub data_b: Option<PathBuf>,
    /// Rank published cell results instead of training.
    #[arg(long, value_enum, conflicts_with_all = ["data_a", "data_b"])]
    pub replay: Option<RecordedGrid>,
}

#[derive(Args, Debug)]
pub struct EvalFidDiffArgs {
    /// Directory of PNG images to score.
    #[arg(long, required_unless_present = "values")]
    pub images: Option<PathBuf>,
    /// Reference set from the distilled generator.
    #[arg(long, required_unless_present = "values")]
    pub ref_schnell: Option<PathBuf>,
    /// Reference set from the baseline generator.
    #[arg(long, required_unless_present = "values")]
    pub ref_dev: Option<PathBuf>,
    /// Enhance `--images` with this checkpoint (stem, without extension) first.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Skip embedding and combine two given FID values: `SCHNELL,DEV`.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["images", "ref_schnell", "ref_dev"])]
    pub values: Option<Vec<f64>>,
    #[arg(long, default_value = "enhanced")]
    pub variant: String,
}

#[derive(Args, Debug)]
pub struct EvalPairArgs {
    /// Paired dataset directory; compares source (or its enhancement) with target.
    #[arg(long, conflicts_with_all = ["a", "b"])]
    pub data: Option<PathBuf>,
    /// Directory of PNGs (sorted by name).
    #[arg(long, requires = "b")]
    pub a: Option<PathBuf>,
    /// Directory of PNGs paired by position with `--a`.
    #[arg(long, requires = "a")]
    pub b: Option<PathBuf>,
    /// Enhance the first set with this checkpoint stem first.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [128usize, 256, 512])]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Pairwise head checkpoint stem; adds a refined pipeline.
    #[arg(long)]
    pub head: Option<PathBuf>,
    /// Two sleeping stub pipelines with these delays in ms: `SLOW,FAST`.
    #[arg(long, value_delimiter = ',', conflicts_with = "replay")]
    pub stub_ms: Option<Vec<u64>>,
    /// Use the published timings instead of measuring.
    #[arg(long)]
    pub replay: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// JSON metric report (as written by `eval-fid-diff`).
    #[arg(long)]
    pub metrics: Vec<PathBuf>,
    /// JSON timing table (as written by `bench`).
    #[arg(long)]
    pub timing: Option<PathBuf>,
    /// Use the published metric and timing tables.
    #[arg(long, conflicts_with_all = ["metrics", "timing"])]
    pub recorded: bool,
}
