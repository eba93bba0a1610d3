use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "wcexplain", version, about = "Weak-constraint surrogates for pairwise preference models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate an item file (and pairs), optionally aggregating ingredient classes
    Ingest(IngestArgs),
    /// Principal component analysis of item features
    #[command(subcommand)]
    Pca(PcaCommand),
    /// Draw pair samples
    #[command(subcommand)]
    Sample(SampleCommand),
    /// Label pairs with a black box, or train the reference network
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Run a learning pipeline and write its manifest
    #[command(subcommand)]
    Learn(LearnCommand),
    /// Fidelity of a theory on labeled pairs
    Eval(EvalArgs),
    /// Ground-truth agreement from feature ratings
    GtScore(GtScoreArgs),
    /// Maximum mean discrepancy between two numeric tables
    Mmd(MmdArgs),
    /// Write a learning task in ILASP syntax
    ExportIlasp(ExportArgs),
    /// Tabulate manifests: metrics, deltas against the first, theories
    Report(ReportArgs),
}

/// Schema and item file.
#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Schema JSON, or `recipes` / `recipes-meta` for the bundled schemas
    #[arg(long)]
    pub schema: String,
    /// Item CSV
    #[arg(long)]
    pub items: PathBuf,
}

/// Where labels come from; at most one may be given.
#[derive(Args, Debug, Clone, Default)]
#[group(multiple = false)]
pub struct OracleArgs {
    /// Oracle spec JSON (`{"kind": "table" | "command" | "builtin-mlp" | "theory", ...}`)
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    /// Trained reference network JSON
    #[arg(long)]
    pub mlp: Option<PathBuf>,
    /// Label table CSV (`id1,id2,label`)
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// External labeler: one line of numbers in, one label out
    #[arg(long, num_args = 1.., value_name = "ARGV")]
    pub command: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Ingredient class map JSON; `bundled` for the recipes classes
    #[arg(long)]
    pub class_map: Option<String>,
    /// Pair CSV to check against the item ids
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Normalized item CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Schema JSON of the written items
    #[arg(long)]
    pub schema_out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum PcaCommand {
    /// Fit a model and write it as JSON
    Fit(PcaFitArgs),
    /// Indirect selection: features salient on the first n components
    Select(PcaSelectArgs),
    /// Quantized component scores of items
    Project(PcaProjectArgs),
}

#[derive(Args, Debug)]
pub struct PcaFitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Decompose the covariance instead of the correlation matrix
    #[arg(long)]
    pub covariance: bool,
    /// Leave categorical features out
    #[arg(long)]
    pub drop_categorical: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PcaSelectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Number of components; defaults to the Kaiser count
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PcaProjectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub factor: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum SampleCommand {
    /// Uniform train/test pairs from the item pool (or synthetic items)
    Global(SampleGlobalArgs),
    /// Gaussian neighbourhoods around seeded query pairs
    Local(SampleLocalArgs),
}

#[derive(Args, Debug)]
pub struct SampleGlobalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 45)]
    pub n_train: usize,
    #[arg(long, default_value_t = 105)]
    pub n_test: usize,
    /// Draw synthetic items within the feature domains instead of pool pairs
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct SampleLocalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 20)]
    pub queries: usize,
    #[arg(long, default_value_t = 45)]
    pub m: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Quantization factor; defaults to round(1/sigma)
    #[arg(long)]
    pub factor: Option<u32>,
    #[arg(long, default_value_t = 0.0)]
    pub categorical_resample: f64,
    #[arg(long, value_enum, default_value_t = PenaltyArg::Distance)]
    pub penalty_mode: PenaltyArg,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PenaltyArg {
    Distance,
    InverseDistance,
}

#[derive(Subcommand, Debug)]
pub enum OracleCommand {
    /// Fill in the labels of a pair CSV
    Label(OracleLabelArgs),
    /// Train the reference network on labeled pairs
    Train(OracleTrainArgs),
}

#[derive(Args, Debug)]
pub struct OracleLabelArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub pairs: PathBuf,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OracleTrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Labeled pair CSV; all users are pooled
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.0005)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.2)]
    pub validation: f64,
    /// Hidden layers as `width:activation`, comma separated
    #[arg(long, default_value = "64:tanh,64:relu,64:linear")]
    pub hidden: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum LearnCommand {
    /// Global surrogate from uniformly sampled pairs
    Global(RunArgs),
    /// One surrogate per query neighbourhood
    Local(RunArgs),
    /// Learn directly from user labels
    Classifier(RunArgs),
}

/// Flags mirroring the experiment config; they override `--config`.
#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Experiment config JSON
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Required unless the config provides it
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub schema: Option<String>,
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Labeled user pairs (classifier mode)
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// `none`, `indirect:N` or `direct:K:FACTOR:RETRO_N`
    #[arg(long)]
    pub pca: Option<String>,
    #[arg(long)]
    pub covariance: bool,
    #[arg(long)]
    pub maxp: Option<u32>,
    #[arg(long)]
    pub category_conditions: bool,
    #[arg(long)]
    pub max_constraints: Option<usize>,
    /// Learner time limit in seconds; the best theory so far is kept
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub beam_width: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Quantization factor of item features (global and classifier)
    #[arg(long)]
    pub factor: Option<u32>,
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub penalty_mode: Option<PenaltyArg>,
    #[arg(long)]
    pub user: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Recompute the metrics stored in a manifest
    #[arg(long, conflicts_with_all = ["theory", "schema", "items", "pairs"])]
    pub manifest: Option<PathBuf>,
    /// Theory text
    #[arg(long, requires_all = ["schema", "items", "pairs"])]
    pub theory: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<String>,
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Labeled pair CSV; all users are pooled
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Quantize item features with this factor first
    #[arg(long)]
    pub factor: Option<u32>,
}

#[derive(Args, Debug)]
pub struct GtScoreArgs {
    /// Score a manifest's theory on its test pairs
    #[arg(long, conflicts_with_all = ["theory", "items", "pairs"])]
    pub manifest: Option<PathBuf>,
    #[arg(long, requires_all = ["schema", "items", "pairs"])]
    pub theory: Option<PathBuf>,
    /// Source of ratings; also describes the items
    #[arg(long)]
    pub schema: Option<String>,
    #[arg(long)]
    pub items: Option<PathBuf>,
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub factor: Option<u32>,
    /// Extra or overriding ratings, `feature=G` with G in 1..=10
    #[arg(long = "rating", value_name = "FEATURE=G")]
    pub ratings: Vec<String>,
}

#[derive(Args, Debug)]
pub struct MmdArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Gaussian kernel bandwidth; the pooled median distance by default
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Non-numeric columns to ignore
    #[arg(long, value_delimiter = ',', default_value = "id,name,link,user")]
    pub drop: Vec<String>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Learning task JSON
    #[arg(long, conflicts_with_all = ["schema", "items", "pairs"])]
    pub task: Option<PathBuf>,
    #[arg(long, requires_all = ["items", "pairs"])]
    pub schema: Option<String>,
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Labeled pair CSV; every pair becomes an ordering example of penalty 1
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub maxp: u32,
    #[arg(long, default_value_t = 1)]
    pub factor: u32,
    /// Also write the task as JSON
    #[arg(long)]
    pub task_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Manifest files (a single run, a list of runs, or a local run); the first is the baseline
    #[arg(required = true)]
    pub manifests: Vec<PathBuf>,
    /// Use each local run's aggregate row instead of its per-query rows
    #[arg(long)]
    pub aggregate: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}
