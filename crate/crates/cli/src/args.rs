use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tpoint", version, about = "Event temporal relations through time-point questions")]
pub struct Cli {
    /// JSON file of default settings (flags and environment take precedence).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    All,
    Consistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SemanticsArg {
    Product,
    ProbSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Tanh,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransportArg {
    Mock,
    Http,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Unified,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Random,
    BeforeFirst,
    BeforeLast,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a schema's relations are exclusive and exhaustive.
    ValidateSchema(ValidateArgs),
    /// Generate a synthetic separable dataset.
    Synth(SynthArgs),
    /// Train the time-point sorter head.
    Train(TrainArgs),
    /// Run a checkpoint over a dataset.
    Predict(PredictArgs),
    /// Score predictions against gold labels.
    Eval(EvalArgs),
    /// Decode question outputs under another schema.
    Transfer(TransferArgs),
    /// Append event-swapped copies of training records.
    Augment(AugmentArgs),
    /// Threshold question probabilities and match them against a schema.
    Convert(ConvertArgs),
    /// Draw a seeded subset of a dataset.
    Sample(SampleArgs),
    /// Ask a chat model the time-point questions for each instance.
    LlmRun(LlmRunArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Schema file, or a built-in name (allen13, tbdense, matres).
    pub schema: String,
    /// Assignment domain to check; defaults to the schema's own.
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "tbdense")]
    pub schema: String,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Feature dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Leading fraction of records tagged `train`; the rest are `test`.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "tbdense")]
    pub schema: String,
    #[arg(long, short, value_name = "CHECKPOINT")]
    pub output: PathBuf,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
    #[arg(long, value_enum)]
    pub semantics: Option<SemanticsArg>,
    /// Divide the gold relation's value by the sum over relations.
    #[arg(long)]
    pub normalize: bool,
    /// Add event-swapped copies of the training records.
    #[arg(long)]
    pub augment: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Decode under this schema instead of the checkpoint's.
    #[arg(long)]
    pub schema: Option<String>,
    #[arg(long)]
    pub data: PathBuf,
    /// Only records with this split tag.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long, value_enum, default_value = "product")]
    pub semantics: SemanticsArg,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value = "tbdense")]
    pub schema: String,
    /// Only gold records with this split tag.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub macro_includes_vague: bool,
    /// Exit 1 when micro-F1 falls below this value.
    #[arg(long)]
    pub min_f1: Option<f64>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Also write the JSON report here.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[arg(long, conflicts_with = "q_file", requires = "data")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, required_unless_present = "checkpoint")]
    pub q_file: Option<PathBuf>,
    #[arg(long)]
    pub target_schema: String,
    /// Map source-schema predictions through a fixed label mapping instead
    /// of decoding the questions under the target schema.
    #[arg(long, requires = "source_schema")]
    pub label_mapping: Option<String>,
    #[arg(long)]
    pub source_schema: Option<String>,
    #[arg(long, value_enum, default_value = "product")]
    pub semantics: SemanticsArg,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "tbdense")]
    pub schema: String,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub q_file: PathBuf,
    #[arg(long, default_value = "tbdense")]
    pub schema: String,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "tbdense")]
    pub schema: String,
    #[arg(long)]
    pub fraction: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct LlmRunArgs {
    /// JSONL of `{id, text, event_1, event_2}`.
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long, value_enum, default_value = "mock")]
    pub transport: TransportArg,
    /// Mock transport script.
    #[arg(long, required_if_eq("transport", "mock"))]
    pub script: Option<PathBuf>,
    /// Response cache directory (required for replay).
    #[arg(long, required_if_eq("transport", "replay"))]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "unified")]
    pub mode: ModeArg,
    /// Candidate relations for classification mode.
    #[arg(long, default_value = "tbdense")]
    pub schema: String,
    #[arg(long, value_enum, default_value = "random")]
    pub order: OrderArg,
    #[arg(long)]
    pub cot: bool,
    /// Majority vote over this many samples (classification mode).
    #[arg(long, num_args = 0..=1, default_missing_value = "5")]
    pub self_consistency: Option<usize>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Minimum delay between HTTP requests, in milliseconds.
    #[arg(long)]
    pub min_interval_ms: Option<u64>,
    /// Also write full per-instance traces here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
}
