use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "apf", version, about = "Requirement-to-formulation dataset pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Selection threshold on the quality score.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Objective weight in the total alignment score.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Paraphrases per requirement (v).
    #[arg(long, global = true)]
    pub variants: Option<usize>,
    /// Augmented samples per base record (l).
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Number of requirement sets to synthesize.
    #[arg(long, global = true)]
    pub sets: Option<usize>,
    /// Corruption probability of the mock-corrupt provider.
    #[arg(long, global = true)]
    pub corrupt_p: Option<f64>,
    /// Adjacent swaps applied by the mock-noisy provider.
    #[arg(long, global = true)]
    pub noise_k: Option<usize>,
    /// Output directory for stage files.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    #[default]
    MockFaithful,
    MockCorrupt,
    MockNoisy,
    Http,
}

#[derive(Debug, Clone, Default, Args)]
pub struct InputArg {
    /// Input file; defaults to the stage's file in the output directory.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the instance pool (instances.jsonl).
    Synth,
    /// Derive requirement sets from the pool (reqsets.jsonl).
    DeriveReqs,
    /// Generate base formulations (base.jsonl).
    GenFormulations,
    /// Annotate reference rankings (rankings.jsonl).
    Annotate,
    /// Score records against reference rankings (scored.jsonl).
    Score(InputArg),
    /// Keep records scoring at least the threshold (hq.jsonl).
    Select(InputArg),
    /// Paraphrase and permute retained records (train.jsonl).
    Augment(InputArg),
    /// Export fine-tuning rows (sft.jsonl, sft.meta.json).
    ExportSft(InputArg),
    /// Alignment of a formulation against a ground-truth formulation.
    Eval(EvalArgs),
    /// Quality-score histogram of a scored file.
    Report(ReportArgs),
    /// Every stage in order, plus report.json.
    RunAll,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Formulation to evaluate, in formulation text syntax.
    #[arg(long, value_name = "PATH")]
    pub formulation: PathBuf,
    /// Ground-truth formulation defining the reference ranking and feasibility.
    #[arg(long, value_name = "PATH")]
    pub truth: PathBuf,
    /// Test instances as JSON lines.
    #[arg(long, value_name = "PATH")]
    pub instances: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub input: InputArg,
    /// Print a text table instead of JSON.
    #[arg(long)]
    pub table: bool,
}
