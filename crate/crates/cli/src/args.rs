use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "nlpre", version, about = "Treebank evaluation, splitting and benchmark service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a system file against a gold file.
    Eval(EvalArgs),
    /// Split a corpus into train/dev/test by paragraphs.
    Split(SplitArgs),
    /// Check a CoNLL-U file.
    Validate(ValidateArgs),
    /// Run the submission and leaderboard API.
    Serve(ServeArgs),
    /// Insert the bundled published results into the service store.
    SeedFixtures(ConfigArgs),
    /// Export correlation or dispersion data from a running service as CSV.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FeatsArg {
    /// Universal features only, sorted.
    Universal,
    /// All features, sorted.
    AllSorted,
    /// The column as written.
    Raw,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reference CoNLL-U file
    pub gold: PathBuf,
    /// Predicted CoNLL-U file over the same text
    pub system: PathBuf,
    /// Comma-separated metrics; defaults to all 13.
    #[arg(long)]
    pub tasks: Option<String>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,
    #[arg(long, value_enum, default_value_t = FeatsArg::Universal)]
    pub feats: FeatsArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitBy {
    Name,
    Type,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// CoNLL-U corpus with paragraph and document markers
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitBy::Name)]
    pub by: SplitBy,
    /// Number of length buckets.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Train, dev and test fractions.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub ratios: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Receives train, dev and test files plus split-manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Surface,
    Full,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// CoNLL-U file to check
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Benchmark YAML config
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Benchmark YAML config
    #[arg(long)]
    pub config: PathBuf,
    /// Port 0 picks a free port; the bound address is printed on stdout.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Seed the bundled published results before serving.
    #[arg(long)]
    pub seed_fixtures: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeKind {
    Correlation,
    Dispersion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Coefficient {
    Pearson,
    Spearman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    DatasetsFirst,
    EmbeddingsFirst,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub kind: AnalyzeKind,
    /// Base URL of a running service, e.g. http://127.0.0.1:8080.
    #[arg(long)]
    pub leaderboard_url: String,
    /// Comma-separated tagset ids; all when omitted.
    #[arg(long)]
    pub tagsets: Option<String>,
    /// Comma-separated metrics; the default vector metrics when omitted
    #[arg(long)]
    pub metrics: Option<String>,
    /// Comma-separated dataset ids; all when omitted
    #[arg(long)]
    pub datasets: Option<String>,
    #[arg(long, value_enum, default_value_t = OrderArg::DatasetsFirst)]
    pub order: OrderArg,
    /// One vector per model and embedding.
    #[arg(long)]
    pub by_embedding: bool,
    /// Coefficient written for `correlation`.
    #[arg(long, value_enum, default_value_t = Coefficient::Pearson)]
    pub coefficient: Coefficient,
}
