use std::net::IpAddr;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "revnote", version, about = "Match app review sentences to release-note sentences")]
pub struct Cli {
    /// JSON pipeline configuration; flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Data directory (default: `data`, or `data_dir` from the config).
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add apps, release notes and reviews from JSONL files.
    Ingest(IngestArgs),
    /// Split, normalize, tag and de-duplicate every stored document.
    Preprocess,
    /// Train the informative-sentence filter on seed labels plus all review sentences.
    FilterTrain(FilterTrainArgs),
    /// Mark every review sentence informative or not.
    FilterApply,
    /// Train skip-gram word vectors on the informative review sentences.
    EmbedTrain(EmbedTrainArgs),
    /// Import externally computed sentence vectors (VEC1 format).
    EmbedImport(EmbedImportArgs),
    /// Rank informative review sentences against each note sentence.
    Match(MatchArgs),
    /// Summaries of matches and labels.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Serve the annotation JSON API.
    Serve(ServeArgs),
    /// Write a stored table to stdout or a file.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// App records JSONL.
    #[arg(long, value_name = "FILE")]
    pub apps: Option<PathBuf>,
    /// Release notes JSONL.
    #[arg(long, value_name = "FILE", requires = "app")]
    pub notes: Option<PathBuf>,
    /// Reviews JSONL.
    #[arg(long, value_name = "FILE", requires = "app")]
    pub reviews: Option<PathBuf>,
    /// Owner of the notes and reviews; records with another app_id are rejected.
    #[arg(long)]
    pub app: Option<String>,
}

#[derive(Debug, Args)]
pub struct FilterTrainArgs {
    /// Seed labels JSONL of {"text", "label"}; defaults to the bundled starter set.
    #[arg(long, value_name = "FILE")]
    pub seeds: Option<PathBuf>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EmbedTrainArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub min_count: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Threads; more than 1 trades determinism for speed.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EmbedImportArgs {
    /// VEC1 file with one row per note or review sentence id.
    #[arg(long, value_name = "FILE")]
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// App id, or `all`.
    #[arg(long, default_value = "all")]
    pub app: String,
    /// List length per backend.
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated backend ids.
    #[arg(long, value_delimiter = ',')]
    pub backends: Option<Vec<String>>,
    #[arg(long, value_name = "V,N,A", value_delimiter = ',', num_args = 3)]
    pub pos_weights: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Share of consensus-labeled pairs judged relevant, per app and backend.
    HitRatio(LabelReportArgs),
    /// Role distribution among relevant consensus pairs.
    Roles(LabelReportArgs),
    /// Day intervals between reviews and release notes.
    Temporal(TemporalArgs),
    /// App-selection criteria.
    Eligibility(EligibilityArgs),
}

#[derive(Debug, Args)]
pub struct LabelReportArgs {
    #[arg(long, default_value = "all")]
    pub app: String,
    /// Labels JSONL (default: the server's labels file).
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairScope {
    /// Pairs whose consensus label is relevant.
    Relevant,
    /// Pairs in every backend's list.
    Intersection,
    /// Every matched pair.
    All,
}

#[derive(Debug, Args)]
pub struct TemporalArgs {
    #[arg(long, default_value = "all")]
    pub app: String,
    #[arg(long, value_enum, default_value_t = PairScope::Relevant)]
    pub pairs: PairScope,
    #[arg(long, default_value_t = revnote::analysis::DEFAULT_BIN_WIDTH)]
    pub bin_width: i64,
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    /// Histogram CSV (default: reports/temporal_<app>.csv in the data directory).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EligibilityArgs {
    #[arg(long, default_value = "all")]
    pub app: String,
    /// Reference date for app age (default: the app's latest document).
    #[arg(long)]
    pub as_of: Option<NaiveDate>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
    /// Require this value in the X-Api-Token header.
    #[arg(long)]
    pub token: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    Apps,
    Notes,
    Reviews,
    NoteSentences,
    ReviewSentences,
    Pairs,
    Labels,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(value_enum)]
    pub table: Table,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
