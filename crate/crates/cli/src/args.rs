use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ninegrid::Strategy;

/// Nine-grid layout pipeline and preference-study tooling.
#[derive(Debug, Parser)]
#[command(name = "ninegrid", version, about)]
pub struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    /// Root for default output locations.
    #[arg(
        long,
        global = true,
        env = "NINEGRID_DATA_DIR",
        default_value = "ninegrid-data"
    )]
    pub data_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crop and resize nine images into 300×300 thumbnails plus set.json.
    Preprocess(PreprocessArgs),
    /// Score a preprocessed set.
    Score(ScoreArgs),
    /// Rank a scored set and write its grid layout.
    Arrange(LayoutArgs),
    /// Render a layout into a 900×900 composite.
    Compose(LayoutArgs),
    /// preprocess → score ×2 → arrange ×2 → compose, for one or more sets.
    Pipeline(PipelineArgs),
    /// Build, serve, or tally a preference study.
    #[command(subcommand)]
    Study(StudyCommand),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Directory holding exactly nine PNG/JPEG images.
    pub dir: PathBuf,
    /// Defaults to the directory name.
    #[arg(long)]
    pub set_id: Option<String>,
    /// Defaults to <data-dir>/sets/<set-id>.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExternalArgs {
    /// Command speaking the line-delimited JSON scorer protocol.
    #[arg(long, conflicts_with = "sidecar")]
    pub external_scorer: Option<String>,
    /// JSONL file of precomputed {"id", "score"} lines.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Preprocessed set directory (contains set.json).
    pub set: PathBuf,
    /// heuristic.{sharpness,colorfulness,exposure,composite} or external:<name>.
    #[arg(long)]
    pub scorer: String,
    #[command(flatten)]
    pub external: ExternalArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Sequential,
    Center,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Sequential => Strategy::Sequential,
            StrategyArg::Center => Strategy::CenterPriority,
        }
    }
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    pub set: PathBuf,
    #[arg(long)]
    pub scorer: String,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Set directories, nine images each.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    /// Scorer ranking the aesthetic variants.
    #[arg(long, default_value = "heuristic.composite")]
    pub aesthetic: String,
    /// Scorer ranking the content variants.
    #[arg(long, default_value = "heuristic.colorfulness")]
    pub content: String,
    /// Command used for any external:<name> scorer.
    #[arg(long)]
    pub external_scorer: Option<String>,
    /// Defaults to <data-dir>/pipeline.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sets processed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum StudyCommand {
    /// Assemble a study bundle from pipeline outputs.
    Build(BuildArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Print vote counts, marginals and χ² for a bundle or ballot log.
    Tally(TallyArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Directory searched recursively for quad.json files.
    #[arg(long)]
    pub quads: PathBuf,
    #[arg(long, default_value = "study")]
    pub study_id: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub questionnaires: usize,
    #[arg(long, default_value_t = 50)]
    pub questions: usize,
    /// Defaults to <data-dir>/studies/<study-id>.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "NINEGRID_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Bundles to load on startup.
    #[arg(long)]
    pub load: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TallyArgs {
    /// Bundle directory or a ballots.jsonl file.
    pub path: PathBuf,
}
