use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "slowsql", version, about = "Synthesize, benchmark and repair slow SQL queries")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for slow variants of each seed and write a corpus.
    Generate(GenerateArgs),
    /// Benchmark a workload, optionally against rewrites.
    Bench(BenchArgs),
    /// Anchored group advantages for a reward vector.
    Advantage(AdvantageArgs),
    /// Split a rollout budget across prompts from pilot statistics.
    RolloutPlan(RolloutPlanArgs),
    /// Verify rewrites and repair the ones that fail to plan.
    Repair(RepairArgs),
    /// Summary statistics of a corpus file.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// Use the built-in simulated retail database.
    #[arg(long)]
    pub simulate: bool,
    /// PostgreSQL connection string.
    #[arg(long, env = "DATABASE_URL", hide_env_values = true)]
    pub dsn: Option<String>,
    /// DDL describing the live database's tables (defaults to the retail schema).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Per-query timeout in seconds.
    #[arg(long)]
    pub timeout_seconds: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// `;`-separated seed queries.
    #[arg(long)]
    pub seeds: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Output corpus (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Search rng seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Directory holding one search checkpoint per seed; existing ones are resumed.
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Also write a fine-tuning export next to the corpus.
    #[arg(long)]
    pub sft: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// `;`-separated workload queries.
    #[arg(long)]
    pub workload: PathBuf,
    /// Rewrites, one per workload query in the same order.
    #[arg(long)]
    pub rewrites: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// JSON report destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdvantageArgs {
    /// JSON rewards: an array, or `{"rewards": [...], "group_sizes": [...]}`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RolloutPlanArgs {
    /// JSON pilot statistics or precomputed weights.
    #[arg(long)]
    pub input: PathBuf,
    /// Total rollouts including the pilot phase.
    #[arg(long)]
    pub budget: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    /// JSON lines of `{"original_sql", "candidate_sql"}`.
    #[arg(long)]
    pub queries: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_rounds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}
