use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use slowsql::corpus::{
    collect_plans, corpus_stats, export_sft, generate_with_checkpoints, read_corpus, write_corpus, write_jsonl, Auditor,
    CorpusHeader, HeuristicAuditor, ModelAuditor,
};
use slowsql::exec::engine::{load_script, Database};
use slowsql::exec::pg::PgBackend;
use slowsql::exec::{Backend, Dispatcher, ResultCache, SimulatedBackend};
use slowsql::mcts::Searcher;
use slowsql::mutate::{ModelClient, ModelProvider, QueueModel, RemoteConfig, RemoteModel, Router};
use slowsql::repair::{repair_batch, RepairError, RepairStatus};
use slowsql::{fixtures, Dialect};
use slowsql_grpo::{allocate_budget, anchored_advantage, anchored_advantage_batch, rollout_weights, AggregationWeights, PilotStats};

use crate::args::{AdvantageArgs, BackendArgs, BenchArgs, Cli, Command, GenerateArgs, RepairArgs, RolloutPlanArgs, StatsArgs};
use crate::bench::run_bench;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

const DISPATCH_QUEUE: usize = 256;

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(a) => cmd_generate(&a, &mut cfg, out),
        Command::Bench(a) => cmd_bench(&a, &mut cfg, out),
        Command::Advantage(a) => cmd_advantage(&a, &cfg, out),
        Command::RolloutPlan(a) => cmd_rollout_plan(&a, &cfg, out),
        Command::Repair(a) => cmd_repair(&a, &mut cfg, out),
        Command::Stats(a) => cmd_stats(&a, out),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Other(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline, to `path` or `out`.
fn emit_json<T: Serialize>(value: &T, path: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))? + "\n";
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::Other(e.to_string())),
    }
}

struct Target {
    backend: Arc<dyn Backend>,
    schema: Arc<Database>,
    schema_id: String,
    dialect: Dialect,
}

fn open_backend(args: &BackendArgs, cfg: &mut PipelineConfig) -> CliResult<Target> {
    if let Some(t) = args.timeout_seconds {
        cfg.executor.timeout_seconds = t;
        cfg.validate()?;
    }
    if args.simulate {
        let db = fixtures::database();
        return Ok(Target {
            schema: Arc::new(db.clone()),
            backend: Arc::new(SimulatedBackend::new(db)),
            schema_id: fixtures::SCHEMA_ID.to_string(),
            dialect: Dialect::Postgres,
        });
    }
    let Some(dsn) = args.dsn.as_deref() else {
        return Err(CliError::Config("either --simulate or --dsn (or DATABASE_URL) is required".into()));
    };
    let (ddl, schema_id) = match &args.schema {
        Some(p) => (read_text(p)?, p.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned())),
        None => (fixtures::SCHEMA_SQL.to_string(), fixtures::SCHEMA_ID.to_string()),
    };
    let mut schema = Database::new();
    load_script(&mut schema, &ddl).map_err(|e| CliError::Input(format!("schema: {e}")))?;
    let backend = PgBackend::connect(dsn).map_err(|e| CliError::Backend(e.to_string()))?;
    Ok(Target { backend: Arc::new(backend), schema: Arc::new(schema), schema_id, dialect: Dialect::Postgres })
}

fn model_client() -> Option<Arc<dyn ModelClient>> {
    RemoteConfig::from_env().map(|c| Arc::new(RemoteModel::new(c)) as Arc<dyn ModelClient>)
}

fn cmd_generate(a: &GenerateArgs, cfg: &mut PipelineConfig, out: &mut dyn Write) -> CliResult<()> {
    if let Some(s) = a.seed {
        cfg.mcts.rng_seed = s;
    }
    if let Some(n) = a.iterations {
        cfg.mcts.iterations = n;
    }
    cfg.validate()?;
    let seeds = fixtures::split_queries(&read_text(&a.seeds)?);
    let target = open_backend(&a.backend, cfg)?;
    if seeds.is_empty() {
        return Err(CliError::ZeroYield(format!("{} holds no seed queries", a.seeds.display())));
    }
    if let Some(dir) = &a.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }

    let model = model_client();
    let mut router = Router::offline(target.schema.clone(), target.dialect);
    if let Some(m) = &model {
        router.free_form = Some(Arc::new(ModelProvider::new(m.clone(), target.dialect)));
    }
    let auditor: Box<dyn Auditor> = match &model {
        Some(m) => Box::new(ModelAuditor { client: m.clone() }),
        None => Box::new(HeuristicAuditor::default()),
    };
    let dispatcher = Arc::new(Dispatcher::new(target.backend.clone(), Arc::new(ResultCache::new()), cfg.executor, DISPATCH_QUEUE));
    let searcher = Searcher {
        dispatcher,
        schema: target.schema.clone(),
        router: Arc::new(router),
        dialect: target.dialect,
        config: cfg.mcts.clone(),
    };
    let schema_id = cfg.generate.schema_id.clone().unwrap_or(target.schema_id);
    let min_ratio = cfg.generate.min_ratio;
    let (records, reports) = generate_with_checkpoints(
        &seeds,
        &searcher,
        &cfg.gate,
        min_ratio,
        &schema_id,
        auditor.as_ref(),
        a.checkpoint_dir.as_deref(),
    );

    let w = |e: std::io::Error| CliError::Other(e.to_string());
    for (i, r) in reports.iter().enumerate() {
        let status = match (&r.gate.reason(), &r.error) {
            (Some(reason), _) => format!("rejected ({reason:?})").to_lowercase(),
            (None, Some(e)) => format!("failed: {e}"),
            (None, None) => format!("{} nodes, {} harvested", r.nodes, r.harvested),
        };
        writeln!(out, "seed {:>3}  {status}", i + 1).map_err(w)?;
    }
    if let Some(e) = reports.iter().find_map(|r| r.error.as_deref().filter(|e| e.starts_with("transport"))) {
        return Err(CliError::Backend(e.to_string()));
    }

    let header = CorpusHeader::new(&schema_id, &target.backend.id(), min_ratio);
    let mut f = create(&a.out)?;
    write_corpus(&mut f, &header, &records).and_then(|_| f.flush()).map_err(|e| io_err(&a.out, e))?;
    if let Some(p) = &a.sft {
        let plans = collect_plans(&records, target.backend.as_ref());
        let sft = export_sft(&records, &target.schema.schema_ddl(), &plans);
        let mut f = create(p)?;
        write_jsonl(&mut f, &sft).and_then(|_| f.flush()).map_err(|e| io_err(p, e))?;
    }
    write!(out, "{}", corpus_stats(&records, target.dialect)).map_err(w)?;
    if records.is_empty() {
        return Err(CliError::ZeroYield("no variant reached the slowdown threshold".into()));
    }
    Ok(())
}

fn read_queries(path: &Path) -> CliResult<Vec<String>> {
    Ok(fixtures::split_queries(&read_text(path)?))
}

fn cmd_bench(a: &BenchArgs, cfg: &mut PipelineConfig, out: &mut dyn Write) -> CliResult<()> {
    let workload = read_queries(&a.workload)?;
    let rewrites = match &a.rewrites {
        Some(p) => {
            let r = read_queries(p)?;
            if r.len() != workload.len() {
                return Err(CliError::Input(format!(
                    "{}: {} rewrites for {} workload queries",
                    p.display(),
                    r.len(),
                    workload.len()
                )));
            }
            Some(r)
        }
        None => None,
    };
    let target = open_backend(&a.backend, cfg)?;
    let report = run_bench(&workload, rewrites.as_deref(), target.backend.as_ref(), &cfg.executor);
    write!(out, "{report}").map_err(|e| CliError::Other(e.to_string()))?;
    if let Some(p) = &a.out {
        emit_json(&report, Some(p), out)?;
    }
    if report.entries.iter().all(|e| e.measured().error.as_deref().is_some_and(|m| m.starts_with("transport"))) && !workload.is_empty() {
        return Err(CliError::Backend("every query failed with a transport error".into()));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RewardInput {
    Flat(Vec<f64>),
    Grouped {
        rewards: Vec<f64>,
        #[serde(default)]
        group_sizes: Option<Vec<usize>>,
    },
}

#[derive(Debug, Serialize)]
struct AdvantageOutput {
    advantages: Vec<f64>,
}

fn cmd_advantage(a: &AdvantageArgs, cfg: &PipelineConfig, out: &mut dyn Write) -> CliResult<()> {
    let input: RewardInput = parse_json(&a.input)?;
    let advantages = match input {
        RewardInput::Flat(r) | RewardInput::Grouped { rewards: r, group_sizes: None } => anchored_advantage(&r, &cfg.reward),
        RewardInput::Grouped { rewards, group_sizes: Some(g) } => anchored_advantage_batch(&rewards, &g, &cfg.reward),
    }
    .map_err(|e| CliError::Input(format!("{}: {e}", a.input.display())))?;
    emit_json(&AdvantageOutput { advantages }, a.out.as_deref(), out)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RolloutInput {
    #[serde(default)]
    pilot_size: usize,
    #[serde(default)]
    pilot: Option<Vec<PilotStats>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    aggregation: Option<AggregationWeights>,
}

fn cmd_rollout_plan(a: &RolloutPlanArgs, cfg: &PipelineConfig, out: &mut dyn Write) -> CliResult<()> {
    let input: RolloutInput = parse_json(&a.input)?;
    let bad = |m: String| CliError::Input(format!("{}: {m}", a.input.display()));
    let weights = match (input.pilot, input.weights) {
        (Some(p), None) => rollout_weights(&p, &cfg.reward, &input.aggregation.unwrap_or(cfg.aggregation)),
        (None, Some(w)) => w,
        _ => return Err(bad("exactly one of \"pilot\" and \"weights\" is required".into())),
    };
    let plan = allocate_budget(&weights, a.budget, input.pilot_size).map_err(|e| bad(e.to_string()))?;
    emit_json(&plan, a.out.as_deref(), out)
}

/// One line of a repair input or output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepairPair {
    pub original_sql: String,
    pub candidate_sql: String,
}

fn cmd_repair(a: &RepairArgs, cfg: &mut PipelineConfig, out: &mut dyn Write) -> CliResult<()> {
    let text = read_text(&a.queries)?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: RepairPair =
            serde_json::from_str(line).map_err(|e| CliError::Input(format!("{}: line {}: {e}", a.queries.display(), i + 1)))?;
        pairs.push((p.original_sql, p.candidate_sql));
    }
    let target = open_backend(&a.backend, cfg)?;
    let client: Arc<dyn ModelClient> = model_client().unwrap_or_else(|| Arc::new(QueueModel::new(Vec::<String>::new())));
    let rounds = a.max_rounds.unwrap_or(cfg.repair.max_rounds);
    let outcomes = repair_batch(&pairs, target.backend.as_ref(), client.as_ref(), rounds);

    let mut repaired = Vec::with_capacity(pairs.len());
    let mut tally: HashMap<&'static str, usize> = HashMap::new();
    for (i, ((original, _), o)) in pairs.iter().zip(outcomes).enumerate() {
        let o = o.map_err(|e| match e {
            RepairError::Transport(m) => CliError::Backend(m),
            RepairError::OriginalInvalid(m) => CliError::Input(format!("{}: line {}: {m}", a.queries.display(), i + 1)),
        })?;
        let key = match o.status {
            RepairStatus::Valid => "valid",
            RepairStatus::Repaired => "repaired",
            RepairStatus::Fallback => "fallback",
        };
        *tally.entry(key).or_default() += 1;
        repaired.push(RepairPair { original_sql: original.clone(), candidate_sql: o.sql });
    }
    let mut f = create(&a.out)?;
    write_jsonl(&mut f, &repaired).and_then(|_| f.flush()).map_err(|e| io_err(&a.out, e))?;
    let n = |k| tally.get(k).copied().unwrap_or(0);
    writeln!(out, "valid {}  repaired {}  fallback {}", n("valid"), n("repaired"), n("fallback"))
        .map_err(|e| CliError::Other(e.to_string()))
}

fn cmd_stats(a: &StatsArgs, out: &mut dyn Write) -> CliResult<()> {
    let f = File::open(&a.corpus).map_err(|e| CliError::Input(format!("{}: {e}", a.corpus.display())))?;
    let (_, records) =
        read_corpus(&mut BufReader::new(f)).map_err(|e| CliError::Input(format!("{}: {e}", a.corpus.display())))?;
    let stats = corpus_stats(&records, Dialect::Postgres);
    if a.json {
        emit_json(&stats, None, out)
    } else {
        write!(out, "{stats}").map_err(|e| CliError::Other(e.to_string()))
    }
}
