//! Turning search trees into a slow-query corpus: seed gating, harvesting
//! slow equivalents, auditing, statistics and fine-tuning export.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::degrade::{builtin_library, fill_template};
use crate::exec::{Backend, Dispatcher};
use crate::mcts::{SearchTree, Searcher};
use crate::mutate::{ModelClient, MutationError};
use crate::sql::{ComplexityProfile, Dialect, SqlTree};

pub const AUDIT_TEMPLATE: &str = include_str!("../prompts/audit.txt");
pub const CORPUS_FORMAT: &str = "slowsql-corpus";
pub const CORPUS_VERSION: u32 = 1;
pub const DEFAULT_MIN_RATIO: f64 = 2.0;
/// Lineage entry for a step produced by a free-form model rewrite.
pub const FREE_FORM_STEP: &str = "free_form";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedGate {
    pub min_predicates: usize,
    pub min_joins: usize,
    pub min_subqueries: usize,
    pub require_nonempty_result: bool,
}

impl Default for SeedGate {
    fn default() -> Self {
        SeedGate { min_predicates: 4, min_joins: 2, min_subqueries: 1, require_nonempty_result: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Parse,
    Complexity,
    Execution,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum GateVerdict {
    Accept { seed_latency: f64, seed_hash: u64, profile: ComplexityProfile },
    Reject { reason: RejectReason, detail: String },
}

impl GateVerdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, GateVerdict::Accept { .. })
    }

    pub fn reason(&self) -> Option<RejectReason> {
        match self {
            GateVerdict::Reject { reason, .. } => Some(*reason),
            GateVerdict::Accept { .. } => None,
        }
    }
}

/// Checks, in order, that the seed parses, is complex enough, runs, and
/// returns rows. The first failing check is the rejection reason.
pub fn gate_seed(sql: &str, dispatcher: &Dispatcher, gate: &SeedGate, dialect: Dialect) -> GateVerdict {
    let reject = |reason, detail: String| GateVerdict::Reject { reason, detail };
    let tree = match SqlTree::parse(sql, dialect) {
        Ok(t) => t,
        Err(e) => return reject(RejectReason::Parse, e.to_string()),
    };
    let p = tree.profile();
    let mut short = Vec::new();
    if p.predicate_count < gate.min_predicates {
        short.push(format!("predicates {} < {}", p.predicate_count, gate.min_predicates));
    }
    if p.join_count < gate.min_joins {
        short.push(format!("joins {} < {}", p.join_count, gate.min_joins));
    }
    if p.subquery_count < gate.min_subqueries {
        short.push(format!("subqueries {} < {}", p.subquery_count, gate.min_subqueries));
    }
    if !short.is_empty() {
        return reject(RejectReason::Complexity, short.join(", "));
    }
    let outcome = match dispatcher.execute(sql) {
        Ok(o) => o,
        Err(e) => return reject(RejectReason::Execution, format!("transport: {}", e.0)),
    };
    if !outcome.is_ok() {
        let detail = outcome.error_message.clone().unwrap_or_else(|| "timeout".into());
        return reject(RejectReason::Execution, detail);
    }
    if gate.require_nonempty_result && outcome.row_count == Some(0) {
        return reject(RejectReason::Empty, "seed returns no rows".into());
    }
    GateVerdict::Accept {
        seed_latency: outcome.latency_seconds,
        seed_hash: outcome.result_hash.expect("ok outcome has a hash"),
        profile: p,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditVerdict {
    Kept,
    Dropped,
    Unaudited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub seed_sql: String,
    pub slow_sql: String,
    pub seed_latency: f64,
    pub slow_latency: f64,
    pub slowdown_ratio: f64,
    /// Steps from the seed to this query, oldest first.
    pub strategy_lineage: Vec<String>,
    pub schema_id: String,
    pub audit_verdict: AuditVerdict,
}

/// One record per node that ran successfully, matched the seed's result
/// and is at least `min_ratio` times slower. Ordered by node id.
pub fn harvest(tree: &SearchTree, min_ratio: f64, schema_id: &str) -> Vec<CorpusRecord> {
    let mut out = Vec::new();
    for node in tree.nodes.iter().skip(1) {
        if node.phi != 1 {
            continue;
        }
        let Some(ratio) = tree.speedup_ratio(node) else { continue };
        if ratio < min_ratio {
            continue;
        }
        let mut lineage = Vec::new();
        let mut cur = Some(node.id);
        while let Some(i) = cur {
            let n = &tree.nodes[i];
            if n.parent.is_some() {
                lineage.push(n.strategy_id.clone().unwrap_or_else(|| FREE_FORM_STEP.to_string()));
            }
            cur = n.parent;
        }
        lineage.reverse();
        out.push(CorpusRecord {
            seed_sql: tree.seed_sql().to_string(),
            slow_sql: node.sql.clone(),
            seed_latency: tree.seed_latency,
            slow_latency: node.outcome.as_ref().expect("ratio implies outcome").latency_seconds,
            slowdown_ratio: ratio,
            strategy_lineage: lineage,
            schema_id: schema_id.to_string(),
            audit_verdict: AuditVerdict::Unaudited,
        });
    }
    out
}

pub trait Auditor: Send + Sync {
    fn verdict(&self, record: &CorpusRecord) -> Result<AuditVerdict, MutationError>;
}

/// Drops records reached only through noise strategies.
pub struct HeuristicAuditor {
    noise: Vec<&'static str>,
}

impl Default for HeuristicAuditor {
    fn default() -> Self {
        HeuristicAuditor { noise: builtin_library().iter().filter(|s| s.noise).map(|s| s.id).collect() }
    }
}

impl Auditor for HeuristicAuditor {
    fn verdict(&self, record: &CorpusRecord) -> Result<AuditVerdict, MutationError> {
        let only_noise = !record.strategy_lineage.is_empty()
            && record.strategy_lineage.iter().all(|s| self.noise.contains(&s.as_str()));
        Ok(if only_noise { AuditVerdict::Dropped } else { AuditVerdict::Kept })
    }
}

/// Asks a model whether the slowdown is structural.
pub struct ModelAuditor<C: ModelClient + ?Sized> {
    pub client: std::sync::Arc<C>,
}

impl<C: ModelClient + ?Sized> Auditor for ModelAuditor<C> {
    fn verdict(&self, record: &CorpusRecord) -> Result<AuditVerdict, MutationError> {
        let ratio = format!("{:.2}", record.slowdown_ratio);
        let prompt = fill_template(AUDIT_TEMPLATE, &[
            ("ratio", &ratio),
            ("seed_sql", &record.seed_sql),
            ("slow_sql", &record.slow_sql),
        ]);
        let answer = self.client.complete(&prompt)?.to_ascii_uppercase();
        match (answer.rfind("KEEP"), answer.rfind("DROP")) {
            (Some(k), Some(d)) => Ok(if k > d { AuditVerdict::Kept } else { AuditVerdict::Dropped }),
            (Some(_), None) => Ok(AuditVerdict::Kept),
            (None, Some(_)) => Ok(AuditVerdict::Dropped),
            (None, None) => Err(MutationError::Extraction),
        }
    }
}

/// Stamps the auditor's verdict; an unavailable auditor leaves the record
/// in place marked unaudited.
pub fn audit(record: &CorpusRecord, auditor: &dyn Auditor) -> CorpusRecord {
    let mut out = record.clone();
    out.audit_verdict = auditor.verdict(record).unwrap_or(AuditVerdict::Unaudited);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: usize,
    pub kept: usize,
    pub dropped: usize,
    pub unaudited: usize,
    /// Means over `slow_sql`; absent for an empty corpus.
    pub mean_token_count: Option<f64>,
    pub mean_predicate_count: Option<f64>,
    pub mean_subquery_count: Option<f64>,
    pub mean_join_count: Option<f64>,
    pub mean_slowdown_ratio: Option<f64>,
}

pub fn corpus_stats(records: &[CorpusRecord], dialect: Dialect) -> CorpusStats {
    let profiles: Vec<ComplexityProfile> =
        records.iter().filter_map(|r| SqlTree::parse(&r.slow_sql, dialect).ok()).map(|t| t.profile()).collect();
    let mean = |f: &dyn Fn(&ComplexityProfile) -> usize| {
        (!profiles.is_empty()).then(|| profiles.iter().map(|p| f(p) as f64).sum::<f64>() / profiles.len() as f64)
    };
    let count = |v: AuditVerdict| records.iter().filter(|r| r.audit_verdict == v).count();
    CorpusStats {
        records: records.len(),
        kept: count(AuditVerdict::Kept),
        dropped: count(AuditVerdict::Dropped),
        unaudited: count(AuditVerdict::Unaudited),
        mean_token_count: mean(&|p| p.token_count),
        mean_predicate_count: mean(&|p| p.predicate_count),
        mean_subquery_count: mean(&|p| p.subquery_count),
        mean_join_count: mean(&|p| p.join_count),
        mean_slowdown_ratio: (!records.is_empty())
            .then(|| records.iter().map(|r| r.slowdown_ratio).sum::<f64>() / records.len() as f64),
    }
}

impl std::fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let show = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"));
        writeln!(f, "records        {}", self.records)?;
        writeln!(f, "kept           {}", self.kept)?;
        writeln!(f, "dropped        {}", self.dropped)?;
        writeln!(f, "unaudited      {}", self.unaudited)?;
        writeln!(f, "avg tokens     {}", show(self.mean_token_count))?;
        writeln!(f, "avg predicates {}", show(self.mean_predicate_count))?;
        writeln!(f, "avg subqueries {}", show(self.mean_subquery_count))?;
        writeln!(f, "avg joins      {}", show(self.mean_join_count))?;
        writeln!(f, "avg slowdown   {}", show(self.mean_slowdown_ratio))
    }
}

/// The most complex `fraction` of records, most complex first. Ties keep
/// input order.
pub fn top_by_complexity(records: &[CorpusRecord], fraction: f64, dialect: Dialect) -> Vec<CorpusRecord> {
    let mut keyed: Vec<(usize, &CorpusRecord)> = records
        .iter()
        .map(|r| (SqlTree::parse(&r.slow_sql, dialect).map(|t| t.profile().rank_key()).unwrap_or(0), r))
        .collect();
    keyed.sort_by_key(|k| std::cmp::Reverse(k.0));
    let n = (records.len() as f64 * fraction.clamp(0.0, 1.0)).ceil() as usize;
    keyed.into_iter().take(n).map(|(_, r)| r.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub schema: String,
    pub slow_sql: String,
    pub plan: Option<String>,
    pub seed_sql: String,
    /// Filled in later by distillation.
    pub completion: Option<String>,
    pub flags: Vec<String>,
}

pub fn export_sft(records: &[CorpusRecord], schema_ddl: &str, plans: &HashMap<String, String>) -> Vec<SftRecord> {
    records
        .iter()
        .map(|r| {
            let plan = plans.get(&r.slow_sql).cloned();
            SftRecord {
                schema: schema_ddl.to_string(),
                slow_sql: r.slow_sql.clone(),
                seed_sql: r.seed_sql.clone(),
                flags: if plan.is_none() { vec!["missing_plan".into()] } else { Vec::new() },
                plan,
                completion: None,
            }
        })
        .collect()
}

/// EXPLAIN output for each slow query the backend can plan.
pub fn collect_plans(records: &[CorpusRecord], backend: &dyn Backend) -> HashMap<String, String> {
    records
        .iter()
        .filter_map(|r| backend.explain(&r.slow_sql).ok().map(|p| (r.slow_sql.clone(), p)))
        .collect()
}

pub fn write_jsonl<T: Serialize>(w: &mut dyn Write, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub format: String,
    pub version: u32,
    pub schema_id: String,
    pub backend_id: String,
    pub min_ratio: f64,
}

impl CorpusHeader {
    pub fn new(schema_id: &str, backend_id: &str, min_ratio: f64) -> Self {
        CorpusHeader {
            format: CORPUS_FORMAT.into(),
            version: CORPUS_VERSION,
            schema_id: schema_id.into(),
            backend_id: backend_id.into(),
            min_ratio,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

pub fn write_corpus(w: &mut dyn Write, header: &CorpusHeader, records: &[CorpusRecord]) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, header)?;
    w.write_all(b"\n")?;
    write_jsonl(w, records)
}

pub fn read_corpus(r: &mut dyn BufRead) -> Result<(CorpusHeader, Vec<CorpusRecord>), CorpusError> {
    let mut lines = r.lines().enumerate();
    let bad = |line: usize, message: String| CorpusError::Format { line, message };
    let (_, first) = lines.next().ok_or_else(|| bad(1, "empty corpus file".into()))?;
    let header: CorpusHeader = serde_json::from_str(&first?).map_err(|e| bad(1, e.to_string()))?;
    if header.format != CORPUS_FORMAT || header.version != CORPUS_VERSION {
        return Err(bad(1, format!("unsupported corpus {} v{}", header.format, header.version)));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| bad(i + 1, e.to_string()))?);
    }
    Ok((header, records))
}

/// What happened to one seed during corpus generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed_sql: String,
    pub gate: GateVerdict,
    pub error: Option<String>,
    pub nodes: usize,
    pub harvested: usize,
}

/// Gates, searches and harvests every seed, then audits the records.
/// Seeds are searched in parallel when the `parallel` feature is on; the
/// output order always follows the input order.
pub fn generate(
    seeds: &[String],
    searcher: &Searcher,
    gate: &SeedGate,
    min_ratio: f64,
    schema_id: &str,
    auditor: &dyn Auditor,
) -> (Vec<CorpusRecord>, Vec<SeedReport>) {
    generate_with_checkpoints(seeds, searcher, gate, min_ratio, schema_id, auditor, None)
}

/// Checkpoint file for the seed at `index`.
pub fn checkpoint_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("seed-{index:04}.json"))
}

/// Sequential [`generate`], available with or without the `parallel` feature.
pub fn generate_seq(
    seeds: &[String],
    searcher: &Searcher,
    gate: &SeedGate,
    min_ratio: f64,
    schema_id: &str,
    auditor: &dyn Auditor,
) -> (Vec<CorpusRecord>, Vec<SeedReport>) {
    run_seeds(seeds, searcher, gate, min_ratio, schema_id, auditor, None, false)
}

/// Like [`generate`], but each search tree is saved under `checkpoints`
/// and an existing checkpoint for the same seed is resumed instead of
/// starting over.
pub fn generate_with_checkpoints(
    seeds: &[String],
    searcher: &Searcher,
    gate: &SeedGate,
    min_ratio: f64,
    schema_id: &str,
    auditor: &dyn Auditor,
    checkpoints: Option<&Path>,
) -> (Vec<CorpusRecord>, Vec<SeedReport>) {
    run_seeds(seeds, searcher, gate, min_ratio, schema_id, auditor, checkpoints, cfg!(feature = "parallel"))
}

#[allow(clippy::too_many_arguments)]
fn run_seeds(
    seeds: &[String],
    searcher: &Searcher,
    gate: &SeedGate,
    min_ratio: f64,
    schema_id: &str,
    auditor: &dyn Auditor,
    checkpoints: Option<&Path>,
    parallel: bool,
) -> (Vec<CorpusRecord>, Vec<SeedReport>) {
    let one = |(i, seed): (usize, &String)| -> (Vec<CorpusRecord>, SeedReport) {
        let verdict = gate_seed(seed, &searcher.dispatcher, gate, searcher.dialect);
        let mut report = SeedReport { seed_sql: seed.clone(), gate: verdict, error: None, nodes: 0, harvested: 0 };
        if !report.gate.is_accept() {
            return (Vec::new(), report);
        }
        match search_seed(i, seed, searcher, checkpoints) {
            Ok(tree) => {
                let recs = harvest(&tree, min_ratio, schema_id);
                report.nodes = tree.nodes.len();
                report.harvested = recs.len();
                (recs, report)
            }
            Err(e) => {
                report.error = Some(e);
                (Vec::new(), report)
            }
        }
    };
    let per_seed: Vec<(Vec<CorpusRecord>, SeedReport)> = if parallel {
        par_map(seeds, one)
    } else {
        seeds.iter().enumerate().map(one).collect()
    };
    let mut records = Vec::new();
    let mut reports = Vec::new();
    for (recs, rep) in per_seed {
        records.extend(recs.iter().map(|r| audit(r, auditor)));
        reports.push(rep);
    }
    (records, reports)
}

fn search_seed(index: usize, seed: &str, searcher: &Searcher, checkpoints: Option<&Path>) -> Result<SearchTree, String> {
    let Some(dir) = checkpoints else {
        return searcher.run(seed).map_err(|e| e.to_string());
    };
    let path = checkpoint_path(dir, index);
    let mut tree = match std::fs::read_to_string(&path) {
        Ok(text) => {
            let tree = SearchTree::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if tree.seed_sql() != seed {
                return Err(format!("{}: checkpoint belongs to a different seed", path.display()));
            }
            tree
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => searcher.start(seed).map_err(|e| e.to_string())?,
        Err(e) => return Err(format!("{}: {e}", path.display())),
    };
    searcher.resume(&mut tree).map_err(|e| e.to_string())?;
    tree.config = searcher.config.clone();
    std::fs::write(&path, tree.to_json()).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(tree)
}

#[cfg(feature = "parallel")]
fn par_map<T: Send>(seeds: &[String], f: impl Fn((usize, &String)) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    seeds.par_iter().enumerate().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Send>(seeds: &[String], f: impl Fn((usize, &String)) -> T + Sync + Send) -> Vec<T> {
    seeds.iter().enumerate().map(f).collect()
}
