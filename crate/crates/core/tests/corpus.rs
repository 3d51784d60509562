use std::collections::HashMap;
use std::io::BufReader;
use std::sync::Arc;

use slowsql::corpus::*;
use slowsql::degrade::StrategyHistory;
use slowsql::exec::{Dispatcher, ExecutionOutcome, ExecutorConfig, ResultCache, SimulatedBackend};
use slowsql::mcts::{MctsConfig, SearchNode, SearchTree, Searcher, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
use slowsql::mutate::{Router, ScriptedModel};
use slowsql::{fixtures, Dialect};

fn dispatcher() -> Arc<Dispatcher> {
    let backend = Arc::new(SimulatedBackend::new(fixtures::database()));
    Arc::new(Dispatcher::new(backend, Arc::new(ResultCache::new()), ExecutorConfig::default(), 256))
}

fn searcher(iterations: usize) -> Searcher {
    let schema = Arc::new(fixtures::database());
    Searcher {
        dispatcher: dispatcher(),
        router: Arc::new(Router::offline(schema.clone(), Dialect::Postgres)),
        schema,
        dialect: Dialect::Postgres,
        config: MctsConfig { iterations, rng_seed: 5, ..MctsConfig::default() },
    }
}

fn node(id: usize, parent: Option<usize>, sql: &str, outcome: ExecutionOutcome, phi: u8, strategy: Option<&str>) -> SearchNode {
    SearchNode {
        id,
        parent,
        children: Vec::new(),
        sql: sql.into(),
        q: 0.0,
        n: 1,
        outcome: Some(outcome),
        phi,
        history: StrategyHistory::new(),
        terminal: false,
        expanded: false,
        reward: Some(0.0),
        strategy_id: strategy.map(Into::into),
        provider_id: None,
        depth: usize::from(parent.is_some()),
    }
}

fn synthetic_tree() -> SearchTree {
    let h = 42;
    let mut nodes = vec![node(0, None, "SELECT 0", ExecutionOutcome::ok(1.0, h, 3), 1, None)];
    nodes.push(node(1, Some(0), "SELECT 1", ExecutionOutcome::ok(2.0, h, 3), 1, Some("self_wrap")));
    nodes.push(node(2, Some(0), "SELECT 2", ExecutionOutcome::ok(1.9, h, 3), 1, Some("join_to_exists")));
    nodes.push(node(3, Some(0), "SELECT 3", ExecutionOutcome::timeout(300.0), 0, Some("union_split")));
    nodes.push(node(4, Some(0), "SELECT 4", ExecutionOutcome::ok(9.0, 7, 3), 0, Some("predicate_pullup")));
    nodes.push(node(5, Some(1), "SELECT 5", ExecutionOutcome::ok(6.0, h, 3), 1, Some("join_to_exists")));
    nodes.push(node(6, Some(0), "SELECT 6", ExecutionOutcome::ok(4.0, h, 3), 1, None));
    SearchTree {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        backend_id: "test".into(),
        dialect: Dialect::Postgres,
        config: MctsConfig::default(),
        seed_latency: 1.0,
        seed_hash: h,
        iterations_done: 6,
        halted: false,
        nodes,
    }
}

#[test]
fn harvest_threshold_is_inclusive_and_skips_unverified() {
    let recs = harvest(&synthetic_tree(), DEFAULT_MIN_RATIO, "s");
    let slow: Vec<&str> = recs.iter().map(|r| r.slow_sql.as_str()).collect();
    assert_eq!(slow, vec!["SELECT 1", "SELECT 5", "SELECT 6"]);
    assert_eq!(recs[0].slowdown_ratio, 2.0);
    assert_eq!(recs[1].strategy_lineage, vec!["self_wrap", "join_to_exists"]);
    assert_eq!(recs[2].strategy_lineage, vec![FREE_FORM_STEP]);
    assert!(recs.iter().all(|r| r.slowdown_ratio >= 2.0 && r.audit_verdict == AuditVerdict::Unaudited));
    assert_eq!(harvest(&synthetic_tree(), 2.0, "s"), recs);
}

#[test]
fn heuristic_audit_drops_noise_only_lineage() {
    let recs = harvest(&synthetic_tree(), 2.0, "s");
    let h = HeuristicAuditor::default();
    assert_eq!(audit(&recs[0], &h).audit_verdict, AuditVerdict::Dropped);
    assert_eq!(audit(&recs[1], &h).audit_verdict, AuditVerdict::Kept);
    assert_eq!(audit(&recs[2], &h).audit_verdict, AuditVerdict::Kept);
}

#[test]
fn model_audit_follows_the_model() {
    let recs = harvest(&synthetic_tree(), 2.0, "s");
    let drop = ModelAuditor { client: Arc::new(ScriptedModel::new(["Mostly noise.\nDROP"])) };
    assert_eq!(audit(&recs[1], &drop).audit_verdict, AuditVerdict::Dropped);
    let keep = ModelAuditor { client: Arc::new(ScriptedModel::new(["keep"])) };
    assert_eq!(audit(&recs[1], &keep).audit_verdict, AuditVerdict::Kept);
    let silent = ModelAuditor { client: Arc::new(ScriptedModel::new(Vec::<String>::new())) };
    let r = audit(&recs[1], &silent);
    assert_eq!(r.audit_verdict, AuditVerdict::Unaudited);
    assert_eq!(r.slow_sql, recs[1].slow_sql);
}

#[test]
fn gate_reasons() {
    let d = dispatcher();
    let g = SeedGate::default();
    assert_eq!(gate_seed("SELECT 1", &d, &g, Dialect::Postgres).reason(), Some(RejectReason::Complexity));
    assert_eq!(gate_seed("SELEC 1", &d, &g, Dialect::Postgres).reason(), Some(RejectReason::Parse));
    let empty = fixtures::seeds()[0].replace("i.i_category = 'books'", "i.i_category = 'nothing'");
    assert_eq!(gate_seed(&empty, &d, &g, Dialect::Postgres).reason(), Some(RejectReason::Empty));
    let lenient = SeedGate { require_nonempty_result: false, ..g.clone() };
    assert!(gate_seed(&empty, &d, &lenient, Dialect::Postgres).is_accept());
    let broken = fixtures::seeds()[0].replace("c.c_last_name", "c.c_nickname");
    assert_eq!(gate_seed(&broken, &d, &g, Dialect::Postgres).reason(), Some(RejectReason::Execution));
    for seed in fixtures::seeds() {
        match gate_seed(&seed, &d, &g, Dialect::Postgres) {
            GateVerdict::Accept { seed_latency, .. } => assert!(seed_latency > 0.0),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn stats_empty_single_and_many() {
    let s = corpus_stats(&[], Dialect::Postgres);
    assert_eq!(s.records, 0);
    assert_eq!(s.mean_token_count, None);
    assert!(s.to_string().contains("n/a"));

    let rec = |sql: &str| CorpusRecord {
        seed_sql: "SELECT 1".into(),
        slow_sql: sql.into(),
        seed_latency: 1.0,
        slow_latency: 3.0,
        slowdown_ratio: 3.0,
        strategy_lineage: vec!["self_wrap".into()],
        schema_id: "s".into(),
        audit_verdict: AuditVerdict::Kept,
    };
    let one = corpus_stats(&[rec("SELECT a FROM t WHERE a = 1 AND b = 2")], Dialect::Postgres);
    assert_eq!(one.mean_predicate_count, Some(2.0));
    assert_eq!(one.mean_subquery_count, Some(0.0));
    assert_eq!(one.mean_token_count, Some(12.0));

    // 10 records: predicates 0..9 summed = 45, one subquery in each odd record.
    let many: Vec<CorpusRecord> = (0..10)
        .map(|i| {
            let mut preds: Vec<String> = (0..i).map(|k| format!("a = {k}")).collect();
            if i % 2 == 1 {
                preds[0] = "a IN (SELECT b FROM u)".into();
            }
            let sql = if preds.is_empty() { "SELECT a FROM t".to_string() } else { format!("SELECT a FROM t WHERE {}", preds.join(" AND ")) };
            rec(&sql)
        })
        .collect();
    let s = corpus_stats(&many, Dialect::Postgres);
    assert_eq!(s.records, 10);
    assert_eq!(s.mean_predicate_count, Some(4.5));
    assert_eq!(s.mean_subquery_count, Some(0.5));
    assert_eq!(s.kept, 10);
}

#[test]
fn sft_export_round_trip() {
    let recs = harvest(&synthetic_tree(), 2.0, "s");
    let mut plans = HashMap::new();
    plans.insert("SELECT 1".to_string(), "Result (cost=0.00..0.01 rows=1)".to_string());
    let sft = export_sft(&recs[..1], "CREATE TABLE t (a INTEGER);", &plans);
    assert_eq!(sft.len(), 1);
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &sft).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for k in ["schema", "slow_sql", "plan", "seed_sql"] {
        assert!(v[k].is_string(), "{k}");
    }
    let back: SftRecord = serde_json::from_str(text.trim_end()).unwrap();
    assert_eq!(back, sft[0]);

    let missing = export_sft(&recs[1..2], "", &plans);
    assert_eq!(missing[0].plan, None);
    assert_eq!(missing[0].flags, vec!["missing_plan"]);
}

#[test]
fn corpus_file_round_trip() {
    let recs = harvest(&synthetic_tree(), 2.0, "s");
    let header = CorpusHeader::new("s", "test", 2.0);
    let mut buf = Vec::new();
    write_corpus(&mut buf, &header, &recs).unwrap();
    let (h, back) = read_corpus(&mut BufReader::new(&buf[..])).unwrap();
    assert_eq!(h, header);
    assert_eq!(back, recs);
    let mut again = Vec::new();
    write_corpus(&mut again, &h, &back).unwrap();
    assert_eq!(again, buf);
    assert!(read_corpus(&mut BufReader::new(&b"{\"format\":\"x\"}\n"[..])).is_err());
}

#[test]
fn top_fraction_by_complexity() {
    let recs = harvest(&synthetic_tree(), 2.0, "s");
    assert_eq!(top_by_complexity(&recs, 0.7, Dialect::Postgres).len(), 3);
    assert_eq!(top_by_complexity(&recs, 0.3, Dialect::Postgres).len(), 1);
}

#[test]
fn generation_is_reproducible() {
    let seeds = fixtures::seeds();
    let run = || {
        let s = searcher(40);
        let (recs, reports) = generate(&seeds, &s, &SeedGate::default(), 2.0, fixtures::SCHEMA_ID, &HeuristicAuditor::default());
        let mut buf = Vec::new();
        write_corpus(&mut buf, &CorpusHeader::new(fixtures::SCHEMA_ID, "simulated", 2.0), &recs).unwrap();
        (buf, reports)
    };
    let (a, reports) = run();
    let (b, _) = run();
    assert_eq!(a, b);
    assert_eq!(reports.len(), seeds.len());
    assert!(reports.iter().all(|r| r.gate.is_accept() && r.harvested > 0));
}
