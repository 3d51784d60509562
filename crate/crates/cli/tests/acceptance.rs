//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on failure.

#[path = "../../core/tests/common/tai.rs"]
mod tai;

use std::io::{BufReader, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slowsql::corpus::{audit, generate, harvest, read_corpus, write_corpus, CorpusHeader, HeuristicAuditor, SeedGate};
use slowsql::exec::pg::{PgBackend, DATABASE_URL_ENV};
use slowsql::exec::{execute, result_hash, Backend, Dispatcher, ExecutorConfig, ResultCache, SimulatedBackend, Value};
use slowsql::mcts::{MctsConfig, Searcher};
use slowsql::mutate::{ModelClient, MutationError, Router, ScriptedModel};
use slowsql::repair::{repair_batch, repair_loop, verify, RepairStatus, DEFAULT_MAX_ROUNDS};
use slowsql::ted::{normalized_distance, tree_edit_distance};
use slowsql::{fixtures, Dialect, LabeledTree};
use slowsql_cli::bench::{run_bench, summarize};
use slowsql_grpo::{
    allocate_budget, anchored_advantage, asymmetric_scale, hierarchical_reward, policy_objective_grad, policy_objective_terms,
    rollout_weights, zscore_advantage, AggregationWeights, CandidateOutcome, PilotStats, RewardConfig,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    let e = t.elapsed();
    if e > limit {
        return Err(format!("took {:.1}s, limit {}s", e.as_secs_f64(), limit.as_secs()));
    }
    Ok(())
}

fn closed_form(r: &[f64], cfg: &RewardConfig) -> Vec<f64> {
    let g = r.len() as f64;
    let mu = r.iter().sum::<f64>() / g;
    let sd = (r.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / g).sqrt();
    let k = (1.0 - cfg.lambda_mix) / (sd + cfg.epsilon) + cfg.lambda_mix * g.sqrt() / cfg.scale_s;
    r.iter().map(|x| (x - mu) * k).collect()
}

fn anchored_advantage_suite() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..1000 {
        let g = rng.gen_range(2..=16);
        let r: Vec<f64> = (0..g).map(|_| rng.gen_range(-3.0..=3.0)).collect();
        let cfg = RewardConfig { lambda_mix: rng.gen_range(0.0..=1.0), baseline_b: rng.gen_range(-2.0..2.0), ..Default::default() };
        let a = anchored_advantage(&r, &cfg).map_err(|e| e.to_string())?;
        let mean = a.iter().sum::<f64>() / g as f64;
        ensure!(mean.abs() < 1e-9, "group {i}: mean {mean}");
        for (x, y) in a.iter().zip(closed_form(&r, &cfg)) {
            ensure!((x - y).abs() < 1e-9, "group {i}: {x} vs closed form {y}");
        }
        let z0 = anchored_advantage(&r, &RewardConfig { lambda_mix: 0.0, ..cfg }).map_err(|e| e.to_string())?;
        for (x, y) in z0.iter().zip(zscore_advantage(&r, cfg.epsilon).map_err(|e| e.to_string())?) {
            ensure!((x - y).abs() < 1e-9, "group {i}: lambda 0 gives {x}, z-score {y}");
        }
    }
    let cfg = RewardConfig { lambda_mix: 0.5, scale_s: 3.0, baseline_b: 0.0, ..Default::default() };
    let a = anchored_advantage(&[-3.0, -3.0, -3.0, -0.5], &cfg).map_err(|e| e.to_string())?;
    for x in &a[..3] {
        ensure!((x + 0.4971).abs() < 1e-3, "worked example loser {x}");
    }
    ensure!((a[3] - 1.4911).abs() < 1e-3, "worked example survivor {}", a[3]);
    let z = zscore_advantage(&[-3.0, -3.0, -3.0, -0.5], cfg.epsilon).map_err(|e| e.to_string())?;
    ensure!((z[3] - 1.7321).abs() < 1e-3 && a[3] < z[3], "survivor {} vs z-score {}", a[3], z[3]);
    within(t, Duration::from_secs(5))?;
    Ok(format!("1000 groups; survivor {:.4} < z-score {:.4}", a[3], z[3]))
}

fn reward_suite() -> Outcome {
    let cfg = RewardConfig::default();
    ensure!(cfg.rho_fmt < cfg.rho_exe && cfg.rho_exe < cfg.rho_sem && cfg.rho_sem < 0.0, "default tiers out of order");
    ensure!(cfg.validate().is_ok(), "default config rejected");
    for bad in [
        RewardConfig { rho_fmt: -1.0, ..cfg },
        RewardConfig { rho_exe: -1.0, ..cfg },
        RewardConfig { rho_sem: 0.5, ..cfg },
    ] {
        ensure!(bad.validate().is_err(), "out-of-order tiers accepted: {bad:?}");
    }
    let tiers = [
        hierarchical_reward(&CandidateOutcome::extraction_failed(1.0), &cfg),
        hierarchical_reward(&CandidateOutcome::exec_failed(1.0), &cfg),
        hierarchical_reward(&CandidateOutcome::executed(false, 0.1, 1.0), &cfg),
    ];
    ensure!(tiers == [cfg.rho_fmt, cfg.rho_exe, cfg.rho_sem], "tier rewards {tiers:?}");
    for t0 in [1e-3, 0.5, 1.0, 42.0] {
        ensure!(asymmetric_scale(t0, t0, cfg.eta) == 0.0, "F(T0, T0) != 0 at {t0}");
    }
    let t0 = 2.0;
    let mut prev = f64::INFINITY;
    for k in 0..1000 {
        let tq = 0.01 + k as f64 * 0.02;
        let f = asymmetric_scale(tq, t0, cfg.eta);
        ensure!(f > -1.0 && f <= cfg.eta, "F({tq}) = {f} out of range");
        ensure!(f < prev, "F not decreasing at {tq}");
        prev = f;
    }
    let up = asymmetric_scale(t0 / std::f64::consts::E, t0, 3.0);
    let down = asymmetric_scale(t0 * std::f64::consts::E, t0, 3.0);
    ensure!((up - 2.28478).abs() < 1e-5, "3 tanh(1) spot value {up}");
    ensure!((down + 0.761594).abs() < 1e-5, "tanh(-1) spot value {down}");
    Ok(format!("spot values {up:.5} / {down:.6}"))
}

fn rollout_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..1000 {
        let n = rng.gen_range(1..=20);
        let weights: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..5.0) }).collect();
        let pilot = rng.gen_range(0..=4);
        let total = n * pilot + rng.gen_range(0..200);
        let plan = allocate_budget(&weights, total, pilot).map_err(|e| e.to_string())?;
        let sum: usize = plan.allocations.iter().sum();
        ensure!(sum == total - n * pilot, "instance {i}: allocated {sum} of {}", total - n * pilot);
    }
    let plan = allocate_budget(&[2.0 / 3.0, 1.0 / 3.0, 0.0], 12, 0).map_err(|e| e.to_string())?;
    ensure!(plan.allocations == [8, 4, 0], "worked example {:?}", plan.allocations);

    let cfg = RewardConfig::default();
    let w = AggregationWeights::default();
    for i in 0..1000 {
        let n = rng.gen_range(2..=12);
        let stats: Vec<PilotStats> = (0..n)
            .map(|_| PilotStats {
                max_reward: if rng.gen_bool(0.5) { rng.gen_range(-3.0..cfg.rho_sem) } else { rng.gen_range(cfg.rho_sem..3.0) },
                entropy: rng.gen_range(0.0..3.0),
                reward_variance: rng.gen_range(0.0..2.0),
            })
            .collect();
        let mut with_twin = stats.clone();
        let failed = PilotStats { max_reward: -3.0, ..stats[0] };
        let passed = PilotStats { max_reward: 1.0, ..stats[0] };
        with_twin.push(failed);
        with_twin.push(passed);
        let weights = rollout_weights(&with_twin, &cfg, &w);
        let plan = allocate_budget(&weights, 40 + rng.gen_range(0..100), 0).map_err(|e| e.to_string())?;
        let (a, b) = (plan.allocations[n], plan.allocations[n + 1]);
        ensure!(a >= b, "instance {i}: failing prompt got {a}, passing twin {b}");
    }
    Ok("1000 budget instances; worked example [8, 4, 0]".into())
}

fn random_tree(rng: &mut ChaCha8Rng, max_nodes: usize) -> LabeledTree {
    let n = rng.gen_range(1..=max_nodes);
    let labels: Vec<String> = (0..n).map(|_| ["a", "b", "c"][rng.gen_range(0..3)].to_string()).collect();
    let parents: Vec<usize> = (1..n).map(|k| rng.gen_range(0..k)).collect();
    tai::tree_from_parents(&labels, &parents)
}

fn ted_suite() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for i in 0..200 {
        let a = random_tree(&mut rng, 8);
        let b = random_tree(&mut rng, 8);
        let (fast, oracle) = (tree_edit_distance(&a, &b), tai::tai_distance(&a, &b));
        ensure!(fast == oracle, "pair {i}: {fast} vs oracle {oracle}");
        ensure!(tree_edit_distance(&b, &a) == fast, "pair {i}: asymmetric");
        let d = normalized_distance(&a, &b);
        ensure!((0.0..=1.0).contains(&d), "pair {i}: normalized {d}");
        ensure!(normalized_distance(&b, &a) == d, "pair {i}: normalized asymmetric");
        ensure!(normalized_distance(&a, &a) == 0.0, "pair {i}: self distance");
    }
    within(t, Duration::from_secs(60))?;
    Ok(format!("200 pairs in {:.1}s", t.elapsed().as_secs_f64()))
}

fn searcher(iterations: usize, rng_seed: u64) -> Searcher {
    let schema = Arc::new(fixtures::database());
    let backend = Arc::new(SimulatedBackend::new(fixtures::database()));
    Searcher {
        dispatcher: Arc::new(Dispatcher::new(backend, Arc::new(ResultCache::new()), ExecutorConfig::default(), 256)),
        router: Arc::new(Router::offline(schema.clone(), Dialect::Postgres)),
        schema,
        dialect: Dialect::Postgres,
        config: MctsConfig { iterations, rng_seed, ..MctsConfig::default() },
    }
}

fn mcts_suite() -> Outcome {
    let t = Instant::now();
    let seeds = fixtures::seeds();
    let auditor = HeuristicAuditor::default();
    let header = CorpusHeader::new(fixtures::SCHEMA_ID, "simulated", 2.0);
    let s = searcher(200, 7);
    let mut records = Vec::new();
    let mut best = Vec::new();
    for (i, seed) in seeds.iter().enumerate() {
        let tree = s.run(seed).map_err(|e| format!("seed {}: {e}", i + 1))?;
        ensure!(tree.root().n == 200, "seed {}: N(root) = {}", i + 1, tree.root().n);
        let hits: Vec<f64> = tree
            .nodes
            .iter()
            .filter(|n| n.phi == 1 && n.id != 0)
            .filter_map(|n| tree.speedup_ratio(n))
            .filter(|r| *r >= 2.0)
            .collect();
        let recs = harvest(&tree, 2.0, fixtures::SCHEMA_ID);
        ensure!(!hits.is_empty() && !recs.is_empty(), "seed {}: no valid variant with ratio >= 2", i + 1);
        best.push(hits.iter().copied().fold(0.0, f64::max));
        records.extend(recs.iter().map(|r| audit(r, &auditor)));
    }
    let mut first = Vec::new();
    write_corpus(&mut first, &header, &records).map_err(|e| e.to_string())?;
    let (again, _) = generate(&seeds, &searcher(200, 7), &SeedGate::default(), 2.0, fixtures::SCHEMA_ID, &auditor);
    let mut second = Vec::new();
    write_corpus(&mut second, &header, &again).map_err(|e| e.to_string())?;
    ensure!(first == second, "rerun corpus differs ({} vs {} bytes)", first.len(), second.len());
    let (_, back) = read_corpus(&mut BufReader::new(&first[..])).map_err(|e| e.to_string())?;
    ensure!(back == records, "corpus does not read back");
    within(t, Duration::from_secs(120))?;
    let best: Vec<String> = best.iter().map(|r| format!("{r:.2}")).collect();
    Ok(format!("{} records; best ratio per seed [{}]; {:.1}s", records.len(), best.join(", "), t.elapsed().as_secs_f64()))
}

fn executor_suite() -> Outcome {
    let b = SimulatedBackend::new(fixtures::database());
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let rows = b.run("SELECT * FROM store_sales WHERE ss_item_sk < 20", 10.0).map_err(|e| e.to_string())?.rows;
    let base = result_hash(&rows);
    for i in 0..100 {
        let mut p = rows.clone();
        p.shuffle(&mut rng);
        ensure!(result_hash(&p) == base, "permutation {i} changed the hash");
    }
    let rows = b.run("SELECT * FROM customer", 10.0).map_err(|e| e.to_string())?.rows;
    let base = result_hash(&rows);
    for i in 0..100 {
        let mut p = rows.clone();
        let r = rng.gen_range(0..p.len());
        let c = rng.gen_range(0..p[r].len());
        p[r][c] = match &p[r][c] {
            Value::Int(x) => Value::Int(x + 1),
            Value::Text(s) => Value::Text(format!("{s}x")),
            Value::Bool(x) => Value::Bool(!x),
            Value::Float(x) => Value::Float(x + 0.25),
            Value::Null => Value::Int(0),
        };
        ensure!(result_hash(&p) != base, "perturbation {i} kept the hash");
    }

    let cfg = ExecutorConfig::default();
    let d = Dispatcher::new(Arc::new(SimulatedBackend::new(fixtures::database())), Arc::new(ResultCache::new()), cfg, 64);
    let workload = fixtures::workload();
    let mut sim = Vec::new();
    for q in &workload {
        let sync = execute(q, &b, &cfg).map_err(|e| e.to_string())?;
        let ticket = d.dispatch(q).map_err(|e| e.to_string())?;
        let waited = d.wait(ticket, Duration::from_secs(30)).map_err(|e| e.to_string())?;
        ensure!(sync == waited, "dispatch/await differs from execute on {q}");
        ensure!(sync.is_ok(), "{q}: {:?}", sync.error_message);
        sim.push(sync.result_hash);
    }
    let Ok(url) = std::env::var(DATABASE_URL_ENV) else {
        return Ok(format!("simulator leg on {} queries; PostgreSQL leg skipped ({DATABASE_URL_ENV} unset)", workload.len()));
    };
    let pg = PgBackend::connect(&url).map_err(|e| e.to_string())?;
    pg.batch(&fixtures::reset_script()).map_err(|e| e.to_string())?;
    for (i, q) in workload.iter().enumerate() {
        let live = execute(q, &pg, &cfg).map_err(|e| e.to_string())?;
        ensure!(live.result_hash == sim[i], "query {}: simulator and PostgreSQL hashes differ", i + 1);
    }
    Ok(format!("simulator and PostgreSQL agree on {} queries", workload.len()))
}

struct Fixer {
    calls: AtomicUsize,
}

const TYPOS: [(&str, &str); 3] = [("SELCT ", "SELECT "), (" FORM ", " FROM "), (" WHRE ", " WHERE ")];

impl ModelClient for Fixer {
    fn id(&self) -> &str {
        "fixer"
    }
    fn complete(&self, prompt: &str) -> Result<String, MutationError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let tail = prompt.split("Rewritten query:\n```sql\n").nth(1).ok_or(MutationError::Extraction)?;
        let mut sql = tail.split("\n```").next().unwrap_or_default().to_string();
        if let Some((bad, good)) = TYPOS.iter().find(|(bad, _)| sql.contains(bad)) {
            sql = sql.replacen(bad, good, 1);
        }
        Ok(format!("```sql\n{sql}\n```"))
    }
}

fn repair_suite() -> Outcome {
    let b = SimulatedBackend::new(fixtures::database());
    let workload: Vec<String> =
        fixtures::workload().iter().map(|q| q.split_whitespace().collect::<Vec<_>>().join(" ")).collect();
    ensure!(workload.len() == 20, "workload has {} queries", workload.len());
    let pairs: Vec<(String, String)> = workload
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let (good, bad) = (TYPOS[i % 2].1, TYPOS[i % 2].0);
            let mut c = q.replacen(good, bad, 1);
            if i % 3 == 0 {
                c = c.replacen(" WHERE ", " WHRE ", 1);
            }
            (q.clone(), c)
        })
        .collect();
    for (i, (_, c)) in pairs.iter().enumerate() {
        ensure!(verify(c, &b).is_err(), "fault {i} still verifies");
    }
    let fixer = Fixer { calls: AtomicUsize::new(0) };
    let mut max_calls = 0;
    for (i, o) in repair_batch(&pairs, &b, &fixer, DEFAULT_MAX_ROUNDS).into_iter().enumerate() {
        let o = o.map_err(|e| format!("query {i}: {e}"))?;
        ensure!(o.status == RepairStatus::Repaired, "query {i}: {:?}", o.status);
        ensure!(verify(&o.sql, &b).is_ok(), "query {i}: output does not verify");
        ensure!(o.model_calls <= 2, "query {i}: {} rounds", o.model_calls);
        max_calls = max_calls.max(o.model_calls);
    }
    let garbage = ScriptedModel::new(["not sql at all", "SELECT missing FROM nowhere"]);
    let o = repair_loop(&workload[0], "SELCT 1", &b, &garbage, 2).map_err(|e| e.to_string())?;
    ensure!(o.status == RepairStatus::Fallback && o.sql == workload[0], "exhaustion returned {:?}", o);
    ensure!(garbage.prompts().len() == 2, "exhaustion made {} calls", garbage.prompts().len());
    Ok(format!("20/20 repaired, at most {max_calls} rounds; exhaustion falls back"))
}

fn bench_suite() -> Outcome {
    let v: Vec<f64> = (1..=100).map(f64::from).collect();
    let s = summarize(&v).ok_or("no summary")?;
    ensure!((s.median, s.p75, s.p95) == (50.0, 75.0, 95.0), "percentiles {s:?}");

    let b = SimulatedBackend::new(fixtures::database());
    let cfg = ExecutorConfig::default();
    let mut w: Vec<String> = fixtures::workload().into_iter().take(10).collect();
    let mut rewrites = w.clone();
    rewrites[1] = "SELECT i_category, count(*) AS n, sum(i_current_price) AS total FROM item WHERE i_item_sk > 3 GROUP BY i_category".into();
    rewrites[8] = "SELECT DISTINCT i_brand FROM item".into();
    let r = run_bench(&w, Some(&rewrites), &b, &cfg);
    ensure!(r.equivalence_rate == Some(0.8), "equivalence rate {:?}", r.equivalence_rate);

    w[3] = "SELECT pg_sleep(400)".into();
    let r = run_bench(&w, None, &b, &cfg);
    let e = &r.entries[3].original;
    ensure!(e.latency_seconds == Some(300.0) && r.timeout_count == 1, "timeout entry {e:?}");
    ensure!(r.to_string().contains("300.00"), "report does not show 300.00");
    let l = r.latency.ok_or("no aggregate")?;
    ensure!(l.median <= l.p75 && l.p75 <= l.p95, "percentiles out of order {l:?}");
    Ok("50/75/95; timeout 300.00; equivalence 0.8".into())
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let t = rng.gen_range(1..=24);
        let lr: Vec<f64> = (0..t).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let kl: Vec<f64> = (0..t).map(|_| rng.gen_range(0.0..1.0)).collect();
        let adv = rng.gen_range(-3.0..3.0);
        let cfg = RewardConfig { kl_coeff: rng.gen_range(0.0..0.2), ..Default::default() };
        let grad = policy_objective_grad(&lr, adv, &kl, &cfg).map_err(|e| e.to_string())?;
        for k in 0..t {
            let mut up = lr.clone();
            let mut dn = lr.clone();
            up[k] += h;
            dn[k] -= h;
            let f = |x: &[f64]| policy_objective_terms(x, adv, &kl, &cfg).map(|o| o.loss).map_err(|e| e.to_string());
            let fd = (f(&up)? - f(&dn)?) / (2.0 * h);
            let err = (fd - grad[k]).abs();
            worst = worst.max(err);
            ensure!(err <= 1e-6, "instance {i} token {k}: analytic {} vs numeric {fd}", grad[k]);
        }
    }
    Ok(format!("100 instances; worst error {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("anchored advantage", anchored_advantage_suite),
        ("reward", reward_suite),
        ("rollout", rollout_suite),
        ("tree edit distance", ted_suite),
        ("search", mcts_suite),
        ("executor", executor_suite),
        ("repair", repair_suite),
        ("bench", bench_suite),
        ("gradient check", gradient_check),
    ];
    let mut failed = 0;
    let stdout = std::io::stdout();
    for (name, run) in criteria {
        let t = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        let mut out = stdout.lock();
        match result {
            Ok(detail) => writeln!(out, "PASS  {name:<20} {secs:>6.2}s  {detail}"),
            Err(why) => {
                failed += 1;
                writeln!(out, "FAIL  {name:<20} {secs:>6.2}s  {why}")
            }
        }
        .expect("stdout");
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
