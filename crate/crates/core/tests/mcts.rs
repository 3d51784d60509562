use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use slowsql::exec::{Dispatcher, ExecutionOutcome, ExecutorConfig, ResultCache, SimulatedBackend};
use slowsql::mcts::*;
use slowsql::mutate::{MockProvider, Router, RuleProvider};
use slowsql::{fixtures, Dialect};

fn dispatcher() -> Arc<Dispatcher> {
    let backend = Arc::new(SimulatedBackend::new(fixtures::database()));
    Arc::new(Dispatcher::new(backend, Arc::new(ResultCache::new()), ExecutorConfig::default(), 256))
}

fn searcher(cfg: MctsConfig) -> Searcher {
    let schema = Arc::new(fixtures::database());
    Searcher {
        dispatcher: dispatcher(),
        router: Arc::new(Router::offline(schema.clone(), Dialect::Postgres)),
        schema,
        dialect: Dialect::Postgres,
        config: cfg,
    }
}

fn with_mock(cfg: MctsConfig, script: Vec<&str>) -> Searcher {
    let schema = Arc::new(fixtures::database());
    Searcher {
        dispatcher: dispatcher(),
        router: Arc::new(Router {
            rule_guided: Arc::new(RuleProvider::new(schema.clone(), Dialect::Postgres)),
            free_form: Some(Arc::new(MockProvider::new(script, Dialect::Postgres))),
        }),
        schema,
        dialect: Dialect::Postgres,
        config: cfg,
    }
}

fn cfg(iterations: usize) -> MctsConfig {
    MctsConfig { iterations, rng_seed: 11, ..MctsConfig::default() }
}

#[test]
fn uct_prefers_less_visited_on_equal_means() {
    assert_eq!(pick_child(&[(5.0, 5), (1.0, 1)], 10, 1.0), Some(1));
    let a = uct_score(5.0, 5, 10, 1.0);
    let b = uct_score(1.0, 1, 10, 1.0);
    assert!((a - 1.960).abs() < 1e-3 && (b - 3.146).abs() < 1e-3);
}

#[test]
fn unvisited_child_wins_regardless() {
    assert_eq!(pick_child(&[(100.0, 1), (-5.0, 3), (0.0, 0)], 5, 1.0), Some(2));
}

#[test]
fn zero_exploration_is_greedy() {
    assert_eq!(pick_child(&[(1.0, 4), (3.0, 4), (2.0, 4)], 12, 0.0), Some(1));
}

#[test]
fn reward_branches() {
    let c = MctsConfig::default();
    let seed_hash = 77;
    assert_eq!(simulate_reward(&ExecutionOutcome::error("boom"), seed_hash, 1.0, 0.5, &c), -1.0);
    assert_eq!(simulate_reward(&ExecutionOutcome::ok(5.0, 78, 1), seed_hash, 1.0, 0.5, &c), -1.0);
    assert_eq!(simulate_reward(&ExecutionOutcome::timeout(300.0), seed_hash, 1.0, 0.5, &c), 0.7);
    let r = simulate_reward(&ExecutionOutcome::ok(2.0, seed_hash, 1), seed_hash, 1.0, 0.2, &c);
    assert!((r - (0.7 * 2f64.ln().tanh() + 0.06)).abs() < 1e-12);
    assert!((r - 0.480).abs() < 1e-3, "{r}");
    let same = simulate_reward(&ExecutionOutcome::ok(1.0, seed_hash, 1), seed_hash, 1.0, 0.0, &c);
    assert_eq!(same, 0.0);
}

#[test]
fn zero_iterations_is_root_only() {
    let t = searcher(cfg(0)).run(&fixtures::seeds()[0]).unwrap();
    assert_eq!(t.nodes.len(), 1);
    assert_eq!(t.root().n, 0);
}

#[test]
fn empty_seed_is_rejected() {
    let err = searcher(cfg(5)).run("SELECT i_item_sk FROM item WHERE i_item_sk < 0").unwrap_err();
    assert!(matches!(err, SearchError::SeedInvalid(_)));
    let err = searcher(cfg(5)).run("SELECT nope FROM item").unwrap_err();
    assert!(matches!(err, SearchError::SeedInvalid(_)));
}

#[test]
fn expansion_dispatches_every_child() {
    let s = searcher(cfg(0));
    let mut t = s.start(&fixtures::seeds()[0]).unwrap();
    let before = s.dispatcher.cache().len();
    let kids = s.expand(&mut t, 0, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(kids.len(), 3);
    for (_, ticket) in &kids {
        s.dispatcher.wait(ticket.unwrap(), std::time::Duration::from_secs(60)).unwrap();
    }
    assert_eq!(s.dispatcher.cache().len(), before + 3);
    for (id, _) in kids {
        let node = &t.nodes[id];
        assert_eq!(node.history.applied_ids.len(), 1);
        assert_eq!(node.history.applied_ids[0], *node.strategy_id.as_ref().unwrap());
        assert_eq!(node.parent, Some(0));
    }
}

#[test]
fn failed_attempt_yields_fewer_children() {
    let script = vec![
        "```sql\nSELECT * FROM (SELECT ss_ticket_number FROM store_sales) AS a\n```",
        "I cannot help with that.",
        "```sql\nSELECT * FROM (SELECT ss_ticket_number FROM store_sales) AS b\n```",
    ];
    let s = with_mock(MctsConfig { rule_prob: 0.0, ..cfg(0) }, script);
    let mut t = s.start("SELECT ss_ticket_number FROM store_sales").unwrap();
    let kids = s.expand(&mut t, 0, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(kids.len(), 2);
    assert!(kids.iter().all(|(id, _)| t.nodes[*id].history.applied_ids.is_empty()));
}

#[test]
fn backprop_updates_whole_path() {
    let s = searcher(cfg(0));
    let mut t = s.start(&fixtures::seeds()[0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut leaf = 0;
    for _ in 0..3 {
        leaf = s.expand(&mut t, leaf, &mut rng)[0].0;
    }
    let path: Vec<usize> = std::iter::successors(Some(leaf), |&i| t.nodes[i].parent).collect();
    assert_eq!(path.len(), 4);
    backpropagate(&mut t, leaf, 0.25);
    let touched = t.nodes.iter().filter(|n| n.n == 1).count();
    assert_eq!(touched, 4);
    assert!(path.iter().all(|&i| t.nodes[i].q == 0.25));
}

fn check_tree(t: &SearchTree, iterations: usize) {
    let c = &t.config;
    assert_eq!(t.root().n as usize, iterations);
    for node in &t.nodes {
        if node.n > 0 {
            let m = node.mean();
            assert!(m >= c.rho_invalid - 1e-12 && m <= c.lambda_t + c.lambda_s + 1e-12, "mean {m}");
        }
        if let (Some(o), Some(r)) = (&node.outcome, node.reward) {
            if node.id == 0 {
                continue;
            }
            if o.is_timeout() {
                assert_eq!(r, c.gamma_timeout);
            } else if node.phi == 0 {
                assert_eq!(r, c.rho_invalid);
                assert!(node.terminal && node.children.is_empty());
            } else {
                assert!(r > -c.lambda_t && r <= c.lambda_t + c.lambda_s, "{r}");
            }
        }
        let child_visits: u64 = node.children.iter().map(|&k| t.nodes[k].n).sum();
        assert!(node.n >= child_visits);
    }
}

#[test]
fn two_hundred_iterations_find_a_slow_equivalent_for_every_seed() {
    for (i, seed) in fixtures::seeds().iter().enumerate() {
        let t = searcher(MctsConfig { rng_seed: i as u64, ..cfg(200) }).run(seed).unwrap();
        check_tree(&t, 200);
        let best = t
            .nodes
            .iter()
            .filter(|n| n.phi == 1 && n.id != 0)
            .filter_map(|n| t.speedup_ratio(n))
            .fold(0.0, f64::max);
        assert!(best >= 2.0, "seed {i}: best ratio {best}");
    }
}

#[test]
fn same_seed_same_tree() {
    let seed = &fixtures::seeds()[1];
    let a = searcher(cfg(40)).run(seed).unwrap();
    let b = searcher(cfg(40)).run(seed).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let c = searcher(MctsConfig { rng_seed: 12, ..cfg(40) }).run(seed).unwrap();
    assert_ne!(a.to_json(), c.to_json());
}

#[test]
fn checkpoint_round_trip_and_resume() {
    let seed = &fixtures::seeds()[2];
    let full = searcher(cfg(30)).run(seed).unwrap();
    let half = searcher(cfg(15)).run(seed).unwrap();
    let reloaded = SearchTree::from_json(&half.to_json()).unwrap();
    assert_eq!(reloaded, half);
    let mut resumed = reloaded;
    let s = searcher(cfg(30));
    s.resume(&mut resumed).unwrap();
    resumed.config = full.config.clone();
    assert_eq!(resumed.to_json(), full.to_json());
}

#[test]
fn bad_checkpoint_is_rejected() {
    assert!(matches!(SearchTree::from_json("{}"), Err(SearchError::Checkpoint(_))));
    let t = searcher(cfg(1)).run(&fixtures::seeds()[0]).unwrap();
    let text = t.to_json().replace(CHECKPOINT_FORMAT, "other");
    assert!(matches!(SearchTree::from_json(&text), Err(SearchError::Checkpoint(_))));
}
