use std::collections::BTreeSet;

use slowsql::degrade::{
    applicable_strategies, apply, builtin_library, manifest_json, strategy_by_id, StrategyHistory, TransformError,
};
use slowsql::exec::engine::{run_query, Database};
use slowsql::exec::result_hash;
use slowsql::{fixtures, parse, Dialect, SqlTree};

fn tree(sql: &str) -> SqlTree {
    parse(sql, Dialect::Postgres).unwrap()
}

fn hash(db: &Database, sql: &str) -> u64 {
    let (res, _) = run_query(db, sql).unwrap_or_else(|e| panic!("{e}\n{sql}"));
    result_hash(&res.rows)
}

fn corpus() -> Vec<String> {
    let mut all = fixtures::seeds();
    all.extend(fixtures::workload());
    all
}

#[test]
fn every_applicable_strategy_preserves_results() {
    let db = fixtures::database();
    let mut fired = BTreeSet::new();
    for sql in corpus() {
        let q = tree(&sql);
        let before = hash(&db, &sql);
        for s in builtin_library() {
            let sites = s.site_count(&q, &db);
            for seed in 0..sites.max(1) as u64 * 2 {
                if sites == 0 {
                    break;
                }
                let out = apply(&s, &q, &db, seed).unwrap();
                let text = out.render();
                assert_eq!(hash(&db, &text), before, "{} changed the result of\n{sql}\ninto\n{text}", s.id);
                fired.insert(s.id);
            }
        }
    }
    let all: BTreeSet<&str> = builtin_library().iter().map(|s| s.id).collect();
    let missing: Vec<_> = all.difference(&fired).collect();
    assert!(missing.is_empty() || missing == vec![&"union_split"], "never applied: {missing:?}");
}

#[test]
fn rewrites_never_shrink_the_tree() {
    let db = fixtures::database();
    for sql in corpus() {
        let q = tree(&sql);
        for s in applicable_strategies(&q, &StrategyHistory::new(), &db) {
            let out = apply(&s, &q, &db, 7).unwrap();
            assert!(out.node_count() >= q.node_count(), "{} shrank\n{sql}\n{}", s.id, out.render());
        }
    }
}

#[test]
fn same_seed_same_output() {
    let db = fixtures::database();
    for sql in fixtures::seeds() {
        let q = tree(&sql);
        for s in applicable_strategies(&q, &StrategyHistory::new(), &db) {
            for seed in [0u64, 1, 99] {
                assert_eq!(apply(&s, &q, &db, seed).unwrap().render(), apply(&s, &q, &db, seed).unwrap().render());
            }
        }
    }
}

#[test]
fn self_wrap_adds_nodes_and_wraps() {
    let db = fixtures::database();
    let q = tree("SELECT i_item_sk FROM item WHERE i_current_price > 10");
    let out = apply(&strategy_by_id("self_wrap").unwrap(), &q, &db, 0).unwrap();
    assert!(out.node_count() > q.node_count());
    assert_eq!(out.render(), "SELECT * FROM (SELECT i_item_sk FROM item WHERE i_current_price > 10) AS w1");
}

#[test]
fn in_list_of_five_becomes_five_comparisons() {
    let db = fixtures::database();
    let q = tree("SELECT i_item_sk FROM item WHERE i_item_sk IN (1, 2, 3, 4, 5)");
    let out = apply(&strategy_by_id("in_list_to_or").unwrap(), &q, &db, 0).unwrap();
    let text = out.render();
    assert_eq!(text.matches(" = ").count(), 5);
    assert_eq!(text.matches(" OR ").count(), 4);
    assert_eq!(hash(&db, &text), hash(&db, &q.render()));
}

fn toy() -> Database {
    let mut db = Database::new();
    slowsql::exec::engine::load_script(
        &mut db,
        "CREATE TABLE a (id INTEGER, k INTEGER, x TEXT, PRIMARY KEY (id));
         CREATE TABLE b (k INTEGER, y INTEGER, PRIMARY KEY (k));
         INSERT INTO a VALUES (1, 10, 'p'), (2, 20, 'q'), (3, 30, 'r'), (4, NULL, 's'), (5, 10, 't');
         INSERT INTO b VALUES (10, 1), (20, 2), (40, 4);",
    )
    .unwrap();
    db
}

#[test]
fn equi_join_becomes_exists() {
    let db = toy();
    let q = tree("SELECT a.x FROM a JOIN b ON a.k = b.k");
    let out = apply(&strategy_by_id("join_to_exists").unwrap(), &q, &db, 0).unwrap();
    assert_eq!(out.render(), "SELECT a.x FROM a WHERE EXISTS (SELECT 1 FROM b WHERE b.k = a.k)");
    assert_eq!(hash(&db, &out.render()), hash(&db, &q.render()));
}

#[test]
fn join_used_in_projection_is_not_inverted() {
    let db = toy();
    let q = tree("SELECT a.x, b.y FROM a JOIN b ON a.k = b.k");
    assert!(!strategy_by_id("join_to_exists").unwrap().is_applicable(&q, &db));
    let q = tree("SELECT a.x FROM a");
    assert!(!strategy_by_id("join_to_exists").unwrap().is_applicable(&q, &db));
}

#[test]
fn join_free_query_excludes_join_inversion() {
    let db = fixtures::database();
    let q = tree("SELECT i_item_sk FROM item WHERE i_current_price > 10");
    let ids: Vec<&str> = applicable_strategies(&q, &StrategyHistory::new(), &db).iter().map(|s| s.id).collect();
    assert!(!ids.contains(&"join_to_exists"));
    assert!(ids.contains(&"self_wrap"));
}

#[test]
fn full_history_leaves_nothing() {
    let db = fixtures::database();
    let mut h = StrategyHistory::new();
    for s in builtin_library() {
        h = h.with(s.id);
    }
    for sql in corpus() {
        assert!(applicable_strategies(&tree(&sql), &h, &db).is_empty());
    }
}

#[test]
fn history_removes_exactly_the_used_id() {
    let db = fixtures::database();
    for sql in fixtures::seeds() {
        let q = tree(&sql);
        let before: BTreeSet<&str> = applicable_strategies(&q, &StrategyHistory::new(), &db).iter().map(|s| s.id).collect();
        for used in &before {
            let after: BTreeSet<&str> =
                applicable_strategies(&q, &StrategyHistory::new().with(used), &db).iter().map(|s| s.id).collect();
            let diff: Vec<_> = before.difference(&after).collect();
            assert_eq!(diff, vec![used]);
        }
    }
}

#[test]
fn union_split_handles_nulls() {
    let db = toy();
    let q = tree("SELECT a.id FROM a WHERE a.k = 10 OR a.x = 'q' OR a.k IS NULL");
    let s = strategy_by_id("union_split").unwrap();
    let out = apply(&s, &q, &db, 0).unwrap();
    assert!(out.render().contains("UNION ALL"));
    assert_eq!(hash(&db, &out.render()), hash(&db, &q.render()));
    let q = tree("SELECT DISTINCT a.k FROM a WHERE a.k = 10 OR a.k IS NULL");
    let out = apply(&s, &q, &db, 0).unwrap();
    assert!(out.render().contains(" UNION SELECT"));
    assert_eq!(hash(&db, &out.render()), hash(&db, &q.render()));
}

#[test]
fn redundant_distinct_on_unique_rows() {
    let db = fixtures::database();
    let q = tree("SELECT i_category, count(*) FROM item GROUP BY i_category");
    let out = apply(&strategy_by_id("redundant_distinct").unwrap(), &q, &db, 0).unwrap();
    assert!(out.render().starts_with("SELECT DISTINCT"));
    assert_eq!(hash(&db, &out.render()), hash(&db, &q.render()));
}

#[test]
fn not_applicable_is_an_error() {
    let db = fixtures::database();
    let q = tree("SELECT 1");
    let err = apply(&strategy_by_id("join_to_exists").unwrap(), &q, &db, 0).unwrap_err();
    assert_eq!(err, TransformError::NotApplicable("join_to_exists".into()));
}

#[test]
fn manifest_lists_every_strategy() {
    let v: serde_json::Value = serde_json::from_str(&manifest_json()).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), builtin_library().len());
    assert!(arr.iter().all(|e| e["prompt_template"].as_str().unwrap().contains("{parent_sql}")));
}
