mod common;

use common::tai::{tai_distance, tree_from_parents};
use proptest::prelude::*;
use slowsql::sql::{parse, Dialect};
use slowsql::ted::{distance_matrix, distance_matrix_seq, normalized_distance, tree_edit_distance};
use slowsql::LabeledTree;

fn arb_tree(max_nodes: usize) -> impl Strategy<Value = LabeledTree> {
    (1..=max_nodes).prop_flat_map(|n| {
        let labels = proptest::collection::vec(prop_oneof![Just("a"), Just("b"), Just("c")], n);
        let parents: Vec<_> = (1..n).map(|k| (0..k).boxed()).collect();
        (labels, parents).prop_map(|(labels, parents)| {
            let labels: Vec<String> = labels.into_iter().map(String::from).collect();
            tree_from_parents(&labels, &parents)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_exhaustive_mapping_search(a in arb_tree(8), b in arb_tree(8)) {
        prop_assert_eq!(tree_edit_distance(&a, &b), tai_distance(&a, &b));
    }

    #[test]
    fn metric_axioms(a in arb_tree(7), b in arb_tree(7), c in arb_tree(7)) {
        let ab = tree_edit_distance(&a, &b);
        prop_assert_eq!(ab, tree_edit_distance(&b, &a));
        prop_assert_eq!(tree_edit_distance(&a, &a), 0);
        prop_assert!(ab <= tree_edit_distance(&a, &c) + tree_edit_distance(&c, &b));
        let d = normalized_distance(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
    }
}

#[test]
fn sql_trees_differ_by_expected_edits() {
    let a = parse("SELECT a FROM t WHERE x = 1", Dialect::Postgres).unwrap();
    let b = parse("SELECT a FROM t WHERE x = 1 AND y = 2", Dialect::Postgres).unwrap();
    // New AND node plus the second comparison and its two operands.
    assert_eq!(tree_edit_distance(a.labels(), b.labels()), 4);
    assert_eq!(tai_distance(a.labels(), b.labels()), 4);
}

#[test]
fn parallel_matrix_matches_sequential() {
    let sqls = [
        "SELECT 1",
        "SELECT a FROM t",
        "SELECT a FROM t WHERE b IN (SELECT c FROM u)",
        "SELECT * FROM (SELECT a FROM t) AS w",
    ];
    let trees: Vec<_> = sqls.iter().map(|s| parse(s, Dialect::Postgres).unwrap().labels().clone()).collect();
    let par = distance_matrix(&trees);
    assert_eq!(par, distance_matrix_seq(&trees));
    for (i, row) in par.iter().enumerate() {
        assert_eq!(row[i], 0.0);
    }
}
