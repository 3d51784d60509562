use slowsql_cli::config::PipelineConfig;

#[test]
fn full_document_parses() {
    let cfg = PipelineConfig::parse(
        r#"
[mcts]
iterations = 200
exploration_c = 1.0
fanout = 3
rng_seed = 7

[executor]
timeout_seconds = 300.0

[gate]
min_predicates = 4
min_joins = 2
min_subqueries = 1

[generate]
min_ratio = 2.0

[reward]
lambda_mix = 0.5
scale_s = 3.0

[repair]
max_rounds = 2
"#,
    )
    .unwrap();
    assert_eq!(cfg.mcts.iterations, 200);
    assert_eq!(cfg.mcts.rng_seed, 7);
    assert_eq!(cfg.gate.min_joins, 2);
    assert_eq!(cfg.repair.max_rounds, 2);
}

#[test]
fn empty_document_is_the_default() {
    assert_eq!(PipelineConfig::parse("").unwrap(), PipelineConfig::default());
}

#[test]
fn invalid_values_are_rejected() {
    assert!(PipelineConfig::parse("[executor]\ntimeout_seconds = 0.0\n").is_err());
    assert!(PipelineConfig::parse("[generate]\nmin_ratio = -1.0\n").is_err());
    assert!(PipelineConfig::parse("[generate]\nmin_ration = 2.0\n").is_err());
    let e = PipelineConfig::parse("[mcts]\niterations = \"many\"\n").unwrap_err().to_string();
    assert!(e.contains("line 2") || e.contains("2 |"), "{e}");
}
