use slowsql::exec::engine::run_query;
use slowsql::fixtures::{self, FixtureScale, DEFAULT_SEED};

const FIXTURE_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

#[test]
fn shipped_sql_matches_generator() {
    let db = fixtures::generate(FixtureScale::default(), DEFAULT_SEED);
    let schema = db.schema_ddl();
    let data = db.data_sql();
    if std::env::var_os("UPDATE_FIXTURES").is_some() {
        std::fs::write(format!("{FIXTURE_DIR}/schema.sql"), &schema).unwrap();
        std::fs::write(format!("{FIXTURE_DIR}/data.sql"), &data).unwrap();
        return;
    }
    assert_eq!(fixtures::SCHEMA_SQL, schema, "run with UPDATE_FIXTURES=1 to regenerate");
    assert_eq!(fixtures::DATA_SQL, data, "run with UPDATE_FIXTURES=1 to regenerate");
    assert_eq!(fixtures::database(), db);
}

#[test]
fn generator_is_deterministic() {
    let a = fixtures::generate(FixtureScale::default(), 7);
    let b = fixtures::generate(FixtureScale::default(), 7);
    assert_eq!(a, b);
    assert_ne!(a, fixtures::generate(FixtureScale::default(), 8));
}

#[test]
fn table_sizes() {
    let db = fixtures::database();
    let size = |t: &str| db.table(t).unwrap().rows.len();
    assert_eq!(size("store_sales"), 2000);
    assert_eq!(size("item"), 100);
    assert_eq!(size("customer"), 200);
    assert_eq!(size("store"), 10);
    assert_eq!(size("date_dim"), 366);
}

#[test]
fn workload_and_seeds_run_with_rows() {
    let db = fixtures::database();
    let workload = fixtures::workload();
    assert_eq!(workload.len(), 20);
    let seeds = fixtures::seeds();
    assert_eq!(seeds.len(), 5);
    for q in workload.iter().chain(&seeds) {
        let (r, _) = run_query(&db, q).unwrap_or_else(|e| panic!("{q}\n{e}"));
        assert!(!r.rows.is_empty(), "no rows: {q}");
    }
}
