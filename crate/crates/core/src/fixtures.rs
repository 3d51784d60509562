//! Deterministic retail-style fixture database, workload and seed queries.
//!
//! The shipped `fixtures/*.sql` files are the output of [`generate`] with
//! [`FixtureScale::default`] and seed [`DEFAULT_SEED`]; a test keeps them in
//! sync. Text values are lower-case ASCII words so byte order and locale
//! collation agree, and prices are multiples of 0.25 so float sums are exact
//! in any order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::engine::{load_script, ColumnDef, Database, SqlType, Table};
use crate::exec::Value;

pub const DEFAULT_SEED: u64 = 20_240_101;

pub const SCHEMA_SQL: &str = include_str!("../fixtures/schema.sql");
pub const DATA_SQL: &str = include_str!("../fixtures/data.sql");
pub const WORKLOAD_SQL: &str = include_str!("../fixtures/workload.sql");
pub const SEEDS_SQL: &str = include_str!("../fixtures/seeds.sql");

/// Identifier recorded in corpus records built on this schema.
pub const SCHEMA_ID: &str = "retail-fixture-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureScale {
    pub items: usize,
    pub customers: usize,
    pub stores: usize,
    pub days: usize,
    pub sales: usize,
}

impl Default for FixtureScale {
    fn default() -> Self {
        FixtureScale { items: 100, customers: 200, stores: 10, days: 366, sales: 2000 }
    }
}

const CATEGORIES: &[&str] = &["books", "electronics", "home", "jewelry", "music", "shoes", "sports", "women"];
const CLASSES: &[&str] = &["basic", "classic", "deluxe", "economy", "premium", "value"];
const FIRST: &[&str] = &[
    "alice", "bruno", "carla", "david", "elena", "felix", "grace", "henry", "irene", "jonas", "karen", "louis",
    "maria", "nolan", "olga", "peter", "quinn", "rosa", "simon", "tessa",
];
const LAST: &[&str] = &[
    "adams", "baker", "clark", "davis", "evans", "fisher", "green", "harris", "irwin", "jones", "king", "lewis",
    "moore", "nash", "owens", "parker",
];
const STATES: &[&str] = &["ca", "ga", "il", "ny", "tn", "tx", "wa"];
const STORE_NAMES: &[&str] = &["able", "ation", "bar", "cally", "eing", "ese", "ought", "pri", "anti", "eseng"];
const DAY_NAMES: &[&str] = &["saturday", "sunday", "monday", "tuesday", "wednesday", "thursday", "friday"];
const MONTH_DAYS: [usize; 12] = [31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

/// First surrogate key of the date dimension (2000-01-01).
pub const FIRST_DATE_SK: i64 = 2_451_545;

fn quarter_price<R: Rng>(rng: &mut R, lo: i64, hi: i64) -> f64 {
    rng.gen_range(lo * 4..=hi * 4) as f64 / 4.0
}

fn col(name: &str, ty: SqlType) -> ColumnDef {
    ColumnDef { name: name.to_string(), ty }
}

/// Builds the fixture database.
pub fn generate(scale: FixtureScale, seed: u64) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut db = Database::new();

    let mut date_dim = Table::new(
        "date_dim",
        vec![
            col("d_date_sk", SqlType::Int),
            col("d_date", SqlType::Text),
            col("d_year", SqlType::Int),
            col("d_moy", SqlType::Int),
            col("d_dom", SqlType::Int),
            col("d_qoy", SqlType::Int),
            col("d_day_name", SqlType::Text),
        ],
        vec!["d_date_sk".into()],
    );
    let (mut month, mut day) = (0usize, 1usize);
    for i in 0..scale.days {
        let year = 2000 + (i / 366) as i64;
        date_dim.push(vec![
            Value::Int(FIRST_DATE_SK + i as i64),
            Value::Text(format!("{year}-{:02}-{day:02}", month + 1)),
            Value::Int(year),
            Value::Int(month as i64 + 1),
            Value::Int(day as i64),
            Value::Int((month / 3) as i64 + 1),
            Value::Text(DAY_NAMES[i % 7].to_string()),
        ]);
        day += 1;
        if day > MONTH_DAYS[month] {
            day = 1;
            month = (month + 1) % 12;
        }
    }

    let mut item = Table::new(
        "item",
        vec![
            col("i_item_sk", SqlType::Int),
            col("i_item_id", SqlType::Text),
            col("i_category", SqlType::Text),
            col("i_class", SqlType::Text),
            col("i_brand", SqlType::Text),
            col("i_current_price", SqlType::Float),
        ],
        vec!["i_item_sk".into()],
    );
    for i in 1..=scale.items {
        let brand =
            if rng.gen_bool(0.05) { Value::Null } else { Value::Text(format!("brand{}", rng.gen_range(1..=20))) };
        item.push(vec![
            Value::Int(i as i64),
            Value::Text(format!("item{i:05}")),
            Value::Text(CATEGORIES.choose(&mut rng).unwrap().to_string()),
            Value::Text(CLASSES.choose(&mut rng).unwrap().to_string()),
            brand,
            Value::Float(quarter_price(&mut rng, 1, 100)),
        ]);
    }

    let mut customer = Table::new(
        "customer",
        vec![
            col("c_customer_sk", SqlType::Int),
            col("c_first_name", SqlType::Text),
            col("c_last_name", SqlType::Text),
            col("c_birth_year", SqlType::Int),
            col("c_state", SqlType::Text),
            col("c_preferred_flag", SqlType::Bool),
        ],
        vec!["c_customer_sk".into()],
    );
    for c in 1..=scale.customers {
        let birth = if rng.gen_bool(0.04) { Value::Null } else { Value::Int(rng.gen_range(1930..=2000)) };
        customer.push(vec![
            Value::Int(c as i64),
            Value::Text(FIRST.choose(&mut rng).unwrap().to_string()),
            Value::Text(LAST.choose(&mut rng).unwrap().to_string()),
            birth,
            Value::Text(STATES.choose(&mut rng).unwrap().to_string()),
            Value::Bool(rng.gen_bool(0.4)),
        ]);
    }

    let mut store = Table::new(
        "store",
        vec![
            col("s_store_sk", SqlType::Int),
            col("s_store_name", SqlType::Text),
            col("s_state", SqlType::Text),
            col("s_floor_space", SqlType::Int),
        ],
        vec!["s_store_sk".into()],
    );
    for s in 1..=scale.stores {
        store.push(vec![
            Value::Int(s as i64),
            Value::Text(format!("{}{s}", STORE_NAMES[(s - 1) % STORE_NAMES.len()])),
            Value::Text(STATES.choose(&mut rng).unwrap().to_string()),
            Value::Int(rng.gen_range(20..=100) * 100),
        ]);
    }

    let mut sales = Table::new(
        "store_sales",
        vec![
            col("ss_ticket_number", SqlType::Int),
            col("ss_item_sk", SqlType::Int),
            col("ss_customer_sk", SqlType::Int),
            col("ss_store_sk", SqlType::Int),
            col("ss_sold_date_sk", SqlType::Int),
            col("ss_quantity", SqlType::Int),
            col("ss_sales_price", SqlType::Float),
            col("ss_net_profit", SqlType::Float),
        ],
        vec!["ss_ticket_number".into(), "ss_item_sk".into()],
    );
    let mut ticket = 0i64;
    let items: Vec<i64> = (1..=scale.items as i64).collect();
    while sales.rows.len() < scale.sales {
        ticket += 1;
        let lines = rng.gen_range(1..=4).min(scale.sales - sales.rows.len());
        let customer_sk =
            if rng.gen_bool(0.03) { Value::Null } else { Value::Int(rng.gen_range(1..=scale.customers as i64)) };
        let store_sk = Value::Int(rng.gen_range(1..=scale.stores as i64));
        let date_sk = Value::Int(FIRST_DATE_SK + rng.gen_range(0..scale.days as i64));
        for &item_sk in items.choose_multiple(&mut rng, lines) {
            sales.push(vec![
                Value::Int(ticket),
                Value::Int(item_sk),
                customer_sk.clone(),
                store_sk.clone(),
                date_sk.clone(),
                Value::Int(rng.gen_range(1..=100)),
                Value::Float(quarter_price(&mut rng, 1, 200)),
                Value::Float(quarter_price(&mut rng, -50, 150)),
            ]);
        }
    }

    for t in [customer, date_dim, item, store, sales] {
        db.add_table(t);
    }
    db
}

/// The fixture database loaded from the shipped SQL files.
pub fn database() -> Database {
    let mut db = Database::new();
    load_script(&mut db, SCHEMA_SQL).expect("shipped schema loads");
    load_script(&mut db, DATA_SQL).expect("shipped data loads");
    db
}

/// Drops and recreates the fixture tables, then loads the fixture rows.
/// Meant for loading a scratch PostgreSQL database.
pub fn reset_script() -> String {
    let db = database();
    let mut out: String = db.tables().map(|t| format!("DROP TABLE IF EXISTS {};\n", t.name)).collect();
    out.push_str(SCHEMA_SQL);
    out.push_str(DATA_SQL);
    out
}

/// Splits a `;`-separated query file into statements, dropping comments.
pub fn split_queries(text: &str) -> Vec<String> {
    crate::sql::lexer::split_statements(text)
        .into_iter()
        .map(|s| s.lines().filter(|l| !l.trim_start().starts_with("--")).collect::<Vec<_>>().join("\n").trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// The 20-query differential workload.
pub fn workload() -> Vec<String> {
    split_queries(WORKLOAD_SQL)
}

/// Seed queries for generation runs.
pub fn seeds() -> Vec<String> {
    split_queries(SEEDS_SQL)
}
