//! In-memory SQL engine with a deterministic synthetic latency model.

mod bind;
pub mod catalog;
pub mod cost;
mod eval;
pub mod plan;
mod script;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::sql::{self, Dialect, ParseError};

use super::{Backend, BackendError, QueryResult};
pub use bind::bind;
pub use catalog::{ColumnDef, Database, SqlType, Table};
pub use cost::CostFeatures;
pub use eval::{like, pg_float_text};
use plan::{FromNode, Program, QueryPlan, SetPlan};
pub use script::load_script;

/// Parses, binds and evaluates `sql` against `db`, returning the rows and
/// cost features.
pub fn run_query(db: &Database, sql: &str) -> Result<(QueryResult, CostFeatures), String> {
    let (q, prog) = prepare(db, sql)?;
    let feats = cost::features(&q, &prog);
    let rows = eval::Executor::new(&prog).run()?;
    let columns = prog.root.columns.iter().map(|c| c.name.clone()).collect();
    Ok((QueryResult { columns, rows, latency_seconds: feats.latency() }, feats))
}

fn prepare(db: &Database, sql: &str) -> Result<(sql::Query, Program), String> {
    let q = sql::parse_query(sql, Dialect::Postgres).map_err(|e| syntax_message(sql, &e))?;
    let prog = bind(db, &q)?;
    Ok((q, prog))
}

/// PostgreSQL-style syntax error text for a parse failure.
pub fn syntax_message(sql: &str, e: &ParseError) -> String {
    let rest = sql.get(e.offset..).unwrap_or("").trim_start();
    if rest.is_empty() {
        return "syntax error at end of input".to_string();
    }
    let first = rest.chars().next().unwrap_or(' ');
    let token: String = if first.is_alphanumeric() || first == '_' {
        rest.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect()
    } else {
        first.to_string()
    };
    format!("syntax error at or near \"{token}\"")
}

#[derive(Debug, Clone)]
struct Memo {
    result: Result<(QueryResult, CostFeatures), String>,
}

/// Backend over in-memory tables. Results are exact; latency comes from
/// [`cost`] and is deterministic.
pub struct SimulatedBackend {
    db: Arc<Database>,
    id: String,
    parallelism: usize,
    memo: Mutex<HashMap<String, Arc<Memo>>>,
    calls: AtomicUsize,
}

impl SimulatedBackend {
    pub fn new(db: Database) -> Self {
        Self::with_id(db, "simulated")
    }

    pub fn with_id(db: Database, id: impl Into<String>) -> Self {
        SimulatedBackend {
            db: Arc::new(db),
            id: id.into(),
            parallelism: 4,
            memo: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_parallelism(mut self, n: usize) -> Self {
        self.parallelism = n.max(1);
        self
    }

    pub fn database(&self) -> &Database {
        &self.db
    }

    /// Cost features of `sql`, or the error it raises.
    pub fn features(&self, sql: &str) -> Result<CostFeatures, String> {
        let (q, prog) = prepare(&self.db, sql)?;
        Ok(cost::features(&q, &prog))
    }

    fn evaluate(&self, sql: &str) -> Arc<Memo> {
        let key = sql::normalize_sql(sql, Dialect::Postgres);
        if let Some(m) = self.memo.lock().expect("memo lock").get(&key) {
            return m.clone();
        }
        let m = Arc::new(Memo { result: run_query(&self.db, sql) });
        self.memo.lock().expect("memo lock").insert(key, m.clone());
        m
    }
}

impl Backend for SimulatedBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn dialect(&self) -> Dialect {
        Dialect::Postgres
    }

    fn run(&self, sql: &str, timeout_seconds: f64) -> Result<QueryResult, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        // Budget check first: a query over budget never reaches evaluation.
        if let Ok(f) = self.features(sql) {
            if f.latency() > timeout_seconds {
                return Err(BackendError::Timeout);
            }
        }
        match &self.evaluate(sql).result {
            Ok((r, _)) => Ok(r.clone()),
            Err(msg) => Err(BackendError::Query(msg.clone())),
        }
    }

    fn explain(&self, sql: &str) -> Result<String, BackendError> {
        let (q, prog) = prepare(&self.db, sql).map_err(BackendError::Query)?;
        let f = cost::features(&q, &prog);
        let mut out = String::new();
        let _ = writeln!(out, "Result  (cost={:.6})", f.latency());
        describe_query(&prog.root, 1, &mut out);
        for (i, s) in prog.subs.iter().enumerate() {
            let kind = if s.is_correlated() { "SubPlan" } else { "InitPlan" };
            let _ = writeln!(out, "  {kind} {}", i + 1);
            describe_query(&s.plan, 2, &mut out);
        }
        Ok(out)
    }

    fn max_parallelism(&self) -> usize {
        self.parallelism
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn schema_ddl(&self) -> Option<String> {
        Some(self.db.schema_ddl())
    }
}

fn describe_query(q: &QueryPlan, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let mut d = depth;
    if q.limit.is_some() || q.offset > 0 {
        let _ = writeln!(out, "{pad}Limit");
        d += 1;
    }
    if !q.order.is_empty() {
        let _ = writeln!(out, "{}Sort", "  ".repeat(d));
        d += 1;
    }
    describe_set(&q.body, d, out);
}

fn describe_set(s: &SetPlan, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match s {
        SetPlan::Select(sel) => {
            let mut d = depth;
            if sel.distinct {
                let _ = writeln!(out, "{pad}HashAggregate (distinct)");
                d += 1;
            }
            if !sel.windows.is_empty() {
                let _ = writeln!(out, "{}WindowAgg", "  ".repeat(d));
                d += 1;
            }
            if sel.grouping.is_some() {
                let _ = writeln!(out, "{}HashAggregate", "  ".repeat(d));
                d += 1;
            }
            if sel.items.is_empty() {
                let _ = writeln!(out, "{}Result", "  ".repeat(d));
            }
            for (i, step) in sel.steps.iter().rev().enumerate() {
                let kind = if step.keys.is_empty() { "Nested Loop" } else { "Hash Join" };
                let _ = writeln!(out, "{}{kind}", "  ".repeat(d + i));
            }
            for item in &sel.items {
                describe_node(item, d + sel.steps.len(), out);
            }
        }
        SetPlan::SetOp { op, all, left, right, .. } => {
            let _ = writeln!(out, "{pad}{}{}", op.keyword(), if *all { " ALL" } else { "" });
            describe_set(left, depth + 1, out);
            describe_set(right, depth + 1, out);
        }
        SetPlan::Query(q) => describe_query(q, depth, out),
    }
}

fn describe_node(n: &FromNode, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match n {
        FromNode::Scan { table, alias, filter } => {
            let f = if filter.is_empty() { String::new() } else { format!(" (filters: {})", filter.len()) };
            let _ = writeln!(out, "{pad}Seq Scan on {} {alias}  (rows={}){f}", table.name, table.rows.len());
        }
        FromNode::Derived { plan, alias, .. } => {
            let _ = writeln!(out, "{pad}Subquery Scan on {alias}");
            describe_query(plan, depth + 1, out);
        }
        FromNode::Join(j) => {
            let kind = if j.keys.is_empty() { "Nested Loop" } else { "Hash Join" };
            let _ = writeln!(out, "{pad}{kind} ({})", j.kind.keyword());
            describe_node(&j.left, depth + 1, out);
            describe_node(&j.right, depth + 1, out);
        }
    }
}
