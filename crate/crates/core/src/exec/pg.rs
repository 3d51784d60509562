//! PostgreSQL backend over the wire protocol.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use postgres::error::SqlState;
use postgres::types::Type;
use postgres::{Client, NoTls, SimpleQueryMessage};

use super::{Backend, BackendError, QueryResult, Row, Value};
use crate::sql::Dialect;

/// Environment variable holding the connection string.
pub const DATABASE_URL_ENV: &str = "DATABASE_URL";

pub struct PgBackend {
    url: String,
    client: Mutex<Option<Client>>,
    calls: AtomicUsize,
    parallelism: usize,
}

impl PgBackend {
    /// Connects eagerly so an unreachable server fails fast.
    pub fn connect(url: &str) -> Result<Self, BackendError> {
        let client = Client::connect(url, NoTls).map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(PgBackend { url: url.to_string(), client: Mutex::new(Some(client)), calls: AtomicUsize::new(0), parallelism: 1 })
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let url = std::env::var(DATABASE_URL_ENV)
            .map_err(|_| BackendError::Transport(format!("{DATABASE_URL_ENV} is not set")))?;
        Self::connect(&url)
    }

    /// Runs a script of statements (fixture loading).
    pub fn batch(&self, script: &str) -> Result<(), BackendError> {
        self.with_client(|c| c.batch_execute(script).map_err(classify))
    }

    fn with_client<T>(&self, f: impl FnOnce(&mut Client) -> Result<T, BackendError>) -> Result<T, BackendError> {
        let mut guard = self.client.lock().expect("client lock");
        if guard.as_ref().is_none_or(|c| c.is_closed()) {
            *guard = Some(Client::connect(&self.url, NoTls).map_err(|e| BackendError::Transport(e.to_string()))?);
        }
        let res = f(guard.as_mut().expect("connected client"));
        if matches!(res, Err(BackendError::Transport(_))) {
            *guard = None;
        }
        res
    }
}

fn classify(e: postgres::Error) -> BackendError {
    if e.code() == Some(&SqlState::QUERY_CANCELED) {
        return BackendError::Timeout;
    }
    match e.as_db_error() {
        Some(db) => BackendError::Query(db.message().to_string()),
        None => BackendError::Transport(e.to_string()),
    }
}

fn convert(text: Option<&str>, ty: &Type) -> Value {
    let Some(s) = text else { return Value::Null };
    match *ty {
        Type::INT2 | Type::INT4 | Type::INT8 | Type::OID => s.parse().map(Value::Int).unwrap_or(Value::Text(s.into())),
        Type::FLOAT4 | Type::FLOAT8 | Type::NUMERIC => match s {
            "NaN" => Value::Float(f64::NAN),
            "Infinity" => Value::Float(f64::INFINITY),
            "-Infinity" => Value::Float(f64::NEG_INFINITY),
            _ => s.parse().map(Value::Float).unwrap_or(Value::Text(s.into())),
        },
        Type::BOOL => Value::Bool(s == "t"),
        _ => Value::Text(s.to_string()),
    }
}

impl Backend for PgBackend {
    fn id(&self) -> String {
        format!("postgres:{}", self.url.rsplit('/').next().unwrap_or(""))
    }

    fn dialect(&self) -> Dialect {
        Dialect::Postgres
    }

    fn run(&self, sql: &str, timeout_seconds: f64) -> Result<QueryResult, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.with_client(|c| {
            let ms = (timeout_seconds * 1000.0).ceil().max(1.0) as u64;
            c.batch_execute(&format!("SET statement_timeout = {ms}")).map_err(classify)?;
            let stmt = c.prepare(sql).map_err(classify)?;
            let types: Vec<Type> = stmt.columns().iter().map(|col| col.type_().clone()).collect();
            let columns = stmt.columns().iter().map(|col| col.name().to_string()).collect();
            let start = Instant::now();
            let messages = c.simple_query(sql).map_err(classify)?;
            let latency_seconds = start.elapsed().as_secs_f64();
            let rows: Vec<Row> = messages
                .iter()
                .filter_map(|m| match m {
                    SimpleQueryMessage::Row(r) => {
                        Some((0..r.len()).map(|i| convert(r.get(i), &types[i])).collect())
                    }
                    _ => None,
                })
                .collect();
            Ok(QueryResult { columns, rows, latency_seconds })
        })
    }

    fn explain(&self, sql: &str) -> Result<String, BackendError> {
        self.with_client(|c| {
            let messages = c.simple_query(&format!("EXPLAIN {sql}")).map_err(classify)?;
            let lines: Vec<String> = messages
                .iter()
                .filter_map(|m| match m {
                    SimpleQueryMessage::Row(r) => r.get(0).map(str::to_string),
                    _ => None,
                })
                .collect();
            Ok(lines.join("\n"))
        })
    }

    fn max_parallelism(&self) -> usize {
        self.parallelism
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}
