//! Query execution: backends, outcomes, validity and the result cache.

pub mod dispatch;
pub mod engine;
pub mod hash;
pub mod pg;
pub mod value;

use serde::{Deserialize, Serialize};

use crate::sql::{normalize_sql, Dialect};
pub use dispatch::{DispatchError, Dispatcher, ResultCache, Ticket, WaitError};
pub use engine::SimulatedBackend;
pub use hash::{result_hash, EMPTY_RESULT_HASH};
pub use value::{Row, Value};

/// Rows returned by one backend run.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub latency_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    /// The statement itself failed (syntax, binding or runtime error).
    #[error("{0}")]
    Query(String),
    #[error("canceling statement due to statement timeout")]
    Timeout,
    /// The connection failed; the statement may be retried.
    #[error("transport error: {0}")]
    Transport(String),
}

/// Connection loss while executing; distinct from a failing query.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("transport error: {0}")]
pub struct TransportError(pub String);

/// A database the search can execute queries on.
pub trait Backend: Send + Sync {
    fn id(&self) -> String;
    fn dialect(&self) -> Dialect;
    /// Runs `sql` once, cancelling it after `timeout_seconds`.
    fn run(&self, sql: &str, timeout_seconds: f64) -> Result<QueryResult, BackendError>;
    /// Plans `sql` without retrieving data; returns the plan text.
    fn explain(&self, sql: &str) -> Result<String, BackendError>;
    fn max_parallelism(&self) -> usize {
        1
    }
    /// Number of `run` calls served so far.
    fn calls(&self) -> usize;
    fn schema_ddl(&self) -> Option<String> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecStatus {
    Ok,
    Error,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecStatus,
    pub latency_seconds: f64,
    #[serde(default, with = "hex_hash", skip_serializing_if = "Option::is_none")]
    pub result_hash: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
}

impl ExecutionOutcome {
    pub fn ok(latency_seconds: f64, result_hash: u64, row_count: usize) -> Self {
        ExecutionOutcome {
            status: ExecStatus::Ok,
            latency_seconds,
            result_hash: Some(result_hash),
            row_count: Some(row_count),
            error_message: None,
        }
    }

    pub fn error(message: impl Into<String>) -> Self {
        ExecutionOutcome {
            status: ExecStatus::Error,
            latency_seconds: 0.0,
            result_hash: None,
            row_count: None,
            error_message: Some(message.into()),
        }
    }

    pub fn timeout(timeout_seconds: f64) -> Self {
        ExecutionOutcome {
            status: ExecStatus::Timeout,
            latency_seconds: timeout_seconds,
            result_hash: None,
            row_count: None,
            error_message: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ExecStatus::Ok
    }

    pub fn is_timeout(&self) -> bool {
        self.status == ExecStatus::Timeout
    }
}

mod hex_hash {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(h) => s.serialize_str(&format!("{h:016x}")),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| u64::from_str_radix(s.trim_start_matches("0x"), 16).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutorConfig {
    pub timeout_seconds: f64,
    pub warmup_runs: usize,
    pub measured_runs: usize,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig { timeout_seconds: 300.0, warmup_runs: 1, measured_runs: 3 }
    }
}

impl ExecutorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.measured_runs == 0 {
            return Err("measured_runs must be at least 1".to_string());
        }
        if !(self.timeout_seconds > 0.0) {
            return Err("timeout_seconds must be positive".to_string());
        }
        Ok(())
    }
}

/// Runs `sql` with the warm-up and measurement protocol of `cfg`.
pub fn execute(sql: &str, backend: &dyn Backend, cfg: &ExecutorConfig) -> Result<ExecutionOutcome, TransportError> {
    for _ in 0..cfg.warmup_runs {
        match backend.run(sql, cfg.timeout_seconds) {
            Ok(_) => {}
            Err(e) => return failure(e, cfg),
        }
    }
    let mut total = 0.0;
    let mut last = None;
    for _ in 0..cfg.measured_runs.max(1) {
        match backend.run(sql, cfg.timeout_seconds) {
            Ok(r) if r.latency_seconds > cfg.timeout_seconds => return Ok(ExecutionOutcome::timeout(cfg.timeout_seconds)),
            Ok(r) => {
                total += r.latency_seconds;
                last = Some(r);
            }
            Err(e) => return failure(e, cfg),
        }
    }
    let r = last.expect("at least one measured run");
    let mean = total / cfg.measured_runs.max(1) as f64;
    Ok(ExecutionOutcome::ok(mean, result_hash(&r.rows), r.rows.len()))
}

fn failure(e: BackendError, cfg: &ExecutorConfig) -> Result<ExecutionOutcome, TransportError> {
    match e {
        BackendError::Query(m) => Ok(ExecutionOutcome::error(m)),
        BackendError::Timeout => Ok(ExecutionOutcome::timeout(cfg.timeout_seconds)),
        BackendError::Transport(m) => Err(TransportError(m)),
    }
}

/// Validity indicator: 1 iff the candidate ran and reproduced the seed's
/// result multiset.
pub fn validity(candidate: &ExecutionOutcome, seed_hash: u64) -> u8 {
    u8::from(candidate.is_ok() && candidate.result_hash == Some(seed_hash))
}

/// Cache key: digest of the normalized SQL and the backend id.
pub fn fingerprint(sql: &str, backend_id: &str, dialect: Dialect) -> u64 {
    use std::hash::Hasher;
    let mut h = twox_hash::XxHash64::with_seed(0);
    h.write(normalize_sql(sql, dialect).as_bytes());
    h.write(&[hash::FIELD_SEPARATOR]);
    h.write(backend_id.as_bytes());
    h.finish()
}
