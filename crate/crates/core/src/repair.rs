//! Plan-based verification of rewrites and the model-driven repair loop.

use serde::{Deserialize, Serialize};

use crate::degrade::{fill_template, REPAIR_TEMPLATE};
use crate::exec::{Backend, BackendError};
use crate::mutate::{extract_sql, last_fenced_block, ModelClient};
use crate::sql::Dialect;

pub const DEFAULT_MAX_ROUNDS: usize = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    /// The backend refused to plan the statement.
    #[error("{0}")]
    Rejected(String),
    #[error("transport error: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RepairError {
    #[error("original query does not verify: {0}")]
    OriginalInvalid(String),
    #[error("transport error: {0}")]
    Transport(String),
}

/// Plans `sql` on the backend. Never retrieves data.
pub fn verify(sql: &str, backend: &dyn Backend) -> Result<String, VerifyError> {
    backend.explain(sql).map_err(|e| match e {
        BackendError::Transport(m) => VerifyError::Transport(m),
        BackendError::Timeout => VerifyError::Rejected(e.to_string()),
        BackendError::Query(m) => VerifyError::Rejected(m),
    })
}

/// Context handed to the model for one regeneration round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairAttempt {
    pub original_sql: String,
    pub candidate_sql: String,
    pub error_message: String,
    pub round: usize,
    pub max_rounds: usize,
}

impl RepairAttempt {
    pub fn prompt(&self, schema_ddl: &str) -> String {
        fill_template(
            REPAIR_TEMPLATE,
            &[
                ("schema", schema_ddl),
                ("original_sql", &self.original_sql),
                ("candidate_sql", &self.candidate_sql),
                ("error_message", &self.error_message),
            ],
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairStatus {
    /// The candidate verified as given.
    Valid,
    Repaired,
    /// Rounds ran out or the model failed; the original is returned.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOutcome {
    pub sql: String,
    pub status: RepairStatus,
    pub model_calls: usize,
    /// Last diagnostic seen, if any round failed.
    pub last_error: Option<String>,
}

/// Verifies `candidate_sql` and asks the model to fix it up to `max_rounds`
/// times. The returned SQL always verifies.
pub fn repair_loop(
    original_sql: &str,
    candidate_sql: &str,
    backend: &dyn Backend,
    client: &dyn ModelClient,
    max_rounds: usize,
) -> Result<RepairOutcome, RepairError> {
    let transport = |m: String| RepairError::Transport(m);
    match verify(original_sql, backend) {
        Ok(_) => {}
        Err(VerifyError::Rejected(m)) => return Err(RepairError::OriginalInvalid(m)),
        Err(VerifyError::Transport(m)) => return Err(transport(m)),
    }
    let mut error = match verify(candidate_sql, backend) {
        Ok(_) => {
            return Ok(RepairOutcome {
                sql: candidate_sql.to_string(),
                status: RepairStatus::Valid,
                model_calls: 0,
                last_error: None,
            })
        }
        Err(VerifyError::Rejected(m)) => m,
        Err(VerifyError::Transport(m)) => return Err(transport(m)),
    };
    let dialect = backend.dialect();
    let ddl = backend.schema_ddl().unwrap_or_default();
    let mut candidate = candidate_sql.to_string();
    let fallback = |calls, error| RepairOutcome {
        sql: original_sql.to_string(),
        status: RepairStatus::Fallback,
        model_calls: calls,
        last_error: Some(error),
    };

    for round in 1..=max_rounds {
        let attempt = RepairAttempt {
            original_sql: original_sql.to_string(),
            candidate_sql: candidate.clone(),
            error_message: error.clone(),
            round,
            max_rounds,
        };
        let response = match client.complete(&attempt.prompt(&ddl)) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("repair model call failed: {e}");
                return Ok(fallback(round, e.to_string()));
            }
        };
        match extract_candidate(&response, dialect) {
            Ok(sql) => match verify(&sql, backend) {
                Ok(_) => {
                    return Ok(RepairOutcome { sql, status: RepairStatus::Repaired, model_calls: round, last_error: Some(error) })
                }
                Err(VerifyError::Rejected(m)) => {
                    candidate = sql;
                    error = m;
                }
                Err(VerifyError::Transport(m)) => return Err(transport(m)),
            },
            Err((text, m)) => {
                candidate = text;
                error = m;
            }
        }
    }
    Ok(fallback(max_rounds, error))
}

/// The repaired text, or the unparsable text and its diagnostic.
fn extract_candidate(response: &str, dialect: Dialect) -> Result<String, (String, String)> {
    extract_sql(response, dialect).map_err(|e| {
        let text = last_fenced_block(response).unwrap_or_else(|| response.trim().to_string());
        (text, e.to_string())
    })
}

/// One `(original, candidate)` pair per entry, repaired independently.
pub fn repair_batch(
    pairs: &[(String, String)],
    backend: &dyn Backend,
    client: &dyn ModelClient,
    max_rounds: usize,
) -> Vec<Result<RepairOutcome, RepairError>> {
    let one = |(o, c): &(String, String)| repair_loop(o, c, backend, client, max_rounds);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pairs.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        pairs.iter().map(one).collect()
    }
}
