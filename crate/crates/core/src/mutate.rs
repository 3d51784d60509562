//! Mutation providers: where candidate rewrites come from.
//!
//! Rule-guided requests name a library strategy; free-form requests ask a
//! model for any slower equivalent. Every candidate is parsed before it is
//! returned.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::degrade::{fill_template, strategy_by_id, Strategy, StrategyHistory, TransformError, FREE_FORM_TEMPLATE};
use crate::exec::engine::Database;
use crate::sql::{parse_query, render_query, Dialect, SqlTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationMode {
    RuleGuided,
    FreeForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationRequest {
    pub parent_sql: String,
    pub seed_sql: String,
    pub schema_ddl: String,
    pub mode: MutationMode,
    /// Strategy id; present exactly when `mode` is rule-guided.
    pub strategy: Option<String>,
    pub rng_seed: u64,
}

impl MutationRequest {
    pub fn rule_guided(parent_sql: &str, seed_sql: &str, schema_ddl: &str, strategy: &str, rng_seed: u64) -> Self {
        MutationRequest {
            parent_sql: parent_sql.to_string(),
            seed_sql: seed_sql.to_string(),
            schema_ddl: schema_ddl.to_string(),
            mode: MutationMode::RuleGuided,
            strategy: Some(strategy.to_string()),
            rng_seed,
        }
    }

    pub fn free_form(parent_sql: &str, seed_sql: &str, schema_ddl: &str, rng_seed: u64) -> Self {
        MutationRequest {
            parent_sql: parent_sql.to_string(),
            seed_sql: seed_sql.to_string(),
            schema_ddl: schema_ddl.to_string(),
            mode: MutationMode::FreeForm,
            strategy: None,
            rng_seed,
        }
    }

    fn validate(&self) -> Result<Option<Strategy>, MutationError> {
        match (self.mode, &self.strategy) {
            (MutationMode::RuleGuided, Some(id)) => strategy_by_id(id)
                .map(Some)
                .ok_or_else(|| MutationError::InvalidRequest(format!("unknown strategy '{id}'"))),
            (MutationMode::FreeForm, None) => Ok(None),
            (MutationMode::RuleGuided, None) => {
                Err(MutationError::InvalidRequest("rule-guided request without a strategy".into()))
            }
            (MutationMode::FreeForm, Some(_)) => {
                Err(MutationError::InvalidRequest("free-form request must not name a strategy".into()))
            }
        }
    }

    /// Prompt text for a model-mediated mutation.
    pub fn prompt(&self) -> Result<String, MutationError> {
        Ok(match self.validate()? {
            Some(s) => s.prompt(&self.schema_ddl, &self.parent_sql),
            None => fill_template(FREE_FORM_TEMPLATE, &[("schema", &self.schema_ddl), ("parent_sql", &self.parent_sql)]),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationResult {
    pub candidate_sql: String,
    pub provider_id: String,
    pub strategy_id: Option<String>,
    pub raw_model_output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MutationError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("no SQL found in model output")]
    Extraction,
    #[error("candidate does not parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

pub trait MutationProvider: Send + Sync {
    fn id(&self) -> &str;
    fn mutate(&self, req: &MutationRequest) -> Result<MutationResult, MutationError>;
}

/// A text-completion endpoint.
pub trait ModelClient: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<String, MutationError>;
}

/// Applies library strategies directly to the parsed parent.
pub struct RuleProvider {
    schema: Arc<Database>,
    dialect: Dialect,
}

impl RuleProvider {
    pub fn new(schema: Arc<Database>, dialect: Dialect) -> Self {
        RuleProvider { schema, dialect }
    }
}

impl MutationProvider for RuleProvider {
    fn id(&self) -> &str {
        "rule"
    }

    fn mutate(&self, req: &MutationRequest) -> Result<MutationResult, MutationError> {
        let Some(strategy) = req.validate()? else {
            return Err(MutationError::ProviderUnavailable("rule provider cannot serve free-form requests".into()));
        };
        let parent = SqlTree::parse(&req.parent_sql, self.dialect).map_err(|e| MutationError::Parse(e.to_string()))?;
        let out = strategy.apply(&parent, &self.schema, req.rng_seed)?;
        Ok(MutationResult {
            candidate_sql: out.render(),
            provider_id: self.id().to_string(),
            strategy_id: Some(strategy.id.to_string()),
            raw_model_output: None,
        })
    }
}

/// Sends the request's prompt to a model and extracts the SQL it returns.
pub struct ModelProvider {
    client: Arc<dyn ModelClient>,
    dialect: Dialect,
    id: String,
}

impl ModelProvider {
    pub fn new(client: Arc<dyn ModelClient>, dialect: Dialect) -> Self {
        let id = format!("model:{}", client.id());
        ModelProvider { client, dialect, id }
    }
}

impl MutationProvider for ModelProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn mutate(&self, req: &MutationRequest) -> Result<MutationResult, MutationError> {
        let prompt = req.prompt()?;
        let raw = self.client.complete(&prompt)?;
        let candidate_sql = extract_sql(&raw, self.dialect)?;
        Ok(MutationResult {
            candidate_sql,
            provider_id: self.id.clone(),
            strategy_id: req.strategy.clone(),
            raw_model_output: Some(raw),
        })
    }
}

/// Replays a fixed list of responses, cycling when exhausted.
pub struct ScriptedModel {
    responses: Vec<String>,
    next: Mutex<usize>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedModel {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedModel { responses: responses.into_iter().map(Into::into).collect(), next: Mutex::new(0), prompts: Mutex::default() }
    }

    /// Prompts received so far.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

impl ModelClient for ScriptedModel {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, prompt: &str) -> Result<String, MutationError> {
        self.prompts.lock().unwrap().push(prompt.to_string());
        if self.responses.is_empty() {
            return Err(MutationError::ProviderUnavailable("script is empty".into()));
        }
        let mut next = self.next.lock().unwrap();
        let out = self.responses[*next % self.responses.len()].clone();
        *next += 1;
        Ok(out)
    }
}

/// Test provider that returns scripted model output for any request.
pub struct MockProvider {
    inner: ModelProvider,
}

impl MockProvider {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>, dialect: Dialect) -> Self {
        MockProvider { inner: ModelProvider::new(Arc::new(ScriptedModel::new(responses)), dialect) }
    }
}

impl MutationProvider for MockProvider {
    fn id(&self) -> &str {
        "mock"
    }

    fn mutate(&self, req: &MutationRequest) -> Result<MutationResult, MutationError> {
        let mut r = self.inner.mutate(req)?;
        r.provider_id = "mock".into();
        Ok(r)
    }
}

/// Routes each mode to its provider. Free-form requests fail with
/// `ProviderUnavailable` when no model is configured.
pub struct Router {
    pub rule_guided: Arc<dyn MutationProvider>,
    pub free_form: Option<Arc<dyn MutationProvider>>,
}

impl Router {
    pub fn offline(schema: Arc<Database>, dialect: Dialect) -> Self {
        Router { rule_guided: Arc::new(RuleProvider::new(schema, dialect)), free_form: None }
    }

    pub fn has_free_form(&self) -> bool {
        self.free_form.is_some()
    }
}

impl MutationProvider for Router {
    fn id(&self) -> &str {
        "router"
    }

    fn mutate(&self, req: &MutationRequest) -> Result<MutationResult, MutationError> {
        req.validate()?;
        match req.mode {
            MutationMode::RuleGuided => self.rule_guided.mutate(req),
            MutationMode::FreeForm => match &self.free_form {
                Some(p) => p.mutate(req),
                None => Err(MutationError::ProviderUnavailable("no model configured for free-form mutation".into())),
            },
        }
    }
}

/// Rule-guided with probability `rule_prob` when any strategy is still
/// available on this path, free-form otherwise.
pub fn choose_mode(history: &StrategyHistory, available: &[Strategy], rng_seed: u64, rule_prob: f64) -> MutationMode {
    if available.iter().all(|s| history.contains(s.id)) {
        return MutationMode::FreeForm;
    }
    if ChaCha8Rng::seed_from_u64(rng_seed).gen::<f64>() < rule_prob {
        MutationMode::RuleGuided
    } else {
        MutationMode::FreeForm
    }
}

/// Picks one unused strategy uniformly.
pub fn choose_strategy(history: &StrategyHistory, available: &[Strategy], rng_seed: u64) -> Option<Strategy> {
    let open: Vec<&Strategy> = available.iter().filter(|s| !history.contains(s.id)).collect();
    if open.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0x9E37_79B9_7F4A_7C15);
    Some(*open[rng.gen_range(0..open.len())])
}

/// SQL from a model response: the last fenced code block, or the whole
/// response when it has no fence. The result must parse; it is returned
/// in canonical rendering.
pub fn extract_sql(response: &str, dialect: Dialect) -> Result<String, MutationError> {
    let text = last_fenced_block(response).unwrap_or_else(|| response.trim().to_string());
    let text = text.trim().trim_end_matches(';').trim();
    if text.is_empty() {
        return Err(MutationError::Extraction);
    }
    match parse_query(text, dialect) {
        Ok(q) => Ok(render_query(&q, dialect)),
        Err(e) if last_fenced_block(response).is_some() => Err(MutationError::Parse(e.to_string())),
        Err(_) => Err(MutationError::Extraction),
    }
}

pub(crate) fn last_fenced_block(text: &str) -> Option<String> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        let Some(close) = body.find("```") else { break };
        blocks.push(body[..close].to_string());
        rest = &body[close + 3..];
    }
    blocks.pop()
}

/// Settings for an OpenAI-style chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub timeout_seconds: u64,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    /// Reads MODEL_ENDPOINT, MODEL_API_KEY and MODEL_NAME. `None` when no
    /// endpoint is set.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var("MODEL_ENDPOINT").ok().filter(|s| !s.is_empty())?;
        Some(RemoteConfig {
            endpoint,
            api_key: std::env::var("MODEL_API_KEY").ok().filter(|s| !s.is_empty()),
            model: std::env::var("MODEL_NAME").unwrap_or_else(|_| "default".into()),
            temperature: 0.7,
            timeout_seconds: 120,
            max_in_flight: 4,
        })
    }
}

/// Blocking HTTP chat client with a cap on concurrent requests.
pub struct RemoteModel {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    in_flight: Mutex<usize>,
    slot_free: Condvar,
}

impl RemoteModel {
    pub fn new(cfg: RemoteConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(cfg.timeout_seconds)).build();
        RemoteModel { cfg, agent, in_flight: Mutex::new(0), slot_free: Condvar::new() }
    }

    fn acquire(&self) {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.cfg.max_in_flight.max(1) {
            n = self.slot_free.wait(n).unwrap();
        }
        *n += 1;
    }

    fn release(&self) {
        *self.in_flight.lock().unwrap() -= 1;
        self.slot_free.notify_one();
    }
}

impl ModelClient for RemoteModel {
    fn id(&self) -> &str {
        &self.cfg.model
    }

    fn complete(&self, prompt: &str) -> Result<String, MutationError> {
        let body = serde_json::json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        log::info!(target: "slowsql::model", "request model={} chars={}", self.cfg.model, prompt.len());
        log::debug!(target: "slowsql::model", "prompt: {prompt}");
        self.acquire();
        let mut call = self.agent.post(&self.cfg.endpoint).set("Content-Type", "application/json");
        if let Some(key) = &self.cfg.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = call.send_json(body);
        self.release();
        let resp = resp.map_err(|e| MutationError::ProviderUnavailable(e.to_string()))?;
        let v: serde_json::Value = resp.into_json().map_err(|e| MutationError::ProviderUnavailable(e.to_string()))?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| MutationError::ProviderUnavailable("response has no message content".into()))?
            .to_string();
        log::debug!(target: "slowsql::model", "response: {text}");
        Ok(text)
    }
}

/// Hands out responses in order and fails once they run out.
pub struct QueueModel {
    responses: Mutex<VecDeque<String>>,
}

impl QueueModel {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        QueueModel { responses: Mutex::new(responses.into_iter().map(Into::into).collect()) }
    }
}

impl ModelClient for QueueModel {
    fn id(&self) -> &str {
        "queue"
    }

    fn complete(&self, _prompt: &str) -> Result<String, MutationError> {
        self.responses
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| MutationError::ProviderUnavailable("queue exhausted".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_block_wins() {
        let text = "First try:\n```sql\nSELECT 1\n```\nBetter:\n```sql\nSELECT 2;\n```\n";
        assert_eq!(extract_sql(text, Dialect::Postgres).unwrap(), "SELECT 2");
    }

    #[test]
    fn bare_sql_is_accepted() {
        assert_eq!(extract_sql("  select 1 ", Dialect::Postgres).unwrap(), "SELECT 1");
    }

    #[test]
    fn prose_is_rejected() {
        assert_eq!(extract_sql("I would rather not.", Dialect::Postgres), Err(MutationError::Extraction));
    }

    #[test]
    fn fence_without_language() {
        assert_eq!(extract_sql("```\nSELECT 3\n```", Dialect::Postgres).unwrap(), "SELECT 3");
    }
}
