//! Monte Carlo tree search that grows slower, result-equivalent variants of
//! a seed query.
//!
//! Each iteration selects a node by UCT, expands it through the mutation
//! providers (dispatching every child's execution at once), scores one node
//! against the seed and backpropagates that score to the root.

use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::degrade::{applicable_strategies, StrategyHistory};
use crate::exec::engine::Database;
use crate::exec::{validity, Dispatcher, ExecutionOutcome, Ticket, WaitError};
use crate::mutate::{choose_mode, choose_strategy, MutationMode, MutationProvider, MutationRequest, Router};
use crate::sql::{normalize_sql, Dialect, SqlTree};
use crate::ted::structural_score;

pub const CHECKPOINT_FORMAT: &str = "slowsql-search-tree";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MctsConfig {
    pub exploration_c: f64,
    pub lambda_t: f64,
    pub lambda_s: f64,
    pub alpha_log: f64,
    pub rho_invalid: f64,
    pub gamma_timeout: f64,
    pub iterations: usize,
    pub fanout: usize,
    pub rule_prob: f64,
    pub rng_seed: u64,
    /// Extra wait beyond the executor timeout before a pending child is
    /// scored as a timeout.
    pub await_slack_seconds: f64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            exploration_c: 1.0,
            lambda_t: 0.7,
            lambda_s: 0.3,
            alpha_log: 1.0,
            rho_invalid: -1.0,
            gamma_timeout: 0.7,
            iterations: 100,
            fanout: 3,
            rule_prob: 0.5,
            rng_seed: 0,
            await_slack_seconds: 30.0,
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.exploration_c > 0.0) {
            return Err("exploration_c must be positive".into());
        }
        if self.fanout == 0 {
            return Err("fanout must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.rule_prob) {
            return Err("rule_prob must lie in [0, 1]".into());
        }
        if self.lambda_t < 0.0 || self.lambda_s < 0.0 {
            return Err("reward weights must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub sql: String,
    /// Cumulative reward.
    pub q: f64,
    /// Visit count.
    pub n: u64,
    pub outcome: Option<ExecutionOutcome>,
    pub phi: u8,
    pub history: StrategyHistory,
    pub terminal: bool,
    pub expanded: bool,
    /// This node's own simulation reward, once scored.
    pub reward: Option<f64>,
    pub strategy_id: Option<String>,
    pub provider_id: Option<String>,
    pub depth: usize,
}

impl SearchNode {
    fn new(id: usize, parent: Option<usize>, sql: String, history: StrategyHistory, depth: usize) -> Self {
        SearchNode {
            id,
            parent,
            children: Vec::new(),
            sql,
            q: 0.0,
            n: 0,
            outcome: None,
            phi: 0,
            history,
            terminal: false,
            expanded: false,
            reward: None,
            strategy_id: None,
            provider_id: None,
            depth,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.q / self.n as f64
        }
    }
}

/// A search tree plus everything needed to resume it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTree {
    pub format: String,
    pub version: u32,
    pub backend_id: String,
    pub dialect: Dialect,
    pub config: MctsConfig,
    pub seed_latency: f64,
    pub seed_hash: u64,
    pub iterations_done: usize,
    /// Set when every node became terminal before the budget ran out.
    pub halted: bool,
    pub nodes: Vec<SearchNode>,
}

impl SearchTree {
    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    pub fn seed_sql(&self) -> &str {
        &self.nodes[0].sql
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SearchError> {
        let t: SearchTree = serde_json::from_str(text).map_err(|e| SearchError::Checkpoint(e.to_string()))?;
        if t.format != CHECKPOINT_FORMAT || t.version != CHECKPOINT_VERSION {
            return Err(SearchError::Checkpoint(format!("unsupported checkpoint {} v{}", t.format, t.version)));
        }
        if t.nodes.is_empty() {
            return Err(SearchError::Checkpoint("checkpoint has no nodes".into()));
        }
        Ok(t)
    }

    /// Latency relative to the seed, for a node with a successful outcome.
    pub fn speedup_ratio(&self, node: &SearchNode) -> Option<f64> {
        let o = node.outcome.as_ref().filter(|o| o.is_ok())?;
        Some(o.latency_seconds / self.seed_latency.max(f64::MIN_POSITIVE))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("seed query is not usable: {0}")]
    SeedInvalid(String),
    #[error("every node is terminal")]
    AllTerminal,
    #[error("backend transport failure: {0}")]
    Transport(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// UCT score of a child; infinite for an unvisited child.
pub fn uct_score(child_q: f64, child_n: u64, parent_n: u64, c: f64) -> f64 {
    if child_n == 0 {
        return f64::INFINITY;
    }
    let n = child_n as f64;
    child_q / n + c * (2.0 * (parent_n.max(1) as f64).ln() / n).sqrt()
}

/// Index into `children` of the child to descend into: the first
/// unvisited one, else the highest score with ties to the lowest index.
pub fn pick_child(children: &[(f64, u64)], parent_n: u64, c: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &(q, n)) in children.iter().enumerate() {
        let s = uct_score(q, n, parent_n, c);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Walks from the root to the node the next iteration works on: an
/// unexpanded node, or an expanded one whose children are all terminal
/// (which is then re-scored without expansion).
pub fn uct_select(tree: &SearchTree, c: f64) -> Result<usize, SearchError> {
    if tree.nodes[0].terminal {
        return Err(SearchError::AllTerminal);
    }
    let mut cur = 0;
    loop {
        let node = &tree.nodes[cur];
        if !node.expanded {
            return Ok(cur);
        }
        let open: Vec<usize> = node.children.iter().copied().filter(|&k| !tree.nodes[k].terminal).collect();
        if open.is_empty() {
            return Ok(cur);
        }
        let stats: Vec<(f64, u64)> = open.iter().map(|&k| (tree.nodes[k].q, tree.nodes[k].n)).collect();
        let i = pick_child(&stats, node.n, c).expect("non-empty");
        cur = open[i];
    }
}

/// Adds `reward` to every node from `node` up to the root.
pub fn backpropagate(tree: &mut SearchTree, node: usize, reward: f64) {
    let mut cur = Some(node);
    while let Some(i) = cur {
        let n = &mut tree.nodes[i];
        n.n += 1;
        n.q += reward;
        cur = n.parent;
    }
}

/// Reward for one evaluated node. Timeouts are checked first and keep the
/// node open; any other outcome without a matching result is invalid.
pub fn simulate_reward(
    outcome: &ExecutionOutcome,
    seed_hash: u64,
    seed_latency: f64,
    structural: f64,
    cfg: &MctsConfig,
) -> f64 {
    if outcome.is_timeout() {
        return cfg.gamma_timeout;
    }
    if validity(outcome, seed_hash) == 0 {
        return cfg.rho_invalid;
    }
    let ratio = outcome.latency_seconds.max(1e-12) / seed_latency.max(1e-12);
    cfg.lambda_t * (cfg.alpha_log * ratio.ln()).tanh() + cfg.lambda_s * structural
}

/// Everything a search needs besides the tree itself.
pub struct Searcher {
    pub dispatcher: Arc<Dispatcher>,
    pub schema: Arc<Database>,
    pub router: Arc<Router>,
    pub dialect: Dialect,
    pub config: MctsConfig,
}

impl Searcher {
    fn bound(&self) -> Duration {
        Duration::from_secs_f64(self.dispatcher.config().timeout_seconds + self.config.await_slack_seconds)
    }

    /// Executes the seed and builds a root-only tree.
    pub fn start(&self, seed_sql: &str) -> Result<SearchTree, SearchError> {
        self.config.validate().map_err(SearchError::Config)?;
        SqlTree::parse(seed_sql, self.dialect).map_err(|e| SearchError::SeedInvalid(e.to_string()))?;
        let outcome = self.dispatcher.execute(seed_sql).map_err(|e| SearchError::Transport(e.0))?;
        if !outcome.is_ok() {
            let why = outcome.error_message.clone().unwrap_or_else(|| format!("{:?}", outcome.status));
            return Err(SearchError::SeedInvalid(why));
        }
        if outcome.row_count == Some(0) {
            return Err(SearchError::SeedInvalid("seed returns no rows".into()));
        }
        let mut root = SearchNode::new(0, None, seed_sql.to_string(), StrategyHistory::new(), 0);
        root.phi = 1;
        root.reward = Some(0.0);
        root.outcome = Some(outcome.clone());
        Ok(SearchTree {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            backend_id: self.dispatcher.backend().id(),
            dialect: self.dialect,
            config: self.config.clone(),
            seed_latency: outcome.latency_seconds,
            seed_hash: outcome.result_hash.expect("ok outcome has a hash"),
            iterations_done: 0,
            halted: false,
            nodes: vec![root],
        })
    }

    pub fn run(&self, seed_sql: &str) -> Result<SearchTree, SearchError> {
        let mut tree = self.start(seed_sql)?;
        self.resume(&mut tree)?;
        Ok(tree)
    }

    /// Continues until `config.iterations` iterations have run in total.
    pub fn resume(&self, tree: &mut SearchTree) -> Result<(), SearchError> {
        while tree.iterations_done < self.config.iterations && !tree.halted {
            self.iterate(tree)?;
        }
        Ok(())
    }

    /// One select / expand / simulate / backpropagate cycle.
    pub fn iterate(&self, tree: &mut SearchTree) -> Result<(), SearchError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.rng_seed);
        rng.set_stream(tree.iterations_done as u64);
        let leaf = match uct_select(tree, self.config.exploration_c) {
            Ok(l) => l,
            Err(SearchError::AllTerminal) => {
                tree.halted = true;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let target = if (leaf != 0 && tree.nodes[leaf].n == 0) || tree.nodes[leaf].expanded {
            leaf
        } else {
            let tickets = self.expand(tree, leaf, &mut rng);
            match tickets.into_iter().next() {
                Some((child, ticket)) => {
                    self.evaluate(tree, child, ticket)?;
                    child
                }
                None => {
                    tree.nodes[leaf].terminal = true;
                    leaf
                }
            }
        };
        if tree.nodes[target].reward.is_none() {
            self.evaluate(tree, target, None)?;
        }
        let reward = tree.nodes[target].reward.expect("evaluated");
        backpropagate(tree, target, reward);
        tree.iterations_done += 1;
        Ok(())
    }

    /// Creates up to `fanout` children of `leaf` and dispatches their
    /// execution. Returns the new node ids with their tickets.
    pub fn expand(&self, tree: &mut SearchTree, leaf: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, Option<Ticket>)> {
        tree.nodes[leaf].expanded = true;
        let parent_sql = tree.nodes[leaf].sql.clone();
        let history = tree.nodes[leaf].history.clone();
        let Ok(parent_tree) = SqlTree::parse(&parent_sql, self.dialect) else { return Vec::new() };
        let ddl = self.schema.schema_ddl();
        let rule_prob = if self.router.has_free_form() { self.config.rule_prob } else { 1.0 };
        let mut available = applicable_strategies(&parent_tree, &history, &self.schema);
        let mut seen = vec![normalize_sql(&parent_sql, self.dialect)];
        let mut out = Vec::new();
        for _ in 0..self.config.fanout {
            let mode_seed: u64 = rng.gen();
            let apply_seed: u64 = rng.gen();
            let req = match choose_mode(&history, &available, mode_seed, rule_prob) {
                MutationMode::RuleGuided => {
                    let s = choose_strategy(&history, &available, mode_seed).expect("mode implies a strategy");
                    available.retain(|a| a.id != s.id);
                    MutationRequest::rule_guided(&parent_sql, tree.seed_sql(), &ddl, s.id, apply_seed)
                }
                MutationMode::FreeForm => MutationRequest::free_form(&parent_sql, tree.seed_sql(), &ddl, apply_seed),
            };
            let Ok(res) = self.router.mutate(&req) else { continue };
            if SqlTree::parse(&res.candidate_sql, self.dialect).is_err() {
                continue;
            }
            let key = normalize_sql(&res.candidate_sql, self.dialect);
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
            let id = tree.nodes.len();
            let child_history = match &res.strategy_id {
                Some(s) => history.with(s),
                None => history.clone(),
            };
            let mut node = SearchNode::new(id, Some(leaf), res.candidate_sql, child_history, tree.nodes[leaf].depth + 1);
            node.strategy_id = res.strategy_id;
            node.provider_id = Some(res.provider_id);
            let ticket = self.dispatcher.dispatch(&node.sql).ok();
            tree.nodes.push(node);
            tree.nodes[leaf].children.push(id);
            out.push((id, ticket));
        }
        out
    }

    /// Awaits the node's outcome and stores its validity and reward.
    fn evaluate(&self, tree: &mut SearchTree, id: usize, ticket: Option<Ticket>) -> Result<(), SearchError> {
        let sql = tree.nodes[id].sql.clone();
        let outcome = match ticket.map(|t| self.dispatcher.wait(t, self.bound())) {
            Some(Ok(o)) => o,
            Some(Err(WaitError::TimedOut)) => ExecutionOutcome::timeout(self.dispatcher.config().timeout_seconds),
            Some(Err(WaitError::Transport(m))) => return Err(SearchError::Transport(m)),
            Some(Err(WaitError::Unknown)) | None => {
                self.dispatcher.execute(&sql).map_err(|e| SearchError::Transport(e.0))?
            }
        };
        let structural = self.structural(tree, id);
        let reward = simulate_reward(&outcome, tree.seed_hash, tree.seed_latency, structural, &self.config);
        let node = &mut tree.nodes[id];
        node.phi = validity(&outcome, tree.seed_hash);
        node.terminal |= node.phi == 0 && !outcome.is_timeout();
        node.reward = Some(reward);
        node.outcome = Some(outcome);
        Ok(())
    }

    fn structural(&self, tree: &SearchTree, id: usize) -> f64 {
        let parse = |s: &str| SqlTree::parse(s, self.dialect).ok();
        let node = &tree.nodes[id];
        let parent = node.parent.map_or(node.sql.as_str(), |p| tree.nodes[p].sql.as_str());
        match (parse(&node.sql), parse(parent), parse(tree.seed_sql())) {
            (Some(v), Some(p), Some(s)) => structural_score(&v, &p, &s),
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unvisited_first_then_lowest_index() {
        assert_eq!(pick_child(&[(1.0, 1), (0.0, 0), (0.0, 0)], 3, 1.0), Some(1));
        assert_eq!(pick_child(&[(1.0, 2), (1.0, 2)], 4, 1.0), Some(0));
        assert_eq!(pick_child(&[], 4, 1.0), None);
    }

    #[test]
    fn exploration_terms() {
        let a = uct_score(5.0, 5, 10, 1.0) - 1.0;
        let b = uct_score(1.0, 1, 10, 1.0) - 1.0;
        assert!((a - 0.960).abs() < 1e-3, "{a}");
        assert!((b - 2.146).abs() < 1e-3, "{b}");
    }
}
