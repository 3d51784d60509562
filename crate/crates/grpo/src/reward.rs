//! Validity-tiered execution reward.
//!
//! A candidate is scored by the first gate it fails: extraction, execution,
//! result equivalence. Only candidates passing all three are scored on
//! latency, through an asymmetric `tanh(ln(T0/T))` curve that amplifies
//! speed-ups by `eta` and leaves slow-downs in `(-1, 0]`.

use serde::{Deserialize, Serialize};

use crate::RewardConfig;

/// What happened to one sampled rewrite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub extraction_ok: bool,
    pub exec_ok: bool,
    /// Only meaningful when `exec_ok`.
    pub equivalent: bool,
    /// Measured latency of the rewrite in seconds; only meaningful when `exec_ok`.
    pub latency: Option<f64>,
    /// Latency of the query being rewritten, in seconds.
    pub baseline_latency: f64,
}

impl CandidateOutcome {
    pub fn extraction_failed(baseline_latency: f64) -> Self {
        Self { extraction_ok: false, exec_ok: false, equivalent: false, latency: None, baseline_latency }
    }

    pub fn exec_failed(baseline_latency: f64) -> Self {
        Self { extraction_ok: true, exec_ok: false, equivalent: false, latency: None, baseline_latency }
    }

    pub fn executed(equivalent: bool, latency: f64, baseline_latency: f64) -> Self {
        Self { extraction_ok: true, exec_ok: true, equivalent, latency: Some(latency), baseline_latency }
    }
}

/// `eta * tanh(ln(t_old / t_new))` for a speed-up, `tanh(ln(t_old / t_new))`
/// otherwise. Range is `(-1, eta)`; identical latencies score exactly 0.
///
/// Both durations must be positive; non-positive values are clamped to the
/// smallest positive `f64`.
pub fn asymmetric_scale(t_new: f64, t_old: f64, eta: f64) -> f64 {
    debug_assert!(t_new > 0.0 && t_old > 0.0, "latencies must be positive");
    let t_new = t_new.max(f64::MIN_POSITIVE);
    let t_old = t_old.max(f64::MIN_POSITIVE);
    if t_new == t_old {
        return 0.0;
    }
    let gain = (t_old / t_new).ln().tanh();
    if t_new < t_old {
        eta * gain
    } else {
        gain
    }
}

/// Scores a candidate against the tiered penalties in `cfg`.
pub fn hierarchical_reward(o: &CandidateOutcome, cfg: &RewardConfig) -> f64 {
    if !o.extraction_ok {
        return cfg.rho_fmt;
    }
    if !o.exec_ok {
        return cfg.rho_exe;
    }
    if !o.equivalent {
        return cfg.rho_sem;
    }
    match o.latency {
        Some(t) => asymmetric_scale(t, o.baseline_latency, cfg.eta),
        // An executed candidate without a latency cannot be ranked; treat it
        // like an execution failure.
        None => cfg.rho_exe,
    }
}
