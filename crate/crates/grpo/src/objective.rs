//! Token-level surrogate objective with a KL penalty:
//!
//! ```text
//! loss = -mean_t[ exp(logratio_t) * adv - kl_coeff * kl_t ]
//! ```
//!
//! `logratio_t` is `log pi_theta - log pi_old` for token `t` and `kl_t` the
//! caller's per-token KL estimate against the reference policy. With
//! `RewardConfig::clip = Some(c)` the ratio term becomes the PPO minimum of the
//! raw and `[1 - c, 1 + c]`-clipped ratio.

use serde::{Deserialize, Serialize};

use crate::{KernelError, Result, RewardConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub loss: f64,
    /// Mean ratio-weighted advantage.
    pub surrogate: f64,
    /// Mean `kl_coeff * kl_t`.
    pub kl_penalty: f64,
}

fn check(token_logratio: &[f64], advantage: f64, token_kl: &[f64]) -> Result<()> {
    if token_logratio.is_empty() {
        return Err(KernelError::Numerical("empty token sequence".into()));
    }
    if token_kl.len() != token_logratio.len() {
        return Err(KernelError::LengthMismatch { what: "token_kl", got: token_kl.len(), expected: token_logratio.len() });
    }
    if !advantage.is_finite() {
        return Err(KernelError::Numerical(format!("non-finite advantage {advantage}")));
    }
    if let Some(bad) = token_logratio.iter().chain(token_kl).find(|v| !v.is_finite()) {
        return Err(KernelError::Numerical(format!("non-finite token input {bad}")));
    }
    Ok(())
}

/// Returns the surrogate for one token and whether the unclipped branch is active.
fn token_surrogate(logratio: f64, advantage: f64, clip: Option<f64>) -> (f64, bool) {
    let ratio = logratio.exp();
    let raw = ratio * advantage;
    match clip {
        None => (raw, true),
        Some(c) => {
            let clipped = ratio.clamp(1.0 - c, 1.0 + c) * advantage;
            if raw <= clipped {
                (raw, true)
            } else {
                (clipped, false)
            }
        }
    }
}

pub fn policy_objective_terms(
    token_logratio: &[f64],
    advantage: f64,
    token_kl: &[f64],
    cfg: &RewardConfig,
) -> Result<ObjectiveTerms> {
    check(token_logratio, advantage, token_kl)?;
    let t = token_logratio.len() as f64;
    let surrogate = token_logratio.iter().map(|&lr| token_surrogate(lr, advantage, cfg.clip).0).sum::<f64>() / t;
    let kl_penalty = cfg.kl_coeff * token_kl.iter().sum::<f64>() / t;
    let loss = -(surrogate - kl_penalty);
    if !loss.is_finite() {
        return Err(KernelError::Numerical(format!("loss overflowed to {loss}")));
    }
    Ok(ObjectiveTerms { loss, surrogate, kl_penalty })
}

/// Analytic `d loss / d logratio_t` for every token.
pub fn policy_objective_grad(
    token_logratio: &[f64],
    advantage: f64,
    token_kl: &[f64],
    cfg: &RewardConfig,
) -> Result<Vec<f64>> {
    check(token_logratio, advantage, token_kl)?;
    let t = token_logratio.len() as f64;
    Ok(token_logratio
        .iter()
        .map(|&lr| {
            let (_, active) = token_surrogate(lr, advantage, cfg.clip);
            if active {
                -(lr.exp() * advantage) / t
            } else {
                0.0
            }
        })
        .collect())
}
