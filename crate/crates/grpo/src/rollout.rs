//! Two-stage rollout budgeting.
//!
//! Every prompt first gets `pilot_size` rollouts. The pilot statistics give
//! each prompt a weight
//!
//! ```text
//! W_i = w_fail * [max pilot reward < rho_sem] + w_entropy * H~_i + w_var * Var~_i
//! ```
//!
//! where `H~` and `Var~` are min-max normalised across the batch (a batch with
//! no spread normalises to 0). The remaining budget is then apportioned in
//! proportion to `W_i` with the largest-remainder method.

use serde::{Deserialize, Serialize};

use crate::{KernelError, Result, RewardConfig};

/// Statistics collected from one prompt's pilot rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotStats {
    pub max_reward: f64,
    /// Token-level average policy entropy over the pilot completions.
    pub entropy: f64,
    pub reward_variance: f64,
}

impl PilotStats {
    /// Builds pilot stats from the raw pilot rewards (population variance).
    pub fn from_rewards(rewards: &[f64], entropy: f64) -> Self {
        let n = rewards.len().max(1) as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        let max_reward = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { max_reward, entropy, reward_variance: var }
    }
}

/// Mean per-token Shannon entropy (nats) of a sequence of next-token
/// distributions. Each inner slice is a probability vector.
pub fn mean_token_entropy(token_probs: &[Vec<f64>]) -> f64 {
    if token_probs.is_empty() {
        return 0.0;
    }
    let total: f64 = token_probs
        .iter()
        .map(|p| p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum::<f64>())
        .sum();
    total / token_probs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationWeights {
    pub w_fail: f64,
    pub w_entropy: f64,
    pub w_var: f64,
}

impl Default for AggregationWeights {
    fn default() -> Self {
        Self { w_fail: 1.0 / 3.0, w_entropy: 1.0 / 3.0, w_var: 1.0 / 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutPlan {
    pub pilot_size: usize,
    pub total_budget: usize,
    pub weights: Vec<f64>,
    /// Extra rollouts per prompt on top of the pilot.
    pub allocations: Vec<usize>,
}

impl RolloutPlan {
    /// Pilot plus adaptive rollouts for each prompt.
    pub fn per_prompt_total(&self) -> Vec<usize> {
        self.allocations.iter().map(|a| a + self.pilot_size).collect()
    }
}

fn min_max(values: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    move |x| if spread > 0.0 && spread.is_finite() { (x - lo) / spread } else { 0.0 }
}

/// Allocation weight per prompt.
pub fn rollout_weights(pilot: &[PilotStats], cfg: &RewardConfig, w: &AggregationWeights) -> Vec<f64> {
    let norm_entropy = min_max(pilot.iter().map(|p| p.entropy));
    let norm_var = min_max(pilot.iter().map(|p| p.reward_variance));
    pilot
        .iter()
        .map(|p| {
            let failed = if p.max_reward < cfg.rho_sem { 1.0 } else { 0.0 };
            w.w_fail * failed + w.w_entropy * norm_entropy(p.entropy) + w.w_var * norm_var(p.reward_variance)
        })
        .collect()
}

/// Splits `total_budget - prompts * pilot_size` across prompts in proportion
/// to `weights`. Ties in the remainder go to the lower index. All-zero weights
/// split uniformly.
pub fn allocate_budget(weights: &[f64], total_budget: usize, pilot_size: usize) -> Result<RolloutPlan> {
    let prompts = weights.len();
    let required = prompts * pilot_size;
    if total_budget < required {
        return Err(KernelError::InsufficientBudget { prompts, pilot: pilot_size, required, total: total_budget });
    }
    if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(KernelError::Numerical(format!("weights must be finite and non-negative, got {bad}")));
    }
    let remaining = total_budget - required;
    if prompts == 0 {
        if remaining > 0 {
            return Err(KernelError::Numerical("no prompts to allocate a non-zero budget to".into()));
        }
        return Ok(RolloutPlan { pilot_size, total_budget, weights: Vec::new(), allocations: Vec::new() });
    }

    let sum: f64 = weights.iter().sum();
    let shares: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| w / sum).collect()
    } else {
        vec![1.0 / prompts as f64; prompts]
    };

    let quotas: Vec<f64> = shares.iter().map(|s| s * remaining as f64).collect();
    let mut allocations: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = allocations.iter().sum();
    // Floating error can push the floors over budget by a unit; trim from the
    // smallest remainders first.
    let mut order: Vec<usize> = (0..prompts).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    if assigned <= remaining {
        for &i in order.iter().cycle().take(remaining - assigned) {
            allocations[i] += 1;
        }
    } else {
        let mut excess = assigned - remaining;
        for &i in order.iter().rev() {
            if excess == 0 {
                break;
            }
            if allocations[i] > 0 {
                allocations[i] -= 1;
                excess -= 1;
            }
        }
    }

    Ok(RolloutPlan { pilot_size, total_budget, weights: weights.to_vec(), allocations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_three_prompt_weights() {
        let cfg = RewardConfig::default();
        let pilot = [
            PilotStats { max_reward: -2.5, entropy: 2.0, reward_variance: 0.0 },
            PilotStats { max_reward: 0.4, entropy: 0.5, reward_variance: 1.0 },
            PilotStats { max_reward: 0.1, entropy: 0.5, reward_variance: 0.0 },
        ];
        let w = rollout_weights(&pilot, &cfg, &AggregationWeights::default());
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!(w[2].abs() < 1e-12);
    }

    #[test]
    fn identical_stats_give_equal_weights() {
        let p = PilotStats { max_reward: 0.0, entropy: 1.0, reward_variance: 0.3 };
        let w = rollout_weights(&[p; 4], &RewardConfig::default(), &AggregationWeights::default());
        assert!(w.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn failure_indicator_is_strict() {
        let cfg = RewardConfig::default();
        let at = PilotStats { max_reward: cfg.rho_sem, entropy: 0.0, reward_variance: 0.0 };
        let below = PilotStats { max_reward: cfg.rho_sem - 1e-9, ..at };
        let w = rollout_weights(&[at, below], &cfg, &AggregationWeights::default());
        assert_eq!(w[0], 0.0);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn worked_allocation() {
        let plan = allocate_budget(&[2.0 / 3.0, 1.0 / 3.0, 0.0], 12 + 3 * 2, 2).unwrap();
        assert_eq!(plan.allocations, vec![8, 4, 0]);
        assert_eq!(plan.per_prompt_total(), vec![10, 6, 2]);
    }

    #[test]
    fn zero_remaining_and_zero_weights() {
        assert_eq!(allocate_budget(&[1.0, 2.0], 4, 2).unwrap().allocations, vec![0, 0]);
        assert_eq!(allocate_budget(&[0.0, 0.0, 0.0], 7, 0).unwrap().allocations, vec![3, 2, 2]);
    }

    #[test]
    fn too_small_budget() {
        assert!(matches!(allocate_budget(&[1.0, 1.0], 3, 2), Err(KernelError::InsufficientBudget { required: 4, .. })));
    }

    #[test]
    fn pilot_stats_from_rewards() {
        let p = PilotStats::from_rewards(&[-3.0, -1.0], 0.7);
        assert_eq!(p.max_reward, -1.0);
        assert_eq!(p.reward_variance, 1.0);
        assert_eq!(p.entropy, 0.7);
    }

    #[test]
    fn entropy_of_uniform_pair_is_ln2() {
        let h = mean_token_entropy(&[vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert!((h - std::f64::consts::LN_2 / 2.0).abs() < 1e-12);
    }
}
