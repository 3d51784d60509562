//! Anchored group advantage.
//!
//! For a group of `G` rewards with mean `mu` and population standard
//! deviation `sd`:
//!
//! ```text
//! anchor_i = (1 - lambda) * (r_i - mu) / (sd + eps) + lambda * (r_i - b) / S * sqrt(G)
//! adv_i    = anchor_i - mean(anchor)
//! ```
//!
//! After centring the baseline `b` cancels and the result collapses to
//! `(r_i - mu) * kappa` with `kappa = (1 - lambda) / (sd + eps) + lambda * sqrt(G) / S`.
//! The implementation evaluates the two-step form literally; the collapsed
//! form is checked in the tests.

use serde::{Deserialize, Serialize};

use crate::{KernelError, Result, RewardConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean: f64,
    /// Population standard deviation (divides by `G`).
    pub std: f64,
}

pub fn group_stats(rewards: &[f64]) -> GroupStats {
    if rewards.is_empty() {
        return GroupStats { mean: 0.0, std: 0.0 };
    }
    let g = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / g;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / g;
    GroupStats { mean, std: var.sqrt() }
}

fn check_group(rewards: &[f64]) -> Result<()> {
    if rewards.len() < 2 {
        return Err(KernelError::GroupTooSmall(rewards.len()));
    }
    if let Some(bad) = rewards.iter().find(|r| !r.is_finite()) {
        return Err(KernelError::Numerical(format!("non-finite reward {bad}")));
    }
    Ok(())
}

/// Plain within-group z-score, `(r_i - mu) / (sd + eps)`.
pub fn zscore_advantage(rewards: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    check_group(rewards)?;
    let GroupStats { mean, std } = group_stats(rewards);
    Ok(rewards.iter().map(|r| (r - mean) / (std + epsilon)).collect())
}

/// Anchored advantage for a single group. Requires at least two rewards.
pub fn anchored_advantage(rewards: &[f64], cfg: &RewardConfig) -> Result<Vec<f64>> {
    check_group(rewards)?;
    let g = rewards.len() as f64;
    let GroupStats { mean, std } = group_stats(rewards);
    let lambda = cfg.lambda_mix;
    let sqrt_g = g.sqrt();

    let anchors: Vec<f64> = rewards
        .iter()
        .map(|r| {
            let relative = (r - mean) / (std + cfg.epsilon);
            let absolute = (r - cfg.baseline_b) / cfg.scale_s * sqrt_g;
            (1.0 - lambda) * relative + lambda * absolute
        })
        .collect();
    let centre = anchors.iter().sum::<f64>() / g;
    Ok(anchors.into_iter().map(|a| a - centre).collect())
}

/// Anchored advantage over many groups packed back to back in `rewards`.
///
/// `group_sizes` partitions `rewards`; the output has the same layout. Groups
/// are processed in parallel when the `parallel` feature is enabled.
pub fn anchored_advantage_batch(rewards: &[f64], group_sizes: &[usize], cfg: &RewardConfig) -> Result<Vec<f64>> {
    let total: usize = group_sizes.iter().sum();
    if total != rewards.len() {
        return Err(KernelError::LengthMismatch { what: "rewards", got: rewards.len(), expected: total });
    }
    let mut groups = Vec::with_capacity(group_sizes.len());
    let mut start = 0;
    for &len in group_sizes {
        groups.push(&rewards[start..start + len]);
        start += len;
    }

    #[cfg(feature = "parallel")]
    let per_group: Vec<Result<Vec<f64>>> = {
        use rayon::prelude::*;
        groups.par_iter().map(|g| anchored_advantage(g, cfg)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_group: Vec<Result<Vec<f64>>> = groups.iter().map(|g| anchored_advantage(g, cfg)).collect();

    let mut out = Vec::with_capacity(rewards.len());
    for adv in per_group {
        out.extend(adv?);
    }
    Ok(out)
}

/// Sequential reference for [`anchored_advantage_batch`], kept for benchmarks.
pub fn anchored_advantage_batch_seq(rewards: &[f64], group_sizes: &[usize], cfg: &RewardConfig) -> Result<Vec<f64>> {
    let total: usize = group_sizes.iter().sum();
    if total != rewards.len() {
        return Err(KernelError::LengthMismatch { what: "rewards", got: rewards.len(), expected: total });
    }
    let mut out = Vec::with_capacity(rewards.len());
    let mut start = 0;
    for &len in group_sizes {
        out.extend(anchored_advantage(&rewards[start..start + len], cfg)?);
        start += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_group_matches_hand_arithmetic() {
        // mu = -2.375, sd = sqrt(1.171875), kappa = 0.5 / sd + 0.5 * 2 / 3
        let adv = anchored_advantage(&[-3.0, -3.0, -3.0, -0.5], &RewardConfig::default()).unwrap();
        let expected = [-0.497_007, -0.497_007, -0.497_007, 1.491_021];
        for (a, e) in adv.iter().zip(expected) {
            assert!((a - e).abs() < 1e-5, "{adv:?}");
        }
        let z = zscore_advantage(&[-3.0, -3.0, -3.0, -0.5], 1e-8).unwrap();
        assert!((z[3] - 1.732_050_8).abs() < 1e-6);
        assert!(adv[3] < z[3]);
    }

    #[test]
    fn lambda_zero_is_zscore() {
        let r = [0.3, -1.5, 2.0, 0.0, -3.0];
        let cfg = RewardConfig { lambda_mix: 0.0, ..Default::default() };
        let a = anchored_advantage(&r, &cfg).unwrap();
        let z = zscore_advantage(&r, cfg.epsilon).unwrap();
        for (x, y) in a.iter().zip(&z) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_rewards_give_zero() {
        let a = anchored_advantage(&[1.2; 6], &RewardConfig::default()).unwrap();
        assert!(a.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn singleton_group_is_rejected() {
        assert_eq!(anchored_advantage(&[1.0], &RewardConfig::default()), Err(KernelError::GroupTooSmall(1)));
        assert_eq!(anchored_advantage(&[], &RewardConfig::default()), Err(KernelError::GroupTooSmall(0)));
    }

    #[test]
    fn non_finite_reward_is_rejected() {
        assert!(matches!(
            anchored_advantage(&[1.0, f64::NAN], &RewardConfig::default()),
            Err(KernelError::Numerical(_))
        ));
    }

    #[test]
    fn batch_matches_per_group() {
        let cfg = RewardConfig::default();
        let rewards = [-3.0, -3.0, -3.0, -0.5, 1.0, 2.0, 0.5];
        let sizes = [4, 3];
        let batch = anchored_advantage_batch(&rewards, &sizes, &cfg).unwrap();
        let seq = anchored_advantage_batch_seq(&rewards, &sizes, &cfg).unwrap();
        assert_eq!(batch, seq);
        assert_eq!(&batch[..4], anchored_advantage(&rewards[..4], &cfg).unwrap().as_slice());
        assert!(anchored_advantage_batch(&rewards, &[4, 4], &cfg).is_err());
    }
}
