use serde::{Deserialize, Serialize};

use crate::{KernelError, Result};

/// Scalar knobs for the execution reward and the anchored advantage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Reward when no SQL could be extracted from the completion.
    pub rho_fmt: f64,
    /// Reward when the extracted SQL fails to execute.
    pub rho_exe: f64,
    /// Reward when the rewrite executes but returns a different result.
    pub rho_sem: f64,
    /// Multiplier on speed-ups; must exceed 1.
    pub eta: f64,
    /// Blend between the relative (0) and absolute (1) advantage terms.
    pub lambda_mix: f64,
    /// Absolute baseline the anchor term is measured against.
    pub baseline_b: f64,
    /// Reward scale used by the anchor term.
    pub scale_s: f64,
    /// Added to the group standard deviation.
    pub epsilon: f64,
    /// KL penalty coefficient in the surrogate objective.
    pub kl_coeff: f64,
    /// Optional PPO-style ratio clip. `None` is the plain unclipped surrogate.
    pub clip: Option<f64>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            rho_fmt: -3.0,
            rho_exe: -2.5,
            rho_sem: -1.5,
            eta: 3.0,
            lambda_mix: 0.5,
            baseline_b: 0.0,
            scale_s: 3.0,
            epsilon: 1e-8,
            kl_coeff: 0.04,
            clip: None,
        }
    }
}

impl RewardConfig {
    /// Checks the ordering and positivity constraints the kernels rely on.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.rho_fmt,
            self.rho_exe,
            self.rho_sem,
            self.eta,
            self.lambda_mix,
            self.baseline_b,
            self.scale_s,
            self.epsilon,
            self.kl_coeff,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::InvalidConfig("all fields must be finite".into()));
        }
        if !(self.rho_fmt < self.rho_exe && self.rho_exe < self.rho_sem && self.rho_sem < 0.0) {
            return Err(KernelError::InvalidConfig(format!(
                "penalties must satisfy rho_fmt < rho_exe < rho_sem < 0, got {} / {} / {}",
                self.rho_fmt, self.rho_exe, self.rho_sem
            )));
        }
        if self.eta <= 1.0 {
            return Err(KernelError::InvalidConfig(format!("eta must be > 1, got {}", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.lambda_mix) {
            return Err(KernelError::InvalidConfig(format!(
                "lambda_mix must lie in [0, 1], got {}",
                self.lambda_mix
            )));
        }
        if self.scale_s <= 0.0 {
            return Err(KernelError::InvalidConfig(format!("scale_s must be > 0, got {}", self.scale_s)));
        }
        if self.epsilon <= 0.0 {
            return Err(KernelError::InvalidConfig(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.kl_coeff < 0.0 {
            return Err(KernelError::InvalidConfig(format!("kl_coeff must be >= 0, got {}", self.kl_coeff)));
        }
        if let Some(c) = self.clip {
            if !(c.is_finite() && c > 0.0) {
                return Err(KernelError::InvalidConfig(format!("clip must be a positive finite value, got {c}")));
            }
        }
        Ok(())
    }
}
