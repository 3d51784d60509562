//! Numeric kernels for execution-grounded group policy optimisation of SQL
//! rewriters.
//!
//! Everything in this crate is a deterministic pure function over flat
//! numeric inputs. Nothing here runs a model: log-probabilities, KL values and
//! entropies are supplied by whatever training loop consumes the kernel.
//!
//! * [`reward`]: the validity-tiered execution reward and its asymmetric
//!   latency scaling.
//! * [`advantage`]: anchored group advantage (relative z-score blended with an
//!   absolute baseline term, then re-centred).
//! * [`rollout`]: pilot-statistics weighting and proportional rollout budget
//!   apportionment.
//! * [`objective`]: per-token surrogate loss with KL penalty, plus its
//!   analytic gradient.

pub mod advantage;
pub mod config;
pub mod error;
pub mod objective;
pub mod reward;
pub mod rollout;

pub use advantage::{anchored_advantage, anchored_advantage_batch, anchored_advantage_batch_seq, group_stats, zscore_advantage, GroupStats};
pub use config::RewardConfig;
pub use error::KernelError;
pub use objective::{policy_objective_grad, policy_objective_terms, ObjectiveTerms};
pub use reward::{asymmetric_scale, hierarchical_reward, CandidateOutcome};
pub use rollout::{allocate_budget, mean_token_entropy, rollout_weights, AggregationWeights, PilotStats, RolloutPlan};

pub type Result<T> = std::result::Result<T, KernelError>;
