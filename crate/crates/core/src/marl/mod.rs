//! Multi-agent actor-critic training: modified MADDPG with twin delayed
//! global critics, its task-decomposed variant, and the baselines.

mod config;
mod learner;
mod replay;
mod trainer;
mod updates;

pub use config::{Algorithm, CriticActionInput, TrainConfig};
pub use learner::{
    agent_block, update_actor, update_global_critics, update_local_critics, AgentNets, Diagnostics, GlobalCritics,
    Learner, TrackedNet, UpdateReport,
};
pub use replay::{Minibatch, ReplayBuffer, Transition};
pub use trainer::{run_baseline, run_training, EpisodeRecord, Trainer, TrainingLog};
pub use updates::{
    critic_regression_step, hstack, invert_gradients, mse_loss, policy_gradient, smoothed_target_actions,
    td3_global_target, td_target, ActionCodec, ClippedNoise, GlobalTerm, QFunction, RegressionStep,
};
