use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which learner drives the platoon leaders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Per-agent actors and local critics plus twin delayed global critics.
    ModifiedMaddpg,
    /// As [`Algorithm::ModifiedMaddpg`] with one local critic per sub-task.
    ModifiedMaddpgTdec,
    /// One centralized actor-critic over the joint observation and action.
    Ddpg,
    /// Per-agent actors and local critics, no global critic.
    Decentralized,
    /// Uniform random raw actions; no learning.
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::ModifiedMaddpg,
        Algorithm::ModifiedMaddpgTdec,
        Algorithm::Ddpg,
        Algorithm::Decentralized,
        Algorithm::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ModifiedMaddpg => "modified_maddpg",
            Algorithm::ModifiedMaddpgTdec => "modified_maddpg_tdec",
            Algorithm::Ddpg => "ddpg",
            Algorithm::Decentralized => "decentralized",
            Algorithm::Random => "random",
        }
    }

    pub fn uses_global_critic(self) -> bool {
        matches!(self, Algorithm::ModifiedMaddpg | Algorithm::ModifiedMaddpgTdec)
    }

    /// Local critics per agent.
    pub fn local_critics(self) -> usize {
        match self {
            Algorithm::ModifiedMaddpg | Algorithm::Decentralized => 1,
            Algorithm::ModifiedMaddpgTdec => 2,
            Algorithm::Ddpg | Algorithm::Random => 0,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            Error::Config(format!("unknown algorithm `{s}`, expected one of {}", names.join(", ")))
        })
    }
}

/// How actions enter the critics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticActionInput {
    /// One-hot subchannel, mode bit and power fraction per agent.
    #[default]
    Decoded,
    /// The actor's raw outputs.
    Raw,
}

/// Learner hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub gamma: f64,
    pub tau: f64,
    /// Actors and local critics train on episodes where `episode % policy_delay == 0`.
    pub policy_delay: usize,
    /// Minibatch updates run after each episode's slot loop.
    pub updates_per_episode: usize,
    pub actor_learning_rate: f64,
    pub critic_learning_rate: f64,
    pub actor_hidden: Vec<usize>,
    pub local_critic_hidden: Vec<usize>,
    pub global_critic_hidden: Vec<usize>,
    /// Std of the clipped Gaussian added to target actions.
    pub smoothing_std: f64,
    pub noise_clip: f64,
    /// Behaviour noise std anneals linearly from the first to the second value.
    pub exploration_std_start: f64,
    pub exploration_std_end: f64,
    /// Leading episodes played with uniform random actions to seed the replay buffer.
    pub warmup_episodes: usize,
    /// Chance that an agent plays a uniform random action in a slot instead
    /// of its noisy policy; anneals linearly from the first to the second value.
    pub random_action_prob_start: f64,
    pub random_action_prob_end: f64,
    pub critic_action_input: CriticActionInput,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 500,
            batch_size: 64,
            buffer_capacity: 50_000,
            gamma: 0.99,
            tau: 0.0005,
            policy_delay: 2,
            updates_per_episode: 1,
            actor_learning_rate: 1e-4,
            critic_learning_rate: 1e-3,
            actor_hidden: vec![1024, 512],
            local_critic_hidden: vec![512, 256],
            global_critic_hidden: vec![1024, 512, 256],
            smoothing_std: 0.2,
            noise_clip: 0.5,
            exploration_std_start: 0.2,
            exploration_std_end: 0.05,
            warmup_episodes: 0,
            random_action_prob_start: 0.0,
            random_action_prob_end: 0.0,
            critic_action_input: CriticActionInput::Decoded,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return fail("train.batch_size must be at least 1".into());
        }
        if self.buffer_capacity < self.batch_size {
            return fail(format!(
                "train.buffer_capacity ({}) is smaller than train.batch_size ({})",
                self.buffer_capacity, self.batch_size
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("train.gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("train.tau must lie in (0, 1], got {}", self.tau));
        }
        if self.policy_delay == 0 {
            return fail("train.policy_delay must be at least 1".into());
        }
        for (name, v) in [
            ("actor_learning_rate", self.actor_learning_rate),
            ("critic_learning_rate", self.critic_learning_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("train.{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("smoothing_std", self.smoothing_std),
            ("noise_clip", self.noise_clip),
            ("exploration_std_start", self.exploration_std_start),
            ("exploration_std_end", self.exploration_std_end),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("train.{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("random_action_prob_start", self.random_action_prob_start),
            ("random_action_prob_end", self.random_action_prob_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("train.{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, layers) in [
            ("actor_hidden", &self.actor_hidden),
            ("local_critic_hidden", &self.local_critic_hidden),
            ("global_critic_hidden", &self.global_critic_hidden),
        ] {
            if layers.is_empty() || layers.contains(&0) {
                return fail(format!("train.{name} needs at least one positive layer width"));
            }
        }
        Ok(())
    }

    /// Behaviour-noise std for `episode` out of `episodes`.
    fn anneal(&self, start: f64, end: f64, episode: usize) -> f64 {
        if self.episodes <= 1 {
            return start;
        }
        let frac = episode.min(self.episodes - 1) as f64 / (self.episodes - 1) as f64;
        start + (end - start) * frac
    }

    pub fn exploration_std(&self, episode: usize) -> f64 {
        self.anneal(self.exploration_std_start, self.exploration_std_end, episode)
    }

    pub fn random_action_prob(&self, episode: usize) -> f64 {
        self.anneal(self.random_action_prob_start, self.random_action_prob_end, episode)
    }

    pub fn trains_local(&self, episode: usize) -> bool {
        episode.is_multiple_of(self.policy_delay)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("maddpg".parse::<Algorithm>().is_err());
    }

    #[test]
    fn exploration_anneals_linearly() {
        let c = TrainConfig {
            episodes: 11,
            ..TrainConfig::default()
        };
        assert_eq!(c.exploration_std(0), 0.2);
        assert!((c.exploration_std(5) - 0.125).abs() < 1e-15);
        assert!((c.exploration_std(10) - 0.05).abs() < 1e-15);
        assert!((c.exploration_std(50) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        TrainConfig::default().validate().unwrap();
        let bad = TrainConfig {
            policy_delay: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            gamma: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            buffer_capacity: 10,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn delayed_schedule() {
        let c = TrainConfig::default();
        assert!(c.trains_local(0));
        assert!(!c.trains_local(1));
        assert!(c.trains_local(2));
    }
}
