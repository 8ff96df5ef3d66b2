//! Episode loop: act, store, learn.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Algorithm, TrainConfig};
use super::learner::{Diagnostics, Learner};
use super::replay::{ReplayBuffer, Transition};
use super::updates::ClippedNoise;
use crate::env::{EnvConfig, EnvState};
use crate::error::Result;
use crate::reward::{evaluate, RewardWeights};

const ENV_STREAM: u64 = 0;
const AGENT_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;

/// Per-episode aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Mean over agents and slots of the holistic local reward.
    pub mean_local_reward: f64,
    /// Slot-mean local reward of each agent.
    pub local_rewards: Vec<f64>,
    /// Agent- and slot-mean CAM task reward.
    pub task_cam_reward: f64,
    /// Agent- and slot-mean AoI task reward.
    pub task_aoi_reward: f64,
    pub global_reward: f64,
    /// Mean slot-start AoI over agents and slots, seconds.
    pub mean_aoi_s: f64,
    /// Fraction of platoons whose CAM payload completed within the episode.
    pub cam_delivered_frac: f64,
    /// Every platoon delivered its CAM payload.
    pub cam_delivered: bool,
    pub mean_power_w: f64,
    /// Not part of the reproducible output.
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
    pub diagnostics: Diagnostics,
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One training run. The environment draws from its own RNG stream, so every
/// algorithm sees the same channel and mobility sequence under one seed
/// (the behaviour policy only changes the environment through actions).
pub struct Trainer {
    env: EnvState,
    learner: Learner,
    buffer: ReplayBuffer,
    train: TrainConfig,
    weights: RewardWeights,
    env_rng: ChaCha8Rng,
    agent_rng: ChaCha8Rng,
    diagnostics: Diagnostics,
    episode: usize,
}

impl Trainer {
    pub fn new(
        algorithm: Algorithm,
        env: EnvConfig,
        train: TrainConfig,
        weights: RewardWeights,
        seed: u64,
    ) -> Result<Self> {
        env.validate()?;
        train.validate()?;
        weights.validate()?;
        let mut env_rng = stream(seed, ENV_STREAM);
        let mut init_rng = stream(seed, INIT_STREAM);
        let learner = Learner::new(algorithm, &env, &train, &mut init_rng)?;
        Ok(Trainer {
            env: EnvState::init_episode(env, &mut env_rng)?,
            learner,
            buffer: ReplayBuffer::new(train.buffer_capacity),
            train,
            weights,
            env_rng,
            agent_rng: stream(seed, AGENT_STREAM),
            diagnostics: Diagnostics::default(),
            episode: 0,
        })
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn env(&self) -> &EnvState {
        &self.env
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    /// Episodes completed so far.
    pub fn episodes_run(&self) -> usize {
        self.episode
    }

    /// Play one episode with exploration, then run the episode's updates.
    pub fn run_episode(&mut self) -> Result<EpisodeRecord> {
        let started = Instant::now();
        let episode = self.episode;
        if episode > 0 {
            self.env.reset_episode(&mut self.env_rng)?;
        }
        let config = self.env.config().clone();
        let p = config.num_platoons;
        let noise = ClippedNoise {
            std: self.train.exploration_std(episode),
            clip: self.train.noise_clip,
        };

        let mut local = vec![0.0; p];
        let (mut task_cam, mut task_aoi, mut global, mut aoi, mut power) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut slots = 0usize;
        let mut states = self.env.joint_features();
        while !self.env.is_done() {
            let actions = if episode < self.train.warmup_episodes {
                self.learner.random_actions(&mut self.agent_rng)
            } else {
                self.learner.act_mixed(
                    &states,
                    noise,
                    self.train.random_action_prob(episode),
                    &mut self.agent_rng,
                )?
            };
            let outcome = self.env.step(&actions, &mut self.env_rng)?;
            let rewards = evaluate(self.env.platoons(), &outcome.links, &config, &self.weights)?;
            let next_states = self.env.joint_features();

            for (j, (r, link)) in rewards.iter().zip(&outcome.links).enumerate() {
                local[j] += r.local;
                task_cam += r.task_cam;
                task_aoi += r.task_aoi;
                aoi += link.aoi_before_s;
                power += link.action.power_w;
            }
            global += rewards[0].global;
            slots += 1;

            let transition = Transition {
                states,
                actions: self.learner.encode_joint(&actions),
                local_rewards: rewards.iter().map(|r| r.local).collect(),
                task_rewards: rewards.iter().map(|r| [r.task_cam, r.task_aoi]).collect(),
                global_reward: rewards[0].global,
                next_states: next_states.clone(),
                terminal: outcome.done,
            };
            if transition.is_finite() {
                self.buffer.push(transition);
            } else {
                log::warn!(
                    "dropping non-finite transition at episode {episode}, slot {}",
                    outcome.slot
                );
            }
            states = next_states;
        }

        if self.learner.algorithm() != Algorithm::Random && self.buffer.len() >= self.train.batch_size {
            let train_local = self.train.trains_local(episode);
            for _ in 0..self.train.updates_per_episode {
                let batch = self.buffer.sample(self.train.batch_size, &mut self.agent_rng)?;
                self.learner.update(
                    &batch,
                    train_local,
                    &self.train,
                    &mut self.agent_rng,
                    &mut self.diagnostics,
                )?;
            }
        }
        self.episode += 1;

        let n = slots.max(1) as f64;
        let agent_slots = n * p as f64;
        let delivered = self.env.platoons().iter().filter(|pl| pl.cam_delivered).count();
        let local_rewards: Vec<f64> = local.iter().map(|r| r / n).collect();
        Ok(EpisodeRecord {
            episode,
            mean_local_reward: local_rewards.iter().sum::<f64>() / p as f64,
            local_rewards,
            task_cam_reward: task_cam / agent_slots,
            task_aoi_reward: task_aoi / agent_slots,
            global_reward: global / n,
            mean_aoi_s: aoi / agent_slots,
            cam_delivered_frac: delivered as f64 / p as f64,
            cam_delivered: delivered == p,
            mean_power_w: power / agent_slots,
            wall_clock_s: started.elapsed().as_secs_f64(),
        })
    }
}

/// Train `algorithm` for `train.episodes` episodes.
pub fn run_training(
    algorithm: Algorithm,
    env: &EnvConfig,
    train: &TrainConfig,
    weights: &RewardWeights,
    seed: u64,
) -> Result<TrainingLog> {
    let mut trainer = Trainer::new(algorithm, env.clone(), train.clone(), weights.clone(), seed)?;
    let records = (0..train.episodes)
        .map(|_| trainer.run_episode())
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingLog {
        algorithm,
        seed,
        records,
        diagnostics: trainer.diagnostics(),
    })
}

/// Baseline runs share the training loop and log schema.
pub fn run_baseline(
    algorithm: Algorithm,
    env: &EnvConfig,
    train: &TrainConfig,
    weights: &RewardWeights,
    seed: u64,
) -> Result<TrainingLog> {
    if !matches!(
        algorithm,
        Algorithm::Ddpg | Algorithm::Decentralized | Algorithm::Random
    ) {
        return Err(crate::Error::Config(format!("`{algorithm}` is not a baseline")));
    }
    run_training(algorithm, env, train, weights, seed)
}
