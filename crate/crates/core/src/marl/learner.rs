//! Network ensembles of each algorithm and their per-minibatch update.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;

use super::config::{Algorithm, CriticActionInput, TrainConfig};
use super::replay::Minibatch;
use super::updates::{
    critic_regression_step, hstack, policy_gradient, smoothed_target_actions, td3_global_target, td_target,
    ActionCodec, ClippedNoise, GlobalTerm, QFunction,
};
use crate::env::EnvConfig;
use crate::error::Result;
use crate::nn::{Adam, DenseNet, OutputActivation};

/// A trained network, its slowly tracking target copy and its optimizer.
#[derive(Debug, Clone)]
pub struct TrackedNet {
    pub main: DenseNet,
    pub target: DenseNet,
    pub optimizer: Adam,
}

impl TrackedNet {
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        output: OutputActivation,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let main = DenseNet::new(sizes, output, rng)?;
        Ok(TrackedNet {
            target: main.clone(),
            optimizer: Adam::new(&main, learning_rate),
            main,
        })
    }

    pub fn from_net(main: DenseNet, learning_rate: f64) -> Self {
        TrackedNet {
            target: main.clone(),
            optimizer: Adam::new(&main, learning_rate),
            main,
        }
    }

    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        self.target.soft_update(&self.main, tau)
    }
}

/// One platoon leader's actor and local critics (one holistic critic, or one per task).
#[derive(Debug, Clone)]
pub struct AgentNets {
    pub actor: TrackedNet,
    pub critics: Vec<TrackedNet>,
}

/// Twin joint critics; only the first one drives the policy gradient.
#[derive(Debug, Clone)]
pub struct GlobalCritics {
    pub twins: [TrackedNet; 2],
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut v = Vec::with_capacity(hidden.len() + 2);
    v.push(input);
    v.extend_from_slice(hidden);
    v.push(output);
    v
}

/// Counters accumulated over a training run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub updates: u64,
    pub pessimism_rows_checked: u64,
    pub pessimism_violations: u64,
    pub skipped_steps: u64,
}

/// Losses of one minibatch update; `None` where that part did not run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateReport {
    pub global_losses: Option<[f64; 2]>,
    pub local_losses: Vec<Vec<f64>>,
    pub actors_updated: bool,
}

/// Fit both twins to the shared bootstrap targets.
pub fn update_global_critics(
    global: &mut GlobalCritics,
    joint_input: &Array2<f64>,
    targets: &Array1<f64>,
    diagnostics: &mut Diagnostics,
) -> Result<[f64; 2]> {
    let mut losses = [0.0; 2];
    for (twin, loss) in global.twins.iter_mut().zip(losses.iter_mut()) {
        let step = critic_regression_step(&mut twin.main, &mut twin.optimizer, joint_input.clone(), targets)?;
        if step.status != crate::nn::StepStatus::Applied {
            diagnostics.skipped_steps += 1;
        }
        *loss = step.loss;
    }
    Ok(losses)
}

/// Rewards each local critic regresses on: the holistic reward for a single
/// critic, the CAM and AoI task rewards for two.
fn critic_rewards(batch: &Minibatch, agent: usize, critics: usize) -> Vec<Array1<f64>> {
    match critics {
        1 => vec![batch.local_rewards.column(agent).to_owned()],
        _ => vec![
            batch.task_cam_rewards.column(agent).to_owned(),
            batch.task_aoi_rewards.column(agent).to_owned(),
        ],
    }
}

/// Fit agent `agent`'s local critics to `r + gamma * Q'(s', pi'(s'))`; no target smoothing.
#[allow(clippy::too_many_arguments)]
pub fn update_local_critics(
    nets: &mut AgentNets,
    agent: usize,
    batch: &Minibatch,
    obs_dim: usize,
    act_dim: usize,
    gamma: f64,
    codec: ActionCodec,
    diagnostics: &mut Diagnostics,
) -> Result<Vec<f64>> {
    let s_j = batch.agent_states(agent, obs_dim);
    let a_j = batch.agent_actions(agent, act_dim);
    let next_s = batch.agent_next_states(agent, obs_dim).to_owned();
    let next_a = codec.encode(nets.actor.target.predict_batch(&next_s)?.view());
    let next_input = hstack(next_s.view(), next_a.view());
    let input = hstack(s_j, a_j);
    let rewards = critic_rewards(batch, agent, nets.critics.len());
    let mut losses = Vec::with_capacity(nets.critics.len());
    for (critic, r) in nets.critics.iter_mut().zip(rewards) {
        let q_next = critic.target.predict_batch(&next_input)?.column(0).to_owned();
        let y = td_target(&r, &q_next, &batch.not_done, gamma);
        let step = critic_regression_step(&mut critic.main, &mut critic.optimizer, input.clone(), &y)?;
        if step.status != crate::nn::StepStatus::Applied {
            diagnostics.skipped_steps += 1;
        }
        losses.push(step.loss);
    }
    Ok(losses)
}

/// Ascend the global twin-1 value (if any) plus the sum of the agent's local critics.
pub fn update_actor(
    nets: &mut AgentNets,
    agent: usize,
    batch: &Minibatch,
    obs_dim: usize,
    global_twin: Option<&DenseNet>,
    codec: ActionCodec,
    diagnostics: &mut Diagnostics,
) -> Result<()> {
    let act_dim = nets.actor.main.output_dim();
    let local: Vec<&dyn QFunction> = nets.critics.iter().map(|c| &c.main as &dyn QFunction).collect();
    let global = global_twin.map(|critic| GlobalTerm {
        critic,
        joint_states: batch.states.view(),
        joint_actions: batch.actions.view(),
        agent,
        action_dim: act_dim,
    });
    let grads = policy_gradient(
        &nets.actor.main,
        batch.agent_states(agent, obs_dim),
        global,
        &local,
        codec,
    )?;
    let status = nets.actor.optimizer.step(&mut nets.actor.main, &grads)?;
    if status != crate::nn::StepStatus::Applied {
        diagnostics.skipped_steps += 1;
    }
    Ok(())
}

/// All networks of one training run.
#[derive(Debug, Clone)]
pub struct Learner {
    algorithm: Algorithm,
    num_agents: usize,
    obs_dim: usize,
    act_dim: usize,
    codec: ActionCodec,
    /// Per-agent nets (MADDPG variants and the decentralized baseline).
    pub agents: Vec<AgentNets>,
    pub global: Option<GlobalCritics>,
    /// Joint actor and critic of the centralized DDPG baseline.
    pub central: Option<AgentNets>,
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(
        algorithm: Algorithm,
        env: &EnvConfig,
        train: &TrainConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let p = env.num_platoons;
        let obs_dim = env.observation_dim();
        let act_dim = env.action_dim();
        let mut agents = Vec::new();
        let mut global = None;
        let mut central = None;
        match algorithm {
            Algorithm::ModifiedMaddpg | Algorithm::ModifiedMaddpgTdec | Algorithm::Decentralized => {
                for _ in 0..p {
                    let actor = TrackedNet::new(
                        &sizes(obs_dim, &train.actor_hidden, act_dim),
                        OutputActivation::Tanh,
                        train.actor_learning_rate,
                        rng,
                    )?;
                    let critics = (0..algorithm.local_critics())
                        .map(|_| {
                            TrackedNet::new(
                                &sizes(obs_dim + act_dim, &train.local_critic_hidden, 1),
                                OutputActivation::Identity,
                                train.critic_learning_rate,
                                rng,
                            )
                        })
                        .collect::<Result<_>>()?;
                    agents.push(AgentNets { actor, critics });
                }
                if algorithm.uses_global_critic() {
                    let shape = sizes(p * (obs_dim + act_dim), &train.global_critic_hidden, 1);
                    let twin = |rng: &mut R| {
                        TrackedNet::new(&shape, OutputActivation::Identity, train.critic_learning_rate, rng)
                    };
                    global = Some(GlobalCritics {
                        twins: [twin(rng)?, twin(rng)?],
                    });
                }
            }
            Algorithm::Ddpg => {
                let actor = TrackedNet::new(
                    &sizes(p * obs_dim, &train.actor_hidden, p * act_dim),
                    OutputActivation::Tanh,
                    train.actor_learning_rate,
                    rng,
                )?;
                let critic = TrackedNet::new(
                    &sizes(p * (obs_dim + act_dim), &train.global_critic_hidden, 1),
                    OutputActivation::Identity,
                    train.critic_learning_rate,
                    rng,
                )?;
                central = Some(AgentNets {
                    actor,
                    critics: vec![critic],
                });
            }
            Algorithm::Random => {}
        }
        let codec = match train.critic_action_input {
            CriticActionInput::Decoded => ActionCodec::Decoded {
                subchannels: env.num_subchannels,
            },
            CriticActionInput::Raw => ActionCodec::Raw,
        };
        Ok(Learner {
            algorithm,
            num_agents: p,
            obs_dim,
            act_dim,
            codec,
            agents,
            global,
            central,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn codec(&self) -> ActionCodec {
        self.codec
    }

    /// Joint critic encoding of per-agent raw actions.
    pub fn encode_joint(&self, raw: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; raw.len() * self.act_dim];
        for (a, o) in raw.iter().zip(out.chunks_mut(self.act_dim)) {
            self.codec.encode_agent(a, o);
        }
        out
    }

    /// Deterministic policy output (no exploration noise), one raw vector per agent.
    pub fn policy_actions(&self, joint_features: &[f64]) -> Result<Vec<Vec<f64>>> {
        let p = self.num_agents;
        match (&self.central, self.algorithm) {
            (Some(central), _) => {
                let out = central.actor.main.forward(joint_features)?;
                Ok(out.chunks(self.act_dim).map(<[f64]>::to_vec).collect())
            }
            (None, Algorithm::Random) => Ok(vec![vec![0.0; self.act_dim]; p]),
            (None, _) => (0..p)
                .map(|j| {
                    self.agents[j]
                        .actor
                        .main
                        .forward(&joint_features[j * self.obs_dim..(j + 1) * self.obs_dim])
                })
                .collect(),
        }
    }

    /// Uniform raw actions in `[-1, 1]`, one vector per agent.
    pub fn random_actions<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        (0..self.num_agents)
            .map(|_| (0..self.act_dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect()
    }

    /// Behaviour actions: policy output plus clipped exploration noise, or
    /// uniform draws for the random policy.
    pub fn act<R: Rng + ?Sized>(
        &self,
        joint_features: &[f64],
        noise: ClippedNoise,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        if self.algorithm == Algorithm::Random {
            return Ok(self.random_actions(rng));
        }
        let mut actions = self.policy_actions(joint_features)?;
        for a in actions.iter_mut().flatten() {
            *a = (*a + noise.sample(rng)).clamp(-1.0, 1.0);
        }
        Ok(actions)
    }

    /// [`Learner::act`], except each agent independently plays a uniform
    /// random action with probability `random_prob`.
    pub fn act_mixed<R: Rng + ?Sized>(
        &self,
        joint_features: &[f64],
        noise: ClippedNoise,
        random_prob: f64,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        let mut actions = self.act(joint_features, noise, rng)?;
        if random_prob > 0.0 {
            for a in actions.iter_mut() {
                if rng.random_bool(random_prob) {
                    a.iter_mut().for_each(|x| *x = rng.random_range(-1.0..=1.0));
                }
            }
        }
        Ok(actions)
    }

    /// One minibatch update. The global (or centralized) critics train every
    /// call; actors and local critics only when `train_local` is set.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        batch: &Minibatch,
        train_local: bool,
        config: &TrainConfig,
        rng: &mut R,
        diagnostics: &mut Diagnostics,
    ) -> Result<UpdateReport> {
        diagnostics.updates += 1;
        let mut report = UpdateReport::default();
        match self.algorithm {
            Algorithm::Random => return Ok(report),
            Algorithm::Ddpg => {
                self.update_central(batch, config, diagnostics)?;
                report.actors_updated = true;
                return Ok(report);
            }
            _ => {}
        }
        let (obs_dim, act_dim, codec) = (self.obs_dim, self.act_dim, self.codec);
        if let Some(global) = self.global.as_mut() {
            let smoothing = ClippedNoise {
                std: config.smoothing_std,
                clip: config.noise_clip,
            };
            let targets: Vec<&DenseNet> = self.agents.iter().map(|a| &a.actor.target).collect();
            let next_actions =
                smoothed_target_actions(&targets, &batch.next_states, obs_dim, Some(smoothing), codec, rng)?;
            let next_input = hstack(batch.next_states.view(), next_actions.view());
            let q1 = global.twins[0].target.predict_batch(&next_input)?.column(0).to_owned();
            let q2 = global.twins[1].target.predict_batch(&next_input)?.column(0).to_owned();
            let y = td3_global_target(&batch.global_rewards, &q1, &q2, &batch.not_done, config.gamma);
            check_pessimism(
                &y,
                &batch.global_rewards,
                &[&q1, &q2],
                &batch.not_done,
                config.gamma,
                diagnostics,
            );

            let input = hstack(batch.states.view(), batch.actions.view());
            report.global_losses = Some(update_global_critics(global, &input, &y, diagnostics)?);
            for twin in global.twins.iter_mut() {
                twin.soft_update(config.tau)?;
            }
        }
        if train_local {
            let twin1 = self.global.as_ref().map(|g| &g.twins[0].main);
            for (j, nets) in self.agents.iter_mut().enumerate() {
                report.local_losses.push(update_local_critics(
                    nets,
                    j,
                    batch,
                    obs_dim,
                    act_dim,
                    config.gamma,
                    codec,
                    diagnostics,
                )?);
                update_actor(nets, j, batch, obs_dim, twin1, codec, diagnostics)?;
                for critic in nets.critics.iter_mut() {
                    critic.soft_update(config.tau)?;
                }
                nets.actor.soft_update(config.tau)?;
            }
            report.actors_updated = true;
        }
        Ok(report)
    }

    fn update_central(&mut self, batch: &Minibatch, config: &TrainConfig, diagnostics: &mut Diagnostics) -> Result<()> {
        let codec = self.codec;
        let central = self.central.as_mut().expect("DDPG learner owns central nets");
        // Team reward: mean holistic local reward plus the global reward.
        let rewards = batch
            .local_rewards
            .mean_axis(ndarray::Axis(1))
            .expect("at least one agent")
            + &batch.global_rewards;
        let next_actions = codec.encode(central.actor.target.predict_batch(&batch.next_states)?.view());
        let next_input = hstack(batch.next_states.view(), next_actions.view());
        let critic = &mut central.critics[0];
        let q_next = critic.target.predict_batch(&next_input)?.column(0).to_owned();
        let y = td_target(&rewards, &q_next, &batch.not_done, config.gamma);
        let input = hstack(batch.states.view(), batch.actions.view());
        let step = critic_regression_step(&mut critic.main, &mut critic.optimizer, input, &y)?;
        if step.status != crate::nn::StepStatus::Applied {
            diagnostics.skipped_steps += 1;
        }
        let global = GlobalTerm {
            critic: &critic.main,
            joint_states: batch.states.view(),
            joint_actions: batch.actions.view(),
            agent: 0,
            action_dim: central.actor.main.output_dim(),
        };
        let grads = policy_gradient(&central.actor.main, batch.states.view(), Some(global), &[], codec)?;
        if central.actor.optimizer.step(&mut central.actor.main, &grads)? != crate::nn::StepStatus::Applied {
            diagnostics.skipped_steps += 1;
        }
        critic.soft_update(config.tau)?;
        central.actor.soft_update(config.tau)?;
        Ok(())
    }

    /// Hash of every actor and local-critic main network (the delayed part).
    pub fn local_param_hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for a in &self.agents {
            a.actor.main.param_hash().hash(&mut h);
            a.actor.target.param_hash().hash(&mut h);
            for c in &a.critics {
                c.main.param_hash().hash(&mut h);
                c.target.param_hash().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Hash of the global twins (mains and targets).
    pub fn global_param_hash(&self) -> Option<u64> {
        use std::hash::{Hash, Hasher};
        self.global.as_ref().map(|g| {
            let mut h = std::collections::hash_map::DefaultHasher::new();
            for t in &g.twins {
                t.main.param_hash().hash(&mut h);
                t.target.param_hash().hash(&mut h);
            }
            h.finish()
        })
    }
}

/// Record whether every `y` is at most `r + gamma * not_done * q_i` for each twin.
fn check_pessimism(
    y: &Array1<f64>,
    rewards: &Array1<f64>,
    twins: &[&Array1<f64>],
    not_done: &Array1<f64>,
    gamma: f64,
    diagnostics: &mut Diagnostics,
) {
    for row in 0..y.len() {
        diagnostics.pessimism_rows_checked += 1;
        let violated = twins
            .iter()
            .any(|q| y[row] > rewards[row] + gamma * not_done[row] * q[row]);
        if violated {
            diagnostics.pessimism_violations += 1;
            log::error!("TD3 target exceeds a twin bootstrap on row {row}");
        }
    }
}

/// Columns of `agent`'s slice in an agent-major matrix.
pub fn agent_block(m: &Array2<f64>, agent: usize, width: usize) -> ArrayView2<'_, f64> {
    m.slice(s![.., agent * width..(agent + 1) * width])
}
