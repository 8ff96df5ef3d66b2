//! Building blocks of the actor-critic updates: clipped Gaussian noise,
//! bootstrap targets, critic regression and the deterministic policy gradient.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::env::squash;
use crate::error::{Error, Result};
use crate::nn::{Adam, DenseNet, Gradients, StepStatus};

/// Zero-mean Gaussian noise clipped to `[-clip, clip]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedNoise {
    pub std: f64,
    pub clip: f64,
}

impl ClippedNoise {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.std == 0.0 {
            return 0.0;
        }
        let n = Normal::new(0.0, self.std).expect("std is finite and positive");
        n.sample(rng).clamp(-self.clip, self.clip)
    }

    /// Add noise to every entry and keep the result inside the raw action range `[-1, 1]`.
    pub fn perturb<R: Rng + ?Sized>(&self, actions: &mut Array2<f64>, rng: &mut R) {
        for a in actions.iter_mut() {
            *a = (*a + self.sample(rng)).clamp(-1.0, 1.0);
        }
    }
}

/// What critics see of an action, and how their action gradients reach the actor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionCodec {
    /// Raw actor outputs, differentiated exactly.
    Raw,
    /// Per agent: one-hot subchannel, mode bit, power fraction. Gradients
    /// pass straight through the decoding (the power entry scaled by the
    /// squash slope).
    Decoded { subchannels: usize },
}

impl ActionCodec {
    fn width(self) -> Option<usize> {
        match self {
            ActionCodec::Raw => None,
            ActionCodec::Decoded { subchannels } => Some(subchannels + 2),
        }
    }

    /// Encode one agent's raw action; agrees with [`crate::env::decode_action`].
    pub fn encode_agent(self, raw: &[f64], out: &mut [f64]) {
        let Some(width) = self.width() else {
            out.copy_from_slice(raw);
            return;
        };
        let k = width - 2;
        let mut best = 0;
        for i in 1..k {
            if raw[i] > raw[best] {
                best = i;
            }
        }
        for (i, o) in out[..k].iter_mut().enumerate() {
            *o = if i == best { 1.0 } else { 0.0 };
        }
        out[k] = if raw[k] >= 0.0 { 1.0 } else { 0.0 };
        out[k + 1] = squash(raw[k + 1]);
    }

    /// Encode every agent block of every row. Columns must be a multiple of the agent width.
    pub fn encode(self, raw: ArrayView2<'_, f64>) -> Array2<f64> {
        let Some(width) = self.width() else {
            return raw.to_owned();
        };
        let mut out = Array2::zeros(raw.raw_dim());
        for (src, mut dst) in raw.rows().into_iter().zip(out.rows_mut()) {
            let src = src.to_vec();
            let dst = dst.as_slice_mut().expect("fresh arrays are contiguous");
            for (s, d) in src.chunks(width).zip(dst.chunks_mut(width)) {
                self.encode_agent(s, d);
            }
        }
        out
    }

    /// Map a gradient w.r.t. encoded actions back onto raw actions.
    ///
    /// Subchannel scores receive the one-hot gradients centred on their
    /// mean, so only their differences move; the mode score receives the
    /// mode-bit gradient and the power score the power-fraction gradient
    /// times the squash slope.
    pub fn straight_through(self, mut d_encoded: Array2<f64>) -> Array2<f64> {
        let Some(width) = self.width() else {
            return d_encoded;
        };
        let k = width - 2;
        for mut row in d_encoded.rows_mut() {
            let row = row.as_slice_mut().expect("fresh arrays are contiguous");
            for block in row.chunks_mut(width) {
                let mean = block[..k].iter().sum::<f64>() / k as f64;
                block[..k].iter_mut().for_each(|g| *g -= mean);
                block[k + 1] *= 0.5;
            }
        }
        d_encoded
    }
}

/// Bounded-action ascent direction: a component pushing a raw output toward
/// a bound of `[-1, 1]` shrinks with the distance left, one pushing away
/// passes in full. Saturated outputs can therefore always turn back.
pub fn invert_gradients(mut ascent: Array2<f64>, raw: &Array2<f64>) -> Array2<f64> {
    ndarray::Zip::from(&mut ascent).and(raw).for_each(|g, &a| {
        let a = a.clamp(-1.0, 1.0);
        *g *= if *g > 0.0 { (1.0 - a) / 2.0 } else { (a + 1.0) / 2.0 };
    });
    ascent
}

/// A differentiable action-value function.
pub trait QFunction {
    /// Values of a batch of critic inputs and their gradients w.r.t. every input column.
    fn value_and_input_grad(&self, input: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)>;
}

impl QFunction for DenseNet {
    fn value_and_input_grad(&self, input: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
        if self.output_dim() != 1 {
            return Err(Error::Shape("a critic must have exactly one output".into()));
        }
        let trace = self.forward_batch(input.clone())?;
        let values = trace.output().column(0).to_owned();
        let ones = Array2::ones((input.nrows(), 1));
        let bp = self.backward(&trace, &ones)?;
        Ok((values, bp.input))
    }
}

pub fn hstack(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    concatenate(Axis(1), &[a, b]).expect("row counts agree")
}

/// Target-actor actions for every agent, optionally smoothed with clipped
/// noise and re-clamped to `[-1, 1]`, then encoded for the critics. Output is agent-major.
pub fn smoothed_target_actions<R: Rng + ?Sized>(
    target_actors: &[&DenseNet],
    next_states: &Array2<f64>,
    obs_dim: usize,
    noise: Option<ClippedNoise>,
    codec: ActionCodec,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let mut blocks = Vec::with_capacity(target_actors.len());
    for (j, actor) in target_actors.iter().enumerate() {
        let s_j = next_states.slice(s![.., j * obs_dim..(j + 1) * obs_dim]).to_owned();
        let mut a = actor.predict_batch(&s_j)?;
        if let Some(noise) = noise {
            noise.perturb(&mut a, rng);
        }
        blocks.push(codec.encode(a.view()));
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    concatenate(Axis(1), &views).map_err(|e| Error::Shape(e.to_string()))
}

/// `y = r + gamma * not_done * min(q1, q2)` row by row.
pub fn td3_global_target(
    rewards: &Array1<f64>,
    q1_next: &Array1<f64>,
    q2_next: &Array1<f64>,
    not_done: &Array1<f64>,
    gamma: f64,
) -> Array1<f64> {
    ndarray::Zip::from(rewards)
        .and(q1_next)
        .and(q2_next)
        .and(not_done)
        .map_collect(|&r, &q1, &q2, &nd| r + gamma * nd * q1.min(q2))
}

/// `y = r + gamma * not_done * q_next` row by row.
pub fn td_target(rewards: &Array1<f64>, q_next: &Array1<f64>, not_done: &Array1<f64>, gamma: f64) -> Array1<f64> {
    ndarray::Zip::from(rewards)
        .and(q_next)
        .and(not_done)
        .map_collect(|&r, &q, &nd| r + gamma * nd * q)
}

/// Mean squared error and its gradient w.r.t. each prediction.
pub fn mse_loss(predictions: &Array1<f64>, targets: &Array1<f64>) -> (f64, Array1<f64>) {
    let n = predictions.len() as f64;
    let diff = predictions - targets;
    let loss = diff.mapv(|d| d * d).sum() / n;
    (loss, diff * (2.0 / n))
}

/// Outcome of one critic regression step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionStep {
    /// Loss before the update.
    pub loss: f64,
    pub status: StepStatus,
}

/// One optimizer step of `critic` toward fixed `targets`.
pub fn critic_regression_step(
    critic: &mut DenseNet,
    optimizer: &mut Adam,
    inputs: Array2<f64>,
    targets: &Array1<f64>,
) -> Result<RegressionStep> {
    let trace = critic.forward_batch(inputs)?;
    let predictions = trace.output().column(0).to_owned();
    let (loss, grad) = mse_loss(&predictions, targets);
    if !loss.is_finite() {
        log::warn!("skipping critic update: non-finite loss {loss}");
        return Ok(RegressionStep {
            loss,
            status: StepStatus::SkippedNonFinite,
        });
    }
    let upstream = grad.insert_axis(Axis(1));
    let bp = critic.backward(&trace, &upstream)?;
    let status = optimizer.step(critic, &bp.params)?;
    Ok(RegressionStep { loss, status })
}

/// The joint-critic context of one agent's policy gradient: critic inputs are
/// `[s_1..s_P, a_1..a_P]` with agent `agent`'s action replaced by its policy.
pub struct GlobalTerm<'a> {
    pub critic: &'a dyn QFunction,
    pub joint_states: ArrayView2<'a, f64>,
    pub joint_actions: ArrayView2<'a, f64>,
    pub agent: usize,
    pub action_dim: usize,
}

/// dLoss/dActor-parameters for `loss = -(1/S) * sum(Q_global + sum_c Q_local_c)`,
/// each critic evaluated at the actor's own action.
///
/// Local critics take `[s_j, a_j]`. Joint actions in `global` are already encoded.
pub fn policy_gradient(
    actor: &DenseNet,
    local_states: ArrayView2<'_, f64>,
    global: Option<GlobalTerm<'_>>,
    local_critics: &[&dyn QFunction],
    codec: ActionCodec,
) -> Result<Gradients> {
    let batch = local_states.nrows();
    let trace = actor.forward_batch(local_states.to_owned())?;
    let policy_actions = codec.encode(trace.output().view());
    let act_dim = policy_actions.ncols();
    let mut d_action = Array2::<f64>::zeros((batch, act_dim));

    if let Some(g) = global {
        if g.action_dim != act_dim {
            return Err(Error::Shape(format!(
                "global critic expects {}-wide actions, actor emits {act_dim}",
                g.action_dim
            )));
        }
        let mut actions = g.joint_actions.to_owned();
        let lo = g.agent * act_dim;
        actions.slice_mut(s![.., lo..lo + act_dim]).assign(&policy_actions);
        let input = hstack(g.joint_states, actions.view());
        let (_, grad) = g.critic.value_and_input_grad(&input)?;
        let offset = g.joint_states.ncols() + lo;
        d_action += &grad.slice(s![.., offset..offset + act_dim]);
    }
    if !local_critics.is_empty() {
        let input = hstack(local_states, policy_actions.view());
        let offset = local_states.ncols();
        for critic in local_critics {
            let (_, grad) = critic.value_and_input_grad(&input)?;
            d_action += &grad.slice(s![.., offset..offset + act_dim]);
        }
    }
    // Ascent on Q is descent on -Q averaged over the batch.
    let scale = -1.0 / batch as f64;
    match codec {
        ActionCodec::Raw => Ok(actor.backward(&trace, &(d_action * scale))?.params),
        ActionCodec::Decoded { .. } => {
            let ascent = invert_gradients(codec.straight_through(d_action), trace.output());
            Ok(actor.backward_pre_activation(&trace, &(ascent * scale))?.params)
        }
    }
}
