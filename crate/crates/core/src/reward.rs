//! Per-agent and team rewards.
//!
//! The local (holistic) reward of a leader is
//! `-k1 * remaining/payload - k2 * aoi + k3 * G(rate - rate_min) - k4 * F(p)`.
//! It splits exactly into a CAM-delivery sub-reward and an AoI sub-reward,
//! with the power penalty routed to whichever task the chosen mode serves.
//! The team reward is the negated, agent-averaged log interference.

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, LinkOutcome, Mode, PlatoonState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    /// Weight of the undelivered CAM fraction.
    pub kappa1: f64,
    /// Weight of the AoI, per second.
    pub kappa2: f64,
    /// Weight of the V2I rate-floor bonus.
    pub kappa3: f64,
    /// Weight of the normalized power.
    pub kappa4: f64,
    /// Plateau of the step bonus `G`.
    pub revenue: f64,
    /// Team reward is `(raw / K - offset) / scale`.
    pub global_offset: f64,
    pub global_scale: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            kappa1: 1.0,
            kappa2: 5.0,
            kappa3: 1.0,
            kappa4: 0.2,
            revenue: 1.0,
            global_offset: 12.0,
            global_scale: 2.4,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("kappa3", self.kappa3),
            ("kappa4", self.kappa4),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("reward.{name} must be non-negative, got {v}")));
            }
        }
        if !(self.revenue.is_finite() && self.revenue > 0.0) {
            return Err(Error::Config(format!(
                "reward.revenue must be positive, got {}",
                self.revenue
            )));
        }
        if !self.global_offset.is_finite() || !(self.global_scale.is_finite() && self.global_scale > 0.0) {
            return Err(Error::Config(
                "reward.global_offset/global_scale must be finite, scale positive".into(),
            ));
        }
        Ok(())
    }
}

/// One slot's rewards for one agent, plus the shared team reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBundle {
    pub local: f64,
    pub task_cam: f64,
    pub task_aoi: f64,
    pub global: f64,
}

/// Step bonus: the plateau value when `x >= 0`, zero otherwise.
pub fn step_g(x: f64, revenue: f64) -> f64 {
    if x >= 0.0 {
        revenue
    } else {
        0.0
    }
}

/// Power normalizer `p / p_max`.
pub fn power_penalty_f(power_w: f64, max_power_w: f64) -> Result<f64> {
    if !(0.0..=max_power_w).contains(&power_w) {
        return Err(Error::Domain(format!("power {power_w} W outside [0, {max_power_w}] W")));
    }
    Ok(power_w / max_power_w)
}

/// Everything the local reward reads from one completed slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardInputs {
    pub cam_remaining_bits: f64,
    pub cam_payload_bits: f64,
    pub aoi_s: f64,
    pub v2i_rate: f64,
    pub min_v2i_rate: f64,
    pub mode: Mode,
    pub power_w: f64,
    pub max_power_w: f64,
}

impl RewardInputs {
    /// Inputs after a slot: payload and AoI are the post-update values.
    pub fn from_slot(platoon: &PlatoonState, link: &LinkOutcome, config: &EnvConfig) -> Self {
        RewardInputs {
            cam_remaining_bits: platoon.cam_remaining_bits,
            cam_payload_bits: config.cam_payload_bits,
            aoi_s: platoon.aoi_s,
            v2i_rate: link.v2i_rate,
            min_v2i_rate: config.min_v2i_rate,
            mode: link.action.mode,
            power_w: link.action.power_w,
            max_power_w: config.max_power_w(),
        }
    }
}

// The three terms are evaluated once and shared so that the two task
// rewards add up to the local reward bit for bit.
struct Terms {
    cam: f64,
    aoi: f64,
    power: f64,
}

fn terms(x: &RewardInputs, w: &RewardWeights) -> Result<Terms> {
    let f = power_penalty_f(x.power_w, x.max_power_w)?;
    Ok(Terms {
        cam: -w.kappa1 * x.cam_remaining_bits / x.cam_payload_bits,
        aoi: -w.kappa2 * x.aoi_s + w.kappa3 * step_g(x.v2i_rate - x.min_v2i_rate, w.revenue),
        power: -w.kappa4 * f,
    })
}

/// Holistic local reward of one leader.
pub fn local_reward(x: &RewardInputs, w: &RewardWeights) -> Result<f64> {
    let (cam, aoi) = task_rewards(x, w)?;
    Ok(cam + aoi)
}

/// `(CAM-delivery reward, AoI reward)`; the power penalty goes to the task
/// served by the selected mode.
pub fn task_rewards(x: &RewardInputs, w: &RewardWeights) -> Result<(f64, f64)> {
    let t = terms(x, w)?;
    Ok(match x.mode {
        Mode::Broadcast => (t.cam + t.power, t.aoi),
        Mode::V2I => (t.cam, t.aoi + t.power),
    })
}

/// Un-normalized team reward: `-(1/P) * sum_j sum_k log10(I_j[k] + noise)`.
pub fn global_reward_raw(interference_w: &[Vec<f64>], noise_w: f64) -> f64 {
    let p = interference_w.len() as f64;
    let total: f64 = interference_w
        .iter()
        .flat_map(|row| row.iter())
        .map(|&i| (i + noise_w).log10())
        .sum();
    -total / p
}

/// Team reward rescaled by the configured affine map.
pub fn global_reward(interference_w: &[Vec<f64>], noise_w: f64, w: &RewardWeights) -> f64 {
    let k = interference_w.first().map_or(1, Vec::len).max(1) as f64;
    (global_reward_raw(interference_w, noise_w) / k - w.global_offset) / w.global_scale
}

/// Rewards of every agent for one completed slot.
pub fn evaluate(
    platoons: &[PlatoonState],
    links: &[LinkOutcome],
    config: &EnvConfig,
    w: &RewardWeights,
) -> Result<Vec<RewardBundle>> {
    let interference: Vec<Vec<f64>> = links.iter().map(|l| l.interference_w.clone()).collect();
    let global = global_reward(&interference, config.noise_power_w(), w);
    platoons
        .iter()
        .zip(links)
        .map(|(p, l)| {
            let x = RewardInputs::from_slot(p, l, config);
            let (task_cam, task_aoi) = task_rewards(&x, w)?;
            Ok(RewardBundle {
                local: task_cam + task_aoi,
                task_cam,
                task_aoi,
                global,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_weights() -> RewardWeights {
        RewardWeights {
            kappa1: 1.0,
            kappa2: 1.0,
            kappa3: 1.0,
            kappa4: 1.0,
            revenue: 1.0,
            ..RewardWeights::default()
        }
    }

    fn inputs(remaining: f64, aoi: f64, rate: f64, mode: Mode, power: f64) -> RewardInputs {
        RewardInputs {
            cam_remaining_bits: remaining,
            cam_payload_bits: 32_000.0,
            aoi_s: aoi,
            v2i_rate: rate,
            min_v2i_rate: 3.0,
            mode,
            power_w: power,
            max_power_w: 1.0,
        }
    }

    #[test]
    fn step_function() {
        assert_eq!(step_g(0.0, 2.5), 2.5);
        assert_eq!(step_g(-0.1, 2.5), 0.0);
        assert_eq!(step_g(1e9, 2.5), 2.5);
    }

    #[test]
    fn power_normalizer() {
        assert_eq!(power_penalty_f(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(power_penalty_f(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(power_penalty_f(0.5, 1.0).unwrap(), 0.5);
        assert!(power_penalty_f(1.5, 1.0).is_err());
        assert!(power_penalty_f(-0.1, 1.0).is_err());
    }

    #[test]
    fn local_reward_reference_cases() {
        let w = unit_weights();
        let r = local_reward(&inputs(32_000.0, 0.001, 1.0, Mode::V2I, 0.0), &w).unwrap();
        assert_eq!(r, -1.0 - 0.001);
        let r = local_reward(&inputs(0.0, 0.003, 4.0, Mode::V2I, 0.0), &w).unwrap();
        assert_eq!(r, -0.003 + 1.0);
    }

    #[test]
    fn power_penalty_follows_mode() {
        let w = unit_weights();
        let (cam, aoi) = task_rewards(&inputs(0.0, 0.0, 0.0, Mode::Broadcast, 0.5), &w).unwrap();
        assert_eq!((cam, aoi), (-0.5, 0.0));
        let (cam, aoi) = task_rewards(&inputs(0.0, 0.0, 0.0, Mode::V2I, 0.5), &w).unwrap();
        assert_eq!((cam, aoi), (0.0, -0.5));
    }

    #[test]
    fn global_reward_reference_cases() {
        let noise = 1e-14;
        let all_zero = vec![vec![0.0; 3]; 2];
        assert!((global_reward_raw(&all_zero, noise) - (-3.0 * noise.log10())).abs() < 1e-12);

        let one = vec![vec![1.0 - noise]];
        assert!(global_reward_raw(&one, noise).abs() < 1e-12);

        let base = vec![vec![1e-9, 2e-9, 5e-9], vec![3e-9, 1e-9, 4e-9]];
        let doubled: Vec<Vec<f64>> = base.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect();
        let drop = global_reward_raw(&base, noise) - global_reward_raw(&doubled, noise);
        assert!((drop - 3.0 * 2f64.log10()).abs() < 1e-4);
    }

    #[test]
    fn global_normalization_hits_unit_at_noise_floor() {
        let w = RewardWeights::default();
        let noise = crate::channel::dbm_to_watts(-114.0);
        let r = global_reward(&[vec![0.0; 3]], noise, &w);
        assert!((r - 1.0).abs() < 1e-9);
    }
}
