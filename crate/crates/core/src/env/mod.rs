//! Episodic multi-platoon network simulation.
//!
//! Each slot every platoon leader picks one subchannel, a mode (uplink to the
//! RSU or CAM broadcast to its members) and a transmit power. The environment
//! turns those decisions into rates, ages the leader's RSU status (AoI) and
//! drains the CAM payload. Path loss and shadowing are frozen per episode;
//! Rayleigh fading is redrawn every slot.

mod action;
mod config;
mod mobility;
mod rates;

pub use action::{decode_action, squash, ActionCommand, Mode};
pub use config::{EnvConfig, GridConfig, ObservationScaling};
pub use mobility::{Axis, LanePosition};
pub use rates::{
    compute_v2i_rate, compute_v2v_rate, v2i_interference, v2i_succeeds, v2v_interference, ChannelSnapshot,
};

use rand::Rng;

use crate::channel::{sample_rayleigh_power, LargeScaleState, LinkGeometry, LinkKind, Point};
use crate::error::{Error, Result};

/// Per-platoon dynamic state.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatoonState {
    pub leader_position: Point,
    pub follower_positions: Vec<Point>,
    pub aoi_s: f64,
    pub cam_remaining_bits: f64,
    pub time_budget_remaining_s: f64,
    pub cam_delivered: bool,
    lane: LanePosition,
}

impl PlatoonState {
    pub fn lane(&self) -> &LanePosition {
        &self.lane
    }

    fn place(&mut self, config: &EnvConfig) {
        let spacing = config.intra_platoon_gap_m + config.vehicle_length_m;
        self.leader_position = self.lane.leader(&config.grid);
        for (i, p) in self.follower_positions.iter_mut().enumerate() {
            *p = self.lane.point_behind(&config.grid, (i + 1) as f64 * spacing);
        }
    }
}

/// What happened on one platoon's link during a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutcome {
    pub action: ActionCommand,
    /// Uplink spectral efficiency on the held subchannel, bit/s/Hz.
    pub v2i_rate: f64,
    /// Broadcast spectral efficiency of the worst member, bit/s/Hz.
    pub v2v_min_rate: f64,
    /// Interference at the RSU from the other leaders, per subchannel, watts.
    pub interference_w: Vec<f64>,
    pub v2i_success: bool,
    /// AoI at the start of the slot.
    pub aoi_before_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub slot: usize,
    pub links: Vec<LinkOutcome>,
    /// True once the episode's last slot has been played.
    pub done: bool,
}

/// A platoon leader's local view, `3K + 3` features once flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub v2i_gains: Vec<f64>,
    pub v2v_gains_min: Vec<f64>,
    pub prev_interference: Vec<f64>,
    pub aoi: f64,
    pub cam_remaining_frac: f64,
    pub time_budget_frac: f64,
}

impl Observation {
    pub fn len(&self) -> usize {
        3 * self.v2i_gains.len() + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn write_features(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.v2i_gains);
        out.extend_from_slice(&self.v2v_gains_min);
        out.extend_from_slice(&self.prev_interference);
        out.push(self.aoi);
        out.push(self.cam_remaining_frac);
        out.push(self.time_budget_frac);
    }

    pub fn to_features(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        self.write_features(&mut v);
        v
    }
}

/// AoI after one slot: back to `Δt` on a successful uplink, otherwise one slot older.
pub fn update_aoi(aoi_s: f64, link: &LinkOutcome, config: &EnvConfig) -> f64 {
    if link.v2i_success {
        config.slot_s
    } else {
        aoi_s + config.slot_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CamProgress {
    pub cam_remaining_bits: f64,
    pub cam_delivered: bool,
    pub time_budget_remaining_s: f64,
}

/// Drain the CAM payload by what the worst member received this slot.
pub fn update_cam(platoon: &PlatoonState, link: &LinkOutcome, config: &EnvConfig) -> CamProgress {
    let remaining = match link.action.mode {
        Mode::Broadcast => (platoon.cam_remaining_bits - config.bits_per_slot(link.v2v_min_rate)).max(0.0),
        Mode::V2I => platoon.cam_remaining_bits,
    };
    CamProgress {
        cam_remaining_bits: remaining,
        cam_delivered: platoon.cam_delivered || remaining == 0.0,
        time_budget_remaining_s: (platoon.time_budget_remaining_s - config.slot_s).max(0.0),
    }
}

/// Full simulator state. Single writer: [`EnvState::step`] mutates it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    config: EnvConfig,
    platoons: Vec<PlatoonState>,
    rsu: Point,
    v2i_large: Vec<LargeScaleState>,
    /// Indexed `(tx * P + platoon) * F + follower`.
    v2v_large: Vec<LargeScaleState>,
    snapshot: ChannelSnapshot,
    prev_interference: Vec<Vec<f64>>,
    slot: usize,
    episode: usize,
}

impl EnvState {
    /// Place the platoons, draw large-scale fading for the first episode and
    /// the fading for its first slot.
    pub fn init_episode<R: Rng + ?Sized>(config: EnvConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let p = config.num_platoons;
        let f = config.followers_per_platoon;
        let k = config.num_subchannels;
        let platoons = (0..p)
            .map(|_| {
                let mut state = PlatoonState {
                    leader_position: Point::default(),
                    follower_positions: vec![Point::default(); f],
                    aoi_s: config.slot_s,
                    cam_remaining_bits: config.cam_payload_bits,
                    time_budget_remaining_s: config.time_budget_s(),
                    cam_delivered: false,
                    lane: LanePosition::random(&config, rng),
                };
                state.place(&config);
                state
            })
            .collect();
        let mut state = EnvState {
            rsu: config.grid.rsu_position(),
            platoons,
            v2i_large: Vec::with_capacity(p),
            v2v_large: Vec::with_capacity(p * p * f),
            snapshot: ChannelSnapshot::zeros(p, f, k),
            prev_interference: vec![vec![0.0; k]; p],
            slot: 0,
            episode: 0,
            config,
        };
        for tx in 0..p {
            let geometry = state.v2i_geometry(tx);
            state
                .v2i_large
                .push(LargeScaleState::fresh(&geometry, &state.config.channel, rng)?);
        }
        for tx in 0..p {
            for platoon in 0..p {
                for follower in 0..f {
                    let geometry = state.v2v_geometry(tx, platoon, follower);
                    state
                        .v2v_large
                        .push(LargeScaleState::fresh(&geometry, &state.config.channel, rng)?);
                }
            }
        }
        state.redraw_fading(rng);
        Ok(state)
    }

    /// Start the next episode: refresh large-scale fading at the current
    /// positions and reset the CAM payload and deadline.
    pub fn reset_episode<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let p = self.config.num_platoons;
        let f = self.config.followers_per_platoon;
        for tx in 0..p {
            let geometry = self.v2i_geometry(tx);
            self.v2i_large[tx].refresh(&geometry, &self.config.channel, rng)?;
        }
        for tx in 0..p {
            for platoon in 0..p {
                for follower in 0..f {
                    let geometry = self.v2v_geometry(tx, platoon, follower);
                    let idx = (tx * p + platoon) * f + follower;
                    self.v2v_large[idx].refresh(&geometry, &self.config.channel, rng)?;
                }
            }
        }
        for platoon in &mut self.platoons {
            if !self.config.aoi_persists_across_episodes {
                platoon.aoi_s = self.config.slot_s;
            }
            platoon.cam_remaining_bits = self.config.cam_payload_bits;
            platoon.time_budget_remaining_s = self.config.time_budget_s();
            platoon.cam_delivered = false;
        }
        for row in &mut self.prev_interference {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        self.slot = 0;
        self.episode += 1;
        self.redraw_fading(rng);
        Ok(())
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn platoons(&self) -> &[PlatoonState] {
        &self.platoons
    }

    pub fn rsu_position(&self) -> Point {
        self.rsu
    }

    pub fn snapshot(&self) -> &ChannelSnapshot {
        &self.snapshot
    }

    pub fn v2i_large_scale(&self) -> &[LargeScaleState] {
        &self.v2i_large
    }

    pub fn v2v_large_scale(&self) -> &[LargeScaleState] {
        &self.v2v_large
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.config.episode_slots
    }

    fn v2i_geometry(&self, tx: usize) -> LinkGeometry {
        LinkGeometry::new(
            LinkKind::V2I,
            self.platoons[tx].leader_position,
            self.rsu,
            &self.config.channel,
        )
    }

    fn v2v_geometry(&self, tx: usize, platoon: usize, follower: usize) -> LinkGeometry {
        LinkGeometry::new(
            LinkKind::V2V,
            self.platoons[tx].leader_position,
            self.platoons[platoon].follower_positions[follower],
            &self.config.channel,
        )
    }

    fn redraw_fading<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let p = self.config.num_platoons;
        let f = self.config.followers_per_platoon;
        let k = self.config.num_subchannels;
        for tx in 0..p {
            let base = self.v2i_large[tx].linear_gain();
            for sub in 0..k {
                self.snapshot.set_v2i(tx, sub, base * sample_rayleigh_power(rng));
            }
        }
        for tx in 0..p {
            for platoon in 0..p {
                for follower in 0..f {
                    let base = self.v2v_large[(tx * p + platoon) * f + follower].linear_gain();
                    for sub in 0..k {
                        self.snapshot
                            .set_v2v(tx, platoon, follower, sub, base * sample_rayleigh_power(rng));
                    }
                }
            }
        }
    }

    /// Observations of every leader for the current slot.
    pub fn observations(&self) -> Vec<Observation> {
        (0..self.config.num_platoons)
            .map(|j| build_observation(j, self))
            .collect()
    }

    /// Flattened observations of every leader, agent-major.
    pub fn joint_features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.config.num_platoons * self.config.observation_dim());
        for obs in self.observations() {
            obs.write_features(&mut out);
        }
        out
    }

    /// Play one slot with one raw action vector per platoon.
    pub fn step<R: Rng + ?Sized, A: AsRef<[f64]>>(&mut self, raw_actions: &[A], rng: &mut R) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::Config(format!(
                "episode already finished after {} slots",
                self.config.episode_slots
            )));
        }
        if raw_actions.len() != self.config.num_platoons {
            return Err(Error::Shape(format!(
                "expected {} action vectors, got {}",
                self.config.num_platoons,
                raw_actions.len()
            )));
        }
        let actions = raw_actions
            .iter()
            .map(|raw| decode_action(raw.as_ref(), &self.config))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.step_decoded(&actions, rng))
    }

    /// Play one slot with already-decoded commands.
    pub fn step_decoded<R: Rng + ?Sized>(&mut self, actions: &[ActionCommand], rng: &mut R) -> StepOutcome {
        let config = &self.config;
        let links: Vec<LinkOutcome> = (0..config.num_platoons)
            .map(|j| {
                let (v2i_rate, interference_w) = compute_v2i_rate(j, actions, &self.snapshot, config);
                let v2v_min_rate = compute_v2v_rate(j, actions, &self.snapshot, config);
                LinkOutcome {
                    action: actions[j],
                    v2i_rate,
                    v2v_min_rate,
                    v2i_success: v2i_succeeds(&actions[j], v2i_rate, config),
                    interference_w,
                    aoi_before_s: self.platoons[j].aoi_s,
                }
            })
            .collect();

        for (platoon, link) in self.platoons.iter_mut().zip(&links) {
            let cam = update_cam(platoon, link, config);
            platoon.aoi_s = update_aoi(platoon.aoi_s, link, config);
            platoon.cam_remaining_bits = cam.cam_remaining_bits;
            platoon.cam_delivered = cam.cam_delivered;
            platoon.time_budget_remaining_s = cam.time_budget_remaining_s;
            platoon
                .lane
                .advance(&config.grid, config.slot_s, config.turn_probability, rng);
            platoon.place(config);
        }
        for (prev, link) in self.prev_interference.iter_mut().zip(&links) {
            prev.copy_from_slice(&link.interference_w);
        }
        let slot = self.slot;
        self.slot += 1;
        self.redraw_fading(rng);
        StepOutcome {
            slot,
            links,
            done: self.is_done(),
        }
    }
}

fn scaled_db(db: f64, center: f64, scale: f64, clip: f64) -> f64 {
    ((db - center) / scale).clamp(-clip, clip)
}

fn power_ratio_db(ratio: f64) -> f64 {
    10.0 * ratio.max(1e-30).log10()
}

/// Leader `j`'s observation of the current slot.
///
/// Gains enter as the SNR at maximum power (members compressed to their
/// minimum), interference as its level above noise, all affinely scaled;
/// AoI is divided by its scale (the CAM deadline by default).
pub fn build_observation(j: usize, state: &EnvState) -> Observation {
    let config = &state.config;
    let scaling = &config.observation;
    let snr_at_max = config.max_power_w() / config.noise_power_w();
    let noise = config.noise_power_w();
    let k = config.num_subchannels;
    let snapshot = &state.snapshot;
    let platoon = &state.platoons[j];

    let v2i_gains = (0..k)
        .map(|sub| {
            let db = power_ratio_db(snapshot.v2i(j, sub) * snr_at_max);
            scaled_db(db, scaling.v2i_snr_center_db, scaling.snr_scale_db, scaling.clip)
        })
        .collect();
    let v2v_gains_min = (0..k)
        .map(|sub| {
            let worst = (0..config.followers_per_platoon)
                .map(|i| snapshot.v2v(j, j, i, sub))
                .fold(f64::INFINITY, f64::min);
            let db = power_ratio_db(worst * snr_at_max);
            scaled_db(db, scaling.v2v_snr_center_db, scaling.snr_scale_db, scaling.clip)
        })
        .collect();
    let prev_interference = state.prev_interference[j]
        .iter()
        .map(|&i| {
            let db = power_ratio_db((i + noise) / noise);
            scaled_db(
                db,
                scaling.interference_center_db,
                scaling.interference_scale_db,
                scaling.clip,
            )
        })
        .collect();
    let budget = config.time_budget_s();
    Observation {
        v2i_gains,
        v2v_gains_min,
        prev_interference,
        aoi: (platoon.aoi_s / scaling.aoi_scale_s.unwrap_or(budget)).min(scaling.clip),
        cam_remaining_frac: platoon.cam_remaining_bits / config.cam_payload_bits,
        time_budget_frac: platoon.time_budget_remaining_s / budget,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn link(mode: Mode, v2i_rate: f64, v2v_min_rate: f64, config: &EnvConfig) -> LinkOutcome {
        let action = ActionCommand {
            subchannel: 0,
            mode,
            power_w: 1.0,
        };
        LinkOutcome {
            action,
            v2i_rate,
            v2v_min_rate,
            interference_w: vec![0.0; config.num_subchannels],
            v2i_success: v2i_succeeds(&action, v2i_rate, config),
            aoi_before_s: 0.0,
        }
    }

    #[test]
    fn fresh_episode_has_full_payload_and_budget() {
        let state = EnvState::init_episode(EnvConfig::default(), &mut rng(1)).unwrap();
        for p in state.platoons() {
            assert_eq!(p.cam_remaining_bits, 32_000.0);
            assert!((p.time_budget_remaining_s - 0.1).abs() < 1e-15);
            assert_eq!(p.aoi_s, 0.001);
            assert!(!p.cam_delivered);
        }
    }

    #[test]
    fn same_seed_gives_identical_state() {
        let a = EnvState::init_episode(EnvConfig::default(), &mut rng(5)).unwrap();
        let b = EnvState::init_episode(EnvConfig::default(), &mut rng(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn followers_are_spaced_by_gap_plus_length() {
        let config = EnvConfig {
            num_platoons: 5,
            followers_per_platoon: 3,
            intra_platoon_gap_m: 5.0,
            ..EnvConfig::default()
        };
        let state = EnvState::init_episode(config.clone(), &mut rng(2)).unwrap();
        let spacing = 5.0 + config.vehicle_length_m;
        for p in state.platoons() {
            let lane = p.lane();
            for (i, f) in p.follower_positions.iter().enumerate() {
                let behind = (i + 1) as f64 * spacing;
                // Hand construction: step back along the travel direction, keep the lane offset.
                let (dx, dy) = match lane.axis {
                    Axis::Horizontal => (-lane.direction * behind, 0.0),
                    Axis::Vertical => (0.0, -lane.direction * behind),
                };
                assert!((f.x - (p.leader_position.x + dx)).abs() < 1e-9);
                assert!((f.y - (p.leader_position.y + dy)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn infeasible_geometry_is_a_config_error() {
        let config = EnvConfig {
            followers_per_platoon: 30,
            intra_platoon_gap_m: 35.0,
            ..EnvConfig::default()
        };
        assert!(matches!(
            EnvState::init_episode(config, &mut rng(0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn aoi_branches() {
        let c = EnvConfig::default();
        let ok = link(Mode::V2I, 3.0, 0.0, &c);
        assert_eq!(update_aoi(0.004, &ok, &c), 0.001);
        let failed = link(Mode::V2I, 2.999, 0.0, &c);
        assert!((update_aoi(0.004, &failed, &c) - 0.005).abs() < 1e-15);
        let broadcast = link(Mode::Broadcast, 10.0, 5.0, &c);
        assert!(!broadcast.v2i_success);
        assert!((update_aoi(0.004, &broadcast, &c) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn cam_drains_by_rate_times_bandwidth_times_slot() {
        let c = EnvConfig::default();
        let mut state = EnvState::init_episode(c.clone(), &mut rng(3)).unwrap();
        let progress = update_cam(&state.platoons()[0], &link(Mode::Broadcast, 0.0, 3.0, &c), &c);
        assert!((progress.cam_remaining_bits - (32_000.0 - 540.0)).abs() < 1e-9);
        assert!(!progress.cam_delivered);

        state.platoons[0].cam_remaining_bits = 300.0;
        let progress = update_cam(&state.platoons()[0], &link(Mode::Broadcast, 0.0, 3.0, &c), &c);
        assert_eq!(progress.cam_remaining_bits, 0.0);
        assert!(progress.cam_delivered);

        let progress = update_cam(&state.platoons()[0], &link(Mode::V2I, 9.0, 0.0, &c), &c);
        assert_eq!(progress.cam_remaining_bits, 300.0);
        assert!((progress.time_budget_remaining_s - 0.099).abs() < 1e-12);
    }

    #[test]
    fn fresh_observation_reports_noise_floor_and_endpoints() {
        let c = EnvConfig::default();
        let mut state = EnvState::init_episode(c.clone(), &mut rng(4)).unwrap();
        let floor = -c.observation.interference_center_db / c.observation.interference_scale_db;
        for (j, obs) in state.observations().iter().enumerate() {
            assert_eq!(obs.len(), 3 * c.num_subchannels + 3);
            assert_eq!(obs.to_features().len(), obs.len());
            assert!(obs.prev_interference.iter().all(|&v| (v - floor).abs() < 1e-12), "{j}");
            assert_eq!(obs.cam_remaining_frac, 1.0);
            assert_eq!(obs.time_budget_frac, 1.0);
        }
        state.platoons[1].cam_remaining_bits = 0.0;
        assert_eq!(build_observation(1, &state).cam_remaining_frac, 0.0);
    }

    #[test]
    fn observation_length_does_not_depend_on_platoon_size() {
        for followers in 1..6 {
            let c = EnvConfig {
                followers_per_platoon: followers,
                ..EnvConfig::default()
            };
            let state = EnvState::init_episode(c, &mut rng(followers as u64)).unwrap();
            assert!(state.observations().iter().all(|o| o.to_features().len() == 12));
        }
    }

    #[test]
    fn zero_power_slot_ages_everyone() {
        let c = EnvConfig::default();
        let mut state = EnvState::init_episode(c.clone(), &mut rng(6)).unwrap();
        let raw = vec![vec![0.0, 0.0, 0.0, -1.0, -1.0]; c.num_platoons];
        let out = state.step(&raw, &mut rng(7)).unwrap();
        for (l, p) in out.links.iter().zip(state.platoons()) {
            assert_eq!(l.v2i_rate, 0.0);
            assert_eq!(l.v2v_min_rate, 0.0);
            assert!((p.aoi_s - 0.002).abs() < 1e-15);
        }
    }

    #[test]
    fn step_is_deterministic_and_keeps_large_scale_frozen() {
        let c = EnvConfig::default();
        let raw: Vec<Vec<f64>> = (0..c.num_platoons)
            .map(|j| vec![j as f64, 0.5, -0.2, if j % 2 == 0 { -0.3 } else { 0.3 }, 0.6])
            .collect();
        let run = || {
            let mut r = rng(8);
            let mut s = EnvState::init_episode(c.clone(), &mut r).unwrap();
            let v2i = s.v2i_large_scale().to_vec();
            let v2v = s.v2v_large_scale().to_vec();
            let mut outs = Vec::new();
            while !s.is_done() {
                outs.push(s.step(&raw, &mut r).unwrap());
                assert_eq!(s.v2i_large_scale(), &v2i[..]);
                assert_eq!(s.v2v_large_scale(), &v2v[..]);
            }
            assert!(s.step(&raw, &mut r).is_err());
            s.reset_episode(&mut r).unwrap();
            assert_ne!(s.v2i_large_scale(), &v2i[..]);
            outs
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn bad_actions_propagate_decode_errors() {
        let c = EnvConfig::default();
        let mut state = EnvState::init_episode(c.clone(), &mut rng(9)).unwrap();
        let mut raw = vec![vec![0.0; 5]; c.num_platoons];
        raw[2][1] = f64::NAN;
        assert!(matches!(state.step(&raw, &mut rng(1)), Err(Error::Decode(_))));
        assert!(matches!(state.step(&raw[..2], &mut rng(1)), Err(Error::Shape(_))));
    }
}
