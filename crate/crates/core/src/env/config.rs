use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_watts, ChannelParams};
use crate::error::{Error, Result};

/// Scenario parameters for one simulated network.
///
/// Defaults follow the reference urban parameter set: 3 resource blocks of
/// 180 kHz, 1 ms slots, a 100 ms CAM deadline, 4000-byte CAMs, a 3 bit/s/Hz
/// V2I floor, 30 dBm maximum power and -114 dBm noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub num_platoons: usize,
    /// Platoon members excluding the leader (platoon size minus one).
    pub followers_per_platoon: usize,
    pub num_subchannels: usize,
    pub subchannel_bandwidth_hz: f64,
    pub slot_s: f64,
    /// Slots per episode; the CAM deadline is `episode_slots * slot_s`.
    pub episode_slots: usize,
    pub cam_payload_bits: f64,
    pub min_v2i_rate: f64,
    pub max_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub intra_platoon_gap_m: f64,
    pub vehicle_length_m: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    /// Probability that a leader turns when it crosses an intersection.
    pub turn_probability: f64,
    /// Keep each platoon's AoI across episode boundaries instead of resetting it.
    pub aoi_persists_across_episodes: bool,
    pub grid: GridConfig,
    pub channel: ChannelParams,
    pub observation: ObservationScaling,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            num_platoons: 4,
            followers_per_platoon: 3,
            num_subchannels: 3,
            subchannel_bandwidth_hz: 180e3,
            slot_s: 1e-3,
            episode_slots: 100,
            cam_payload_bits: 32_000.0,
            min_v2i_rate: 3.0,
            max_power_dbm: 30.0,
            noise_power_dbm: -114.0,
            intra_platoon_gap_m: 25.0,
            vehicle_length_m: 5.0,
            speed_min_mps: 10.0,
            speed_max_mps: 15.0,
            turn_probability: 0.0,
            aoi_persists_across_episodes: false,
            grid: GridConfig::default(),
            channel: ChannelParams::default(),
            observation: ObservationScaling::default(),
        }
    }
}

/// Manhattan road grid; roads run along block edges and wrap at the borders.
/// The RSU sits at the intersection nearest the grid center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub block_width_m: f64,
    pub block_height_m: f64,
    pub columns: usize,
    pub rows: usize,
    pub lane_width_m: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            block_width_m: 433.0,
            block_height_m: 250.0,
            columns: 2,
            rows: 2,
            lane_width_m: 3.5,
        }
    }
}

/// Affine maps applied to observation features.
///
/// Channel gains enter as the SNR (dB) they would give at maximum power;
/// interference as its level above the noise floor (dB); AoI in units of
/// `aoi_scale_s`, or of the CAM deadline when unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationScaling {
    pub v2i_snr_center_db: f64,
    pub v2v_snr_center_db: f64,
    pub snr_scale_db: f64,
    pub interference_center_db: f64,
    pub interference_scale_db: f64,
    pub aoi_scale_s: Option<f64>,
    /// Every feature is clipped to `[-clip, clip]` after scaling.
    pub clip: f64,
}

impl Default for ObservationScaling {
    fn default() -> Self {
        ObservationScaling {
            v2i_snr_center_db: 20.0,
            v2v_snr_center_db: 60.0,
            snr_scale_db: 30.0,
            interference_center_db: 20.0,
            interference_scale_db: 20.0,
            aoi_scale_s: None,
            clip: 5.0,
        }
    }
}

impl EnvConfig {
    pub fn max_power_w(&self) -> f64 {
        dbm_to_watts(self.max_power_dbm)
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    /// CAM deadline `T` in seconds.
    pub fn time_budget_s(&self) -> f64 {
        self.episode_slots as f64 * self.slot_s
    }

    /// Length of a raw action vector: K subchannel scores, a mode score and a power score.
    pub fn action_dim(&self) -> usize {
        self.num_subchannels + 2
    }

    pub fn observation_dim(&self) -> usize {
        3 * self.num_subchannels + 3
    }

    /// Bits delivered in one slot at spectral efficiency `rate`.
    pub fn bits_per_slot(&self, rate: f64) -> f64 {
        rate * self.subchannel_bandwidth_hz * self.slot_s
    }

    /// Leader-to-last-member distance along the lane.
    pub fn platoon_length_m(&self) -> f64 {
        self.followers_per_platoon as f64 * (self.intra_platoon_gap_m + self.vehicle_length_m)
    }

    pub fn validate(&self) -> Result<()> {
        fn fail<T>(msg: String) -> Result<T> {
            Err(Error::Config(msg))
        }
        if self.num_platoons == 0 {
            return fail("num_platoons must be at least 1".into());
        }
        if self.followers_per_platoon == 0 {
            return fail("followers_per_platoon must be at least 1".into());
        }
        if self.num_subchannels == 0 {
            return fail("num_subchannels must be at least 1".into());
        }
        if self.episode_slots == 0 {
            return fail("episode_slots must be at least 1".into());
        }
        let positive = [
            ("subchannel_bandwidth_hz", self.subchannel_bandwidth_hz),
            ("slot_s", self.slot_s),
            ("cam_payload_bits", self.cam_payload_bits),
            ("intra_platoon_gap_m", self.intra_platoon_gap_m),
            ("speed_min_mps", self.speed_min_mps),
            ("speed_max_mps", self.speed_max_mps),
            ("grid.block_width_m", self.grid.block_width_m),
            ("grid.block_height_m", self.grid.block_height_m),
            ("observation.snr_scale_db", self.observation.snr_scale_db),
            (
                "observation.interference_scale_db",
                self.observation.interference_scale_db,
            ),
            ("observation.aoi_scale_s", self.observation.aoi_scale_s.unwrap_or(1.0)),
            ("observation.clip", self.observation.clip),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        let non_negative = [
            ("min_v2i_rate", self.min_v2i_rate),
            ("vehicle_length_m", self.vehicle_length_m),
            ("grid.lane_width_m", self.grid.lane_width_m),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be non-negative and finite, got {v}"));
            }
        }
        for (name, v) in [
            ("max_power_dbm", self.max_power_dbm),
            ("noise_power_dbm", self.noise_power_dbm),
            ("observation.v2i_snr_center_db", self.observation.v2i_snr_center_db),
            ("observation.v2v_snr_center_db", self.observation.v2v_snr_center_db),
            (
                "observation.interference_center_db",
                self.observation.interference_center_db,
            ),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite"));
            }
        }
        if self.speed_min_mps > self.speed_max_mps {
            return fail(format!(
                "speed_min_mps ({}) exceeds speed_max_mps ({})",
                self.speed_min_mps, self.speed_max_mps
            ));
        }
        if !(0.0..=1.0).contains(&self.turn_probability) {
            return fail(format!(
                "turn_probability must lie in [0, 1], got {}",
                self.turn_probability
            ));
        }
        if self.grid.columns == 0 || self.grid.rows == 0 {
            return fail("grid must have at least one row and one column".into());
        }
        self.channel.validate()?;

        // A platoon must fit on the shortest road loop without overlapping itself.
        let shortest_road =
            (self.grid.block_width_m * self.grid.columns as f64).min(self.grid.block_height_m * self.grid.rows as f64);
        let length = self.platoon_length_m() + self.vehicle_length_m;
        if length >= shortest_road {
            return fail(format!(
                "platoon of {} members with {} m gap spans {length} m, longer than the {shortest_road} m road loop",
                self.followers_per_platoon + 1,
                self.intra_platoon_gap_m
            ));
        }
        Ok(())
    }
}
