//! Link-level channel model.
//!
//! A link's power gain on subchannel `k` is the product of a large-scale term
//! (path loss, log-normal shadowing, antenna gains and receiver noise figure,
//! all combined in dB) and an independent small-scale Rayleigh power sample.
//! Large-scale state is refreshed once per epoch; fading is redrawn per slot.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distances below this are clamped before entering a log-distance law.
pub const MIN_LINK_DISTANCE_M: f64 = 1.0;

/// 2-D position on the road grid, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    /// Platoon leader to road-side unit.
    V2I,
    /// Platoon leader to a platoon member (own or foreign platoon).
    V2V,
}

/// Which law to use for vehicle-to-vehicle path loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum V2vPathLossModel {
    /// WINNER B1 line-of-sight, below the breakpoint distance.
    #[default]
    WinnerB1Los,
    /// Free-space (Friis) loss.
    FreeSpace,
}

/// Radio constants shared by every link of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub carrier_ghz: f64,
    pub v2v_pathloss: V2vPathLossModel,
    pub v2i_shadowing_std_db: f64,
    pub v2v_shadowing_std_db: f64,
    pub v2i_decorrelation_m: f64,
    pub v2v_decorrelation_m: f64,
    pub rsu_antenna_height_m: f64,
    pub vehicle_antenna_height_m: f64,
    pub rsu_antenna_gain_dbi: f64,
    pub vehicle_antenna_gain_dbi: f64,
    pub rsu_noise_figure_db: f64,
    pub vehicle_noise_figure_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            carrier_ghz: 2.0,
            v2v_pathloss: V2vPathLossModel::WinnerB1Los,
            v2i_shadowing_std_db: 8.0,
            v2v_shadowing_std_db: 3.0,
            v2i_decorrelation_m: 50.0,
            v2v_decorrelation_m: 10.0,
            rsu_antenna_height_m: 25.0,
            vehicle_antenna_height_m: 1.5,
            rsu_antenna_gain_dbi: 8.0,
            vehicle_antenna_gain_dbi: 3.0,
            rsu_noise_figure_db: 5.0,
            vehicle_noise_figure_db: 9.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_ghz", self.carrier_ghz),
            ("v2i_shadowing_std_db", self.v2i_shadowing_std_db),
            ("v2v_shadowing_std_db", self.v2v_shadowing_std_db),
            ("v2i_decorrelation_m", self.v2i_decorrelation_m),
            ("v2v_decorrelation_m", self.v2v_decorrelation_m),
            ("rsu_antenna_height_m", self.rsu_antenna_height_m),
            ("vehicle_antenna_height_m", self.vehicle_antenna_height_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("channel.{name} must be positive, got {v}")));
            }
        }
        let finite = [
            ("rsu_antenna_gain_dbi", self.rsu_antenna_gain_dbi),
            ("vehicle_antenna_gain_dbi", self.vehicle_antenna_gain_dbi),
            ("rsu_noise_figure_db", self.rsu_noise_figure_db),
            ("vehicle_noise_figure_db", self.vehicle_noise_figure_db),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::Config(format!("channel.{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn shadowing_std_db(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::V2I => self.v2i_shadowing_std_db,
            LinkKind::V2V => self.v2v_shadowing_std_db,
        }
    }

    pub fn decorrelation_m(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::V2I => self.v2i_decorrelation_m,
            LinkKind::V2V => self.v2v_decorrelation_m,
        }
    }

    /// Transmit plus receive antenna gain of a link, dBi.
    pub fn antenna_gain_db(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::V2I => self.vehicle_antenna_gain_dbi + self.rsu_antenna_gain_dbi,
            LinkKind::V2V => 2.0 * self.vehicle_antenna_gain_dbi,
        }
    }

    /// Noise figure of the receiving end of a link.
    pub fn noise_figure_db(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::V2I => self.rsu_noise_figure_db,
            LinkKind::V2V => self.vehicle_noise_figure_db,
        }
    }

    pub fn pathloss_db(&self, kind: LinkKind, distance_m: f64) -> Result<f64> {
        match kind {
            LinkKind::V2I => v2i_pathloss_db(distance_m),
            LinkKind::V2V => match self.v2v_pathloss {
                V2vPathLossModel::WinnerB1Los => v2v_pathloss_db(distance_m, self.carrier_ghz),
                V2vPathLossModel::FreeSpace => free_space_pathloss_db(distance_m, self.carrier_ghz),
            },
        }
    }
}

/// Geometry of one transmitter/receiver pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub tx_position: Point,
    pub rx_position: Point,
    pub link_kind: LinkKind,
    pub antenna_height_tx: f64,
    pub antenna_height_rx: f64,
}

impl LinkGeometry {
    pub fn new(kind: LinkKind, tx: Point, rx: Point, params: &ChannelParams) -> Self {
        let (h_tx, h_rx) = match kind {
            LinkKind::V2I => (params.vehicle_antenna_height_m, params.rsu_antenna_height_m),
            LinkKind::V2V => (params.vehicle_antenna_height_m, params.vehicle_antenna_height_m),
        };
        LinkGeometry {
            tx_position: tx,
            rx_position: rx,
            link_kind: kind,
            antenna_height_tx: h_tx,
            antenna_height_rx: h_rx,
        }
    }

    /// Antenna-to-antenna distance, floored at [`MIN_LINK_DISTANCE_M`].
    pub fn distance(&self) -> f64 {
        let ground = self.tx_position.distance(&self.rx_position);
        let dh = self.antenna_height_tx - self.antenna_height_rx;
        ground.hypot(dh).max(MIN_LINK_DISTANCE_M)
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Path loss of a leader-to-RSU link; `distance_m` in meters.
pub fn v2i_pathloss_db(distance_m: f64) -> Result<f64> {
    if !positive(distance_m) {
        return Err(Error::Domain(format!(
            "V2I distance must be positive, got {distance_m}"
        )));
    }
    Ok(128.1 + 37.6 * (distance_m / 1000.0).log10())
}

/// WINNER B1 LOS path loss below the breakpoint: `22.7 log10(d) + 41 + 20 log10(fc / 5)`.
pub fn v2v_pathloss_db(distance_m: f64, carrier_ghz: f64) -> Result<f64> {
    if !positive(distance_m) {
        return Err(Error::Domain(format!(
            "V2V distance must be positive, got {distance_m}"
        )));
    }
    if !positive(carrier_ghz) {
        return Err(Error::Domain(format!(
            "carrier frequency must be positive, got {carrier_ghz}"
        )));
    }
    Ok(22.7 * distance_m.log10() + 41.0 + 20.0 * (carrier_ghz / 5.0).log10())
}

pub fn free_space_pathloss_db(distance_m: f64, carrier_ghz: f64) -> Result<f64> {
    if !positive(distance_m) || !positive(carrier_ghz) {
        return Err(Error::Domain(format!(
            "free-space loss needs positive inputs, got d={distance_m} fc={carrier_ghz}"
        )));
    }
    Ok(20.0 * distance_m.log10() + 20.0 * carrier_ghz.log10() + 32.45)
}

/// Gauss-Markov shadowing update driven by the distance moved since the last
/// draw. The stationary marginal is `Normal(0, sigma_db^2)`.
pub fn sample_shadowing<R: Rng + ?Sized>(
    prev_db: f64,
    moved_m: f64,
    decorrelation_m: f64,
    sigma_db: f64,
    rng: &mut R,
) -> f64 {
    debug_assert!(decorrelation_m > 0.0 && sigma_db > 0.0 && moved_m >= 0.0);
    let rho = (-moved_m / decorrelation_m).exp();
    let n: f64 = StandardNormal.sample(rng);
    if rho == 1.0 {
        return prev_db;
    }
    rho * prev_db + (1.0 - rho * rho).sqrt() * sigma_db * n
}

/// `|x|^2` for a unit-power circularly-symmetric complex Gaussian `x`.
pub fn sample_rayleigh_power<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    0.5 * (re * re + im * im)
}

/// Frozen large-scale part of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeScaleState {
    pub pathloss_db: f64,
    pub shadowing_db: f64,
    pub last_position: Point,
    pub antenna_gain_db: f64,
    pub noise_figure_db: f64,
}

impl LargeScaleState {
    /// First draw for a link: shadowing comes from the stationary marginal.
    pub fn fresh<R: Rng + ?Sized>(geometry: &LinkGeometry, params: &ChannelParams, rng: &mut R) -> Result<Self> {
        let kind = geometry.link_kind;
        let shadowing = sample_shadowing(
            0.0,
            f64::INFINITY,
            params.decorrelation_m(kind),
            params.shadowing_std_db(kind),
            rng,
        );
        Ok(LargeScaleState {
            pathloss_db: params.pathloss_db(kind, geometry.distance())?,
            shadowing_db: shadowing,
            last_position: geometry.tx_position,
            antenna_gain_db: params.antenna_gain_db(kind),
            noise_figure_db: params.noise_figure_db(kind),
        })
    }

    /// Epoch-boundary refresh. Shadowing decorrelates with the transmitter's
    /// displacement since the previous refresh.
    pub fn refresh<R: Rng + ?Sized>(
        &mut self,
        geometry: &LinkGeometry,
        params: &ChannelParams,
        rng: &mut R,
    ) -> Result<()> {
        let kind = geometry.link_kind;
        let moved = geometry.tx_position.distance(&self.last_position);
        self.shadowing_db = sample_shadowing(
            self.shadowing_db,
            moved,
            params.decorrelation_m(kind),
            params.shadowing_std_db(kind),
            rng,
        );
        self.pathloss_db = params.pathloss_db(kind, geometry.distance())?;
        self.last_position = geometry.tx_position;
        Ok(())
    }

    /// Net large-scale gain in dB.
    pub fn gain_db(&self) -> f64 {
        -self.pathloss_db - self.shadowing_db + self.antenna_gain_db - self.noise_figure_db
    }

    pub fn linear_gain(&self) -> f64 {
        10f64.powf(self.gain_db() / 10.0)
    }
}

/// Combine a large-scale state with one fading power sample.
pub fn compose_gain(large: &LargeScaleState, fading_power: f64) -> f64 {
    large.linear_gain() * fading_power
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn v2i_pathloss_reference_points() {
        assert_relative_eq!(v2i_pathloss_db(1000.0).unwrap(), 128.1, epsilon = 1e-12);
        assert_relative_eq!(v2i_pathloss_db(100.0).unwrap(), 90.5, epsilon = 1e-12);
        assert!((v2i_pathloss_db(500.0).unwrap() - 116.782).abs() < 1e-3);
        assert!(v2i_pathloss_db(0.0).is_err());
        assert!(v2i_pathloss_db(-3.0).is_err());
    }

    #[test]
    fn v2v_pathloss_reference_points() {
        assert!((v2v_pathloss_db(10.0, 2.0).unwrap() - 55.74).abs() < 0.01);
        assert!((v2v_pathloss_db(25.0, 2.0).unwrap() - 64.77).abs() < 0.01);
        assert_relative_eq!(v2v_pathloss_db(1.0, 5.0).unwrap(), 41.0, epsilon = 1e-12);
        assert!(v2v_pathloss_db(0.0, 2.0).is_err());
        assert!(v2v_pathloss_db(10.0, 0.0).is_err());
    }

    #[test]
    fn shadowing_without_motion_is_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_shadowing(4.25, 0.0, 10.0, 3.0, &mut rng), 4.25);
    }

    #[test]
    fn shadowing_correlation_at_one_decorrelation_distance() {
        // rho = e^-1; with sigma -> tiny the update is dominated by rho * prev.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = sample_shadowing(1.0, 10.0, 10.0, 1e-12, &mut rng);
        assert!((v - (-1.0f64).exp()).abs() < 1e-9);
        assert!(((-1.0f64).exp() - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn distance_floor_applies() {
        let p = ChannelParams::default();
        let g = LinkGeometry::new(LinkKind::V2V, Point::new(3.0, 3.0), Point::new(3.0, 3.0), &p);
        assert_eq!(g.distance(), MIN_LINK_DISTANCE_M);
        let g = LinkGeometry::new(LinkKind::V2I, Point::new(0.0, 0.0), Point::new(0.0, 0.0), &p);
        assert!((g.distance() - 23.5).abs() < 1e-12);
    }

    #[test]
    fn composed_gain_reference_value() {
        let large = LargeScaleState {
            pathloss_db: 90.5,
            shadowing_db: 0.0,
            last_position: Point::default(),
            antenna_gain_db: 11.0,
            noise_figure_db: 0.0,
        };
        assert_relative_eq!(compose_gain(&large, 1.0), 10f64.powf(-7.95), max_relative = 1e-12);
        assert_eq!(compose_gain(&large, 0.0), 0.0);
    }

    #[test]
    fn power_unit_conversions() {
        assert_relative_eq!(dbm_to_watts(30.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(watts_to_dbm(dbm_to_watts(-114.0)), -114.0, max_relative = 1e-12);
    }

    #[test]
    fn rayleigh_sequence_is_reproducible() {
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            (0..16).map(|_| sample_rayleigh_power(&mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            (0..16).map(|_| sample_rayleigh_power(&mut rng)).collect()
        };
        assert_eq!(a, b);
        assert!(a.iter().all(|g| *g >= 0.0 && g.is_finite()));
    }
}
