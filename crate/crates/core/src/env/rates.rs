//! Shannon rates of the leader-to-RSU and leader-to-member links under
//! co-channel interference from the other platoon leaders.

use super::action::{ActionCommand, Mode};
use super::config::EnvConfig;

/// Per-slot linear channel gains of every link in the network.
///
/// Leader `j` reaches the RSU with `v2i(j, k)` and member `i` of platoon `p`
/// with `v2v(j, p, i, k)`; `j != p` are the cross (interference) links.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    platoons: usize,
    followers: usize,
    subchannels: usize,
    v2i: Vec<f64>,
    v2v: Vec<f64>,
}

impl ChannelSnapshot {
    pub fn zeros(platoons: usize, followers: usize, subchannels: usize) -> Self {
        ChannelSnapshot {
            platoons,
            followers,
            subchannels,
            v2i: vec![0.0; platoons * subchannels],
            v2v: vec![0.0; platoons * platoons * followers * subchannels],
        }
    }

    pub fn platoons(&self) -> usize {
        self.platoons
    }

    pub fn followers(&self) -> usize {
        self.followers
    }

    pub fn subchannels(&self) -> usize {
        self.subchannels
    }

    fn v2i_index(&self, tx: usize, k: usize) -> usize {
        tx * self.subchannels + k
    }

    fn v2v_index(&self, tx: usize, platoon: usize, follower: usize, k: usize) -> usize {
        ((tx * self.platoons + platoon) * self.followers + follower) * self.subchannels + k
    }

    pub fn v2i(&self, tx: usize, k: usize) -> f64 {
        self.v2i[self.v2i_index(tx, k)]
    }

    pub fn v2v(&self, tx: usize, platoon: usize, follower: usize, k: usize) -> f64 {
        self.v2v[self.v2v_index(tx, platoon, follower, k)]
    }

    pub fn set_v2i(&mut self, tx: usize, k: usize, gain: f64) {
        let i = self.v2i_index(tx, k);
        self.v2i[i] = gain;
    }

    pub fn set_v2v(&mut self, tx: usize, platoon: usize, follower: usize, k: usize, gain: f64) {
        let i = self.v2v_index(tx, platoon, follower, k);
        self.v2v[i] = gain;
    }
}

fn on(action: &ActionCommand, k: usize) -> f64 {
    if action.subchannel == k {
        1.0
    } else {
        0.0
    }
}

/// Interference power at the RSU on every subchannel, excluding leader `j`.
pub fn v2i_interference(j: usize, actions: &[ActionCommand], snapshot: &ChannelSnapshot) -> Vec<f64> {
    (0..snapshot.subchannels())
        .map(|k| {
            actions
                .iter()
                .enumerate()
                .filter(|(other, _)| *other != j)
                .map(|(other, a)| on(a, k) * a.power_w * snapshot.v2i(other, k))
                .sum()
        })
        .collect()
}

/// Spectral efficiency (bit/s/Hz) of leader `j`'s uplink on the subchannel it
/// holds, together with the interference it sees on every subchannel.
pub fn compute_v2i_rate(
    j: usize,
    actions: &[ActionCommand],
    snapshot: &ChannelSnapshot,
    config: &EnvConfig,
) -> (f64, Vec<f64>) {
    let interference = v2i_interference(j, actions, snapshot);
    let a = &actions[j];
    let k = a.subchannel;
    let uplink = 1.0 - a.mode.bit();
    let signal = uplink * on(a, k) * a.power_w * snapshot.v2i(j, k);
    let rate = (1.0 + signal / (interference[k] + config.noise_power_w())).log2();
    (rate, interference)
}

/// Interference at member `follower` of platoon `j` on subchannel `k`.
pub fn v2v_interference(
    j: usize,
    follower: usize,
    k: usize,
    actions: &[ActionCommand],
    snapshot: &ChannelSnapshot,
) -> f64 {
    actions
        .iter()
        .enumerate()
        .filter(|(other, _)| *other != j)
        .map(|(other, a)| on(a, k) * a.power_w * snapshot.v2v(other, j, follower, k))
        .sum()
}

/// Worst-member broadcast spectral efficiency of platoon `j`.
pub fn compute_v2v_rate(j: usize, actions: &[ActionCommand], snapshot: &ChannelSnapshot, config: &EnvConfig) -> f64 {
    let a = &actions[j];
    let k = a.subchannel;
    let broadcast = a.mode.bit();
    let noise = config.noise_power_w();
    (0..snapshot.followers())
        .map(|i| {
            let signal = broadcast * on(a, k) * a.power_w * snapshot.v2v(j, j, i, k);
            let interference = v2v_interference(j, i, k, actions, snapshot);
            (1.0 + signal / (interference + noise)).log2()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Whether leader `j`'s uplink meets the V2I rate floor this slot.
pub fn v2i_succeeds(action: &ActionCommand, v2i_rate: f64, config: &EnvConfig) -> bool {
    action.mode == Mode::V2I && v2i_rate >= config.min_v2i_rate
}
