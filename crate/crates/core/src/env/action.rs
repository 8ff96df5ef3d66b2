use super::config::EnvConfig;
use crate::error::{Error, Result};

/// Transmission mode selected by a platoon leader for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Uplink to the RSU (mode bit 0).
    V2I,
    /// Intra-platoon CAM broadcast (mode bit 1).
    Broadcast,
}

impl Mode {
    /// The mode bit: 1 for broadcast, 0 for V2I.
    pub fn bit(self) -> f64 {
        match self {
            Mode::V2I => 0.0,
            Mode::Broadcast => 1.0,
        }
    }
}

/// A decoded per-slot decision: one subchannel, one mode, one power level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionCommand {
    pub subchannel: usize,
    pub mode: Mode,
    pub power_w: f64,
}

/// Monotone map from the real line onto `[0, 1]`; the raw power score's
/// natural range `[-1, 1]` spans the whole interval.
pub fn squash(x: f64) -> f64 {
    ((x + 1.0) * 0.5).clamp(0.0, 1.0)
}

/// Turn a raw `K + 2` score vector into an [`ActionCommand`].
///
/// The subchannel is the argmax of the first `K` entries (ties resolve to the
/// lowest index), broadcast mode is chosen when entry `K` is non-negative, and
/// the power is `p_max * squash(entry K+1)`.
pub fn decode_action(raw: &[f64], config: &EnvConfig) -> Result<ActionCommand> {
    let k = config.num_subchannels;
    if raw.len() != k + 2 {
        return Err(Error::Decode(format!("expected {} entries, got {}", k + 2, raw.len())));
    }
    if let Some(i) = raw.iter().position(|v| v.is_nan()) {
        return Err(Error::Decode(format!("entry {i} is NaN")));
    }
    let mut subchannel = 0;
    for (i, &score) in raw[..k].iter().enumerate() {
        if score > raw[subchannel] {
            subchannel = i;
        }
    }
    let mode = if raw[k] >= 0.0 { Mode::Broadcast } else { Mode::V2I };
    Ok(ActionCommand {
        subchannel,
        mode,
        power_w: config.max_power_w() * squash(raw[k + 1]),
    })
}
