use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::marl::{Algorithm, TrainConfig};
use crate::reward::RewardWeights;

/// Axes of a sweep. Every combination of gap, size, algorithm and seed is one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Intra-platoon gaps, metres.
    pub gaps_m: Vec<f64>,
    /// Platoon members per platoon (followers, leader excluded).
    pub platoon_sizes: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// Share of final episodes that converged-performance metrics average over.
    pub tail_fraction: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            gaps_m: vec![5.0, 15.0, 25.0, 35.0],
            platoon_sizes: vec![3],
            algorithms: vec![Algorithm::ModifiedMaddpgTdec, Algorithm::ModifiedMaddpg],
            seeds: vec![1, 2, 3],
            tail_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub reward: RewardWeights,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("results"),
            env: EnvConfig::default(),
            train: TrainConfig::default(),
            reward: RewardWeights::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// The scenario of one sweep point.
    pub fn env_at(&self, gap_m: f64, followers: usize) -> EnvConfig {
        EnvConfig {
            intra_platoon_gap_m: gap_m,
            followers_per_platoon: followers,
            ..self.env.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.train.validate()?;
        self.reward.validate()?;
        let sweep = &self.sweep;
        let fail = |m: String| Err(Error::Config(m));
        if sweep.gaps_m.is_empty() || sweep.platoon_sizes.is_empty() {
            return fail("sweep.gaps_m and sweep.platoon_sizes must not be empty".into());
        }
        if sweep.algorithms.is_empty() {
            return fail("sweep.algorithms must not be empty".into());
        }
        if sweep.seeds.is_empty() {
            return fail("sweep.seeds must not be empty".into());
        }
        let distinct: BTreeSet<_> = sweep.seeds.iter().collect();
        if distinct.len() != sweep.seeds.len() {
            return fail("sweep.seeds must be distinct".into());
        }
        if !(sweep.tail_fraction > 0.0 && sweep.tail_fraction <= 1.0) {
            return fail(format!(
                "sweep.tail_fraction must lie in (0, 1], got {}",
                sweep.tail_fraction
            ));
        }
        for &gap in &sweep.gaps_m {
            if !(gap.is_finite() && gap > 0.0) {
                return fail(format!("sweep.gaps_m entries must be positive, got {gap}"));
            }
            for &size in &sweep.platoon_sizes {
                self.env_at(gap, size)
                    .validate()
                    .map_err(|e| Error::Config(format!("sweep point gap {gap} m, size {size}: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line where the key named at the start of a validation message is set, if any.
fn line_of_key(text: &str, message: &str) -> Option<usize> {
    let path = message.split_whitespace().next()?;
    let key = path.rsplit('.').next()?.trim_end_matches(':');
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

/// Parse and validate a config from TOML text. Omitted keys take their defaults.
pub fn parse_config_str(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        Error::Parse {
            path: path.to_path_buf(),
            message: match line {
                Some(n) => format!("line {n}: {}", e.message()),
                None => e.message().to_string(),
            },
        }
    })?;
    config.validate().map_err(|e| match e {
        Error::Config(m) => match line_of_key(text, &m) {
            Some(n) => Error::Config(format!("{}: line {n}: {m}", path.display())),
            None => Error::Config(format!("{}: {m}", path.display())),
        },
        other => other,
    })?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config_str(text, Path::new("test.toml"))
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.env.num_subchannels, 3);
        assert_eq!(c.env.subchannel_bandwidth_hz, 180e3);
        assert_eq!(c.env.cam_payload_bits, 32_000.0);
        assert_eq!(c.train.buffer_capacity, 50_000);
    }

    #[test]
    fn negative_gap_is_rejected_with_its_line() {
        let err = parse("[env]\nnum_platoons = 2\nintra_platoon_gap_m = -5.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("line 3"), "{msg}");
        let err = parse("[sweep]\ngaps_m = [5.0, -5.0]\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_syntax_report_lines() {
        let err = parse("[env]\n\nnum_platoon = 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = parse("[train]\nepisodes = = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn duplicate_seeds_are_rejected() {
        assert!(parse("[sweep]\nseeds = [1, 1]\n").is_err());
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::default();
        c.env.num_platoons = 2;
        c.train.actor_hidden = vec![32, 16];
        c.reward.kappa2 = 50.0;
        c.sweep.algorithms = vec![Algorithm::Random, Algorithm::Ddpg];
        c.sweep.gaps_m = vec![7.5];
        let text = c.to_toml_string().unwrap();
        assert_eq!(parse(&text).unwrap(), c);
        let again = parse(&parse(&text).unwrap().to_toml_string().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            parse_config(Path::new("/nonexistent/x.toml")),
            Err(Error::Io { .. })
        ));
    }
}
