//! Per-run metrics files: comma-separated, one row per episode.
//!
//! ```text
//! # aoi-marl metrics v1
//! # algorithm=modified_maddpg_tdec seed=3 gap_m=25 platoon_size=3 platoons=2
//! episode,mean_local_reward,task_cam_reward,...,local_reward_0,local_reward_1
//! 0,-0.11,...
//! ```
//!
//! Floats use shortest round-trip formatting, so equal runs give equal bytes.
//! Wall-clock times live in a separate `.timing` file next to the metrics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::marl::{Algorithm, EpisodeRecord};

pub const SCHEMA_HEADER: &str = "# aoi-marl metrics v1";

const FIXED_COLUMNS: [&str; 9] = [
    "episode",
    "mean_local_reward",
    "task_cam_reward",
    "task_aoi_reward",
    "global_reward",
    "mean_aoi_s",
    "cam_delivered",
    "cam_delivered_frac",
    "mean_power_w",
];

/// Identity of one run within a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub gap_m: f64,
    /// Followers per platoon.
    pub platoon_size: usize,
}

impl RunSpec {
    pub fn file_stem(&self) -> String {
        format!(
            "{}_gap{}_size{}_seed{}",
            self.algorithm, self.gap_m, self.platoon_size, self.seed
        )
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.file_stem())
    }

    /// Total order used wherever results are combined, so sums never depend on file order.
    pub fn sort_key(&self) -> (Algorithm, usize, u64, u64) {
        (self.algorithm, self.platoon_size, self.gap_m.to_bits(), self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsFile {
    pub spec: RunSpec,
    pub num_platoons: usize,
    /// `wall_clock_s` is zero; timings are not part of the file.
    pub records: Vec<EpisodeRecord>,
}

pub fn metrics_to_string(spec: &RunSpec, num_platoons: usize, records: &[EpisodeRecord]) -> String {
    let mut out = String::new();
    out.push_str(SCHEMA_HEADER);
    out.push('\n');
    writeln!(
        out,
        "# algorithm={} seed={} gap_m={} platoon_size={} platoons={num_platoons}",
        spec.algorithm, spec.seed, spec.gap_m, spec.platoon_size
    )
    .unwrap();
    out.push_str(&FIXED_COLUMNS.join(","));
    for j in 0..num_platoons {
        write!(out, ",local_reward_{j}").unwrap();
    }
    out.push('\n');
    for r in records {
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.episode,
            r.mean_local_reward,
            r.task_cam_reward,
            r.task_aoi_reward,
            r.global_reward,
            r.mean_aoi_s,
            u8::from(r.cam_delivered),
            r.cam_delivered_frac,
            r.mean_power_w
        )
        .unwrap();
        for v in &r.local_rewards {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn timing_to_string(records: &[EpisodeRecord]) -> String {
    let mut out = String::from("episode,wall_clock_s\n");
    for r in records {
        writeln!(out, "{},{}", r.episode, r.wall_clock_s).unwrap();
    }
    out
}

/// Path of the timing sidecar of a metrics file.
pub fn timing_path(metrics: &Path) -> PathBuf {
    metrics.with_extension("timing")
}

/// Write `contents` to a temporary sibling and rename it into place, so a
/// reader never sees a half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn parse_metrics_str(text: &str, path: &Path) -> Result<MetricsFile> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l == SCHEMA_HEADER => {}
        Some((n, l)) => return Err(err(n, format!("expected `{SCHEMA_HEADER}`, found `{l}`"))),
        None => return Err(err(1, "empty metrics file".into())),
    }
    let (n, meta) = lines.next().ok_or_else(|| err(2, "missing run metadata".into()))?;
    let mut algorithm = None;
    let mut seed = None;
    let mut gap_m = None;
    let mut platoon_size = None;
    let mut platoons = None;
    for field in meta.trim_start_matches('#').split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(n, format!("bad metadata field `{field}`")))?;
        let bad = |e: String| err(n, format!("bad value for `{key}`: {e}"));
        match key {
            "algorithm" => algorithm = Some(value.parse::<Algorithm>().map_err(|e| err(n, e.to_string()))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(e.to_string()))?),
            "gap_m" => gap_m = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "platoon_size" => platoon_size = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "platoons" => platoons = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            _ => return Err(err(n, format!("unknown metadata key `{key}`"))),
        }
    }
    let missing = |k: &str| err(n, format!("metadata lacks `{k}`"));
    let spec = RunSpec {
        algorithm: algorithm.ok_or_else(|| missing("algorithm"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        gap_m: gap_m.ok_or_else(|| missing("gap_m"))?,
        platoon_size: platoon_size.ok_or_else(|| missing("platoon_size"))?,
    };
    let num_platoons = platoons.ok_or_else(|| missing("platoons"))?;

    let (n, header) = lines.next().ok_or_else(|| err(3, "missing column header".into()))?;
    let expected_cols = FIXED_COLUMNS.len() + num_platoons;
    if header.split(',').count() != expected_cols || !header.starts_with(&FIXED_COLUMNS.join(",")) {
        return Err(err(n, "column header does not match the v1 schema".into()));
    }

    let mut records = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_cols {
            return Err(err(
                n,
                format!("expected {expected_cols} columns, found {}", fields.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| err(n, format!("column {}: {e}", i + 1)))
        };
        let delivered = match fields[6] {
            "0" => false,
            "1" => true,
            other => return Err(err(n, format!("cam_delivered must be 0 or 1, found `{other}`"))),
        };
        records.push(EpisodeRecord {
            episode: fields[0].parse().map_err(|e| err(n, format!("episode: {e}")))?,
            mean_local_reward: num(1)?,
            task_cam_reward: num(2)?,
            task_aoi_reward: num(3)?,
            global_reward: num(4)?,
            mean_aoi_s: num(5)?,
            cam_delivered: delivered,
            cam_delivered_frac: num(7)?,
            mean_power_w: num(8)?,
            local_rewards: (FIXED_COLUMNS.len()..expected_cols).map(num).collect::<Result<_>>()?,
            wall_clock_s: 0.0,
        });
    }
    Ok(MetricsFile {
        spec,
        num_platoons,
        records,
    })
}

pub fn read_metrics(path: &Path) -> Result<MetricsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(episode: usize, aoi: f64, delivered: bool) -> EpisodeRecord {
        EpisodeRecord {
            episode,
            mean_local_reward: -0.1 * episode as f64,
            local_rewards: vec![0.25, 1.0 / 3.0],
            task_cam_reward: -0.5,
            task_aoi_reward: 0.4,
            global_reward: 0.1,
            mean_aoi_s: aoi,
            cam_delivered_frac: if delivered { 1.0 } else { 0.5 },
            cam_delivered: delivered,
            mean_power_w: 0.123456789012345,
            wall_clock_s: 0.0,
        }
    }

    fn spec() -> RunSpec {
        RunSpec {
            algorithm: Algorithm::ModifiedMaddpgTdec,
            seed: 7,
            gap_m: 12.5,
            platoon_size: 3,
        }
    }

    #[test]
    fn round_trip() {
        let records: Vec<_> = (0..5).map(|e| record(e, 0.001 * (e + 1) as f64, e % 2 == 0)).collect();
        let text = metrics_to_string(&spec(), 2, &records);
        let back = parse_metrics_str(&text, Path::new("m.csv")).unwrap();
        assert_eq!(back.spec, spec());
        assert_eq!(back.records, records);
        assert_eq!(metrics_to_string(&back.spec, back.num_platoons, &back.records), text);
    }

    #[test]
    fn rejects_other_schemas() {
        let text = metrics_to_string(&spec(), 2, &[record(0, 0.001, true)]);
        let bad = text.replace("metrics v1", "metrics v2");
        assert!(parse_metrics_str(&bad, Path::new("m.csv")).is_err());
        let truncated = text.trim_end().rsplit_once(',').unwrap().0.to_string();
        assert!(parse_metrics_str(&truncated, Path::new("m.csv")).is_err());
    }

    #[test]
    fn deterministic_naming() {
        assert_eq!(spec().file_name(), "modified_maddpg_tdec_gap12.5_size3_seed7.csv");
        let s = RunSpec { gap_m: 25.0, ..spec() };
        assert_eq!(s.file_name(), "modified_maddpg_tdec_gap25_size3_seed7.csv");
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_atomic(&path, "x\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "x\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
