//! Converged-performance summaries over seeds and their plot-data export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::metrics::{read_metrics, write_atomic, MetricsFile, RunSpec};
use crate::error::{Error, Result};
use crate::marl::Algorithm;

/// Trailing average length of the exported reward curves.
pub const REWARD_SMOOTHING_EPISODES: usize = 10;

/// Which final episodes count as converged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailWindow {
    /// This share of the run, rounded up, at least one episode.
    Fraction(f64),
    Episodes(usize),
}

impl TailWindow {
    pub fn episodes(self, run_length: usize) -> Result<usize> {
        let n = match self {
            TailWindow::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::Config(format!("tail fraction must lie in (0, 1], got {f}")));
                }
                ((f * run_length as f64).ceil() as usize).max(1)
            }
            TailWindow::Episodes(n) => n,
        };
        if n == 0 || n > run_length {
            return Err(Error::Config(format!(
                "tail window of {n} episodes does not fit a run of {run_length}"
            )));
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub mean_aoi_s: f64,
    pub cam_probability: f64,
    pub mean_reward: f64,
}

/// Tail metrics of one sweep point, pooled over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryPoint {
    pub algorithm: Algorithm,
    pub platoon_size: usize,
    pub gap_m: f64,
    /// Sorted by seed.
    pub per_seed: Vec<SeedSummary>,
    pub mean_aoi_s: f64,
    /// Share of tail episodes in which every platoon delivered its CAM.
    pub cam_probability: f64,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardCurve {
    pub algorithm: Algorithm,
    pub platoon_size: usize,
    pub gap_m: f64,
    /// Seed-mean of the per-episode mean local reward.
    pub mean_reward: Vec<f64>,
    /// Trailing average of `mean_reward`.
    pub moving_average: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub tail_episodes: usize,
    pub points: Vec<SummaryPoint>,
    pub curves: Vec<RewardCurve>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| mean(values[(i + 1).saturating_sub(window)..=i].iter().copied()))
        .collect()
}

fn seed_summary(file: &MetricsFile, tail: usize) -> SeedSummary {
    let records = &file.records[file.records.len() - tail..];
    SeedSummary {
        seed: file.spec.seed,
        mean_aoi_s: mean(records.iter().map(|r| r.mean_aoi_s)),
        cam_probability: records.iter().filter(|r| r.cam_delivered).count() as f64 / tail as f64,
        mean_reward: mean(records.iter().map(|r| r.mean_local_reward)),
    }
}

/// Summarize metrics of several runs. The result does not depend on the order of `files`.
pub fn aggregate(files: &[MetricsFile], tail: TailWindow) -> Result<Summary> {
    if files.is_empty() {
        return Err(Error::Config("nothing to aggregate".into()));
    }
    let mut sorted: Vec<&MetricsFile> = files.iter().collect();
    sorted.sort_by_key(|f| f.spec.sort_key());
    if let Some(w) = sorted.windows(2).find(|w| w[0].spec.sort_key() == w[1].spec.sort_key()) {
        return Err(Error::Config(format!("duplicate run {}", w[0].spec.file_stem())));
    }
    let run_length = sorted[0].records.len();
    if let Some(f) = sorted.iter().find(|f| f.records.len() != run_length) {
        return Err(Error::Config(format!(
            "{} has {} episodes, expected {run_length}",
            f.spec.file_stem(),
            f.records.len()
        )));
    }
    let tail_episodes = tail.episodes(run_length)?;

    let mut groups: BTreeMap<(Algorithm, usize, u64), Vec<&MetricsFile>> = BTreeMap::new();
    for f in sorted {
        let key = f.spec.sort_key();
        groups.entry((key.0, key.1, key.2)).or_default().push(f);
    }

    let mut points = Vec::with_capacity(groups.len());
    let mut curves = Vec::with_capacity(groups.len());
    for runs in groups.values() {
        let RunSpec {
            algorithm,
            gap_m,
            platoon_size,
            ..
        } = runs[0].spec;
        let per_seed: Vec<SeedSummary> = runs.iter().map(|f| seed_summary(f, tail_episodes)).collect();
        let mean_reward: Vec<f64> = (0..run_length)
            .map(|e| mean(runs.iter().map(|f| f.records[e].mean_local_reward)))
            .collect();
        curves.push(RewardCurve {
            algorithm,
            platoon_size,
            gap_m,
            moving_average: moving_average(&mean_reward, REWARD_SMOOTHING_EPISODES),
            mean_reward,
        });
        points.push(SummaryPoint {
            algorithm,
            platoon_size,
            gap_m,
            mean_aoi_s: mean(per_seed.iter().map(|s| s.mean_aoi_s)),
            cam_probability: mean(per_seed.iter().map(|s| s.cam_probability)),
            mean_reward: mean(per_seed.iter().map(|s| s.mean_reward)),
            per_seed,
        });
    }
    Ok(Summary {
        tail_episodes,
        points,
        curves,
    })
}

/// Read every `.csv` metrics file in `dir` and summarize them.
pub fn aggregate_dir(dir: &Path, tail: TailWindow) -> Result<Summary> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "csv") {
            paths.push(path);
        }
    }
    paths.sort();
    let files = paths.iter().map(|p| read_metrics(p)).collect::<Result<Vec<_>>>()?;
    aggregate(&files, tail)
}

/// Twelve significant digits.
fn num(v: f64) -> String {
    format!("{v:.11e}")
}

fn table(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

pub const PLOT_FILES: [&str; 5] = [
    "reward_vs_episode.csv",
    "aoi_vs_gap.csv",
    "cam_vs_gap.csv",
    "aoi_vs_size.csv",
    "cam_vs_size.csv",
];

/// Plot-data tables keyed by file name.
pub fn plot_tables(summary: &Summary) -> Vec<(&'static str, String)> {
    let mut by_gap: Vec<&SummaryPoint> = summary.points.iter().collect();
    by_gap.sort_by_key(|p| (p.algorithm, p.platoon_size, p.gap_m.to_bits()));
    let mut by_size: Vec<&SummaryPoint> = summary.points.iter().collect();
    by_size.sort_by_key(|p| (p.algorithm, p.gap_m.to_bits(), p.platoon_size));

    let point_row = |p: &SummaryPoint, value: f64| {
        format!(
            "{},{},{},{},{}",
            p.algorithm,
            p.platoon_size,
            num(p.gap_m),
            num(value),
            p.per_seed.len()
        )
    };
    let aoi_header = "algorithm[-],platoon_size[followers],gap[m],mean_aoi[s],seeds[count]";
    let cam_header = "algorithm[-],platoon_size[followers],gap[m],cam_probability[fraction],seeds[count]";
    let reward = table(
        "algorithm[-],platoon_size[followers],gap[m],episode[index],mean_reward[-],moving_average_reward[-]",
        summary.curves.iter().flat_map(|c| {
            c.mean_reward
                .iter()
                .zip(&c.moving_average)
                .enumerate()
                .map(move |(e, (r, m))| {
                    format!(
                        "{},{},{},{e},{},{}",
                        c.algorithm,
                        c.platoon_size,
                        num(c.gap_m),
                        num(*r),
                        num(*m)
                    )
                })
        }),
    );
    vec![
        (PLOT_FILES[0], reward),
        (
            PLOT_FILES[1],
            table(aoi_header, by_gap.iter().map(|p| point_row(p, p.mean_aoi_s))),
        ),
        (
            PLOT_FILES[2],
            table(cam_header, by_gap.iter().map(|p| point_row(p, p.cam_probability))),
        ),
        (
            PLOT_FILES[3],
            table(aoi_header, by_size.iter().map(|p| point_row(p, p.mean_aoi_s))),
        ),
        (
            PLOT_FILES[4],
            table(cam_header, by_size.iter().map(|p| point_row(p, p.cam_probability))),
        ),
    ]
}

/// Write the plot-data tables into `dir`.
pub fn export_plot_data(summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    plot_tables(summary)
        .into_iter()
        .map(|(name, text)| {
            let path = dir.join(name);
            write_atomic(&path, &text).map(|()| path)
        })
        .collect()
}

/// Human-readable table of the summary points.
pub fn summary_table(summary: &Summary) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<22} {:>5} {:>7} {:>6} {:>12} {:>8} {:>11}",
        "algorithm", "size", "gap_m", "seeds", "mean_aoi_ms", "cam_prob", "mean_reward"
    )
    .unwrap();
    for p in &summary.points {
        writeln!(
            out,
            "{:<22} {:>5} {:>7} {:>6} {:>12.4} {:>8.3} {:>11.4}",
            p.algorithm.name(),
            p.platoon_size,
            p.gap_m,
            p.per_seed.len(),
            p.mean_aoi_s * 1e3,
            p.cam_probability,
            p.mean_reward
        )
        .unwrap();
    }
    out
}
