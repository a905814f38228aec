//! CSV and Markdown artifacts of runs and aggregations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AggregateRow, LabeledRun, RunOutcome, RunSummary, SegmentStats};
use crate::agents::FitRecord;
use crate::config::{AgentKind, RunConfig};
use crate::envs::EnvId;
use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EpisodeRow {
    seed: u64,
    episode: u64,
    steps: u64,
    reward: f64,
}

#[derive(Serialize)]
struct EpochRow {
    seed: u64,
    epoch: usize,
    mean: f64,
    median: f64,
    std: f64,
    episodes: usize,
    steps: u64,
}

#[derive(Serialize)]
struct QRow {
    seed: u64,
    step: u64,
    mean_abs_q: f64,
}

#[derive(Serialize)]
struct StepsHistRow {
    seed: u64,
    steps: u32,
    count: usize,
}

#[derive(Serialize)]
struct AbortRow<'a> {
    seed: u64,
    reason: &'a str,
}

/// One line of `runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub env: EnvId,
    pub agent: String,
    pub gamma: f64,
    pub seed: u64,
    pub final_reward: f64,
    pub mean_abs_q: f64,
    pub max_abs_q: f64,
    pub episodes: usize,
    pub segment_min: Option<u32>,
    pub segment_mean: Option<f64>,
    pub segment_median: Option<f64>,
    pub segment_max: Option<u32>,
}

impl RunRow {
    pub fn new(cfg: &RunConfig, s: &RunSummary) -> Self {
        Self {
            env: cfg.run.env,
            agent: cfg.label(),
            gamma: cfg.agent.gamma,
            seed: s.seed,
            final_reward: s.final_reward,
            mean_abs_q: s.mean_abs_q,
            max_abs_q: s.max_abs_q,
            episodes: s.episodes,
            segment_min: s.segments.map(|g| g.min),
            segment_mean: s.segments.map(|g| g.mean),
            segment_median: s.segments.map(|g| g.median),
            segment_max: s.segments.map(|g| g.max),
        }
    }

    pub fn into_labeled(self) -> LabeledRun {
        let segments = match (self.segment_min, self.segment_mean, self.segment_median, self.segment_max) {
            (Some(min), Some(mean), Some(median), Some(max)) => Some(SegmentStats { min, max, mean, median }),
            _ => None,
        };
        LabeledRun {
            env: self.env,
            agent: self.agent,
            gamma: self.gamma,
            summary: RunSummary {
                seed: self.seed,
                final_reward: self.final_reward,
                mean_abs_q: self.mean_abs_q,
                max_abs_q: self.max_abs_q,
                episodes: self.episodes,
                segments,
            },
        }
    }
}

/// Writes every artifact of a `run` invocation into `dir`. Rows are ordered by seed.
pub fn write_run_outputs(dir: &Path, cfg: &RunConfig, outcomes: &[RunOutcome]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut sorted: Vec<&RunOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.seed);
    fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
    write_csv(
        &dir.join("episodes.csv"),
        sorted.iter().flat_map(|o| {
            o.episodes.iter().map(|e| EpisodeRow {
                seed: o.seed,
                episode: e.episode,
                steps: e.steps,
                reward: e.reward,
            })
        }),
    )?;
    write_csv(
        &dir.join("epochs.csv"),
        sorted.iter().flat_map(|o| {
            o.epochs.iter().map(|e| EpochRow {
                seed: o.seed,
                epoch: e.epoch,
                mean: e.mean,
                median: e.median,
                std: e.std,
                episodes: e.episodes,
                steps: e.steps,
            })
        }),
    )?;
    write_csv(
        &dir.join("qvalues.csv"),
        sorted.iter().flat_map(|o| {
            o.q_samples.iter().map(|q| QRow {
                seed: o.seed,
                step: q.step,
                mean_abs_q: q.mean_abs_q,
            })
        }),
    )?;
    write_csv(&dir.join("runs.csv"), sorted.iter().map(|o| RunRow::new(cfg, &o.summary)))?;
    if cfg.run.agent == AgentKind::Elastic {
        let mut rows = Vec::new();
        for o in &sorted {
            let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
            for &k in &o.segment_lengths {
                *hist.entry(k).or_default() += 1;
            }
            rows.extend(hist.into_iter().map(|(steps, count)| StepsHistRow { seed: o.seed, steps, count }));
        }
        write_csv(&dir.join("steps_hist.csv"), rows)?;
    }
    let aborted: Vec<AbortRow> = sorted
        .iter()
        .filter_map(|o| o.aborted.as_deref().map(|reason| AbortRow { seed: o.seed, reason }))
        .collect();
    if !aborted.is_empty() {
        write_csv(&dir.join("aborted.csv"), aborted)?;
    }
    Ok(())
}

/// Reads `runs.csv` from a run directory.
pub fn read_runs(dir: &Path) -> Result<Vec<LabeledRun>> {
    let mut r = csv::Reader::from_path(dir.join("runs.csv")).map_err(csv_err)?;
    r.deserialize::<RunRow>()
        .map(|row| row.map(RunRow::into_labeled).map_err(csv_err))
        .collect()
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.digits$}"))
}

/// Markdown rendering of the comparison table; `|Q|` cells above the bound are bold.
pub fn summary_markdown(rows: &[AggregateRow]) -> String {
    let mut s = String::new();
    s.push_str("| env | agent | runs | reward mean | reward std | p vs elastic | mean abs Q | std abs Q | median abs Q | max abs Q | spearman(reward, abs Q) |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let bold = |x: f64, on: bool| if on { format!("**{x:.2}**") } else { format!("{x:.2}") };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.2} | {:.2} | {} | {} | {:.2} | {:.2} | {} | {} |",
            r.env,
            r.agent,
            r.runs,
            r.reward_mean,
            r.reward_std,
            fmt_opt(r.p_vs_elastic, 4),
            bold(r.q_mean, r.q_mean_exceeds_bound),
            r.q_std,
            r.q_median,
            bold(r.q_max, r.q_max_exceeds_bound),
            fmt_opt(r.spearman_reward_q, 3),
        );
    }
    s
}

/// Writes `summary.csv` and `summary.md`.
pub fn write_summary(dir: &Path, rows: &[AggregateRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("summary.csv"), rows)?;
    fs::write(dir.join("summary.md"), summary_markdown(rows))?;
    Ok(())
}

/// Scatter data of one clustering fit: observation components, label and row source.
pub fn write_cluster_dump(path: &Path, env: EnvId, fit: &FitRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<&str> = env.observation_names().to_vec();
    header.extend(["label", "source"]);
    w.write_record(&header).map_err(csv_err)?;
    let rows = fit
        .sample_observations
        .iter()
        .map(|o| (o, "sample"))
        .chain([(&fit.start_obs, "start"), (&fit.next_obs, "next")]);
    for ((obs, source), label) in rows.zip(&fit.labels) {
        let mut rec: Vec<String> = obs.iter().map(f64::to_string).collect();
        rec.push(label.to_string());
        rec.push(source.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
