//! Training runs, epoch bookkeeping, |Q| sampling and result aggregation.

mod aggregate;
pub mod output;
pub mod stats;

use rand::Rng;

pub use aggregate::{aggregate_runs, AggregateRow, LabeledRun};

use crate::agents::{Agent, FitRecord};
use crate::clustering::Similarity;
use crate::config::RunConfig;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::memory::Transition;
use crate::rng::RunRngs;

/// Every run is reported in this many epochs.
pub const EPOCHS: usize = 100;

/// Upper bound on the true `|Q|` for rewards in `[−1, 1]`: `1 / (1 − γ)`.
pub fn overestimation_bound(gamma: f64) -> f64 {
    1.0 / (1.0 - gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub steps: u64,
    pub reward: f64,
    /// Training step (1-based) on which the episode ended.
    pub end_step: u64,
}

/// Reward statistics of the episodes that ended within one epoch; NaN when none did.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub episodes: usize,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSample {
    pub step: u64,
    /// Mean over the probe states of `max_a |Q(s)[a]|`.
    pub mean_abs_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentStats {
    pub min: u32,
    pub max: u32,
    pub mean: f64,
    pub median: f64,
}

impl SegmentStats {
    pub fn from_lengths(lengths: &[u32]) -> Option<Self> {
        if lengths.is_empty() {
            return None;
        }
        let as_f: Vec<f64> = lengths.iter().map(|&k| k as f64).collect();
        Some(Self {
            min: *lengths.iter().min().expect("nonempty"),
            max: *lengths.iter().max().expect("nonempty"),
            mean: stats::mean(&as_f),
            median: stats::median(&as_f),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    /// Mean reward of episodes ending in the last `final_window_epochs` epochs.
    pub final_reward: f64,
    pub mean_abs_q: f64,
    pub max_abs_q: f64,
    pub episodes: usize,
    /// Emitted transition lengths; elastic agent only.
    pub segments: Option<SegmentStats>,
}

/// Per-step record used to compare agents transition for transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub step: u64,
    pub action: usize,
    pub emitted: Vec<Transition>,
    pub checksum: u64,
}

#[derive(Default)]
pub struct TrainingOptions {
    /// Replaces the elastic clusterer.
    pub similarity: Option<Box<dyn Similarity>>,
    pub trace: bool,
    /// Stop after this many training steps.
    pub stop_at_step: Option<u64>,
    /// Keep the rows of the most recent clustering fit.
    pub record_fits: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub steps_run: u64,
    pub episodes: Vec<EpisodeRecord>,
    pub epochs: Vec<EpochRecord>,
    pub q_samples: Vec<QSample>,
    pub summary: RunSummary,
    pub segment_lengths: Vec<u32>,
    pub trace: Vec<TraceEntry>,
    /// Why the run stopped early on a non-finite value.
    pub aborted: Option<String>,
    pub last_fit: Option<FitRecord>,
    pub cluster_failures: u64,
}

fn probe_abs_q(agent: &Agent, probe: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for s in probe {
        let q = agent.network().forward(s)?;
        total += q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    Ok(total / probe.len() as f64)
}

/// Groups finished episodes into `EPOCHS` epochs of `epoch_len` steps by the step they ended on.
pub fn epoch_records(episodes: &[EpisodeRecord], epoch_len: u64) -> Vec<EpochRecord> {
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); EPOCHS];
    for e in episodes {
        let idx = ((e.end_step - 1) / epoch_len) as usize;
        if idx < EPOCHS {
            buckets[idx].push(e.reward);
        }
    }
    buckets
        .iter()
        .enumerate()
        .map(|(epoch, rewards)| EpochRecord {
            epoch,
            mean: stats::mean(rewards),
            median: stats::median(rewards),
            std: stats::population_std(rewards),
            episodes: rewards.len(),
            steps: epoch_len,
        })
        .collect()
}

/// Pooled mean reward of the episodes that ended in the last `window` epochs.
pub fn final_window_reward(episodes: &[EpisodeRecord], epoch_len: u64, window: usize) -> f64 {
    let start = (EPOCHS - window.min(EPOCHS)) as u64 * epoch_len;
    let rewards: Vec<f64> = episodes
        .iter()
        .filter(|e| e.end_step > start)
        .map(|e| e.reward)
        .collect();
    stats::mean(&rewards)
}

/// Trains one seed of `cfg`.
///
/// A non-finite value during learning ends the run early; the partial logs are
/// returned with `aborted` set.
pub fn run_training(cfg: &RunConfig, seed: u64, options: TrainingOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    let env_id = cfg.run.env;
    let total = cfg.run.total_steps;
    let epoch_len = cfg.epoch_length();
    let mut rngs = RunRngs::new(seed);
    let mut agent = Agent::new(cfg, &mut rngs.init)?;
    if let Some(sim) = options.similarity {
        agent = agent.with_similarity(sim)?;
    }
    agent.record_fits(options.record_fits);

    let visited = agent.prefill(env_id, &mut rngs)?;
    let probe: Vec<Vec<f64>> = (0..cfg.run.probe_size)
        .map(|_| visited[rngs.probe.gen_range(0..visited.len())].clone())
        .collect();

    let limit = options.stop_at_step.unwrap_or(total).min(total);
    let mut env = Environment::reset(env_id, rngs.env.gen());
    let mut episodes = Vec::new();
    let mut q_samples = Vec::new();
    let mut trace = Vec::new();
    let mut aborted = None;
    let (mut ep_reward, mut ep_steps) = (0.0, 0u64);
    let mut steps_run = 0;

    for step in 1..=limit {
        let report = match agent.step(&mut env, &mut rngs) {
            Ok(r) => r,
            Err(Error::NonFinite(what)) => {
                aborted = Some(format!("step {step}: non-finite {what}"));
                break;
            }
            Err(e) => return Err(e),
        };
        steps_run = step;
        ep_reward += report.reward;
        ep_steps += 1;
        if report.episode_over() {
            episodes.push(EpisodeRecord {
                episode: episodes.len() as u64,
                steps: ep_steps,
                reward: ep_reward,
                end_step: step,
            });
            ep_reward = 0.0;
            ep_steps = 0;
            env = Environment::reset(env_id, rngs.env.gen());
        }
        if step % cfg.run.q_sample_interval == 0 {
            let q = probe_abs_q(&agent, &probe)?;
            if !q.is_finite() {
                aborted = Some(format!("step {step}: non-finite |Q|"));
                break;
            }
            q_samples.push(QSample { step, mean_abs_q: q });
        }
        if options.trace {
            trace.push(TraceEntry {
                step,
                action: report.action,
                emitted: report.emitted,
                checksum: agent.network().primary().checksum(),
            });
        }
    }

    let qs: Vec<f64> = q_samples.iter().map(|q| q.mean_abs_q).collect();
    let segment_lengths = agent.segment_lengths().to_vec();
    let summary = RunSummary {
        seed,
        final_reward: final_window_reward(&episodes, epoch_len, cfg.run.final_window_epochs),
        mean_abs_q: stats::mean(&qs),
        max_abs_q: qs.iter().copied().fold(f64::NAN, f64::max),
        episodes: episodes.len(),
        segments: match agent.kind() {
            crate::config::AgentKind::Elastic => SegmentStats::from_lengths(&segment_lengths),
            _ => None,
        },
    };
    Ok(RunOutcome {
        seed,
        steps_run,
        epochs: epoch_records(&episodes, epoch_len),
        episodes,
        q_samples,
        summary,
        segment_lengths,
        trace,
        aborted,
        last_fit: agent.last_fit().cloned(),
        cluster_failures: agent.cluster_failures(),
    })
}
