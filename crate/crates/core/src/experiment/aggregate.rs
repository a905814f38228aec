use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{mean, median, sample_std, spearman, welch_t_test};
use super::{overestimation_bound, RunSummary};
use crate::envs::EnvId;

/// A run summary tagged with its environment and algorithm label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRun {
    pub env: EnvId,
    pub agent: String,
    pub gamma: f64,
    pub summary: RunSummary,
}

/// One (environment, algorithm) row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub env: EnvId,
    pub agent: String,
    pub runs: usize,
    pub reward_mean: f64,
    pub reward_std: f64,
    /// Welch test of this row's final rewards against the elastic agent's, same environment.
    pub t_vs_elastic: Option<f64>,
    pub p_vs_elastic: Option<f64>,
    pub q_mean: f64,
    pub q_std: f64,
    pub q_median: f64,
    pub q_max: f64,
    pub spearman_reward_q: Option<f64>,
    pub q_bound: f64,
    pub q_mean_exceeds_bound: bool,
    pub q_max_exceeds_bound: bool,
}

fn same_multiset(a: &[f64], b: &[f64]) -> bool {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    x == y
}

/// Builds one row per (environment, algorithm), sorted by environment then label.
///
/// Non-finite final rewards (aborted runs) are left out of the reward columns.
pub fn aggregate_runs(runs: &[LabeledRun]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(EnvId, String), Vec<&LabeledRun>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.env, r.agent.clone())).or_default().push(r);
    }
    let rewards_of = |g: &[&LabeledRun]| -> Vec<f64> {
        g.iter().map(|r| r.summary.final_reward).filter(|x| x.is_finite()).collect()
    };
    groups
        .iter()
        .map(|((env, agent), group)| {
            let rewards = rewards_of(group);
            let q_means: Vec<f64> = group.iter().map(|r| r.summary.mean_abs_q).collect();
            let q_max = group.iter().map(|r| r.summary.max_abs_q).fold(f64::NAN, f64::max);
            let q_bound = overestimation_bound(group[0].gamma);
            let elastic = groups.get(&(*env, "elastic".to_string())).map(|g| rewards_of(g));
            let (t, p) = match elastic {
                Some(e) if same_multiset(&rewards, &e) && !rewards.is_empty() => (Some(0.0), Some(1.0)),
                Some(e) => match welch_t_test(&rewards, &e) {
                    Ok(w) => (Some(w.t), Some(w.p)),
                    Err(_) => (None, None),
                },
                None => (None, None),
            };
            let paired: Vec<(f64, f64)> = group
                .iter()
                .map(|r| (r.summary.final_reward, r.summary.mean_abs_q))
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = paired.into_iter().unzip();
            let q_mean = mean(&q_means);
            AggregateRow {
                env: *env,
                agent: agent.clone(),
                runs: group.len(),
                reward_mean: mean(&rewards),
                reward_std: if rewards.len() == 1 { 0.0 } else { sample_std(&rewards) },
                t_vs_elastic: t,
                p_vs_elastic: p,
                q_mean,
                q_std: if q_means.len() == 1 { 0.0 } else { sample_std(&q_means) },
                q_median: median(&q_means),
                q_max,
                spearman_reward_q: spearman(&xs, &ys).ok(),
                q_bound,
                q_mean_exceeds_bound: q_mean > q_bound,
                q_max_exceeds_bound: q_max > q_bound,
            }
        })
        .collect()
}
