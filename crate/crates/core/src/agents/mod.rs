//! DQN-family agents: 1-step, fixed n-step, Double, Average and Elastic Step DQN.
//!
//! All agents share the same replay buffer, network and learning step; they
//! differ only in how transitions are collected and how bootstrap targets are
//! formed.

mod collect;
mod policy;
mod targets;

use std::collections::VecDeque;

use rand::Rng;

pub use collect::{FixedNCollector, SegmentAccumulator};
pub use policy::{argmax, epsilon_at, epsilon_greedy};
pub use targets::{td_target_average, td_target_double, td_target_dqn};

pub use crate::config::{AgentConfig, AgentKind};
use crate::approximator::{QNetwork, QNetworkParams, TrainItem};
use crate::clustering::{labels_equal, ClusterPipeline, HdbscanParams, PipelineParams, Similarity};
use crate::config::{FeatureSpace, RunConfig};
use crate::envs::{EnvId, Environment, StepResult};
use crate::error::{Error, Result};
use crate::memory::{discount_for, ReplayBuffer, StateBank, Transition};
use crate::rng::RunRngs;

/// The rows of one elastic clustering fit, kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    /// Observation behind each sampled bank row.
    pub sample_observations: Vec<Vec<f64>>,
    pub start_obs: Vec<f64>,
    pub next_obs: Vec<f64>,
    /// Labels of the sample rows followed by the two queries.
    pub labels: Vec<i32>,
}

/// What happened during one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub action: usize,
    pub reward: f64,
    pub terminal: bool,
    pub truncated: bool,
    /// Transitions stored in replay during this step.
    pub emitted: Vec<Transition>,
    pub loss: Option<f64>,
}

impl StepReport {
    pub fn episode_over(&self) -> bool {
        self.terminal || self.truncated
    }
}

struct ElasticState {
    similarity: Box<dyn Similarity>,
    bank: StateBank,
    sample_size: usize,
    features: FeatureSpace,
    segment: Option<SegmentAccumulator>,
    record_fits: bool,
    last_fit: Option<FitRecord>,
    cluster_failures: u64,
}

enum Collector {
    FixedN(FixedNCollector),
    Elastic(Box<ElasticState>),
}

fn features_of(net: &QNetwork, space: FeatureSpace, obs: &[f64]) -> Result<Vec<f64>> {
    match space {
        FeatureSpace::Hidden => Ok(net.hidden_features(obs)?.0),
        FeatureSpace::Raw => Ok(obs.to_vec()),
    }
}

pub struct Agent {
    kind: AgentKind,
    cfg: AgentConfig,
    decay_steps: u64,
    num_actions: usize,
    net: QNetwork,
    snapshots: VecDeque<QNetworkParams>,
    replay: ReplayBuffer,
    collector: Collector,
    learn_steps: u64,
    env_steps: u64,
    segment_lengths: Vec<u32>,
}

impl Agent {
    /// Builds the agent for `cfg`; network weights come from `init_rng`.
    pub fn new(cfg: &RunConfig, init_rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let env = cfg.run.env;
        let a = &cfg.agent;
        let params = QNetworkParams::he_uniform(env.observation_dim(), a.hidden_units, env.num_actions(), init_rng);
        let snapshots = match cfg.run.agent {
            AgentKind::Average => (0..a.averaged_snapshots).map(|_| params.clone()).collect(),
            _ => VecDeque::new(),
        };
        let net = QNetwork::new(params, a.optimizer, a.loss);
        let collector = match cfg.run.agent {
            AgentKind::Elastic => {
                let c = &cfg.clustering;
                let pipeline = ClusterPipeline::new(PipelineParams {
                    hdbscan: HdbscanParams {
                        min_cluster_size: c.min_cluster_size,
                        min_samples: c.resolved_min_samples(),
                        alpha: c.alpha,
                    },
                    max_components: c.max_components,
                    refit_interval: c.cluster_refit_interval,
                })?;
                Collector::Elastic(Box::new(ElasticState {
                    similarity: Box::new(pipeline),
                    bank: StateBank::new(c.state_bank_capacity)?,
                    sample_size: c.state_bank_sample_size,
                    features: c.features,
                    segment: None,
                    record_fits: false,
                    last_fit: None,
                    cluster_failures: 0,
                }))
            }
            AgentKind::Nstep => Collector::FixedN(FixedNCollector::new(a.n_step as usize, a.gamma)),
            _ => Collector::FixedN(FixedNCollector::new(1, a.gamma)),
        };
        Ok(Self {
            kind: cfg.run.agent,
            cfg: a.clone(),
            decay_steps: cfg.epsilon_decay_steps(),
            num_actions: env.num_actions(),
            net,
            snapshots,
            replay: ReplayBuffer::new(a.replay_capacity, a.gamma)?,
            collector,
            learn_steps: 0,
            env_steps: 0,
            segment_lengths: Vec::new(),
        })
    }

    /// Replaces the elastic similarity oracle.
    pub fn with_similarity(mut self, similarity: Box<dyn Similarity>) -> Result<Self> {
        match &mut self.collector {
            Collector::Elastic(e) => e.similarity = similarity,
            Collector::FixedN(_) => return Err(Error::Config("only the elastic agent uses a clusterer".into())),
        }
        Ok(self)
    }

    /// Keep the rows of the most recent clustering fit (elastic only).
    pub fn record_fits(&mut self, on: bool) {
        if let Collector::Elastic(e) = &mut self.collector {
            e.record_fits = on;
        }
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn learn_steps(&self) -> u64 {
        self.learn_steps
    }

    /// `steps_spanned` of every transition emitted during training (prefill excluded).
    pub fn segment_lengths(&self) -> &[u32] {
        &self.segment_lengths
    }

    pub fn last_fit(&self) -> Option<&FitRecord> {
        match &self.collector {
            Collector::Elastic(e) => e.last_fit.as_ref(),
            Collector::FixedN(_) => None,
        }
    }

    /// Number of clustering calls that failed and were treated as dissimilar.
    pub fn cluster_failures(&self) -> u64 {
        match &self.collector {
            Collector::Elastic(e) => e.cluster_failures,
            Collector::FixedN(_) => 0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_at(self.env_steps, self.cfg.epsilon_start, self.cfg.epsilon_min, self.decay_steps)
    }

    /// Fills replay with `initial_replay_size` uniformly random one-step
    /// transitions. Returns the visited observations.
    pub fn prefill(&mut self, env_id: EnvId, rngs: &mut RunRngs) -> Result<Vec<Vec<f64>>> {
        let mut env = Environment::reset(env_id, rngs.env.gen());
        let mut visited = Vec::with_capacity(self.cfg.initial_replay_size);
        for _ in 0..self.cfg.initial_replay_size {
            let obs = env.observation();
            let action = rngs.exploration.gen_range(0..self.num_actions);
            let res = env.step(action)?;
            self.replay.push(Transition {
                start_obs: obs.clone(),
                start_action: action,
                accumulated_return: res.reward,
                end_obs: res.next_observation.clone(),
                bootstrap_discount: discount_for(self.cfg.gamma, 1),
                steps_spanned: 1,
                terminal: res.terminal,
            })?;
            if let Collector::Elastic(e) = &mut self.collector {
                let f = features_of(&self.net, e.features, &res.next_observation)?;
                e.bank.push(f, res.next_observation.clone())?;
            }
            visited.push(obs);
            if res.episode_over() {
                env = Environment::reset(env_id, rngs.env.gen());
            }
        }
        Ok(visited)
    }

    /// Acts in `env` for one step, stores completed transitions and learns.
    pub fn step(&mut self, env: &mut Environment, rngs: &mut RunRngs) -> Result<StepReport> {
        let obs = env.observation();
        let clamped = match &self.collector {
            Collector::Elastic(e) if self.cfg.clamp_actions => e.segment.as_ref().map(|s| s.start_action),
            _ => None,
        };
        let action = match clamped {
            Some(a) => a,
            None => {
                let q = self.net.forward(&obs)?;
                epsilon_greedy(&q, self.epsilon(), &mut rngs.exploration)
            }
        };
        let res = env.step(action)?;
        let emitted = match &mut self.collector {
            Collector::FixedN(c) => c.observe(
                &obs,
                action,
                res.reward,
                &res.next_observation,
                res.terminal,
                res.episode_over(),
            ),
            Collector::Elastic(e) => elastic_observe(e, &self.net, self.cfg.gamma, obs, action, &res, rngs)?,
        };
        for t in &emitted {
            self.segment_lengths.push(t.steps_spanned);
            self.replay.push(t.clone())?;
        }
        self.env_steps += 1;
        let loss = if self.env_steps % self.cfg.train_frequency == 0 {
            self.learn_step(&mut rngs.replay)?
        } else {
            None
        };
        Ok(StepReport {
            action,
            reward: res.reward,
            terminal: res.terminal,
            truncated: res.truncated,
            emitted,
            loss,
        })
    }

    /// One gradient step on a replay minibatch; `None` while replay is below `initial_replay_size`.
    pub fn learn_step(&mut self, rng: &mut impl Rng) -> Result<Option<f64>> {
        if self.replay.len() < self.cfg.initial_replay_size {
            return Ok(None);
        }
        let batch = self.replay.sample_batch(self.cfg.batch_size, rng)?;
        let mut items = Vec::with_capacity(batch.len());
        for t in &batch {
            let target = match self.kind {
                AgentKind::Double => td_target_double(t, self.net.primary(), self.net.target())?,
                AgentKind::Average => td_target_average(t, self.snapshots.make_contiguous())?,
                _ => td_target_dqn(t, self.net.target())?,
            };
            items.push(TrainItem {
                observation: &t.start_obs,
                action: t.start_action,
                target,
            });
        }
        let loss = self.net.train_batch(&items, self.cfg.learning_rate)?;
        self.learn_steps += 1;
        if self.learn_steps % self.cfg.target_update_interval == 0 {
            self.net.sync_target();
            if self.kind == AgentKind::Average {
                self.snapshots.pop_front();
                self.snapshots.push_back(self.net.primary().clone());
            }
        }
        Ok(Some(loss))
    }
}

fn elastic_observe(
    e: &mut ElasticState,
    net: &QNetwork,
    gamma: f64,
    obs: Vec<f64>,
    action: usize,
    res: &StepResult,
    rngs: &mut RunRngs,
) -> Result<Vec<Transition>> {
    let seg = e.segment.get_or_insert_with(|| SegmentAccumulator::new(obs, action));
    let next_f = features_of(net, e.features, &res.next_observation)?;
    e.bank.push(next_f.clone(), res.next_observation.clone())?;
    let slots = e.bank.sample_slots(e.sample_size, &mut rngs.bank)?;
    let start_f = features_of(net, e.features, &seg.start_obs)?;
    let sample: Vec<&[f64]> = slots.iter().map(|&s| e.bank.features(s)).collect();
    let similar = match e.similarity.assign(&sample, &start_f, &next_f) {
        Ok([a, b]) => labels_equal(a, b),
        Err(err) => {
            log::warn!("clustering failed, closing segment: {err}");
            e.cluster_failures += 1;
            false
        }
    };
    if e.record_fits {
        e.last_fit = e.similarity.last_labels().map(|labels| FitRecord {
            sample_observations: slots.iter().map(|&s| e.bank.source_observation(s).to_vec()).collect(),
            start_obs: seg.start_obs.clone(),
            next_obs: res.next_observation.clone(),
            labels: labels.to_vec(),
        });
    }
    seg.fold(res.reward, gamma);
    if similar && !res.terminal && !res.truncated {
        return Ok(Vec::new());
    }
    let done = e.segment.take().expect("segment is open");
    Ok(vec![done.finish(&res.next_observation, gamma, res.terminal)])
}
