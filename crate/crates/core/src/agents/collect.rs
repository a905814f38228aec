//! Turning the step stream into replay transitions.

use std::collections::VecDeque;

use crate::memory::{discount_for, Transition};

/// Sliding window of the last `n` steps; emits one `n`-step transition per step
/// once full, and flushes the shorter tails when the episode ends.
#[derive(Debug, Clone)]
pub struct FixedNCollector {
    n: usize,
    gamma: f64,
    window: VecDeque<(Vec<f64>, usize, f64)>,
}

impl FixedNCollector {
    pub fn new(n: usize, gamma: f64) -> Self {
        Self {
            n: n.max(1),
            gamma,
            window: VecDeque::with_capacity(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn emit_front(&self, end_obs: &[f64], terminal: bool) -> Transition {
        let mut ret = 0.0;
        for (i, (_, _, r)) in self.window.iter().enumerate() {
            ret += discount_for(self.gamma, i as u32) * r;
        }
        let (obs, action, _) = &self.window[0];
        let k = self.window.len() as u32;
        Transition {
            start_obs: obs.clone(),
            start_action: *action,
            accumulated_return: ret,
            end_obs: end_obs.to_vec(),
            bootstrap_discount: discount_for(self.gamma, k),
            steps_spanned: k,
            terminal,
        }
    }

    /// Records one step `(obs, action) → (reward, next_obs)` and returns the transitions it completes.
    pub fn observe(
        &mut self,
        obs: &[f64],
        action: usize,
        reward: f64,
        next_obs: &[f64],
        terminal: bool,
        episode_over: bool,
    ) -> Vec<Transition> {
        self.window.push_back((obs.to_vec(), action, reward));
        let mut out = Vec::new();
        if self.window.len() == self.n {
            out.push(self.emit_front(next_obs, terminal));
            self.window.pop_front();
        }
        if episode_over {
            while !self.window.is_empty() {
                out.push(self.emit_front(next_obs, terminal));
                self.window.pop_front();
            }
        }
        out
    }

    pub fn clear(&mut self) {
        self.window.clear();
    }
}

/// Open elastic segment: its first state and action plus the rewards folded so far.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentAccumulator {
    pub start_obs: Vec<f64>,
    pub start_action: usize,
    pub running_return: f64,
    pub steps_spanned: u32,
}

impl SegmentAccumulator {
    pub fn new(start_obs: Vec<f64>, start_action: usize) -> Self {
        Self {
            start_obs,
            start_action,
            running_return: 0.0,
            steps_spanned: 0,
        }
    }

    /// `R += γ^k · r; k += 1`.
    pub fn fold(&mut self, reward: f64, gamma: f64) {
        self.running_return += discount_for(gamma, self.steps_spanned) * reward;
        self.steps_spanned += 1;
    }

    pub fn finish(self, end_obs: &[f64], gamma: f64, terminal: bool) -> Transition {
        Transition {
            bootstrap_discount: discount_for(gamma, self.steps_spanned),
            start_obs: self.start_obs,
            start_action: self.start_action,
            accumulated_return: self.running_return,
            end_obs: end_obs.to_vec(),
            steps_spanned: self.steps_spanned,
            terminal,
        }
    }
}
