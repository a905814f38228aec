//! Experience replay for variable-horizon transitions and the state memory bank.

use rand::Rng;

use crate::error::{Error, Result};

/// A (possibly multi-step) transition `s_t, a_t → s_{t+k}` with its folded return.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub start_obs: Vec<f64>,
    pub start_action: usize,
    /// `Σ_{i<k} γ^i r_i` over the rewards folded into this transition.
    pub accumulated_return: f64,
    pub end_obs: Vec<f64>,
    /// `γ^k`; applied to the bootstrap value unless `terminal`.
    pub bootstrap_discount: f64,
    pub steps_spanned: u32,
    pub terminal: bool,
}

/// Canonical bootstrap discount for a `k`-step transition.
pub fn discount_for(gamma: f64, steps: u32) -> f64 {
    gamma.powi(steps as i32)
}

impl Transition {
    /// Checks the discount bookkeeping and basic shape invariants.
    pub fn validate(&self, gamma: f64) -> Result<()> {
        if self.steps_spanned == 0 {
            return Err(Error::Contract("transition spans zero steps".into()));
        }
        if self.bootstrap_discount != discount_for(gamma, self.steps_spanned) {
            return Err(Error::Contract(format!(
                "bootstrap discount {} != gamma^{}",
                self.bootstrap_discount, self.steps_spanned
            )));
        }
        if !(self.bootstrap_discount > 0.0 && self.bootstrap_discount <= 1.0) {
            return Err(Error::Contract("bootstrap discount outside (0, 1]".into()));
        }
        if !self.accumulated_return.is_finite() {
            return Err(Error::NonFinite("accumulated return".into()));
        }
        if self.start_obs.len() != self.end_obs.len() {
            return Err(Error::Contract("start/end observation lengths differ".into()));
        }
        Ok(())
    }
}

/// Fixed-capacity FIFO ring.
#[derive(Debug, Clone)]
struct Ring<T> {
    items: Vec<T>,
    capacity: usize,
    next: usize,
    pushed: u64,
}

impl<T> Ring<T> {
    fn new(capacity: usize) -> Self {
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
            pushed: 0,
        }
    }

    fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Item `i` in insertion order (0 = oldest retained).
    fn get_ordered(&self, i: usize) -> &T {
        if self.items.len() < self.capacity {
            &self.items[i]
        } else {
            &self.items[(self.next + i) % self.capacity]
        }
    }
}

/// Uniform-with-replacement replay memory of capacity `N`.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    ring: Ring<Transition>,
    gamma: f64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, gamma: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            ring: Ring::new(capacity),
            gamma,
        })
    }

    pub fn len(&self) -> usize {
        self.ring.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.ring.capacity
    }

    /// Total number of transitions ever pushed.
    pub fn total_pushed(&self) -> u64 {
        self.ring.pushed
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        t.validate(self.gamma)?;
        self.ring.push(t);
        Ok(())
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        (0..self.len()).map(|i| self.ring.get_ordered(i))
    }

    pub fn sample_batch<'a>(&'a self, batch_size: usize, rng: &mut impl Rng) -> Result<Vec<&'a Transition>> {
        if self.is_empty() {
            return Err(Error::Empty("replay buffer"));
        }
        Ok((0..batch_size)
            .map(|_| &self.ring.items[rng.gen_range(0..self.len())])
            .collect())
    }
}

/// Ring of feature vectors the clusterer is trained on (capacity `H`).
///
/// Each entry can carry the observation it was computed from, used only for
/// cluster diagnostics.
#[derive(Debug, Clone)]
pub struct StateBank {
    ring: Ring<(Vec<f64>, Vec<f64>)>,
}

impl StateBank {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("state bank capacity must be positive".into()));
        }
        Ok(Self { ring: Ring::new(capacity) })
    }

    pub fn len(&self) -> usize {
        self.ring.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.ring.capacity
    }

    pub fn total_pushed(&self) -> u64 {
        self.ring.pushed
    }

    pub fn push(&mut self, features: Vec<f64>, source_obs: Vec<f64>) -> Result<()> {
        if let Some((first, _)) = self.ring.items.first() {
            if first.len() != features.len() {
                return Err(Error::Contract("feature width changed".into()));
            }
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state bank features".into()));
        }
        self.ring.push((features, source_obs));
        Ok(())
    }

    pub fn features(&self, slot: usize) -> &[f64] {
        &self.ring.items[slot].0
    }

    pub fn source_observation(&self, slot: usize) -> &[f64] {
        &self.ring.items[slot].1
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.len()).map(|i| self.ring.get_ordered(i).0.as_slice())
    }

    /// `u` slot indices drawn uniformly with replacement.
    pub fn sample_slots(&self, u: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        if self.is_empty() {
            return Err(Error::Empty("state bank"));
        }
        Ok((0..u).map(|_| rng.gen_range(0..self.len())).collect())
    }

    /// `u` feature rows drawn uniformly with replacement.
    pub fn sample_features(&self, u: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .sample_slots(u, rng)?
            .into_iter()
            .map(|s| self.features(s).to_vec())
            .collect())
    }
}
