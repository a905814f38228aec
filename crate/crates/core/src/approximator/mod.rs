//! One-hidden-layer Q-network with hand-written backpropagation.
//!
//! `q = W2 · relu(W1 · obs + b1) + b2`. All parameters live in one flat buffer
//! laid out as `[W1 (row-major, hidden × input) | b1 | W2 (row-major, actions × hidden) | b2]`,
//! which keeps the optimizer, checksums and checkpoints trivial.

mod checkpoint;
mod optimizer;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use optimizer::{Optimizer, OptimizerKind};

/// Per-item loss applied to `Q(obs)[action] − target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Squared,
    Huber,
}

impl LossKind {
    fn value(self, err: f64) -> f64 {
        match self {
            LossKind::Squared => err * err,
            LossKind::Huber => {
                if err.abs() <= 1.0 {
                    0.5 * err * err
                } else {
                    err.abs() - 0.5
                }
            }
        }
    }

    fn derivative(self, err: f64) -> f64 {
        match self {
            LossKind::Squared => 2.0 * err,
            LossKind::Huber => err.clamp(-1.0, 1.0),
        }
    }
}

/// Post-activation hidden-layer outputs for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenFeatures(pub Vec<f64>);

impl HiddenFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weights and biases of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetworkParams {
    input_dim: usize,
    hidden_units: usize,
    num_actions: usize,
    data: Vec<f64>,
}

/// One supervised item for [`QNetwork::train_batch`].
#[derive(Debug, Clone, Copy)]
pub struct TrainItem<'a> {
    pub observation: &'a [f64],
    pub action: usize,
    pub target: f64,
}

impl QNetworkParams {
    pub fn param_count(input_dim: usize, hidden_units: usize, num_actions: usize) -> usize {
        hidden_units * input_dim + hidden_units + num_actions * hidden_units + num_actions
    }

    pub fn zeros(input_dim: usize, hidden_units: usize, num_actions: usize) -> Self {
        Self {
            input_dim,
            hidden_units,
            num_actions,
            data: vec![0.0; Self::param_count(input_dim, hidden_units, num_actions)],
        }
    }

    /// Uniform fan-in initialization `U(−√(6/fan_in), √(6/fan_in))` for weights, zero biases.
    pub fn he_uniform(
        input_dim: usize,
        hidden_units: usize,
        num_actions: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut p = Self::zeros(input_dim, hidden_units, num_actions);
        let bound1 = (6.0 / input_dim as f64).sqrt();
        for w in p.w1_mut() {
            *w = rng.gen_range(-bound1..bound1);
        }
        let bound2 = (6.0 / hidden_units as f64).sqrt();
        for w in p.w2_mut() {
            *w = rng.gen_range(-bound2..bound2);
        }
        p
    }

    /// Builds parameters from explicit blocks (row-major weights).
    pub fn from_parts(
        input_dim: usize,
        hidden_units: usize,
        num_actions: usize,
        w1: &[f64],
        b1: &[f64],
        w2: &[f64],
        b2: &[f64],
    ) -> Result<Self> {
        if w1.len() != hidden_units * input_dim
            || b1.len() != hidden_units
            || w2.len() != num_actions * hidden_units
            || b2.len() != num_actions
        {
            return Err(Error::Contract("parameter block sizes do not match dims".into()));
        }
        let mut data = Vec::with_capacity(Self::param_count(input_dim, hidden_units, num_actions));
        data.extend_from_slice(w1);
        data.extend_from_slice(b1);
        data.extend_from_slice(w2);
        data.extend_from_slice(b2);
        Self::from_flat(input_dim, hidden_units, num_actions, data)
    }

    pub fn from_flat(
        input_dim: usize,
        hidden_units: usize,
        num_actions: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_units == 0 || num_actions == 0 {
            return Err(Error::Contract("network dims must be positive".into()));
        }
        if data.len() != Self::param_count(input_dim, hidden_units, num_actions) {
            return Err(Error::Contract(format!(
                "expected {} parameters, got {}",
                Self::param_count(input_dim, hidden_units, num_actions),
                data.len()
            )));
        }
        Ok(Self {
            input_dim,
            hidden_units,
            num_actions,
            data,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_units
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn offsets(&self) -> [usize; 4] {
        let b1 = self.hidden_units * self.input_dim;
        let w2 = b1 + self.hidden_units;
        let b2 = w2 + self.num_actions * self.hidden_units;
        [0, b1, w2, b2]
    }

    pub fn w1(&self) -> &[f64] {
        let [_, b1, _, _] = self.offsets();
        &self.data[..b1]
    }

    pub fn b1(&self) -> &[f64] {
        let [_, b1, w2, _] = self.offsets();
        &self.data[b1..w2]
    }

    pub fn w2(&self) -> &[f64] {
        let [_, _, w2, b2] = self.offsets();
        &self.data[w2..b2]
    }

    pub fn b2(&self) -> &[f64] {
        let [_, _, _, b2] = self.offsets();
        &self.data[b2..]
    }

    fn w1_mut(&mut self) -> &mut [f64] {
        let [_, b1, _, _] = self.offsets();
        &mut self.data[..b1]
    }

    fn w2_mut(&mut self) -> &mut [f64] {
        let [_, _, w2, b2] = self.offsets();
        &mut self.data[w2..b2]
    }

    fn check_input(&self, observation: &[f64]) -> Result<()> {
        if observation.len() != self.input_dim {
            return Err(Error::Contract(format!(
                "observation has {} features, network expects {}",
                observation.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn pre_activation(&self, observation: &[f64], out: &mut [f64]) {
        let (w1, b1) = (self.w1(), self.b1());
        for (j, o) in out.iter_mut().enumerate() {
            let row = &w1[j * self.input_dim..(j + 1) * self.input_dim];
            let mut acc = b1[j];
            for (w, x) in row.iter().zip(observation) {
                acc += w * x;
            }
            *o = acc;
        }
    }

    /// `relu(W1 · obs + b1)`.
    pub fn hidden_features(&self, observation: &[f64]) -> Result<HiddenFeatures> {
        self.check_input(observation)?;
        let mut h = vec![0.0; self.hidden_units];
        self.pre_activation(observation, &mut h);
        for v in &mut h {
            *v = v.max(0.0);
        }
        Ok(HiddenFeatures(h))
    }

    /// Applies the linear output head to already computed hidden features.
    pub fn output_layer(&self, hidden: &HiddenFeatures) -> Result<Vec<f64>> {
        if hidden.len() != self.hidden_units {
            return Err(Error::Contract("hidden vector has wrong length".into()));
        }
        let (w2, b2) = (self.w2(), self.b2());
        Ok((0..self.num_actions)
            .map(|a| {
                let row = &w2[a * self.hidden_units..(a + 1) * self.hidden_units];
                let mut acc = b2[a];
                for (w, h) in row.iter().zip(&hidden.0) {
                    acc += w * h;
                }
                acc
            })
            .collect())
    }

    pub fn forward(&self, observation: &[f64]) -> Result<Vec<f64>> {
        let hidden = self.hidden_features(observation)?;
        self.output_layer(&hidden)
    }

    /// Order-sensitive checksum of the exact parameter bits (FNV-1a).
    pub fn checksum(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.data {
            for b in v.to_bits().to_le_bytes() {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x0100_0000_01b3);
            }
        }
        hash
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Mean batch loss and its gradient w.r.t. the flat parameter buffer.
    ///
    /// Only the output of each item's selected action receives gradient.
    pub fn loss_and_gradient(&self, batch: &[TrainItem<'_>], loss: LossKind) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Contract("empty training batch".into()));
        }
        let [_, ob1, ow2, ob2] = self.offsets();
        let (n_in, n_h) = (self.input_dim, self.hidden_units);
        let scale = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; self.data.len()];
        let mut pre = vec![0.0; n_h];
        let mut total = 0.0;
        for item in batch {
            self.check_input(item.observation)?;
            if item.action >= self.num_actions {
                return Err(Error::Contract(format!("action {} out of range", item.action)));
            }
            if !item.target.is_finite() {
                return Err(Error::NonFinite("training target".into()));
            }
            self.pre_activation(item.observation, &mut pre);
            let a = item.action;
            let w2_row = &self.data[ow2 + a * n_h..ow2 + (a + 1) * n_h];
            let mut q = self.data[ob2 + a];
            for (w, z) in w2_row.iter().zip(&pre) {
                q += w * z.max(0.0);
            }
            let err = q - item.target;
            total += loss.value(err);
            let dq = loss.derivative(err) * scale;

            grad[ob2 + a] += dq;
            for j in 0..n_h {
                let z = pre[j];
                if z > 0.0 {
                    grad[ow2 + a * n_h + j] += dq * z;
                    let dz = dq * w2_row[j];
                    grad[ob1 + j] += dz;
                    let g_row = &mut grad[j * n_in..(j + 1) * n_in];
                    for (g, x) in g_row.iter_mut().zip(item.observation) {
                        *g += dz * x;
                    }
                }
            }
        }
        let mean = total * scale;
        if !mean.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("loss or gradient".into()));
        }
        Ok((mean, grad))
    }
}

/// Primary network, frozen target copy and optimizer state.
#[derive(Debug, Clone)]
pub struct QNetwork {
    primary: QNetworkParams,
    target: QNetworkParams,
    optimizer: Optimizer,
    loss: LossKind,
}

impl QNetwork {
    /// Wraps `primary`; the target starts as an exact copy.
    pub fn new(primary: QNetworkParams, optimizer: OptimizerKind, loss: LossKind) -> Self {
        let optimizer = Optimizer::new(optimizer, primary.as_flat().len());
        Self {
            target: primary.clone(),
            primary,
            optimizer,
            loss,
        }
    }

    pub fn primary(&self) -> &QNetworkParams {
        &self.primary
    }

    pub fn target(&self) -> &QNetworkParams {
        &self.target
    }

    pub fn forward(&self, observation: &[f64]) -> Result<Vec<f64>> {
        self.primary.forward(observation)
    }

    pub fn forward_target(&self, observation: &[f64]) -> Result<Vec<f64>> {
        self.target.forward(observation)
    }

    pub fn hidden_features(&self, observation: &[f64]) -> Result<HiddenFeatures> {
        self.primary.hidden_features(observation)
    }

    /// One optimizer step on the mean loss of `batch`. Returns the pre-update loss.
    ///
    /// On a non-finite loss, gradient or updated parameter the network and
    /// optimizer state are left unchanged.
    pub fn train_batch(&mut self, batch: &[TrainItem<'_>], learning_rate: f64) -> Result<f64> {
        let (loss, grad) = self.primary.loss_and_gradient(batch, self.loss)?;
        let mut params = self.primary.data.clone();
        let mut optimizer = self.optimizer.clone();
        optimizer.apply(&mut params, &grad, learning_rate);
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("updated parameters".into()));
        }
        self.primary.data = params;
        self.optimizer = optimizer;
        Ok(loss)
    }

    /// Copies the primary parameters into the target, bit for bit.
    pub fn sync_target(&mut self) {
        self.target.data.copy_from_slice(&self.primary.data);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(seed: u64, input: usize, hidden: usize, actions: usize) -> QNetworkParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = QNetworkParams::he_uniform(input, hidden, actions, &mut rng);
        for v in p.as_flat_mut() {
            *v += rng.gen_range(-0.1..0.1);
        }
        p
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = QNetworkParams::zeros(3, 5, 2);
        assert_eq!(p.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(p.hidden_features(&[1.0, -2.0, 3.0]).unwrap().0, vec![0.0; 5]);
    }

    #[test]
    fn identity_net() {
        let p = QNetworkParams::from_parts(1, 1, 1, &[1.0], &[0.0], &[1.0], &[0.0]).unwrap();
        assert_eq!(p.forward(&[2.0]).unwrap(), vec![2.0]);
        // negative pre-activation is clipped
        assert_eq!(p.forward(&[-2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn forward_matches_dense_oracle() {
        let p = random_params(3, 4, 7, 3);
        let obs = [0.3, -1.2, 0.7, 2.0];
        let (w1, b1, w2, b2) = (p.w1(), p.b1(), p.w2(), p.b2());
        let mut h = [0.0; 7];
        for j in 0..7 {
            let mut z = b1[j];
            for i in 0..4 {
                z += w1[j * 4 + i] * obs[i];
            }
            h[j] = if z > 0.0 { z } else { 0.0 };
        }
        let q = p.forward(&obs).unwrap();
        for a in 0..3 {
            let mut expect = b2[a];
            for j in 0..7 {
                expect += w2[a * 7 + j] * h[j];
            }
            assert!((q[a] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn hidden_then_head_equals_forward() {
        let p = random_params(9, 6, 24, 3);
        let obs = [0.1, 0.9, -0.4, 0.2, 1.5, -3.0];
        let h = p.hidden_features(&obs).unwrap();
        assert!(h.0.iter().all(|v| *v >= 0.0));
        assert_eq!(p.output_layer(&h).unwrap(), p.forward(&obs).unwrap());
        assert_eq!(p.forward(&obs).unwrap(), p.forward(&obs).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_a_contract_error() {
        let p = QNetworkParams::zeros(3, 2, 2);
        assert!(matches!(p.forward(&[1.0]), Err(Error::Contract(_))));
        assert!(matches!(p.hidden_features(&[1.0; 4]), Err(Error::Contract(_))));
    }

    #[test]
    fn on_target_batch_leaves_params_unchanged() {
        let p = random_params(1, 4, 8, 2);
        let obs = [[0.1, 0.2, 0.3, 0.4], [-1.0, 0.5, 0.0, 2.0]];
        let targets: Vec<f64> = obs.iter().map(|o| p.forward(o).unwrap()[1]).collect();
        let batch: Vec<TrainItem> = obs
            .iter()
            .zip(&targets)
            .map(|(o, t)| TrainItem { observation: o, action: 1, target: *t })
            .collect();
        let mut net = QNetwork::new(p.clone(), OptimizerKind::Sgd, LossKind::Squared);
        let loss = net.train_batch(&batch, 0.1).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net.primary(), &p);
    }

    #[test]
    fn duplicate_items_match_single_item() {
        let p = random_params(2, 4, 8, 2);
        let obs = [0.5, -0.5, 0.25, 1.0];
        let item = TrainItem { observation: &obs, action: 0, target: 3.0 };
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut one = QNetwork::new(p.clone(), kind, LossKind::Squared);
            let mut two = QNetwork::new(p.clone(), kind, LossKind::Squared);
            let l1 = one.train_batch(&[item], 0.01).unwrap();
            let l2 = two.train_batch(&[item, item], 0.01).unwrap();
            assert_eq!(l1, l2);
            for (a, b) in one.primary().as_flat().iter().zip(two.primary().as_flat()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn non_finite_target_is_rejected_without_update() {
        let p = random_params(4, 2, 3, 2);
        let mut net = QNetwork::new(p.clone(), OptimizerKind::Adam, LossKind::Squared);
        let item = TrainItem { observation: &[1.0, 1.0], action: 0, target: f64::NAN };
        assert!(matches!(net.train_batch(&[item], 0.1), Err(Error::NonFinite(_))));
        assert_eq!(net.primary(), &p);
        let huge = TrainItem { observation: &[1e300, 1e300], action: 0, target: 0.0 };
        assert!(net.train_batch(&[huge], 0.1).is_err());
        assert_eq!(net.primary(), &p);
    }

    #[test]
    fn huber_gradient_is_clipped() {
        let p = QNetworkParams::from_parts(1, 1, 1, &[1.0], &[0.0], &[1.0], &[0.0]).unwrap();
        let item = TrainItem { observation: &[2.0], action: 0, target: -8.0 };
        let (loss, grad) = p.loss_and_gradient(&[item], LossKind::Huber).unwrap();
        assert_eq!(loss, 9.5);
        // d/d b2 = clip(10) = 1
        assert_eq!(grad[3], 1.0);
    }

    #[test]
    fn target_sync_semantics() {
        let p = random_params(5, 4, 6, 2);
        let mut net = QNetwork::new(p.clone(), OptimizerKind::Adam, LossKind::Squared);
        assert_eq!(net.target(), &p);
        let obs = [0.2, 0.1, -0.3, 0.4];
        let item = TrainItem { observation: &obs, action: 1, target: 5.0 };
        net.train_batch(&[item], 0.01).unwrap();
        assert_ne!(net.primary(), net.target());
        net.sync_target();
        assert_eq!(net.primary(), net.target());
        assert_eq!(net.forward(&obs).unwrap(), net.forward_target(&obs).unwrap());
        let snapshot = net.target().clone();
        net.sync_target();
        assert_eq!(net.target(), &snapshot);
    }

    #[test]
    fn checksum_tracks_bits() {
        let p = random_params(6, 2, 2, 2);
        let mut q = p.clone();
        assert_eq!(p.checksum(), q.checksum());
        q.as_flat_mut()[0] = f64::from_bits(q.as_flat()[0].to_bits() ^ 1);
        assert_ne!(p.checksum(), q.checksum());
    }
}
