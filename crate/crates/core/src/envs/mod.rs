//! Classic-control environments: CartPole, MountainCar and Acrobot.
//!
//! Dynamics and constants follow the widely used published versions of these
//! tasks. Initial-state randomness comes from a seed handed to [`Environment::reset`];
//! the physics itself is deterministic. Every episode is cut at
//! [`EPISODE_STEP_CAP`] steps, reported through [`StepResult::truncated`] so the
//! learner can keep bootstrapping through the cut.

mod acrobot;
mod cartpole;
mod mountain_car;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use acrobot::Acrobot;
pub use cartpole::CartPole;
pub use mountain_car::MountainCar;

/// Episodes end (truncated) at this step index if no terminal state was reached.
pub const EPISODE_STEP_CAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvId {
    Cartpole,
    MountainCar,
    Acrobot,
}

impl EnvId {
    pub const ALL: [EnvId; 3] = [EnvId::Cartpole, EnvId::MountainCar, EnvId::Acrobot];

    pub fn name(self) -> &'static str {
        match self {
            EnvId::Cartpole => "cartpole",
            EnvId::MountainCar => "mountain_car",
            EnvId::Acrobot => "acrobot",
        }
    }

    pub fn observation_dim(self) -> usize {
        match self {
            EnvId::Cartpole => 4,
            EnvId::MountainCar => 2,
            EnvId::Acrobot => 6,
        }
    }

    pub fn num_actions(self) -> usize {
        match self {
            EnvId::Cartpole => 2,
            EnvId::MountainCar | EnvId::Acrobot => 3,
        }
    }

    /// Column names for each observation component.
    pub fn observation_names(self) -> &'static [&'static str] {
        match self {
            EnvId::Cartpole => &[
                "cart_position",
                "cart_velocity",
                "pole_angle",
                "pole_angular_velocity",
            ],
            EnvId::MountainCar => &["position", "velocity"],
            EnvId::Acrobot => &[
                "cos_theta1",
                "sin_theta1",
                "cos_theta2",
                "sin_theta2",
                "theta1_dot",
                "theta2_dot",
            ],
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartpole" => Ok(EnvId::Cartpole),
            "mountain_car" | "mountaincar" => Ok(EnvId::MountainCar),
            "acrobot" => Ok(EnvId::Acrobot),
            other => Err(Error::Config(format!("unknown env_id `{other}`"))),
        }
    }
}

/// Observation plus position within the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub step_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_observation: Vec<f64>,
    pub reward: f64,
    /// Goal or failure reached; the value of the next state is zero.
    pub terminal: bool,
    /// Step cap reached without a terminal state; still bootstrapped.
    pub truncated: bool,
}

impl StepResult {
    pub fn episode_over(&self) -> bool {
        self.terminal || self.truncated
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Physics {
    Cartpole(CartPole),
    MountainCar(MountainCar),
    Acrobot(Acrobot),
}

/// One running episode of a classic-control task.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    physics: Physics,
    step_index: usize,
    finished: bool,
}

impl Environment {
    /// Starts a new episode. The same `(id, seed)` always yields the same initial state.
    pub fn reset(id: EnvId, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let physics = match id {
            EnvId::Cartpole => Physics::Cartpole(CartPole::sample_initial(&mut rng)),
            EnvId::MountainCar => Physics::MountainCar(MountainCar::sample_initial(&mut rng)),
            EnvId::Acrobot => Physics::Acrobot(Acrobot::sample_initial(&mut rng)),
        };
        Self {
            physics,
            step_index: 0,
            finished: false,
        }
    }

    /// Like [`Environment::reset`] but parses the id first.
    pub fn reset_named(id: &str, seed: u64) -> Result<Self> {
        Ok(Self::reset(id.parse()?, seed))
    }

    pub fn id(&self) -> EnvId {
        match self.physics {
            Physics::Cartpole(_) => EnvId::Cartpole,
            Physics::MountainCar(_) => EnvId::MountainCar,
            Physics::Acrobot(_) => EnvId::Acrobot,
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        match &self.physics {
            Physics::Cartpole(p) => p.observation().to_vec(),
            Physics::MountainCar(p) => p.observation().to_vec(),
            Physics::Acrobot(p) => p.observation().to_vec(),
        }
    }

    pub fn state(&self) -> EnvState {
        EnvState {
            observation: self.observation(),
            step_index: self.step_index,
        }
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Advances the episode by one step.
    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        let num_actions = self.id().num_actions();
        if action >= num_actions {
            return Err(Error::Contract(format!(
                "action {action} out of range for {} ({num_actions} actions)",
                self.id()
            )));
        }
        if self.finished {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        let (reward, terminal) = match &mut self.physics {
            Physics::Cartpole(p) => p.step(action),
            Physics::MountainCar(p) => p.step(action),
            Physics::Acrobot(p) => p.step(action),
        };
        self.step_index += 1;
        let truncated = !terminal && self.step_index >= EPISODE_STEP_CAP;
        self.finished = terminal || truncated;
        Ok(StepResult {
            next_observation: self.observation(),
            reward,
            terminal,
            truncated,
        })
    }
}

/// Uniform draw on `[low, high)`.
pub(crate) fn uniform(rng: &mut impl rand::Rng, low: f64, high: f64) -> f64 {
    low + (high - low) * rng.gen::<f64>()
}
