use rand::Rng;

use super::uniform;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
const GOAL_POSITION: f64 = 0.5;
const GOAL_VELOCITY: f64 = 0.0;
const FORCE: f64 = 0.001;
const GRAVITY: f64 = 0.0025;

/// Under-powered car in a valley. Actions: 0 left, 1 coast, 2 right. Reward −1 per step.
#[derive(Debug, Clone, PartialEq)]
pub struct MountainCar {
    state: [f64; 2],
}

impl MountainCar {
    pub fn new(position: f64, velocity: f64) -> Self {
        Self {
            state: [position, velocity],
        }
    }

    pub fn sample_initial(rng: &mut impl Rng) -> Self {
        Self::new(uniform(rng, -0.6, -0.4), 0.0)
    }

    pub fn observation(&self) -> &[f64; 2] {
        &self.state
    }

    pub fn step(&mut self, action: usize) -> (f64, bool) {
        let [mut position, mut velocity] = self.state;
        velocity += (action as f64 - 1.0) * FORCE + (3.0 * position).cos() * (-GRAVITY);
        velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
        position += velocity;
        position = position.clamp(MIN_POSITION, MAX_POSITION);
        if position == MIN_POSITION && velocity < 0.0 {
            velocity = 0.0;
        }
        self.state = [position, velocity];
        let terminal = position >= GOAL_POSITION && velocity >= GOAL_VELOCITY;
        (-1.0, terminal)
    }
}
