use rand::Rng;

use super::uniform;

const GRAVITY: f64 = 9.8;
const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.1;
const TOTAL_MASS: f64 = POLE_MASS + CART_MASS;
const HALF_POLE_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = POLE_MASS * HALF_POLE_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
const X_THRESHOLD: f64 = 2.4;
const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;

/// Cart-pole balancing. Actions: 0 push left, 1 push right. Reward +1 per step.
#[derive(Debug, Clone, PartialEq)]
pub struct CartPole {
    state: [f64; 4],
}

impl CartPole {
    pub fn new(state: [f64; 4]) -> Self {
        Self { state }
    }

    pub fn sample_initial(rng: &mut impl Rng) -> Self {
        let mut state = [0.0; 4];
        for s in &mut state {
            *s = uniform(rng, -0.05, 0.05);
        }
        Self { state }
    }

    pub fn observation(&self) -> &[f64; 4] {
        &self.state
    }

    /// Explicit Euler step. Returns `(reward, terminal)`.
    pub fn step(&mut self, action: usize) -> (f64, bool) {
        let [x, x_dot, theta, theta_dot] = self.state;
        let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
        let costheta = theta.cos();
        let sintheta = theta.sin();

        let temp = (force + POLE_MASS_LENGTH * (theta_dot * theta_dot) * sintheta) / TOTAL_MASS;
        let thetaacc = (GRAVITY * sintheta - costheta * temp)
            / (HALF_POLE_LENGTH * (4.0 / 3.0 - POLE_MASS * (costheta * costheta) / TOTAL_MASS));
        let xacc = temp - POLE_MASS_LENGTH * thetaacc * costheta / TOTAL_MASS;

        let x = x + TAU * x_dot;
        let x_dot = x_dot + TAU * xacc;
        let theta = theta + TAU * theta_dot;
        let theta_dot = theta_dot + TAU * thetaacc;
        self.state = [x, x_dot, theta, theta_dot];

        let terminal = !(-X_THRESHOLD..=X_THRESHOLD).contains(&x)
            || !(-THETA_THRESHOLD..=THETA_THRESHOLD).contains(&theta);
        (1.0, terminal)
    }
}
