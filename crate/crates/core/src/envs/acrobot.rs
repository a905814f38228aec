use std::f64::consts::PI;

use rand::Rng;

use super::uniform;

const DT: f64 = 0.2;
const LINK_LENGTH_1: f64 = 1.0;
const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_COM_POS_1: f64 = 0.5;
const LINK_COM_POS_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const MAX_VEL_1: f64 = 4.0 * PI;
const MAX_VEL_2: f64 = 9.0 * PI;
const GRAVITY: f64 = 9.8;
const TORQUES: [f64; 3] = [-1.0, 0.0, 1.0];

/// Two-link underactuated pendulum ("book" dynamics, one RK4 step per action).
///
/// Internal state is `(theta1, theta2, dtheta1, dtheta2)`; the observation is the
/// six-feature trigonometric encoding. Reward −1 per step, 0 on reaching the goal height.
#[derive(Debug, Clone, PartialEq)]
pub struct Acrobot {
    state: [f64; 4],
    obs: [f64; 6],
}

impl Acrobot {
    pub fn new(state: [f64; 4]) -> Self {
        Self {
            state,
            obs: encode(&state),
        }
    }

    pub fn sample_initial(rng: &mut impl Rng) -> Self {
        let mut state = [0.0; 4];
        for s in &mut state {
            *s = uniform(rng, -0.1, 0.1);
        }
        Self::new(state)
    }

    pub fn raw_state(&self) -> &[f64; 4] {
        &self.state
    }

    pub fn observation(&self) -> &[f64; 6] {
        &self.obs
    }

    pub fn step(&mut self, action: usize) -> (f64, bool) {
        let torque = TORQUES[action];
        let ns = rk4_step(&self.state, torque, DT);
        let state = [
            wrap(ns[0], -PI, PI),
            wrap(ns[1], -PI, PI),
            ns[2].clamp(-MAX_VEL_1, MAX_VEL_1),
            ns[3].clamp(-MAX_VEL_2, MAX_VEL_2),
        ];
        self.state = state;
        self.obs = encode(&state);
        let terminal = -state[0].cos() - (state[1] + state[0]).cos() > 1.0;
        (if terminal { 0.0 } else { -1.0 }, terminal)
    }
}

fn encode(s: &[f64; 4]) -> [f64; 6] {
    [s[0].cos(), s[0].sin(), s[1].cos(), s[1].sin(), s[2], s[3]]
}

fn wrap(mut x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    while x > hi {
        x -= span;
    }
    while x < lo {
        x += span;
    }
    x
}

fn derivatives(s: &[f64; 4], torque: f64) -> [f64; 4] {
    let (m1, m2) = (LINK_MASS_1, LINK_MASS_2);
    let l1 = LINK_LENGTH_1;
    let (lc1, lc2) = (LINK_COM_POS_1, LINK_COM_POS_2);
    let (i1, i2) = (LINK_MOI, LINK_MOI);
    let g = GRAVITY;
    let [theta1, theta2, dtheta1, dtheta2] = *s;

    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn rk4_step(y0: &[f64; 4], torque: f64, dt: f64) -> [f64; 4] {
    let half = dt / 2.0;
    let offset = |y: &[f64; 4], k: &[f64; 4], h: f64| -> [f64; 4] {
        [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]]
    };
    let k1 = derivatives(y0, torque);
    let k2 = derivatives(&offset(y0, &k1, half), torque);
    let k3 = derivatives(&offset(y0, &k2, half), torque);
    let k4 = derivatives(&offset(y0, &k3, dt), torque);
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}
