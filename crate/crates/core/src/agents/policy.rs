use rand::Rng;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// With probability `epsilon` a uniform action, otherwise the greedy one.
///
/// Always draws one uniform number, plus one action index when exploring.
pub fn epsilon_greedy(q_values: &[f64], epsilon: f64, rng: &mut impl Rng) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// Linear schedule from `start` to `min` over `decay_steps`, then flat.
pub fn epsilon_at(step: u64, start: f64, min: f64, decay_steps: u64) -> f64 {
    if step >= decay_steps {
        return min;
    }
    let frac = step as f64 / decay_steps as f64;
    start + frac * (min - start)
}
