use super::policy::argmax;
use crate::approximator::QNetworkParams;
use crate::error::{Error, Result};
use crate::memory::Transition;

/// `R` for terminal transitions, otherwise `R + γ^k · max_a Q̂(end)[a]`.
pub fn td_target_dqn(t: &Transition, target: &QNetworkParams) -> Result<f64> {
    if t.terminal {
        return Ok(t.accumulated_return);
    }
    let q = target.forward(&t.end_obs)?;
    Ok(t.accumulated_return + t.bootstrap_discount * q[argmax(&q)])
}

/// Action chosen by the primary network, valued by the target network.
pub fn td_target_double(t: &Transition, primary: &QNetworkParams, target: &QNetworkParams) -> Result<f64> {
    if t.terminal {
        return Ok(t.accumulated_return);
    }
    let a = argmax(&primary.forward(&t.end_obs)?);
    let q = target.forward(&t.end_obs)?;
    Ok(t.accumulated_return + t.bootstrap_discount * q[a])
}

/// Bootstraps from the max of the snapshots' mean q-vector.
pub fn td_target_average(t: &Transition, snapshots: &[QNetworkParams]) -> Result<f64> {
    if snapshots.is_empty() {
        return Err(Error::Empty("snapshot set"));
    }
    if t.terminal {
        return Ok(t.accumulated_return);
    }
    let mut mean = snapshots[0].forward(&t.end_obs)?;
    for s in &snapshots[1..] {
        for (m, q) in mean.iter_mut().zip(s.forward(&t.end_obs)?) {
            *m += q;
        }
    }
    let k = snapshots.len() as f64;
    mean.iter_mut().for_each(|m| *m /= k);
    Ok(t.accumulated_return + t.bootstrap_discount * mean[argmax(&mean)])
}
