//! Exploration schedule and action selection.

use crate::agent::EpsilonSchedule;
use crate::error::TrainError;
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// Linear interpolation from `eps_initial` to `eps_final` over the decay
/// span, clamped afterwards.
pub fn epsilon_at(schedule: &EpsilonSchedule, frame: u64) -> f64 {
    if frame >= schedule.decay_span_frames {
        return schedule.eps_final;
    }
    let progress = frame as f64 / schedule.decay_span_frames as f64;
    schedule.eps_initial - (schedule.eps_initial - schedule.eps_final) * progress
}

/// Epsilon-greedy choice over action values; greedy ties break to the
/// lowest index so behaviour is deterministic given the rng stream.
pub fn select_action<F: Scalar>(
    q_values: &Tensor<F>,
    epsilon: f64,
    rng: &mut Rng,
) -> Result<usize, TrainError> {
    let n = q_values.len();
    if n == 0 {
        return Err(TrainError::InvalidConfig(
            "select_action requires a nonempty action-value vector".into(),
        ));
    }
    if epsilon > 0.0 && rng.bernoulli(epsilon) {
        return Ok(rng.below(n));
    }
    let mut best = 0usize;
    let mut best_v = q_values.data()[0];
    for (i, v) in q_values.data().iter().enumerate().skip(1) {
        if *v > best_v {
            best_v = *v;
            best = i;
        }
    }
    Ok(best)
}
