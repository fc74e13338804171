//! Regularized TD loss and target-network plumbing.

use crate::agent::Transition;
use crate::error::TrainError;
use crate::nn::{
    backward, forward, l2_term, make_dropout_masks, GradientSet, NetworkArchitecture, Parameters,
    RegularizationConfig,
};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// Bootstrap targets `r + gamma * max_a' Q(s', a'; target)` with the
/// bootstrap zeroed on terminal transitions. The target pass never applies
/// dropout.
pub fn td_targets<F: Scalar>(
    batch: &[&Transition],
    target_params: &Parameters<F>,
    arch: &NetworkArchitecture,
    gamma: f64,
) -> Result<Vec<f64>, TrainError> {
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        if t.terminal || gamma == 0.0 {
            targets.push(t.reward);
            continue;
        }
        let (q, _) = forward(arch, target_params, &t.next_state.to_tensor::<F>(), None)?;
        let max_q = q
            .data()
            .iter()
            .map(|v| v.into_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        targets.push(t.reward + gamma * max_q);
    }
    Ok(targets)
}

/// Mean squared TD error over the batch plus the L2 penalty, with gradients.
///
/// Targets are constants: the gradient flows only through the online value
/// of the taken action. Dropout masks are freshly drawn per sample for the
/// online pass when the config enables them.
pub fn loss_and_grads<F: Scalar>(
    batch: &[&Transition],
    params: &Parameters<F>,
    target_params: &Parameters<F>,
    arch: &NetworkArchitecture,
    gamma: f64,
    reg: &RegularizationConfig,
    rng: &mut Rng,
) -> Result<(f64, GradientSet<F>), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::InvalidConfig("empty minibatch".into()));
    }
    let targets = td_targets(batch, target_params, arch, gamma)?;
    let inv_batch = 1.0 / batch.len() as f64;
    let mut grads = Parameters::zeros_like(params);
    let mut data_loss = 0.0;
    for (t, target) in batch.iter().zip(&targets) {
        let masks = if reg.dropout_enabled() {
            Some(make_dropout_masks(arch, reg, rng)?)
        } else {
            None
        };
        let input = t.state.to_tensor::<F>();
        let (q, cache) = forward(arch, params, &input, masks.as_ref())?;
        let q_taken = q.data()[t.action].into_f64();
        let diff = q_taken - target;
        data_loss += diff * diff;
        let mut dq = Tensor::zeros(&[arch.action_count]);
        dq.data_mut()[t.action] = F::from_f64(2.0 * diff * inv_batch);
        let sample_grads = backward(arch, params, &cache, &dq)?;
        grads.add_scaled(&sample_grads, F::one());
    }
    let mut loss = data_loss * inv_batch;
    if reg.lambda_l2 > 0.0 {
        let (penalty, l2_grads) = l2_term(params, reg.lambda_l2)?;
        loss += penalty.into_f64();
        grads.add_scaled(&l2_grads, F::one());
    }
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss { update: 0 });
    }
    Ok((loss, grads))
}

/// Copy of the online parameters; subsequent updates to the online network
/// leave the copy untouched.
pub fn sync_target<F: Scalar>(online: &Parameters<F>) -> Parameters<F> {
    online.clone()
}
