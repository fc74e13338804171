//! L2 weight penalty.
//!
//! The loss carries `lambda * ||w||^2` (no 1/2 factor), so the gradient
//! contribution is `2*lambda*w`. The penalty covers every weight matrix in
//! the network; biases are exempt.

use crate::error::NnError;
use crate::nn::{GradientSet, Parameters};
use crate::tensor::Scalar;

/// Returns the penalty value and its gradient contribution.
pub fn l2_term<F: Scalar>(
    params: &Parameters<F>,
    lambda_l2: f64,
) -> Result<(F, GradientSet<F>), NnError> {
    if !(lambda_l2 >= 0.0 && lambda_l2.is_finite()) {
        return Err(NnError::InvalidArchitecture(format!(
            "lambda_l2 must be finite and >= 0, got {lambda_l2}"
        )));
    }
    let mut grads = Parameters::zeros_like(params);
    if lambda_l2 == 0.0 {
        return Ok((F::zero(), grads));
    }
    let lambda = F::from_f64(lambda_l2);
    let two_lambda = F::from_f64(2.0 * lambda_l2);
    let mut sq = F::zero();
    for (i, (_, lp)) in params.iter().enumerate() {
        sq += lp.weights.sq_sum();
        for (g, w) in grads
            .layer_mut(i)
            .weights
            .data_mut()
            .iter_mut()
            .zip(lp.weights.data())
        {
            *g = two_lambda * *w;
        }
    }
    Ok((lambda * sq, grads))
}
