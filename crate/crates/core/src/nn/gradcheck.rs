//! Finite-difference gradient verification.
//!
//! Checks the hand-derived backward pass (including the L2 contribution)
//! against central differences of the scalar check loss
//! `sum_i (q_i - target_i)^2 + lambda*||w||^2`, with any dropout masks held
//! fixed across both routes.

use crate::error::NnError;
use crate::nn::{
    backward, forward, l2_term, MaskSet, NetworkArchitecture, Parameters, RegularizationConfig,
};
use crate::tensor::{Scalar, Tensor};

/// Central-difference step. Chosen for double precision: truncation and
/// cancellation errors balance near 1e-10 on O(1) losses.
pub const FD_STEP: f64 = 1e-5;

/// Minimum number of sampled parameters per check.
pub const MIN_SAMPLED: usize = 200;

/// Verdict of one gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: max relative error {:.3e} over {} sampled parameters (tolerance {:.1e})",
            if self.pass { "pass" } else { "FAIL" },
            self.max_relative_error,
            self.checked,
            self.tolerance
        )
    }
}

fn check_loss<F: Scalar>(
    arch: &NetworkArchitecture,
    params: &Parameters<F>,
    input: &Tensor<F>,
    target_q: &Tensor<F>,
    lambda_l2: f64,
    masks: Option<&MaskSet<F>>,
) -> Result<f64, NnError> {
    let (q, _) = forward(arch, params, input, masks)?;
    let data: f64 = q
        .data()
        .iter()
        .zip(target_q.data())
        .map(|(qi, ti)| (qi.into_f64() - ti.into_f64()).powi(2))
        .sum();
    let (penalty, _) = l2_term(params, lambda_l2)?;
    Ok(data + penalty.into_f64())
}

/// Analytic gradients of the check loss.
fn analytic_gradients<F: Scalar>(
    arch: &NetworkArchitecture,
    params: &Parameters<F>,
    input: &Tensor<F>,
    target_q: &Tensor<F>,
    lambda_l2: f64,
    masks: Option<&MaskSet<F>>,
) -> Result<Parameters<F>, NnError> {
    let (q, cache) = forward(arch, params, input, masks)?;
    let dq = Tensor::from_vec(
        &[q.len()],
        q.data()
            .iter()
            .zip(target_q.data())
            .map(|(qi, ti)| F::from_f64(2.0) * (*qi - *ti))
            .collect(),
    );
    let mut grads = backward(arch, params, &cache, &dq)?;
    if lambda_l2 > 0.0 {
        let (_, l2) = l2_term(params, lambda_l2)?;
        grads.add_scaled(&l2, F::one());
    }
    Ok(grads)
}

/// Compares `analytic` against central differences on a deterministic sample
/// of at least [`MIN_SAMPLED`] parameters (all of them on small networks).
///
/// Relative error uses a floored denominator so near-zero gradient pairs
/// are judged on an absolute scale commensurate with the tolerance.
#[allow(clippy::too_many_arguments)]
pub fn verify_gradients<F: Scalar>(
    arch: &NetworkArchitecture,
    params: &Parameters<F>,
    input: &Tensor<F>,
    target_q: &Tensor<F>,
    reg: &RegularizationConfig,
    masks: Option<&MaskSet<F>>,
    tolerance: f64,
    analytic: &Parameters<F>,
) -> Result<GradCheckReport, NnError> {
    let total = params.scalar_count();
    let step = (total / MIN_SAMPLED).max(1);
    let mut work = params.clone();
    let mut max_rel = 0.0f64;
    let mut checked = 0usize;

    // Flat index over (layer, weights then biases, element).
    let mut flat = 0usize;
    for li in 0..params.len() {
        for part in 0..2 {
            let len = if part == 0 {
                params.layer(li).weights.len()
            } else {
                params.layer(li).biases.len()
            };
            for e in 0..len {
                let sampled = flat % step == 0;
                flat += 1;
                if !sampled {
                    continue;
                }
                let original = {
                    let lp = work.layer(li);
                    if part == 0 {
                        lp.weights.data()[e]
                    } else {
                        lp.biases.data()[e]
                    }
                };
                let set = |work: &mut Parameters<F>, v: F| {
                    let lp = work.layer_mut(li);
                    if part == 0 {
                        lp.weights.data_mut()[e] = v;
                    } else {
                        lp.biases.data_mut()[e] = v;
                    }
                };
                let h = F::from_f64(FD_STEP);
                set(&mut work, original + h);
                let plus = check_loss(arch, &work, input, target_q, reg.lambda_l2, masks)?;
                set(&mut work, original - h);
                let minus = check_loss(arch, &work, input, target_q, reg.lambda_l2, masks)?;
                set(&mut work, original);
                let numeric = (plus - minus) / (2.0 * FD_STEP);
                let a = {
                    let lp = analytic.layer(li);
                    if part == 0 {
                        lp.weights.data()[e].into_f64()
                    } else {
                        lp.biases.data()[e].into_f64()
                    }
                };
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                max_rel = max_rel.max(rel);
                checked += 1;
            }
        }
    }

    Ok(GradCheckReport {
        max_relative_error: max_rel,
        checked,
        tolerance,
        pass: max_rel <= tolerance,
    })
}

/// Runs the full check: analytic backward (with L2) versus finite
/// differences. When `reg` enables dropout, one mask set is drawn from `rng`
/// and reused for both routes.
pub fn gradient_check<F: Scalar>(
    arch: &NetworkArchitecture,
    params: &Parameters<F>,
    input: &Tensor<F>,
    target_q: &Tensor<F>,
    reg: &RegularizationConfig,
    rng: &mut crate::rng::Rng,
    tolerance: f64,
) -> Result<GradCheckReport, NnError> {
    reg.validate()?;
    let masks = if reg.dropout_enabled() {
        Some(crate::nn::make_dropout_masks(arch, reg, rng)?)
    } else {
        None
    };
    let analytic = analytic_gradients(arch, params, input, target_q, reg.lambda_l2, masks.as_ref())?;
    verify_gradients(
        arch,
        params,
        input,
        target_q,
        reg,
        masks.as_ref(),
        tolerance,
        &analytic,
    )
}
