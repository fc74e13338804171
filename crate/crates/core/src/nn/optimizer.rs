//! RMSProp-style optimizer.

use serde::{Deserialize, Serialize};

use crate::error::NnError;
use crate::nn::Parameters;
use crate::tensor::Scalar;

/// Step size and accumulator constants. Only the step size comes from the
/// experiment config; decay and epsilon are fixed stack-wide defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub step_size: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl RmsPropConfig {
    pub fn with_step_size(step_size: f64) -> Self {
        RmsPropConfig {
            step_size,
            decay: 0.95,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter squared-gradient accumulators plus the update constants.
#[derive(Debug, Clone)]
pub struct OptimizerState<F = f64> {
    accum: Parameters<F>,
    pub config: RmsPropConfig,
}

impl<F: Scalar> OptimizerState<F> {
    /// Fresh state (zero accumulators) shaped like `params`.
    pub fn new(params: &Parameters<F>, config: RmsPropConfig) -> Self {
        OptimizerState {
            accum: Parameters::zeros_like(params),
            config,
        }
    }

    pub fn accumulators(&self) -> &Parameters<F> {
        &self.accum
    }
}



/// One update:
/// `acc <- decay*acc + (1-decay)*g^2`, `param <- param - a*g/sqrt(acc + eps)`.
///
/// Rejects non-finite gradients before touching any state and verifies the
/// updated parameters stay finite.
pub fn optimizer_step<F: Scalar>(
    params: &mut Parameters<F>,
    grads: &Parameters<F>,
    state: &mut OptimizerState<F>,
) -> Result<(), NnError> {
    if !params.same_layout(grads) || !params.same_layout(&state.accum) {
        return Err(NnError::StaleCache);
    }
    if let Some(layer) = grads.first_non_finite() {
        return Err(NnError::NonFinite {
            layer: layer.to_string(),
            what: "gradient",
        });
    }
    let decay = F::from_f64(state.config.decay);
    let one_minus = F::from_f64(1.0 - state.config.decay);
    let alpha = F::from_f64(state.config.step_size);
    let eps = F::from_f64(state.config.epsilon);
    for i in 0..grads.len() {
        let gl = grads.layer(i);
        let acc = state.accum.layer_mut(i);
        let pl = params.layer_mut(i);
        for ((p, g), a) in pl
            .weights
            .data_mut()
            .iter_mut()
            .zip(gl.weights.data())
            .zip(acc.weights.data_mut())
        {
            *a = decay * *a + one_minus * *g * *g;
            *p -= alpha * *g / (*a + eps).sqrt();
        }
        for ((p, g), a) in pl
            .biases
            .data_mut()
            .iter_mut()
            .zip(gl.biases.data())
            .zip(acc.biases.data_mut())
        {
            *a = decay * *a + one_minus * *g * *g;
            *p -= alpha * *g / (*a + eps).sqrt();
        }
    }
    if let Some(layer) = params.first_non_finite() {
        return Err(NnError::NonFinite {
            layer: layer.to_string(),
            what: "parameter",
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{network_profile, xavier_init, Parameters};
    use crate::rng::Rng;

    fn scalar_net() -> (crate::nn::NetworkArchitecture, Parameters) {
        let arch = crate::nn::NetworkArchitecture {
            layers: vec![crate::nn::LayerSpec {
                kind: crate::nn::LayerKind::Dense { units: 1 },
                activation: crate::nn::Activation::Linear,
                dropout_site: false,
            }],
            input_shape: (1, 1, 1),
            action_count: 1,
        };
        let params = Parameters::zeros(&arch).unwrap();
        (arch, params)
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let arch = network_profile("desk-default", (4, 7, 9), 3).unwrap();
        let mut params: Parameters = xavier_init(&arch, &mut Rng::from_seed(1)).unwrap();
        let before = params.clone();
        let grads = Parameters::zeros_like(&params);
        let mut state = OptimizerState::new(&params, RmsPropConfig::with_step_size(0.00025));
        optimizer_step(&mut params, &grads, &mut state).unwrap();
        assert_eq!(params.max_abs_diff(&before), Some(0.0));
    }

    #[test]
    fn first_step_matches_closed_form() {
        // grad 1 on a fresh accumulator: acc = 0.05, delta = a / sqrt(0.05 + eps).
        let (_, mut params) = scalar_net();
        let mut grads = Parameters::zeros_like(&params);
        grads.layer_mut(0).weights.data_mut()[0] = 1.0;
        let cfg = RmsPropConfig::with_step_size(0.00025);
        let mut state = OptimizerState::new(&params, cfg);
        optimizer_step(&mut params, &grads, &mut state).unwrap();
        let expected = -0.00025 / (0.05f64 + 1e-8).sqrt();
        let got = params.layer(0).weights.data()[0];
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
        assert!((got + 0.00025 / 0.05f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn repeated_identical_gradients_approach_alpha_steps() {
        // Accumulator fixed point at g^2 makes the per-step delta tend to a.
        let (_, mut params) = scalar_net();
        let mut grads = Parameters::zeros_like(&params);
        grads.layer_mut(0).weights.data_mut()[0] = 1.0;
        let cfg = RmsPropConfig::with_step_size(0.00025);
        let mut state = OptimizerState::new(&params, cfg);
        let mut prev = params.layer(0).weights.data()[0];
        let mut delta = 0.0;
        for _ in 0..400 {
            optimizer_step(&mut params, &grads, &mut state).unwrap();
            let cur = params.layer(0).weights.data()[0];
            delta = (cur - prev).abs();
            prev = cur;
        }
        assert!((delta - 0.00025).abs() < 1e-8, "final delta {delta}");
        let acc = state.accumulators().layer(0).weights.data()[0];
        assert!((acc - 1.0).abs() < 1e-6, "accumulator {acc}");
    }

    #[test]
    fn non_finite_gradient_rejected_with_layer_name() {
        let arch = network_profile("desk-default", (4, 7, 9), 3).unwrap();
        let mut params: Parameters = xavier_init(&arch, &mut Rng::from_seed(1)).unwrap();
        let before = params.clone();
        let mut grads = Parameters::zeros_like(&params);
        grads.get_mut("conv2").unwrap().weights.data_mut()[0] = f64::NAN;
        let mut state = OptimizerState::new(&params, RmsPropConfig::with_step_size(0.00025));
        match optimizer_step(&mut params, &grads, &mut state) {
            Err(NnError::NonFinite { layer, .. }) => assert_eq!(layer, "conv2"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
        // Step rejected before mutating anything.
        assert_eq!(params.max_abs_diff(&before), Some(0.0));
    }

    #[test]
    fn accumulators_stay_nonnegative() {
        let (_, mut params) = scalar_net();
        let mut grads = Parameters::zeros_like(&params);
        let mut state = OptimizerState::new(&params, RmsPropConfig::with_step_size(0.01));
        let mut rng = Rng::from_seed(8);
        for _ in 0..200 {
            grads.layer_mut(0).weights.data_mut()[0] = rng.normal(0.0, 2.0);
            optimizer_step(&mut params, &grads, &mut state).unwrap();
            assert!(state.accumulators().layer(0).weights.data()[0] >= 0.0);
        }
    }
}
