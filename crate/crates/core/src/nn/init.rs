//! Xavier (Glorot) uniform initialization.

use crate::error::NnError;
use crate::nn::{LayerKind, NetworkArchitecture, Parameters};
use crate::rng::Rng;
use crate::tensor::Scalar;

/// Draws each weight uniformly from `[-b, +b]` with
/// `b = sqrt(6 / (fan_in + fan_out))`; biases start at zero.
///
/// Conv fans count kernel area: `fan_in = in_ch * k * k`,
/// `fan_out = filters * k * k`. Draw order is layer order then row-major
/// element order, so a seed pins the full initialization.
pub fn xavier_init<F: Scalar>(
    arch: &NetworkArchitecture,
    rng: &mut Rng,
) -> Result<Parameters<F>, NnError> {
    let mut params = Parameters::zeros(arch)?;
    let (mut c, mut h, mut w) = arch.input_shape;
    for (i, layer) in arch.layers.iter().enumerate() {
        let (fan_in, fan_out) = match layer.kind {
            LayerKind::Conv { filters, kernel, stride } => {
                let fans = (c * kernel * kernel, filters * kernel * kernel);
                c = filters;
                h = (h - kernel) / stride + 1;
                w = (w - kernel) / stride + 1;
                fans
            }
            LayerKind::Dense { units } => {
                let fans = (c * h * w, units);
                c = units;
                h = 1;
                w = 1;
                fans
            }
        };
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in params.layer_mut(i).weights.data_mut() {
            *v = F::from_f64(rng.uniform(-bound, bound));
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{network_profile, Activation, LayerSpec};

    fn fc_arch(inputs: usize, units: usize) -> NetworkArchitecture {
        NetworkArchitecture {
            layers: vec![LayerSpec {
                kind: LayerKind::Dense { units },
                activation: Activation::Linear,
                dropout_site: false,
            }],
            input_shape: (inputs, 1, 1),
            action_count: units,
        }
    }

    #[test]
    fn fan_three_by_three_bounds_weights_by_one() {
        // fan_in = fan_out = 3 gives bound sqrt(6/6) = 1.
        let arch = fc_arch(3, 3);
        let mut rng = Rng::from_seed(0);
        let params: Parameters = xavier_init(&arch, &mut rng).unwrap();
        for w in params.layer(0).weights.data() {
            assert!(w.abs() <= 1.0);
        }
        assert!(params.layer(0).biases.data().iter().all(|b| *b == 0.0));
    }

    #[test]
    fn same_seed_bit_identical() {
        let arch = network_profile("desk-default", (4, 7, 9), 3).unwrap();
        let a: Parameters = xavier_init(&arch, &mut Rng::from_seed(9)).unwrap();
        let b: Parameters = xavier_init(&arch, &mut Rng::from_seed(9)).unwrap();
        assert_eq!(a, b);
        let c: Parameters = xavier_init(&arch, &mut Rng::from_seed(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn wide_layer_mean_is_near_zero() {
        // 100x50 dense layer: 5000 uniform draws, mean within ±0.02 of 0.
        let arch = fc_arch(100, 50);
        let mut rng = Rng::from_seed(4);
        let params: Parameters = xavier_init(&arch, &mut rng).unwrap();
        let data = params.layer(0).weights.data();
        assert_eq!(data.len(), 5000);
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        let bound = (6.0 / 150.0f64).sqrt();
        assert!(data.iter().all(|w| w.abs() <= bound));
    }
}
