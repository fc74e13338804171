//! Built-in network profiles.

use crate::error::NnError;
use crate::nn::{Activation, LayerKind, LayerSpec, NetworkArchitecture};

fn conv(filters: usize, kernel: usize, stride: usize, dropout_site: bool) -> LayerSpec {
    LayerSpec {
        kind: LayerKind::Conv { filters, kernel, stride },
        activation: Activation::Relu,
        dropout_site,
    }
}

fn dense(units: usize, activation: Activation, dropout_site: bool) -> LayerSpec {
    LayerSpec {
        kind: LayerKind::Dense { units },
        activation,
        dropout_site,
    }
}

/// Resolves a named profile for the given input shape and action count.
///
/// `desk-default` is the standard 3-convolution + 2-dense shape scaled to
/// mini-environment inputs, with dropout sites on the first four layers.
/// The micro profiles exist for the gradient verifier and unit tests.
pub fn network_profile(
    name: &str,
    input_shape: (usize, usize, usize),
    action_count: usize,
) -> Result<NetworkArchitecture, NnError> {
    let layers = match name {
        "desk-default" => vec![
            conv(8, 3, 1, true),
            conv(16, 3, 1, true),
            conv(16, 3, 1, true),
            dense(64, Activation::Relu, true),
            dense(action_count, Activation::Linear, false),
        ],
        "micro-fc" => vec![
            dense(8, Activation::Relu, true),
            dense(action_count, Activation::Linear, false),
        ],
        "micro-conv" => vec![
            conv(2, 2, 1, true),
            dense(action_count, Activation::Linear, false),
        ],
        other => {
            return Err(NnError::InvalidArchitecture(format!(
                "unknown network profile `{other}` (known: {})",
                profile_names().join(", ")
            )))
        }
    };
    let arch = NetworkArchitecture {
        layers,
        input_shape,
        action_count,
    };
    arch.validate()?;
    Ok(arch)
}

pub fn profile_names() -> Vec<&'static str> {
    vec!["desk-default", "micro-fc", "micro-conv"]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_profiles_validate() {
        for name in profile_names() {
            network_profile(name, (2, 7, 9), 3).unwrap();
        }
    }

    #[test]
    fn unknown_profile_rejected() {
        assert!(network_profile("mega", (2, 5, 5), 3).is_err());
    }
}
