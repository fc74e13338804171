//! Checkpoint persistence and transfer initialization for fine-tuning.

mod checkpoint;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, FORMAT_VERSION, MAGIC,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{train, TrainOutcome, TrainSettings};
use crate::env::{make_env, Flavour, Game};
use crate::error::{NnError, TrainError};
use crate::nn::{xavier_init, LayerKind, NetworkArchitecture, Parameters};
use crate::rng::{Rng, Stream};
use crate::tensor::Scalar;

/// Which layers a fine-tuning run inherits from the source network. The
/// rest are freshly initialized; every layer stays trainable afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferScheme {
    /// Every layer.
    Full,
    /// The convolutional trunk only.
    Conv3,
    /// The convolutional trunk plus the first dense layer.
    Conv3Fc1,
}

impl fmt::Display for TransferScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransferScheme::Full => write!(f, "full"),
            TransferScheme::Conv3 => write!(f, "conv3"),
            TransferScheme::Conv3Fc1 => write!(f, "conv3fc1"),
        }
    }
}

impl FromStr for TransferScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(TransferScheme::Full),
            "conv3" => Ok(TransferScheme::Conv3),
            "conv3fc1" => Ok(TransferScheme::Conv3Fc1),
            other => Err(format!(
                "unknown transfer scheme `{other}` (expected full, conv3, or conv3fc1)"
            )),
        }
    }
}

impl TransferScheme {
    /// Whether layer `index` of `arch` is copied from the source.
    fn transfers(&self, arch: &NetworkArchitecture, index: usize) -> bool {
        match self {
            TransferScheme::Full => true,
            TransferScheme::Conv3 => matches!(arch.layers[index].kind, LayerKind::Conv { .. }),
            TransferScheme::Conv3Fc1 => {
                let first_dense = arch
                    .layers
                    .iter()
                    .position(|l| matches!(l.kind, LayerKind::Dense { .. }));
                matches!(arch.layers[index].kind, LayerKind::Conv { .. })
                    || Some(index) == first_dense
            }
        }
    }
}

/// Builds initial parameters for a fine-tuning run: transferred layers are
/// copied bit-exactly from the source, the rest drawn fresh. No tensor is
/// ever partially copied.
pub fn transfer_init<F: Scalar>(
    source: &Parameters<F>,
    scheme: TransferScheme,
    arch: &NetworkArchitecture,
    rng: &mut Rng,
) -> Result<Parameters<F>, NnError> {
    let mut fresh = xavier_init::<F>(arch, rng)?;
    if !source.same_layout(&fresh) {
        let names = arch.layer_names();
        let layer = source
            .names()
            .zip(names.iter())
            .find(|(a, b)| a != b.as_str())
            .map(|(a, _)| a.to_string())
            .unwrap_or_else(|| "conv1".to_string());
        return Err(NnError::ShapeMismatch {
            layer,
            expected: vec![],
            got: vec![],
        });
    }
    for i in 0..arch.layers.len() {
        if scheme.transfers(arch, i) {
            *fresh.layer_mut(i) = source.layer(i).clone();
        }
    }
    Ok(fresh)
}

/// Fine-tunes from a source checkpoint on a target flavour: identical to a
/// training run except the initial parameters come from [`transfer_init`].
/// Whether regularization stays active is carried by `settings.agent.reg`.
pub fn finetune<F: Scalar>(
    source: &Checkpoint,
    scheme: TransferScheme,
    target: Flavour,
    settings: &TrainSettings,
    master_seed: u64,
) -> Result<TrainOutcome<F>, TrainError> {
    let arch = &source.arch;
    let mut init_rng = Rng::derive(master_seed, Stream::Init);
    let source_params: Parameters<F> = source.params.cast();
    let init = transfer_init(&source_params, scheme, arch, &mut init_rng)?;
    let env = make_env(target, master_seed)?;
    train(settings, arch, init, env, master_seed)
}

/// Convenience used by the harness and tests: the canonical flavour of a
/// game used as the transfer source.
pub fn default_source_flavour(game: Game) -> Flavour {
    Flavour::default_of(game)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::desk_agent_config;
    use crate::nn::network_profile;

    fn arch() -> NetworkArchitecture {
        network_profile("desk-default", (4, 7, 9), 3).unwrap()
    }

    fn layer_equal<F: Scalar>(a: &Parameters<F>, b: &Parameters<F>, name: &str) -> bool {
        let (x, y) = (a.get(name).unwrap(), b.get(name).unwrap());
        x.weights == y.weights && x.biases == y.biases
    }

    #[test]
    fn full_scheme_is_identity() {
        let arch = arch();
        let source = xavier_init::<f64>(&arch, &mut Rng::from_seed(1)).unwrap();
        let out = transfer_init(&source, TransferScheme::Full, &arch, &mut Rng::from_seed(2)).unwrap();
        assert_eq!(out.max_abs_diff(&source), Some(0.0));
    }

    #[test]
    fn conv3_scheme_copies_trunk_and_redraws_heads() {
        let arch = arch();
        let source = xavier_init::<f64>(&arch, &mut Rng::from_seed(3)).unwrap();
        let out = transfer_init(&source, TransferScheme::Conv3, &arch, &mut Rng::from_seed(4)).unwrap();
        for name in ["conv1", "conv2", "conv3"] {
            assert!(layer_equal(&out, &source, name), "{name} must transfer");
        }
        for name in ["fc1", "fc2"] {
            assert!(!layer_equal(&out, &source, name), "{name} must be fresh");
        }
    }

    #[test]
    fn conv3fc1_scheme_redraws_output_layer_only() {
        let arch = arch();
        let source = xavier_init::<f64>(&arch, &mut Rng::from_seed(5)).unwrap();
        let out =
            transfer_init(&source, TransferScheme::Conv3Fc1, &arch, &mut Rng::from_seed(6)).unwrap();
        for name in ["conv1", "conv2", "conv3", "fc1"] {
            assert!(layer_equal(&out, &source, name), "{name} must transfer");
        }
        assert!(!layer_equal(&out, &source, "fc2"));
    }

    #[test]
    fn no_tensor_is_partially_copied() {
        // Every tensor is either bit-equal to the source or differs in a
        // cleanly re-drawn way; spot-check per-element equality masks.
        let arch = arch();
        let source = xavier_init::<f64>(&arch, &mut Rng::from_seed(7)).unwrap();
        let out = transfer_init(&source, TransferScheme::Conv3, &arch, &mut Rng::from_seed(8)).unwrap();
        for (name, lp) in out.iter() {
            let src = source.get(name).unwrap();
            let equal = lp
                .weights
                .data()
                .iter()
                .zip(src.weights.data())
                .filter(|(a, b)| a == b)
                .count();
            let total = lp.weights.len();
            assert!(
                equal == total || equal * 50 < total,
                "layer {name}: {equal}/{total} equal elements looks like a partial copy"
            );
        }
    }

    #[test]
    fn scheme_strings_round_trip() {
        for scheme in [TransferScheme::Full, TransferScheme::Conv3, TransferScheme::Conv3Fc1] {
            let s = scheme.to_string();
            assert_eq!(s.parse::<TransferScheme>().unwrap(), scheme);
        }
        assert!("conv9".parse::<TransferScheme>().is_err());
    }

    #[test]
    fn finetune_zero_frames_reemits_source_parameters() {
        let arch = arch();
        let params = xavier_init::<f64>(&arch, &mut Rng::from_seed(9)).unwrap();
        let source = Checkpoint {
            arch: arch.clone(),
            params: params.clone(),
            meta: CheckpointMeta {
                frame: 50_000,
                flavour: "mini_crossing:m0d0".into(),
                seed: 1,
                lambda_l2: 0.0,
                p_conv: 0.0,
                p_fc: 0.0,
                created_unix: 0,
                transfer_source: None,
                transfer_scheme: None,
                reg_active_in_finetune: None,
            },
        };
        let settings = TrainSettings {
            agent: desk_agent_config(),
            frame_skip: 1,
            sticky_prob: 0.25,
            total_frames: 0,
            checkpoint_interval: 10_000,
            log_interval: 1_000,
        };
        let out: TrainOutcome<f64> = finetune(
            &source,
            TransferScheme::Full,
            Flavour::new(Game::MiniCrossing, 1, 1),
            &settings,
            77,
        )
        .unwrap();
        assert_eq!(out.snapshots.len(), 1);
        assert_eq!(out.snapshots[0].params.max_abs_diff(&params), Some(0.0));
    }

    #[test]
    fn full_scheme_finetune_equals_train_with_loaded_params() {
        // With the full scheme and regularization off, fine-tuning is
        // behaviourally identical to a training run seeded with the loaded
        // parameters: same log, same final parameters, same seed.
        let arch = arch();
        let params = xavier_init::<f64>(&arch, &mut Rng::from_seed(10)).unwrap();
        let source = Checkpoint {
            arch: arch.clone(),
            params: params.clone(),
            meta: CheckpointMeta {
                frame: 0,
                flavour: "mini_crossing:m0d0".into(),
                seed: 0,
                lambda_l2: 0.0,
                p_conv: 0.0,
                p_fc: 0.0,
                created_unix: 0,
                transfer_source: None,
                transfer_scheme: None,
                reg_active_in_finetune: None,
            },
        };
        let mut settings = TrainSettings {
            agent: desk_agent_config(),
            frame_skip: 1,
            sticky_prob: 0.25,
            total_frames: 6_000,
            checkpoint_interval: 3_000,
            log_interval: 1_000,
        };
        settings.agent.buffer_capacity = 2_000;
        let target = Flavour::new(Game::MiniCrossing, 1, 0);
        let via_finetune: TrainOutcome<f64> =
            finetune(&source, TransferScheme::Full, target, &settings, 55).unwrap();
        let via_train: TrainOutcome<f64> = train(
            &settings,
            &arch,
            params,
            make_env(target, 55).unwrap(),
            55,
        )
        .unwrap();
        assert_eq!(via_finetune.log.to_csv(), via_train.log.to_csv());
        assert_eq!(
            via_finetune.final_params.max_abs_diff(&via_train.final_params),
            Some(0.0)
        );
    }
}
