//! Inverted dropout masks.
//!
//! Masks are drawn per dropout site; surviving units carry the value
//! `1/(1-p)` so a masked forward pass needs no evaluation-time rescaling.

use crate::error::NnError;
use crate::nn::{LayerKind, NetworkArchitecture, RegularizationConfig};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// One drawn mask per dropout-site layer, aligned by layer index.
#[derive(Debug, Clone)]
pub struct MaskSet<F = f64> {
    entries: Vec<(usize, Tensor<F>)>,
    arch_fingerprint: u64,
}

impl<F: Scalar> MaskSet<F> {
    pub fn mask_for(&self, layer_index: usize) -> Option<&Tensor<F>> {
        self.entries
            .iter()
            .find(|(i, _)| *i == layer_index)
            .map(|(_, m)| m)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn fingerprint(&self) -> u64 {
        self.arch_fingerprint
    }

    /// Fraction of zeroed units in the mask for `layer_index`.
    pub fn zero_fraction(&self, layer_index: usize) -> Option<f64> {
        self.mask_for(layer_index).map(|m| {
            let zeros = m.data().iter().filter(|v| **v == F::zero()).count();
            zeros as f64 / m.len() as f64
        })
    }
}

/// Draws a fresh mask set for every dropout site of `arch`.
///
/// Unit `u` of a site is zeroed with probability `p` (`p_conv` on conv
/// layers, `p_fc` on dense layers) and otherwise carries `1/(1-p)`. A rate
/// of zero emits an all-ones mask without consuming any randomness, so
/// disabled dropout leaves the rng stream untouched.
pub fn make_dropout_masks<F: Scalar>(
    arch: &NetworkArchitecture,
    reg: &RegularizationConfig,
    rng: &mut Rng,
) -> Result<MaskSet<F>, NnError> {
    reg.validate()?;
    let shapes = arch.layer_output_shapes()?;
    let mut entries = Vec::new();
    for (i, layer) in arch.layers.iter().enumerate() {
        if !layer.dropout_site {
            continue;
        }
        let p = match layer.kind {
            LayerKind::Conv { .. } => reg.p_conv,
            LayerKind::Dense { .. } => reg.p_fc,
        };
        let mask = if p == 0.0 {
            Tensor::filled(&shapes[i], F::one())
        } else {
            let keep = F::from_f64(1.0 / (1.0 - p));
            let mut m = Tensor::zeros(&shapes[i]);
            for v in m.data_mut() {
                if !rng.bernoulli(p) {
                    *v = keep;
                }
            }
            m
        };
        entries.push((i, mask));
    }
    Ok(MaskSet {
        entries,
        arch_fingerprint: arch.fingerprint(),
    })
}
