//! From-scratch differentiable Q-network.
//!
//! Convolution and dense layers with ReLU/linear activations, Xavier
//! initialization, inverted dropout, an L2 weight penalty, an RMSProp-style
//! optimizer, and a finite-difference gradient verifier. No autodiff
//! framework: the backward pass is hand-derived and checked numerically.

mod dropout;
mod forward;
mod gradcheck;
mod init;
mod optimizer;
mod profiles;
mod regularizer;

pub use dropout::{make_dropout_masks, MaskSet};
pub use forward::{backward, forward, ForwardCache};
pub use gradcheck::{gradient_check, verify_gradients, GradCheckReport};
pub use init::xavier_init;
pub use optimizer::{optimizer_step, OptimizerState, RmsPropConfig};
pub use profiles::{network_profile, profile_names};
pub use regularizer::l2_term;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::NnError;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    Conv {
        filters: usize,
        kernel: usize,
        stride: usize,
    },
    Dense {
        units: usize,
    },
}

/// One layer of the network: kind, activation, and whether dropout applies
/// to its activations when a mask set is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub activation: Activation,
    pub dropout_site: bool,
}

/// Network structure: an ordered conv trunk followed by dense layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkArchitecture {
    pub layers: Vec<LayerSpec>,
    /// (channels, height, width) of the network input.
    pub input_shape: (usize, usize, usize),
    pub action_count: usize,
}

impl NetworkArchitecture {
    /// Structural validity: conv layers strictly before dense layers, a final
    /// dense layer as wide as the action set, all dimensions positive, and
    /// every intermediate shape non-degenerate.
    pub fn validate(&self) -> Result<(), NnError> {
        if self.layers.is_empty() {
            return Err(NnError::InvalidArchitecture("no layers".into()));
        }
        if self.action_count == 0 {
            return Err(NnError::InvalidArchitecture("action_count must be positive".into()));
        }
        let (c, h, w) = self.input_shape;
        if c == 0 || h == 0 || w == 0 {
            return Err(NnError::InvalidArchitecture(format!(
                "input shape {:?} has a zero dimension",
                self.input_shape
            )));
        }
        let mut seen_dense = false;
        for (i, layer) in self.layers.iter().enumerate() {
            match layer.kind {
                LayerKind::Conv { filters, kernel, stride } => {
                    if seen_dense {
                        return Err(NnError::InvalidArchitecture(format!(
                            "layer {i}: convolution after a dense layer"
                        )));
                    }
                    if filters == 0 || kernel == 0 || stride == 0 {
                        return Err(NnError::InvalidArchitecture(format!(
                            "layer {i}: filters/kernel/stride must be positive"
                        )));
                    }
                }
                LayerKind::Dense { units } => {
                    seen_dense = true;
                    if units == 0 {
                        return Err(NnError::InvalidArchitecture(format!(
                            "layer {i}: units must be positive"
                        )));
                    }
                }
            }
        }
        let last = self.layers.last().unwrap();
        match last.kind {
            LayerKind::Dense { units } if units == self.action_count => {}
            LayerKind::Dense { units } => {
                return Err(NnError::InvalidArchitecture(format!(
                    "final layer width {units} != action_count {}",
                    self.action_count
                )));
            }
            LayerKind::Conv { .. } => {
                return Err(NnError::InvalidArchitecture(
                    "final layer must be dense".into(),
                ));
            }
        }
        if last.dropout_site {
            return Err(NnError::InvalidArchitecture(
                "output layer cannot be a dropout site".into(),
            ));
        }
        // Forces shape computation, which rejects kernels larger than their input.
        self.layer_output_shapes()?;
        Ok(())
    }

    /// Layer names in order: `conv1..convN` then `fc1..fcM`.
    pub fn layer_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.layers.len());
        let mut conv = 0usize;
        let mut fc = 0usize;
        for layer in &self.layers {
            match layer.kind {
                LayerKind::Conv { .. } => {
                    conv += 1;
                    names.push(format!("conv{conv}"));
                }
                LayerKind::Dense { .. } => {
                    fc += 1;
                    names.push(format!("fc{fc}"));
                }
            }
        }
        names
    }

    /// Output shape of each layer given the input shape. Conv shapes are
    /// `[filters, oh, ow]` (valid padding), dense shapes `[units]`.
    pub fn layer_output_shapes(&self) -> Result<Vec<Vec<usize>>, NnError> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let (_, mut h, mut w) = self.input_shape;
        let names = self.layer_names();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer.kind {
                LayerKind::Conv { filters, kernel, stride } => {
                    if kernel > h || kernel > w {
                        return Err(NnError::InvalidArchitecture(format!(
                            "layer {}: {kernel}x{kernel} kernel exceeds input {h}x{w}",
                            names[i]
                        )));
                    }
                    let oh = (h - kernel) / stride + 1;
                    let ow = (w - kernel) / stride + 1;
                    shapes.push(vec![filters, oh, ow]);
                    h = oh;
                    w = ow;
                }
                LayerKind::Dense { units } => {
                    shapes.push(vec![units]);
                    h = 1;
                    w = 1;
                }
            }
        }
        Ok(shapes)
    }

    /// (weights shape, biases shape) for each layer.
    pub fn parameter_shapes(&self) -> Result<Vec<(Vec<usize>, Vec<usize>)>, NnError> {
        let mut out = Vec::with_capacity(self.layers.len());
        let (mut c, mut h, mut w) = self.input_shape;
        for layer in &self.layers {
            match layer.kind {
                LayerKind::Conv { filters, kernel, stride } => {
                    out.push((vec![filters, c, kernel, kernel], vec![filters]));
                    c = filters;
                    h = (h - kernel) / stride + 1;
                    w = (w - kernel) / stride + 1;
                }
                LayerKind::Dense { units } => {
                    let fan_in = c * h * w;
                    out.push((vec![units, fan_in], vec![units]));
                    c = units;
                    h = 1;
                    w = 1;
                }
            }
        }
        Ok(out)
    }

    /// Structural hash used to pair forward caches with the network that
    /// produced them.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.layers.hash(&mut hasher);
        self.input_shape.hash(&mut hasher);
        self.action_count.hash(&mut hasher);
        hasher.finish()
    }
}

/// Dropout and L2 settings. `lambda_l2` multiplies the squared weight norm;
/// `p_conv`/`p_fc` are per-unit drop rates on conv and dense dropout sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationConfig {
    pub lambda_l2: f64,
    pub p_conv: f64,
    pub p_fc: f64,
}

impl RegularizationConfig {
    pub const OFF: RegularizationConfig = RegularizationConfig {
        lambda_l2: 0.0,
        p_conv: 0.0,
        p_fc: 0.0,
    };

    /// The operating point used for the regularized arms: lambda 1e-4 with
    /// drop rates (0.05, 0.1).
    pub const CHOSEN: RegularizationConfig = RegularizationConfig {
        lambda_l2: 1e-4,
        p_conv: 0.05,
        p_fc: 0.1,
    };

    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.lambda_l2 >= 0.0 && self.lambda_l2.is_finite()) {
            return Err(NnError::InvalidArchitecture(format!(
                "lambda_l2 must be finite and >= 0, got {}",
                self.lambda_l2
            )));
        }
        for (name, p) in [("p_conv", self.p_conv), ("p_fc", self.p_fc)] {
            if !(0.0..1.0).contains(&p) {
                return Err(NnError::InvalidArchitecture(format!(
                    "{name} must lie in [0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }

    pub fn dropout_enabled(&self) -> bool {
        self.p_conv > 0.0 || self.p_fc > 0.0
    }
}

/// Weights and biases for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F = f64> {
    pub weights: Tensor<F>,
    pub biases: Tensor<F>,
}

/// Named parameter tensors for a whole network, in architecture order.
/// Doubles as gradient and accumulator storage, which share this layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<F = f64> {
    entries: Vec<(String, LayerParams<F>)>,
}

/// Gradients mirror the parameter layout exactly.
pub type GradientSet<F> = Parameters<F>;

impl<F: Scalar> Parameters<F> {
    /// All-zero parameters shaped for `arch`.
    pub fn zeros(arch: &NetworkArchitecture) -> Result<Self, NnError> {
        let names = arch.layer_names();
        let shapes = arch.parameter_shapes()?;
        let entries = names
            .into_iter()
            .zip(shapes)
            .map(|(name, (w, b))| {
                (
                    name,
                    LayerParams {
                        weights: Tensor::zeros(&w),
                        biases: Tensor::zeros(&b),
                    },
                )
            })
            .collect();
        Ok(Parameters { entries })
    }

    pub fn zeros_like(other: &Parameters<F>) -> Self {
        Parameters {
            entries: other
                .entries
                .iter()
                .map(|(name, lp)| {
                    (
                        name.clone(),
                        LayerParams {
                            weights: Tensor::zeros(lp.weights.shape()),
                            biases: Tensor::zeros(lp.biases.shape()),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn from_entries(entries: Vec<(String, LayerParams<F>)>) -> Self {
        Parameters { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&LayerParams<F>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, lp)| lp)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut LayerParams<F>> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, lp)| lp)
    }

    pub fn layer(&self, index: usize) -> &LayerParams<F> {
        &self.entries[index].1
    }

    pub fn layer_mut(&mut self, index: usize) -> &mut LayerParams<F> {
        &mut self.entries[index].1
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LayerParams<F>)> {
        self.entries.iter().map(|(n, lp)| (n.as_str(), lp))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut LayerParams<F>)> {
        self.entries.iter_mut().map(|(n, lp)| (n.as_str(), lp))
    }

    /// True when both sets have identical names and tensor shapes.
    pub fn same_layout(&self, other: &Parameters<F>) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|((na, a), (nb, b))| {
                    na == nb
                        && a.weights.shape() == b.weights.shape()
                        && a.biases.shape() == b.biases.shape()
                })
    }

    /// Total scalar count (weights + biases).
    pub fn scalar_count(&self) -> usize {
        self.entries
            .iter()
            .map(|(_, lp)| lp.weights.len() + lp.biases.len())
            .sum()
    }

    /// Element-wise `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Parameters<F>, scale: F) {
        debug_assert!(self.same_layout(other));
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(other.entries.iter()) {
            for (x, y) in a.weights.data_mut().iter_mut().zip(b.weights.data()) {
                *x += scale * *y;
            }
            for (x, y) in a.biases.data_mut().iter_mut().zip(b.biases.data()) {
                *x += scale * *y;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|(_, lp)| lp.weights.all_finite() && lp.biases.all_finite())
    }

    /// First layer whose tensors contain a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, lp)| !lp.weights.all_finite() || !lp.biases.all_finite())
            .map(|(n, _)| n.as_str())
    }

    pub fn cast<G: Scalar>(&self) -> Parameters<G> {
        Parameters {
            entries: self
                .entries
                .iter()
                .map(|(n, lp)| {
                    (
                        n.clone(),
                        LayerParams {
                            weights: lp.weights.cast(),
                            biases: lp.biases.cast(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Maximum absolute element-wise difference; None when layouts differ.
    pub fn max_abs_diff(&self, other: &Parameters<F>) -> Option<f64> {
        if !self.same_layout(other) {
            return None;
        }
        let mut max = 0.0f64;
        for ((_, a), (_, b)) in self.entries.iter().zip(other.entries.iter()) {
            for (x, y) in a
                .weights
                .data()
                .iter()
                .zip(b.weights.data())
                .chain(a.biases.data().iter().zip(b.biases.data()))
            {
                max = max.max((x.into_f64() - y.into_f64()).abs());
            }
        }
        Some(max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::profiles::network_profile;

    fn desk_arch() -> NetworkArchitecture {
        network_profile("desk-default", (4, 7, 9), 3).unwrap()
    }

    #[test]
    fn desk_profile_is_three_conv_two_dense() {
        let arch = desk_arch();
        arch.validate().unwrap();
        assert_eq!(arch.layers.len(), 5);
        assert_eq!(
            arch.layer_names(),
            vec!["conv1", "conv2", "conv3", "fc1", "fc2"]
        );
        let convs = arch
            .layers
            .iter()
            .filter(|l| matches!(l.kind, LayerKind::Conv { .. }))
            .count();
        assert_eq!(convs, 3);
        // Dropout sites are exactly the first four layers.
        let sites: Vec<bool> = arch.layers.iter().map(|l| l.dropout_site).collect();
        assert_eq!(sites, vec![true, true, true, true, false]);
    }

    #[test]
    fn desk_profile_shapes() {
        let arch = desk_arch();
        let shapes = arch.layer_output_shapes().unwrap();
        assert_eq!(
            shapes,
            vec![
                vec![8, 5, 7],
                vec![16, 3, 5],
                vec![16, 1, 3],
                vec![64],
                vec![3]
            ]
        );
        let params = arch.parameter_shapes().unwrap();
        assert_eq!(params[0].0, vec![8, 4, 3, 3]);
        assert_eq!(params[3].0, vec![64, 48]);
        assert_eq!(params[4], (vec![3, 64], vec![3]));
    }

    #[test]
    fn validate_rejects_wrong_output_width() {
        let mut arch = desk_arch();
        arch.action_count = 5;
        assert!(matches!(
            arch.validate(),
            Err(NnError::InvalidArchitecture(_))
        ));
    }

    #[test]
    fn validate_rejects_conv_after_dense() {
        let mut arch = desk_arch();
        arch.layers.swap(2, 3);
        assert!(arch.validate().is_err());
    }

    #[test]
    fn validate_rejects_oversize_kernel() {
        let mut arch = desk_arch();
        arch.input_shape = (4, 2, 2);
        assert!(arch.validate().is_err());
    }

    #[test]
    fn parameters_layout_ops() {
        let arch = desk_arch();
        let p: Parameters = Parameters::zeros(&arch).unwrap();
        assert_eq!(p.len(), 5);
        assert!(p.get("conv2").is_some());
        assert!(p.get("fc3").is_none());
        assert!(p.same_layout(&Parameters::zeros_like(&p)));
        let mut q = p.clone();
        q.add_scaled(&p, 2.0);
        assert_eq!(q.max_abs_diff(&p), Some(0.0));
        // conv trunk + heads: 288+8 + 1152+16 + 2304+16 + 3072+64 + 192+3
        assert_eq!(p.scalar_count(), 7115);
    }

    #[test]
    fn fingerprint_tracks_structure() {
        let a = desk_arch();
        let mut b = desk_arch();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.input_shape = (6, 7, 9);
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn regularization_validation() {
        RegularizationConfig::CHOSEN.validate().unwrap();
        RegularizationConfig::OFF.validate().unwrap();
        let bad = RegularizationConfig {
            lambda_l2: -1.0,
            ..RegularizationConfig::OFF
        };
        assert!(bad.validate().is_err());
        let bad = RegularizationConfig {
            p_fc: 1.0,
            ..RegularizationConfig::OFF
        };
        assert!(bad.validate().is_err());
    }
}
