//! Forward pass and hand-derived reverse-mode backward pass.
//!
//! Layout conventions: conv inputs/outputs are `(channels, height, width)`
//! row-major, conv weights `(filters, in_ch, k, k)`, dense weights
//! `(units, fan_in)`. Convolutions use valid padding. The inner loops reduce
//! to contiguous dot/axpy operations so the stride-1 path vectorizes.

use crate::error::NnError;
use crate::nn::{Activation, LayerKind, MaskSet, NetworkArchitecture, Parameters};
use crate::tensor::{Scalar, Tensor};

/// Activation record produced by [`forward`]; everything [`backward`] needs.
#[derive(Debug, Clone)]
pub struct ForwardCache<F = f64> {
    /// Input seen by each layer (post-activation, post-mask of the previous one).
    layer_inputs: Vec<Tensor<F>>,
    /// Pre-activation output of each layer.
    preacts: Vec<Tensor<F>>,
    /// Unrolled input patches of each conv layer (`oh*ow` rows of
    /// `in_ch*k*k`), reused by the backward pass.
    patches: Vec<Option<Vec<F>>>,
    masks: Option<MaskSet<F>>,
    arch_fingerprint: u64,
}

/// Runs the network on one input, returning the action values and the
/// activation record. With `masks` absent the pass is deterministic; with
/// masks present each dropout site's activations are multiplied by its mask.
pub fn forward<F: Scalar>(
    arch: &NetworkArchitecture,
    params: &Parameters<F>,
    input: &Tensor<F>,
    masks: Option<&MaskSet<F>>,
) -> Result<(Tensor<F>, ForwardCache<F>), NnError> {
    let (c, h, w) = arch.input_shape;
    if input.shape() != [c, h, w] {
        return Err(NnError::ShapeMismatch {
            layer: "input".into(),
            expected: vec![c, h, w],
            got: input.shape().to_vec(),
        });
    }
    if params.len() != arch.layers.len() {
        return Err(NnError::StaleCache);
    }
    if let Some(m) = masks {
        if m.fingerprint() != arch.fingerprint() {
            return Err(NnError::MaskMismatch);
        }
    }

    let names = arch.layer_names();
    let mut layer_inputs = Vec::with_capacity(arch.layers.len());
    let mut preacts = Vec::with_capacity(arch.layers.len());
    let mut patches = Vec::with_capacity(arch.layers.len());
    let mut x = input.clone();
    let (mut ci, mut hi, mut wi) = (c, h, w);

    for (i, layer) in arch.layers.iter().enumerate() {
        let lp = params.layer(i);
        let z = match layer.kind {
            LayerKind::Conv { filters, kernel, stride } => {
                let expected = vec![filters, ci, kernel, kernel];
                if lp.weights.shape() != expected.as_slice() {
                    return Err(NnError::ShapeMismatch {
                        layer: names[i].clone(),
                        expected,
                        got: lp.weights.shape().to_vec(),
                    });
                }
                let unrolled = im2col(&x, (ci, hi, wi), kernel, stride);
                let z = conv_forward(&unrolled, &lp.weights, &lp.biases, filters, kernel, stride, (ci, hi, wi));
                ci = filters;
                hi = (hi - kernel) / stride + 1;
                wi = (wi - kernel) / stride + 1;
                patches.push(Some(unrolled));
                z
            }
            LayerKind::Dense { units } => {
                let fan_in = x.len();
                let expected = vec![units, fan_in];
                if lp.weights.shape() != expected.as_slice() {
                    return Err(NnError::ShapeMismatch {
                        layer: names[i].clone(),
                        expected,
                        got: lp.weights.shape().to_vec(),
                    });
                }
                patches.push(None);
                dense_forward(&x, &lp.weights, &lp.biases, units)
            }
        };
        let mut a = activate(&z, layer.activation);
        if layer.dropout_site {
            if let Some(masks) = masks {
                let mask = masks.mask_for(i).ok_or(NnError::MaskMismatch)?;
                if mask.len() != a.len() {
                    return Err(NnError::MaskMismatch);
                }
                for (av, mv) in a.data_mut().iter_mut().zip(mask.data()) {
                    *av *= *mv;
                }
            }
        }
        layer_inputs.push(x);
        preacts.push(z);
        x = a;
    }

    let cache = ForwardCache {
        layer_inputs,
        preacts,
        patches,
        masks: masks.cloned(),
        arch_fingerprint: arch.fingerprint(),
    };
    Ok((x, cache))
}

/// Reverse-mode pass: given the gradient of the loss with respect to the
/// network output, returns gradients for every parameter tensor.
pub fn backward<F: Scalar>(
    arch: &NetworkArchitecture,
    params: &Parameters<F>,
    cache: &ForwardCache<F>,
    loss_grad_wrt_q: &Tensor<F>,
) -> Result<Parameters<F>, NnError> {
    if cache.arch_fingerprint != arch.fingerprint()
        || cache.layer_inputs.len() != arch.layers.len()
        || params.len() != arch.layers.len()
    {
        return Err(NnError::StaleCache);
    }
    if loss_grad_wrt_q.len() != arch.action_count {
        return Err(NnError::ShapeMismatch {
            layer: "output".into(),
            expected: vec![arch.action_count],
            got: loss_grad_wrt_q.shape().to_vec(),
        });
    }

    let mut grads = Parameters::zeros_like(params);
    let mut grad = loss_grad_wrt_q.clone();

    for i in (0..arch.layers.len()).rev() {
        let layer = &arch.layers[i];
        let z = &cache.preacts[i];
        if grad.len() != z.len() {
            return Err(NnError::StaleCache);
        }
        // Undo the mask, then the activation.
        if layer.dropout_site {
            if let Some(masks) = &cache.masks {
                if let Some(mask) = masks.mask_for(i) {
                    for (g, m) in grad.data_mut().iter_mut().zip(mask.data()) {
                        *g *= *m;
                    }
                }
            }
        }
        if layer.activation == Activation::Relu {
            for (g, zv) in grad.data_mut().iter_mut().zip(z.data()) {
                if *zv <= F::zero() {
                    *g = F::zero();
                }
            }
        }
        let x = &cache.layer_inputs[i];
        let lp = params.layer(i);
        let gl = grads.layer_mut(i);
        let need_dx = i > 0;
        grad = match layer.kind {
            LayerKind::Conv { filters, kernel, stride } => {
                let (c, h, w) = conv_input_dims(x.shape());
                let unrolled = cache.patches[i].as_ref().ok_or(NnError::StaleCache)?;
                conv_backward(
                    unrolled, (c, h, w), &lp.weights, &grad, filters, kernel, stride,
                    &mut gl.weights, &mut gl.biases, need_dx,
                )
            }
            LayerKind::Dense { .. } => {
                dense_backward(x, &lp.weights, &grad, &mut gl.weights, &mut gl.biases, need_dx)
            }
        };
    }
    Ok(grads)
}

fn conv_input_dims(shape: &[usize]) -> (usize, usize, usize) {
    match shape.len() {
        3 => (shape[0], shape[1], shape[2]),
        _ => (1, 1, shape.iter().product()),
    }
}

#[inline]
fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = F::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

#[inline]
fn axpy<F: Scalar>(alpha: F, x: &[F], y: &mut [F]) {
    debug_assert_eq!(x.len(), y.len());
    for (xv, yv) in x.iter().zip(y.iter_mut()) {
        *yv += alpha * *xv;
    }
}

/// Unrolls conv input windows into rows of `in_ch * k * k`, one row per
/// output position, matching the flattened weight layout `(in_ch, ku, kv)`.
fn im2col<F: Scalar>(
    x: &Tensor<F>,
    (c_in, h, w): (usize, usize, usize),
    kernel: usize,
    stride: usize,
) -> Vec<F> {
    let oh = (h - kernel) / stride + 1;
    let ow = (w - kernel) / stride + 1;
    let psize = c_in * kernel * kernel;
    let xd = x.data();
    let mut out = vec![F::zero(); oh * ow * psize];
    let mut row = 0usize;
    for i in 0..oh {
        for j in 0..ow {
            let dst = &mut out[row * psize..(row + 1) * psize];
            let mut offset = 0usize;
            for ci in 0..c_in {
                let xch = &xd[ci * h * w..(ci + 1) * h * w];
                for ku in 0..kernel {
                    let src = (i * stride + ku) * w + j * stride;
                    dst[offset..offset + kernel].copy_from_slice(&xch[src..src + kernel]);
                    offset += kernel;
                }
            }
            row += 1;
        }
    }
    out
}

fn activate<F: Scalar>(z: &Tensor<F>, activation: Activation) -> Tensor<F> {
    match activation {
        Activation::Linear => z.clone(),
        Activation::Relu => {
            let mut a = z.clone();
            for v in a.data_mut() {
                if *v < F::zero() {
                    *v = F::zero();
                }
            }
            a
        }
    }
}

fn conv_forward<F: Scalar>(
    unrolled: &[F],
    weights: &Tensor<F>,
    biases: &Tensor<F>,
    filters: usize,
    kernel: usize,
    stride: usize,
    (c_in, h, w): (usize, usize, usize),
) -> Tensor<F> {
    let oh = (h - kernel) / stride + 1;
    let ow = (w - kernel) / stride + 1;
    let positions = oh * ow;
    let psize = c_in * kernel * kernel;
    let wd = weights.data();
    let mut z = Tensor::zeros(&[filters, oh, ow]);
    let zd = z.data_mut();
    for o in 0..filters {
        let w_row = &wd[o * psize..(o + 1) * psize];
        let b = biases.data()[o];
        let zo = &mut zd[o * positions..(o + 1) * positions];
        for (pos, zv) in zo.iter_mut().enumerate() {
            *zv = b + dot(w_row, &unrolled[pos * psize..(pos + 1) * psize]);
        }
    }
    z
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<F: Scalar>(
    unrolled: &[F],
    (c_in, h, w): (usize, usize, usize),
    weights: &Tensor<F>,
    dz: &Tensor<F>,
    filters: usize,
    kernel: usize,
    stride: usize,
    dw: &mut Tensor<F>,
    db: &mut Tensor<F>,
    need_dx: bool,
) -> Tensor<F> {
    let oh = (h - kernel) / stride + 1;
    let ow = (w - kernel) / stride + 1;
    let positions = oh * ow;
    let psize = c_in * kernel * kernel;
    let wd = weights.data();
    let dzd = dz.data();
    let dwd = dw.data_mut();
    let mut dpatches = if need_dx {
        vec![F::zero(); positions * psize]
    } else {
        Vec::new()
    };
    for o in 0..filters {
        let dzo = &dzd[o * positions..(o + 1) * positions];
        db.data_mut()[o] = dzo.iter().fold(db.data()[o], |acc, v| acc + *v);
        let dw_row = &mut dwd[o * psize..(o + 1) * psize];
        let w_row = &wd[o * psize..(o + 1) * psize];
        for (pos, g) in dzo.iter().enumerate() {
            if *g == F::zero() {
                continue;
            }
            axpy(*g, &unrolled[pos * psize..(pos + 1) * psize], dw_row);
            if need_dx {
                axpy(*g, w_row, &mut dpatches[pos * psize..(pos + 1) * psize]);
            }
        }
    }
    if !need_dx {
        return Tensor::zeros(&[0]);
    }
    // col2im: scatter patch gradients back onto the input grid.
    let mut dx = Tensor::zeros(&[c_in, h, w]);
    let dxd = dx.data_mut();
    let mut row = 0usize;
    for i in 0..oh {
        for j in 0..ow {
            let src = &dpatches[row * psize..(row + 1) * psize];
            let mut offset = 0usize;
            for ci in 0..c_in {
                let base = ci * h * w;
                for ku in 0..kernel {
                    let dst = base + (i * stride + ku) * w + j * stride;
                    for kv in 0..kernel {
                        dxd[dst + kv] += src[offset + kv];
                    }
                    offset += kernel;
                }
            }
            row += 1;
        }
    }
    dx
}

fn dense_forward<F: Scalar>(
    x: &Tensor<F>,
    weights: &Tensor<F>,
    biases: &Tensor<F>,
    units: usize,
) -> Tensor<F> {
    let fan_in = x.len();
    let xd = x.data();
    let wd = weights.data();
    let mut z = Tensor::zeros(&[units]);
    for (u, zv) in z.data_mut().iter_mut().enumerate() {
        let row = &wd[u * fan_in..(u + 1) * fan_in];
        let mut acc = biases.data()[u];
        for (wv, xv) in row.iter().zip(xd) {
            acc += *wv * *xv;
        }
        *zv = acc;
    }
    z
}

fn dense_backward<F: Scalar>(
    x: &Tensor<F>,
    weights: &Tensor<F>,
    dz: &Tensor<F>,
    dw: &mut Tensor<F>,
    db: &mut Tensor<F>,
    need_dx: bool,
) -> Tensor<F> {
    let fan_in = x.len();
    let units = dz.len();
    let xd = x.data();
    let wd = weights.data();
    let mut dx = if need_dx {
        Tensor::zeros(x.shape())
    } else {
        Tensor::zeros(&[0])
    };
    for u in 0..units {
        let g = dz.data()[u];
        db.data_mut()[u] += g;
        let dwrow = &mut dw.data_mut()[u * fan_in..(u + 1) * fan_in];
        for (dwv, xv) in dwrow.iter_mut().zip(xd) {
            *dwv += g * *xv;
        }
        if need_dx {
            let wrow = &wd[u * fan_in..(u + 1) * fan_in];
            for (dxv, wv) in dx.data_mut().iter_mut().zip(wrow) {
                *dxv += g * *wv;
            }
        }
    }
    dx
}
