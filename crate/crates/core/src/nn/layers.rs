//! Differentiable layers over flat parameter slices.
//!
//! Every layer consumes a batch as an `n × input_width` row-major slice;
//! convolutional layers read each row as a (C, H, W) volume.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Identity,
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
}

const LEAK: f64 = 0.01;

impl Activation {
    pub fn apply<R: Real>(self, x: R) -> R {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(R::zero()),
            Activation::LeakyRelu => {
                if x > R::zero() {
                    x
                } else {
                    x * R::of(LEAK)
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => R::one() / (R::one() + (-x).exp()),
        }
    }

    /// Derivative given the pre-activation `x` and its output `y`.
    pub fn derivative<R: Real>(self, x: R, y: R) -> R {
        match self {
            Activation::Identity => R::one(),
            Activation::Relu => {
                if x > R::zero() {
                    R::one()
                } else {
                    R::zero()
                }
            }
            Activation::LeakyRelu => {
                if x > R::zero() {
                    R::one()
                } else {
                    R::of(LEAK)
                }
            }
            Activation::Tanh => R::one() - y * y,
            Activation::Sigmoid => y * (R::one() - y),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    /// Output spatial size of a forward convolution.
    pub fn conv_output(&self) -> Result<(usize, usize)> {
        let span = |n: usize| -> Result<usize> {
            let padded = n + 2 * self.padding;
            if self.stride == 0 || self.kernel == 0 || padded < self.kernel {
                return Err(Error::Shape(format!("kernel {} does not fit input {n}", self.kernel)));
            }
            Ok((padded - self.kernel) / self.stride + 1)
        };
        Ok((span(self.in_height)?, span(self.in_width)?))
    }

    /// Output spatial size of a transposed convolution.
    pub fn deconv_output(&self) -> Result<(usize, usize)> {
        let span = |n: usize| -> Result<usize> {
            let full = (n.max(1) - 1) * self.stride + self.kernel;
            if self.stride == 0 || n == 0 || full <= 2 * self.padding {
                return Err(Error::Shape(format!("degenerate transposed convolution on {n}")));
            }
            Ok(full - 2 * self.padding)
        };
        Ok((span(self.in_height)?, span(self.in_width)?))
    }
}

/// Sliding-window geometry shared by im2col and col2im.
struct Patches {
    channels: usize,
    height: usize,
    width: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

impl Patches {
    fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    fn source(&self, o: usize, k: usize, limit: usize) -> Option<usize> {
        (o * self.stride + k).checked_sub(self.padding).filter(|&i| i < limit)
    }

    /// Output columns `lo..hi` whose source column `o * stride + k - padding`
    /// lies inside the image.
    fn valid_span(&self, k: usize) -> (usize, usize) {
        let lo = self.padding.saturating_sub(k).div_ceil(self.stride);
        let hi = (self.width + self.padding).saturating_sub(k).div_ceil(self.stride).min(self.out_w);
        (lo.min(hi), hi)
    }

    /// Writes the patches of one volume into columns `off..off + cols()` of
    /// a matrix with row stride `ld`.
    fn im2col<R: Real>(&self, x: &[R], cols: &mut [R], ld: usize, off: usize) {
        let p = self.cols();
        for c in 0..self.channels {
            let plane = &x[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..self.kernel {
                for kj in 0..self.kernel {
                    let row = (c * self.kernel + ki) * self.kernel + kj;
                    let dst = &mut cols[row * ld + off..row * ld + off + p];
                    let (lo, hi) = self.valid_span(kj);
                    for oy in 0..self.out_h {
                        let out = &mut dst[oy * self.out_w..(oy + 1) * self.out_w];
                        match self.source(oy, ki, self.height) {
                            None => out.fill(R::zero()),
                            Some(iy) => {
                                out[..lo].fill(R::zero());
                                out[hi..].fill(R::zero());
                                let first = iy * self.width + lo * self.stride + kj - self.padding;
                                copy_strided(&plane[first..], &mut out[lo..hi], self.stride);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Scatter-adds columns `off..off + cols()` back into the volume `x`.
    fn col2im<R: Real>(&self, cols: &[R], ld: usize, off: usize, x: &mut [R]) {
        let p = self.cols();
        for c in 0..self.channels {
            let plane = &mut x[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..self.kernel {
                for kj in 0..self.kernel {
                    let row = (c * self.kernel + ki) * self.kernel + kj;
                    let src = &cols[row * ld + off..row * ld + off + p];
                    let (lo, hi) = self.valid_span(kj);
                    if lo >= hi {
                        continue;
                    }
                    let first = lo * self.stride + kj - self.padding;
                    for oy in 0..self.out_h {
                        let Some(iy) = self.source(oy, ki, self.height) else { continue };
                        let dst = &mut plane[iy * self.width + first..(iy + 1) * self.width];
                        add_strided(&src[oy * self.out_w + lo..oy * self.out_w + hi], dst, self.stride);
                    }
                }
            }
        }
    }
}

#[inline]
fn copy_strided<R: Real>(src: &[R], dst: &mut [R], stride: usize) {
    if dst.is_empty() {
        return;
    }
    if stride == 2 {
        let src = &src[..2 * dst.len() - 1];
        for (i, d) in dst.iter_mut().enumerate() {
            *d = src[2 * i];
        }
    } else {
        for (i, d) in dst.iter_mut().enumerate() {
            *d = src[stride * i];
        }
    }
}

#[inline]
fn add_strided<R: Real>(src: &[R], dst: &mut [R], stride: usize) {
    if src.is_empty() {
        return;
    }
    let dst = &mut dst[..stride * (src.len() - 1) + 1];
    for (i, &v) in src.iter().enumerate() {
        dst[stride * i] += v;
    }
}

/// Reorders `n` volumes of `channels` planes of `p` values from sample-major
/// to channel-major (`[c][s][j]`), or back when `inverse`.
fn transpose_batch<R: Real>(src: &[R], dst: &mut [R], n: usize, channels: usize, p: usize, inverse: bool) {
    for s in 0..n {
        for c in 0..channels {
            let a = (s * channels + c) * p;
            let b = (c * n + s) * p;
            if inverse {
                dst[a..a + p].copy_from_slice(&src[b..b + p]);
            } else {
                dst[b..b + p].copy_from_slice(&src[a..a + p]);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dense { inputs: usize, outputs: usize },
    Conv2d(ConvGeometry),
    ConvTranspose2d(ConvGeometry),
    Activation { activation: Activation, width: usize },
}

impl Layer {
    pub fn input_width(&self) -> usize {
        match self {
            Layer::Dense { inputs, .. } => *inputs,
            Layer::Conv2d(g) | Layer::ConvTranspose2d(g) => g.in_channels * g.in_height * g.in_width,
            Layer::Activation { width, .. } => *width,
        }
    }

    pub fn output_width(&self) -> usize {
        match self {
            Layer::Dense { outputs, .. } => *outputs,
            Layer::Conv2d(g) => {
                let (h, w) = g.conv_output().expect("validated geometry");
                g.out_channels * h * w
            }
            Layer::ConvTranspose2d(g) => {
                let (h, w) = g.deconv_output().expect("validated geometry");
                g.out_channels * h * w
            }
            Layer::Activation { width, .. } => *width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Layer::Conv2d(g) => g.conv_output().map(|_| ()),
            Layer::ConvTranspose2d(g) => g.deconv_output().map(|_| ()),
            _ => Ok(()),
        }
    }

    fn weight_count(&self) -> usize {
        match self {
            Layer::Dense { inputs, outputs } => inputs * outputs,
            Layer::Conv2d(g) | Layer::ConvTranspose2d(g) => {
                g.in_channels * g.out_channels * g.kernel * g.kernel
            }
            Layer::Activation { .. } => 0,
        }
    }

    fn bias_count(&self) -> usize {
        match self {
            Layer::Dense { outputs, .. } => *outputs,
            Layer::Conv2d(g) | Layer::ConvTranspose2d(g) => g.out_channels,
            Layer::Activation { .. } => 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }

    pub fn is_activation(&self) -> bool {
        matches!(self, Layer::Activation { .. })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Real, G: Rng + ?Sized>(&self, params: &mut [R], rng: &mut G) {
        let (fan_in, fan_out) = match self {
            Layer::Dense { inputs, outputs } => (*inputs, *outputs),
            Layer::Conv2d(g) | Layer::ConvTranspose2d(g) => {
                let kk = g.kernel * g.kernel;
                (g.in_channels * kk, g.out_channels * kk)
            }
            Layer::Activation { .. } => return,
        };
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let (w, b) = params.split_at_mut(self.weight_count());
        for v in w {
            *v = R::of(rng.random_range(-bound..bound));
        }
        b.fill(R::zero());
    }

    fn conv_patches(g: &ConvGeometry) -> Patches {
        let (out_h, out_w) = g.conv_output().expect("validated geometry");
        Patches {
            channels: g.in_channels,
            height: g.in_height,
            width: g.in_width,
            kernel: g.kernel,
            stride: g.stride,
            padding: g.padding,
            out_h,
            out_w,
        }
    }

    /// Patches of the adjoint convolution: output volume back to input grid.
    fn deconv_patches(g: &ConvGeometry) -> Patches {
        let (h, w) = g.deconv_output().expect("validated geometry");
        Patches {
            channels: g.out_channels,
            height: h,
            width: w,
            kernel: g.kernel,
            stride: g.stride,
            padding: g.padding,
            out_h: g.in_height,
            out_w: g.in_width,
        }
    }

    pub fn forward<R: Real>(&self, params: &[R], input: &[R], n: usize, output: &mut [R]) {
        let (iw, ow) = (self.input_width(), self.output_width());
        debug_assert_eq!(input.len(), n * iw);
        debug_assert_eq!(output.len(), n * ow);
        match self {
            Layer::Dense { inputs, outputs } => {
                let (w, b) = params.split_at(inputs * outputs);
                R::gemm(n, *inputs, *outputs, R::one(), input, false, w, true, R::zero(), output);
                for row in output.chunks_exact_mut(*outputs) {
                    for (o, &bias) in row.iter_mut().zip(b) {
                        *o += bias;
                    }
                }
            }
            Layer::Conv2d(g) => {
                let patches = Self::conv_patches(g);
                let (rows, p) = (patches.rows(), patches.cols());
                let (w, b) = params.split_at(self.weight_count());
                let ld = n * p;
                let mut cols = vec![R::zero(); rows * ld];
                for (s, x) in input.chunks_exact(iw).enumerate() {
                    patches.im2col(x, &mut cols, ld, s * p);
                }
                let mut tmp = vec![R::zero(); g.out_channels * ld];
                R::gemm(g.out_channels, rows, ld, R::one(), w, false, &cols, false, R::zero(), &mut tmp);
                for (c, &bias) in b.iter().enumerate() {
                    tmp[c * ld..(c + 1) * ld].iter_mut().for_each(|v| *v += bias);
                }
                transpose_batch(&tmp, output, n, g.out_channels, p, true);
            }
            Layer::ConvTranspose2d(g) => {
                let patches = Self::deconv_patches(g);
                let (rows, p) = (patches.rows(), patches.cols());
                let (w, b) = params.split_at(self.weight_count());
                let plane = ow / g.out_channels;
                let ld = n * p;
                let mut xt = vec![R::zero(); g.in_channels * ld];
                transpose_batch(input, &mut xt, n, g.in_channels, p, false);
                let mut cols = vec![R::zero(); rows * ld];
                R::gemm(rows, g.in_channels, ld, R::one(), w, true, &xt, false, R::zero(), &mut cols);
                for (s, out) in output.chunks_exact_mut(ow).enumerate() {
                    out.fill(R::zero());
                    patches.col2im(&cols, ld, s * p, out);
                    for (ch, &bias) in out.chunks_exact_mut(plane).zip(b) {
                        ch.iter_mut().for_each(|v| *v += bias);
                    }
                }
            }
            Layer::Activation { activation, .. } => {
                for (o, &x) in output.iter_mut().zip(input) {
                    *o = activation.apply(x);
                }
            }
        }
    }

    /// Accumulates parameter gradients into `grad_params` and, if asked,
    /// writes the gradient with respect to `input` into `grad_in`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward<R: Real>(
        &self,
        params: &[R],
        input: &[R],
        output: &[R],
        grad_out: &[R],
        n: usize,
        grad_params: &mut [R],
        grad_in: Option<&mut [R]>,
    ) {
        let (iw, ow) = (self.input_width(), self.output_width());
        match self {
            Layer::Dense { inputs, outputs } => {
                let (w, _) = params.split_at(inputs * outputs);
                let (gw, gb) = grad_params.split_at_mut(inputs * outputs);
                R::gemm(*outputs, n, *inputs, R::one(), grad_out, true, input, false, R::one(), gw);
                for row in grad_out.chunks_exact(*outputs) {
                    for (acc, &g) in gb.iter_mut().zip(row) {
                        *acc += g;
                    }
                }
                if let Some(gi) = grad_in {
                    R::gemm(n, *outputs, *inputs, R::one(), grad_out, false, w, false, R::zero(), gi);
                }
            }
            Layer::Conv2d(g) => {
                let patches = Self::conv_patches(g);
                let (rows, p) = (patches.rows(), patches.cols());
                let wc = self.weight_count();
                let w = &params[..wc];
                let (gw, gb) = grad_params.split_at_mut(wc);
                let ld = n * p;
                let mut cols = vec![R::zero(); rows * ld];
                for (s, x) in input.chunks_exact(iw).enumerate() {
                    patches.im2col(x, &mut cols, ld, s * p);
                }
                let mut go = vec![R::zero(); g.out_channels * ld];
                transpose_batch(grad_out, &mut go, n, g.out_channels, p, false);
                R::gemm(g.out_channels, ld, rows, R::one(), &go, false, &cols, true, R::one(), gw);
                for (acc, plane) in gb.iter_mut().zip(go.chunks_exact(ld)) {
                    *acc += plane.iter().copied().sum::<R>();
                }
                if let Some(gi) = grad_in {
                    R::gemm(rows, g.out_channels, ld, R::one(), w, true, &go, false, R::zero(), &mut cols);
                    for (s, dx) in gi.chunks_exact_mut(iw).enumerate() {
                        dx.fill(R::zero());
                        patches.col2im(&cols, ld, s * p, dx);
                    }
                }
            }
            Layer::ConvTranspose2d(g) => {
                let patches = Self::deconv_patches(g);
                let (rows, p) = (patches.rows(), patches.cols());
                let wc = self.weight_count();
                let w = &params[..wc];
                let (gw, gb) = grad_params.split_at_mut(wc);
                let plane = ow / g.out_channels;
                let ld = n * p;
                let mut cols = vec![R::zero(); rows * ld];
                for (s, go) in grad_out.chunks_exact(ow).enumerate() {
                    patches.im2col(go, &mut cols, ld, s * p);
                    for (acc, ch) in gb.iter_mut().zip(go.chunks_exact(plane)) {
                        *acc += ch.iter().copied().sum::<R>();
                    }
                }
                let mut xt = vec![R::zero(); g.in_channels * ld];
                transpose_batch(input, &mut xt, n, g.in_channels, p, false);
                R::gemm(g.in_channels, ld, rows, R::one(), &xt, false, &cols, true, R::one(), gw);
                if let Some(gi) = grad_in {
                    R::gemm(g.in_channels, rows, ld, R::one(), w, false, &cols, false, R::zero(), &mut xt);
                    transpose_batch(&xt, gi, n, g.in_channels, p, true);
                }
            }
            Layer::Activation { activation, .. } => {
                if let Some(gi) = grad_in {
                    for i in 0..input.len() {
                        gi[i] = grad_out[i] * activation.derivative(input[i], output[i]);
                    }
                }
            }
        }
    }
}
