use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use super::Shape;
use crate::error::{Error, Result};
use crate::real::{gemm, MatRef, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// Square-kernel convolution with zero padding `kernel / 2`.
    Conv2d {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// Fully connected layer; input and output are flattened.
    Dense,
    Elu,
    Tanh,
    /// Nearest-neighbour upsampling by two along height and width.
    Upsample2x,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Layer {
    kind: LayerKind,
    input: Shape,
    output: Shape,
    weights: Range<usize>,
    bias: Range<usize>,
}

impl Layer {
    fn has_params(&self) -> bool {
        !self.weights.is_empty()
    }
}

/// Incremental description of a sequential network.
#[derive(Clone, Debug)]
pub struct NetworkBuilder {
    input: Shape,
    current: Shape,
    layers: Vec<Layer>,
    n_params: usize,
}

impl NetworkBuilder {
    pub fn new(input: Shape) -> Self {
        Self {
            input,
            current: input,
            layers: Vec::new(),
            n_params: 0,
        }
    }

    fn push(mut self, kind: LayerKind, output: Shape, n_weights: usize, n_bias: usize) -> Self {
        let w0 = self.n_params;
        let b0 = w0 + n_weights;
        self.n_params = b0 + n_bias;
        self.layers.push(Layer {
            kind,
            input: self.current,
            output,
            weights: w0..b0,
            bias: b0..self.n_params,
        });
        self.current = output;
        self
    }

    pub fn conv(self, out_channels: usize, kernel: usize, stride: usize) -> Self {
        let padding = kernel / 2;
        let s = self.current;
        let out = Shape::new(
            out_channels,
            (s.height + 2 * padding - kernel) / stride + 1,
            (s.width + 2 * padding - kernel) / stride + 1,
        );
        let nw = out_channels * s.channels * kernel * kernel;
        self.push(
            LayerKind::Conv2d {
                kernel,
                stride,
                padding,
            },
            out,
            nw,
            out_channels,
        )
    }

    pub fn dense(self, output: Shape) -> Self {
        let nw = output.len() * self.current.len();
        self.push(LayerKind::Dense, output, nw, output.len())
    }

    pub fn elu(self) -> Self {
        let s = self.current;
        self.push(LayerKind::Elu, s, 0, 0)
    }

    pub fn tanh(self) -> Self {
        let s = self.current;
        self.push(LayerKind::Tanh, s, 0, 0)
    }

    pub fn upsample2x(self) -> Self {
        let s = self.current;
        self.push(
            LayerKind::Upsample2x,
            Shape::new(s.channels, 2 * s.height, 2 * s.width),
            0,
            0,
        )
    }

    pub fn output_shape(&self) -> Shape {
        self.current
    }

    /// Uniform initialisation: He bounds ahead of an ELU, LeCun bounds
    /// otherwise. Biases start at zero.
    pub fn build<T: Real, R: Rng + ?Sized>(self, rng: &mut R) -> Network<T> {
        let mut params = vec![T::zero(); self.n_params];
        for (i, layer) in self.layers.iter().enumerate() {
            if !layer.has_params() {
                continue;
            }
            let fan_in = layer.weights.len() / layer.bias.len();
            let before_elu = matches!(self.layers.get(i + 1).map(|l| l.kind), Some(LayerKind::Elu));
            let gain = if before_elu { 6.0 } else { 3.0 };
            let bound = num_traits::Float::sqrt(gain / fan_in as f64);
            for w in &mut params[layer.weights.clone()] {
                *w = T::of(rng.gen_range(-bound..bound));
            }
        }
        Network {
            input: self.input,
            output: self.current,
            layers: self.layers,
            params,
        }
    }
}

/// Sequential network with a flat parameter buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    input: Shape,
    output: Shape,
    layers: Vec<Layer>,
    params: Vec<T>,
}

/// Activations of a batch recorded by [`Network::forward_batch_into`] for
/// backpropagation. Each buffer is sample-major: `batch` consecutive
/// per-sample blocks.
///
/// A trace can be refilled; its buffers keep their capacity so repeated
/// passes do not reallocate.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    batch: usize,
    /// `activations[i]` is the input of layer `i`; the last entry is the output.
    activations: Vec<Vec<T>>,
    scratch: Scratch<T>,
}

#[derive(Clone, Debug)]
struct Scratch<T> {
    col: Vec<T>,
    tmp: Vec<T>,
    grad: Vec<T>,
    grad_next: Vec<T>,
}

impl<T> Default for Scratch<T> {
    fn default() -> Self {
        Self {
            col: Vec::new(),
            tmp: Vec::new(),
            grad: Vec::new(),
            grad_next: Vec::new(),
        }
    }
}

impl<T> Default for Trace<T> {
    fn default() -> Self {
        Self {
            batch: 0,
            activations: Vec::new(),
            scratch: Scratch::default(),
        }
    }
}

impl<T> Trace<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Outputs of the whole batch, sample-major.
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("trace holds the input")
    }

    pub fn input(&self) -> &[T] {
        &self.activations[0]
    }
}

/// Upper bound on im2col elements materialised at once; larger batches are
/// processed in groups of samples.
#[cfg(not(test))]
const COL_BUDGET: usize = 1 << 22;
/// Small enough that unit tests exercise multi-group layers.
#[cfg(test)]
const COL_BUDGET: usize = 64;

impl<T: Real> Network<T> {
    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.output
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn layer_kinds(&self) -> impl Iterator<Item = LayerKind> + '_ {
        self.layers.iter().map(|l| l.kind)
    }

    /// Replaces all parameters, e.g. when loading a checkpoint.
    pub fn set_params(&mut self, params: Vec<T>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::ShapeMismatch {
                expected: self.params.len(),
                actual: params.len(),
            });
        }
        self.params = params;
        Ok(())
    }

    /// Mutable weight and bias slices of the `index`-th parametrised layer.
    pub fn layer_params_mut(&mut self, index: usize) -> Option<(&mut [T], &mut [T])> {
        let layer = self.layers.iter().filter(|l| l.has_params()).nth(index)?;
        let (w, b) = (layer.weights.clone(), layer.bias.clone());
        let (head, tail) = self.params.split_at_mut(b.start);
        Some((&mut head[w], &mut tail[..b.len()]))
    }

    pub fn parametrised_layers(&self) -> usize {
        self.layers.iter().filter(|l| l.has_params()).count()
    }

    fn check_inputs(&self, xs: &[&[T]]) -> Result<()> {
        if xs.is_empty() {
            return Err(Error::Empty("batch"));
        }
        for x in xs {
            if x.len() != self.input.len() {
                return Err(Error::ShapeMismatch {
                    expected: self.input.len(),
                    actual: x.len(),
                });
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.forward_batch(&[x])
    }

    /// Outputs of every sample, concatenated.
    pub fn forward_batch(&self, xs: &[&[T]]) -> Result<Vec<T>> {
        self.check_inputs(xs)?;
        let mut cur: Vec<T> = xs.concat();
        let mut next = Vec::new();
        let mut scratch = Scratch::default();
        for layer in &self.layers {
            self.apply(layer, xs.len(), &cur, &mut scratch, &mut next);
            core::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward_traced(&self, x: &[T]) -> Result<Trace<T>> {
        let mut trace = Trace::default();
        self.forward_batch_into(&[x], &mut trace)?;
        Ok(trace)
    }

    pub fn forward_traced_into(&self, x: &[T], trace: &mut Trace<T>) -> Result<()> {
        self.forward_batch_into(&[x], trace)
    }

    pub fn forward_batch_into(&self, xs: &[&[T]], trace: &mut Trace<T>) -> Result<()> {
        self.check_inputs(xs)?;
        let n = self.layers.len();
        trace.batch = xs.len();
        trace.activations.resize_with(n + 1, Vec::new);
        let first = &mut trace.activations[0];
        first.clear();
        for x in xs {
            first.extend_from_slice(x);
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let (done, rest) = trace.activations.split_at_mut(i + 1);
            self.apply(layer, xs.len(), &done[i], &mut trace.scratch, &mut rest[0]);
        }
        Ok(())
    }

    /// Accumulates `∂loss/∂params` into `grads` given `∂loss/∂output` for the
    /// traced batch (sample-major), and returns `∂loss/∂input` when
    /// requested.
    pub fn backward(
        &self,
        trace: &mut Trace<T>,
        grad_out: &[T],
        grads: &mut [T],
        want_input_grad: bool,
    ) -> Option<Vec<T>> {
        let batch = trace.batch;
        assert_eq!(grad_out.len(), batch * self.output.len());
        assert_eq!(grads.len(), self.params.len());
        let Trace {
            activations, scratch, ..
        } = trace;
        let Scratch {
            col,
            tmp,
            grad,
            grad_next,
        } = scratch;
        grad.clear();
        grad.extend_from_slice(grad_out);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let need_dx = want_input_grad || i > 0;
            let x = &activations[i];
            let y = &activations[i + 1];
            let g: &mut Vec<T> = grad;
            match layer.kind {
                LayerKind::Conv2d {
                    kernel,
                    stride,
                    padding,
                } => {
                    let (si, so) = (layer.input.len(), layer.output.len());
                    let p = layer.output.height * layer.output.width;
                    let kk = layer.input.channels * kernel * kernel;
                    let co = layer.output.channels;
                    let w = &self.params[layer.weights.clone()];
                    let (gw, gb) = split_grads(grads, layer);
                    if need_dx {
                        grad_next.clear();
                        grad_next.resize(batch * si, T::zero());
                    }
                    for (b0, b1) in groups(batch, kk * p) {
                        let n = (b1 - b0) * p;
                        col.clear();
                        col.resize(kk * n, T::zero());
                        tmp.clear();
                        tmp.resize(co * n, T::zero());
                        for b in b0..b1 {
                            let off = (b - b0) * p;
                            im2col(
                                &x[b * si..][..si],
                                layer.input,
                                layer.output,
                                kernel,
                                stride,
                                padding,
                                col,
                                n,
                                off,
                            );
                            for c in 0..co {
                                tmp[c * n + off..][..p].copy_from_slice(&g[b * so + c * p..][..p]);
                            }
                        }
                        gemm(
                            T::one(),
                            MatRef::new(tmp, co, n),
                            MatRef::new(col, kk, n).t(),
                            T::one(),
                            gw,
                        );
                        for (c, gbv) in gb.iter_mut().enumerate() {
                            *gbv += tmp[c * n..(c + 1) * n].iter().copied().sum::<T>();
                        }
                        if need_dx {
                            gemm(
                                T::one(),
                                MatRef::new(w, co, kk).t(),
                                MatRef::new(tmp, co, n),
                                T::zero(),
                                col,
                            );
                            for b in b0..b1 {
                                let dst = &mut grad_next[b * si..][..si];
                                col2im(
                                    col,
                                    layer.input,
                                    layer.output,
                                    kernel,
                                    stride,
                                    padding,
                                    dst,
                                    n,
                                    (b - b0) * p,
                                );
                            }
                        }
                    }
                    if need_dx {
                        core::mem::swap(g, grad_next);
                    }
                }
                LayerKind::Dense => {
                    let (n_in, n_out) = (layer.input.len(), layer.output.len());
                    let (gw, gb) = split_grads(grads, layer);
                    gemm(
                        T::one(),
                        MatRef::new(g, batch, n_out).t(),
                        MatRef::new(x, batch, n_in),
                        T::one(),
                        gw,
                    );
                    for row in g.chunks_exact(n_out) {
                        for (b, &gv) in gb.iter_mut().zip(row) {
                            *b += gv;
                        }
                    }
                    if need_dx {
                        let w = &self.params[layer.weights.clone()];
                        grad_next.clear();
                        grad_next.resize(batch * n_in, T::zero());
                        gemm(
                            T::one(),
                            MatRef::new(g, batch, n_out),
                            MatRef::new(w, n_out, n_in),
                            T::zero(),
                            grad_next,
                        );
                        core::mem::swap(g, grad_next);
                    }
                }
                LayerKind::Elu => {
                    for (gv, &yv) in g.iter_mut().zip(y) {
                        if yv <= T::zero() {
                            *gv *= yv + T::one();
                        }
                    }
                }
                LayerKind::Tanh => {
                    for (gv, &yv) in g.iter_mut().zip(y) {
                        *gv *= T::one() - yv * yv;
                    }
                }
                LayerKind::Upsample2x => {
                    let s = layer.input;
                    let ow = 2 * s.width;
                    grad_next.clear();
                    grad_next.resize(batch * s.len(), T::zero());
                    for plane in 0..batch * s.channels {
                        for h in 0..s.height {
                            let top = &g[(plane * 2 * s.height + 2 * h) * ow..][..ow];
                            let bottom = &g[(plane * 2 * s.height + 2 * h + 1) * ow..][..ow];
                            let dst = &mut grad_next[(plane * s.height + h) * s.width..][..s.width];
                            for (w, d) in dst.iter_mut().enumerate() {
                                *d = top[2 * w] + top[2 * w + 1] + bottom[2 * w] + bottom[2 * w + 1];
                            }
                        }
                    }
                    core::mem::swap(g, grad_next);
                }
            }
            if !need_dx {
                return None;
            }
        }
        Some(grad.clone())
    }

    fn apply(&self, layer: &Layer, batch: usize, x: &[T], scratch: &mut Scratch<T>, y: &mut Vec<T>) {
        y.clear();
        match layer.kind {
            LayerKind::Conv2d {
                kernel,
                stride,
                padding,
            } => {
                let (si, so) = (layer.input.len(), layer.output.len());
                let p = layer.output.height * layer.output.width;
                let kk = layer.input.channels * kernel * kernel;
                let co = layer.output.channels;
                let w = &self.params[layer.weights.clone()];
                let bias = &self.params[layer.bias.clone()];
                y.resize(batch * so, T::zero());
                let Scratch { col, tmp, .. } = scratch;
                for (b0, b1) in groups(batch, kk * p) {
                    let n = (b1 - b0) * p;
                    col.clear();
                    col.resize(kk * n, T::zero());
                    for b in b0..b1 {
                        im2col(
                            &x[b * si..][..si],
                            layer.input,
                            layer.output,
                            kernel,
                            stride,
                            padding,
                            col,
                            n,
                            (b - b0) * p,
                        );
                    }
                    tmp.clear();
                    tmp.resize(co * n, T::zero());
                    gemm(
                        T::one(),
                        MatRef::new(w, co, kk),
                        MatRef::new(col, kk, n),
                        T::zero(),
                        tmp,
                    );
                    for b in b0..b1 {
                        let off = (b - b0) * p;
                        for (c, &bv) in bias.iter().enumerate() {
                            let dst = &mut y[b * so + c * p..][..p];
                            for (d, &v) in dst.iter_mut().zip(&tmp[c * n + off..][..p]) {
                                *d = v + bv;
                            }
                        }
                    }
                }
            }
            LayerKind::Dense => {
                let (n_in, n_out) = (layer.input.len(), layer.output.len());
                let w = &self.params[layer.weights.clone()];
                for _ in 0..batch {
                    y.extend_from_slice(&self.params[layer.bias.clone()]);
                }
                gemm(
                    T::one(),
                    MatRef::new(x, batch, n_in),
                    MatRef::new(w, n_out, n_in).t(),
                    T::one(),
                    y,
                );
            }
            LayerKind::Elu => y.extend(x.iter().map(|&v| if v > T::zero() { v } else { v.exp_m1() })),
            LayerKind::Tanh => y.extend(x.iter().map(|v| v.tanh())),
            LayerKind::Upsample2x => {
                let s = layer.input;
                for plane in 0..batch * s.channels {
                    for h in 0..s.height {
                        let src = &x[(plane * s.height + h) * s.width..][..s.width];
                        for _ in 0..2 {
                            for &v in src {
                                y.push(v);
                                y.push(v);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Contiguous sample ranges whose im2col matrices fit [`COL_BUDGET`].
fn groups(batch: usize, per_sample: usize) -> impl Iterator<Item = (usize, usize)> {
    let size = (COL_BUDGET / per_sample.max(1)).clamp(1, batch);
    (0..batch).step_by(size).map(move |b0| (b0, (b0 + size).min(batch)))
}

fn split_grads<'a, T>(grads: &'a mut [T], layer: &Layer) -> (&'a mut [T], &'a mut [T]) {
    let (head, tail) = grads.split_at_mut(layer.bias.start);
    (&mut head[layer.weights.clone()], &mut tail[..layer.bias.len()])
}

/// Source coordinate of output index `o` for kernel tap `t`, if in bounds.
#[inline]
fn source(o: usize, t: usize, stride: usize, padding: usize, extent: usize) -> Option<usize> {
    let pos = (o * stride + t).checked_sub(padding)?;
    (pos < extent).then_some(pos)
}

/// Output columns `[lo, hi)` whose tap `t` lands inside the input row.
#[inline]
fn valid_span(t: usize, stride: usize, padding: usize, extent: usize, out: usize) -> (usize, usize) {
    let lo = padding.saturating_sub(t).div_ceil(stride).min(out);
    let hi = if extent + padding > t {
        (extent + padding - t).div_ceil(stride).min(out)
    } else {
        0
    };
    (lo, hi.max(lo))
}

#[allow(clippy::too_many_arguments)]
fn im2col<T: Real>(
    x: &[T],
    input: Shape,
    output: Shape,
    kernel: usize,
    stride: usize,
    padding: usize,
    col: &mut [T],
    ld: usize,
    off: usize,
) {
    let (oh_n, ow_n) = (output.height, output.width);
    let (ih_n, iw_n) = (input.height, input.width);
    let p = oh_n * ow_n;
    for c in 0..input.channels {
        let plane = &x[c * ih_n * iw_n..(c + 1) * ih_n * iw_n];
        for ki in 0..kernel {
            for kj in 0..kernel {
                let row = &mut col[((c * kernel + ki) * kernel + kj) * ld + off..][..p];
                let (lo, hi) = valid_span(kj, stride, padding, iw_n, ow_n);
                for oh in 0..oh_n {
                    let out = &mut row[oh * ow_n..(oh + 1) * ow_n];
                    let Some(ih) = source(oh, ki, stride, padding, ih_n) else {
                        out.fill(T::zero());
                        continue;
                    };
                    out[..lo].fill(T::zero());
                    out[hi..].fill(T::zero());
                    if hi > lo {
                        let src = &plane[ih * iw_n..(ih + 1) * iw_n];
                        let first = lo * stride + kj - padding;
                        if stride == 1 {
                            out[lo..hi].copy_from_slice(&src[first..first + (hi - lo)]);
                        } else {
                            for (o, &v) in out[lo..hi].iter_mut().zip(src[first..].iter().step_by(stride)) {
                                *o = v;
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im<T: Real>(
    col: &[T],
    input: Shape,
    output: Shape,
    kernel: usize,
    stride: usize,
    padding: usize,
    dx: &mut [T],
    ld: usize,
    off: usize,
) {
    let (oh_n, ow_n) = (output.height, output.width);
    let (ih_n, iw_n) = (input.height, input.width);
    let p = oh_n * ow_n;
    for c in 0..input.channels {
        let plane = &mut dx[c * ih_n * iw_n..(c + 1) * ih_n * iw_n];
        for ki in 0..kernel {
            for kj in 0..kernel {
                let row = &col[((c * kernel + ki) * kernel + kj) * ld + off..][..p];
                let (lo, hi) = valid_span(kj, stride, padding, iw_n, ow_n);
                if hi <= lo {
                    continue;
                }
                let first = lo * stride + kj - padding;
                for oh in 0..oh_n {
                    let Some(ih) = source(oh, ki, stride, padding, ih_n) else {
                        continue;
                    };
                    let dst = &mut plane[ih * iw_n..(ih + 1) * iw_n];
                    let src = &row[oh * ow_n + lo..oh * ow_n + hi];
                    if stride == 1 {
                        for (d, &v) in dst[first..first + (hi - lo)].iter_mut().zip(src) {
                            *d += v;
                        }
                    } else {
                        for (d, &v) in dst[first..].iter_mut().step_by(stride).zip(src) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
}
