//! Op kinds with their forward evaluation and vector-Jacobian products.

use std::sync::Arc;

use super::kernels::{col2im_add, gemm, im2col, split_axis, ConvGeometry};
use super::{NumericsError, Tensor};

/// Pointwise nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Silu,
    Tanh,
    Sigmoid,
    Exp,
    Square,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Silu => x * sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Exp => x.exp(),
            Activation::Square => x * x,
        }
    }

    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Silu => {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Exp => y,
            Activation::Square => 2.0 * x,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Every differentiable operation the graph can record.
#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Scale(f64),
    Offset(f64),
    /// `[m, k] × [k, n]`.
    MatMul,
    /// `[b, m, k] × [b, k, n]`.
    BatchMatMul,
    /// Swaps the last two axes.
    Transpose,
    /// `[N, Ci, H, W]` input, `[Co, Ci, kh, kw]` kernel, zero "same" padding.
    Conv2d { stride: usize },
    /// `x[N, C, ...] + b`, with `b` shaped `[C]` or `[N, C]`.
    AddBias,
    Activation(Activation),
    ReduceSum,
    ReduceMean,
    Concat { axis: usize },
    Slice { axis: usize, start: usize, len: usize },
    Softmax { axis: usize },
    Reshape(Vec<usize>),
    /// Nearest-neighbour ×2 upsampling of `[N, C, H, W]`.
    Upsample2x,
    /// Flat gather of the listed element indices.
    Gather(Arc<[usize]>),
    /// Sums elements into segments; `None` entries are ignored.
    SegmentSum { segments: Arc<[Option<usize>]>, count: usize },
    /// Minimum per segment; every segment must own at least one element.
    SegmentMin { segments: Arc<[Option<usize>]>, count: usize },
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Scale(_) => "scale",
            OpKind::Offset(_) => "offset",
            OpKind::MatMul => "matmul",
            OpKind::BatchMatMul => "batch-matmul",
            OpKind::Transpose => "transpose",
            OpKind::Conv2d { .. } => "conv-2d",
            OpKind::AddBias => "add-bias",
            OpKind::Activation(_) => "activation",
            OpKind::ReduceSum => "reduce-sum",
            OpKind::ReduceMean => "reduce-mean",
            OpKind::Concat { .. } => "concat",
            OpKind::Slice { .. } => "slice",
            OpKind::Softmax { .. } => "softmax",
            OpKind::Reshape(_) => "reshape",
            OpKind::Upsample2x => "upsample-2x",
            OpKind::Gather(_) => "gather",
            OpKind::SegmentSum { .. } => "segment-sum",
            OpKind::SegmentMin { .. } => "segment-min",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            OpKind::Add
            | OpKind::Sub
            | OpKind::Mul
            | OpKind::MatMul
            | OpKind::BatchMatMul
            | OpKind::Conv2d { .. }
            | OpKind::AddBias => Some(2),
            OpKind::Concat { .. } => None,
            _ => Some(1),
        }
    }
}

fn mismatch(op: &OpKind, lhs: &[usize], rhs: &[usize]) -> NumericsError {
    NumericsError::ShapeMismatch {
        op: op.name().into(),
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

/// Evaluates `kind` on `inputs` without recording anything.
pub fn forward(kind: &OpKind, inputs: &[&Tensor]) -> Result<Tensor, NumericsError> {
    match kind.arity() {
        Some(n) if n != inputs.len() => {
            return Err(NumericsError::Arity {
                op: kind.name().into(),
                expected: n,
                got: inputs.len(),
            })
        }
        None if inputs.is_empty() => {
            return Err(NumericsError::Arity {
                op: kind.name().into(),
                expected: 1,
                got: 0,
            })
        }
        _ => {}
    }
    let x = inputs[0];
    let out = match kind {
        OpKind::Add => x.zip_map(inputs[1], |a, b| a + b).map_err(|_| mismatch(kind, x.shape(), inputs[1].shape()))?,
        OpKind::Sub => x.zip_map(inputs[1], |a, b| a - b).map_err(|_| mismatch(kind, x.shape(), inputs[1].shape()))?,
        OpKind::Mul => x.zip_map(inputs[1], |a, b| a * b).map_err(|_| mismatch(kind, x.shape(), inputs[1].shape()))?,
        OpKind::Scale(s) => x.map(|v| v * s),
        OpKind::Offset(c) => x.map(|v| v + c),
        OpKind::MatMul => {
            let w = inputs[1];
            let (xs, ws) = (x.shape(), w.shape());
            if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] {
                return Err(mismatch(kind, xs, ws));
            }
            let (m, k, n) = (xs[0], xs[1], ws[1]);
            let mut out = vec![0.0; m * n];
            gemm(m, k, n, x.data(), false, w.data(), false, &mut out, false);
            Tensor::from_raw(vec![m, n], out)
        }
        OpKind::BatchMatMul => {
            let w = inputs[1];
            let (xs, ws) = (x.shape(), w.shape());
            if xs.len() != 3 || ws.len() != 3 || xs[0] != ws[0] || xs[2] != ws[1] {
                return Err(mismatch(kind, xs, ws));
            }
            let (b, m, k, n) = (xs[0], xs[1], xs[2], ws[2]);
            let mut out = vec![0.0; b * m * n];
            for i in 0..b {
                gemm(
                    m,
                    k,
                    n,
                    &x.data()[i * m * k..(i + 1) * m * k],
                    false,
                    &w.data()[i * k * n..(i + 1) * k * n],
                    false,
                    &mut out[i * m * n..(i + 1) * m * n],
                    false,
                );
            }
            Tensor::from_raw(vec![b, m, n], out)
        }
        OpKind::Transpose => {
            let s = x.shape();
            if s.len() < 2 {
                return Err(mismatch(kind, s, &[]));
            }
            let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
            let batch = x.len() / (r * c);
            let mut out = vec![0.0; x.len()];
            for b in 0..batch {
                let src = &x.data()[b * r * c..(b + 1) * r * c];
                let dst = &mut out[b * r * c..(b + 1) * r * c];
                for i in 0..r {
                    for j in 0..c {
                        dst[j * r + i] = src[i * c + j];
                    }
                }
            }
            let mut shape = s.to_vec();
            let n = shape.len();
            shape.swap(n - 2, n - 1);
            Tensor::from_raw(shape, out)
        }
        OpKind::Conv2d { stride } => conv2d_forward(kind, x, inputs[1], *stride)?,
        OpKind::AddBias => {
            let b = inputs[1];
            let (n, c, inner) = bias_layout(kind, x.shape(), b.shape())?;
            let per_sample = b.ndim() == 2;
            let mut out = x.to_vec();
            for i in 0..n {
                for ch in 0..c {
                    let bv = if per_sample { b.data()[i * c + ch] } else { b.data()[ch] };
                    let base = (i * c + ch) * inner;
                    for v in &mut out[base..base + inner] {
                        *v += bv;
                    }
                }
            }
            Tensor::from_raw(x.shape().to_vec(), out)
        }
        OpKind::Activation(a) => x.map(|v| a.apply(v)),
        OpKind::ReduceSum => Tensor::scalar(x.sum()),
        OpKind::ReduceMean => Tensor::scalar(x.sum() / x.len() as f64),
        OpKind::Concat { axis } => concat_forward(kind, inputs, *axis)?,
        OpKind::Slice { axis, start, len } => {
            let s = x.shape();
            if *axis >= s.len() || *len == 0 || start + len > s[*axis] {
                return Err(mismatch(kind, s, &[*axis, *start, *len]));
            }
            let (outer, dim, inner) = split_axis(s, *axis);
            let mut out = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let base = (o * dim + start) * inner;
                out.extend_from_slice(&x.data()[base..base + len * inner]);
            }
            let mut shape = s.to_vec();
            shape[*axis] = *len;
            Tensor::from_raw(shape, out)
        }
        OpKind::Softmax { axis } => {
            let s = x.shape();
            if *axis >= s.len() {
                return Err(mismatch(kind, s, &[*axis]));
            }
            let (outer, dim, inner) = split_axis(s, *axis);
            let mut out = vec![0.0; x.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |d: usize| (o * dim + d) * inner + i;
                    let max = (0..dim).map(|d| x.data()[idx(d)]).fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for d in 0..dim {
                        let e = (x.data()[idx(d)] - max).exp();
                        out[idx(d)] = e;
                        total += e;
                    }
                    for d in 0..dim {
                        out[idx(d)] /= total;
                    }
                }
            }
            Tensor::from_raw(s.to_vec(), out)
        }
        OpKind::Reshape(shape) => x.reshape(shape)?,
        OpKind::Upsample2x => {
            let s = x.shape();
            if s.len() != 4 {
                return Err(mismatch(kind, s, &[]));
            }
            let (nc, h, w) = (s[0] * s[1], s[2], s[3]);
            let mut out = vec![0.0; nc * 4 * h * w];
            for p in 0..nc {
                for y in 0..2 * h {
                    for xx in 0..2 * w {
                        out[p * 4 * h * w + y * 2 * w + xx] = x.data()[p * h * w + (y / 2) * w + xx / 2];
                    }
                }
            }
            Tensor::from_raw(vec![s[0], s[1], 2 * h, 2 * w], out)
        }
        OpKind::Gather(indices) => {
            if indices.is_empty() {
                return Err(mismatch(kind, x.shape(), &[0]));
            }
            if let Some(&bad) = indices.iter().find(|&&i| i >= x.len()) {
                return Err(mismatch(kind, x.shape(), &[bad]));
            }
            Tensor::from_raw(vec![indices.len()], indices.iter().map(|&i| x.data()[i]).collect())
        }
        OpKind::SegmentSum { segments, count } => {
            check_segments(kind, x, segments, *count)?;
            let mut out = vec![0.0; *count];
            for (v, seg) in x.data().iter().zip(segments.iter()) {
                if let Some(s) = seg {
                    out[*s] += v;
                }
            }
            Tensor::from_raw(vec![*count], out)
        }
        OpKind::SegmentMin { segments, count } => {
            check_segments(kind, x, segments, *count)?;
            let arg = segment_argmin(x.data(), segments, *count)
                .ok_or_else(|| mismatch(kind, x.shape(), &[*count]))?;
            Tensor::from_raw(vec![*count], arg.iter().map(|&i| x.data()[i]).collect())
        }
    };
    if cfg!(debug_assertions) {
        if let Some(index) = out.data().iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite {
                context: format!("output of {}", kind.name()),
                index,
            });
        }
    }
    Ok(out)
}

fn check_segments(
    kind: &OpKind,
    x: &Tensor,
    segments: &[Option<usize>],
    count: usize,
) -> Result<(), NumericsError> {
    if segments.len() != x.len() || count == 0 || segments.iter().flatten().any(|&s| s >= count) {
        return Err(mismatch(kind, x.shape(), &[segments.len(), count]));
    }
    Ok(())
}

fn segment_argmin(data: &[f64], segments: &[Option<usize>], count: usize) -> Option<Vec<usize>> {
    let mut arg: Vec<Option<usize>> = vec![None; count];
    for (i, seg) in segments.iter().enumerate() {
        if let Some(s) = *seg {
            match arg[s] {
                Some(j) if data[j] <= data[i] => {}
                _ => arg[s] = Some(i),
            }
        }
    }
    arg.into_iter().collect()
}

fn bias_layout(
    kind: &OpKind,
    xs: &[usize],
    bs: &[usize],
) -> Result<(usize, usize, usize), NumericsError> {
    if xs.len() < 2 {
        return Err(mismatch(kind, xs, bs));
    }
    let (n, c) = (xs[0], xs[1]);
    let ok = match bs {
        [bc] => *bc == c,
        [bn, bc] => *bn == n && *bc == c,
        _ => false,
    };
    if !ok {
        return Err(mismatch(kind, xs, bs));
    }
    Ok((n, c, xs[2..].iter().product()))
}

fn conv_geometry(
    kind: &OpKind,
    xs: &[usize],
    ws: &[usize],
    stride: usize,
) -> Result<(ConvGeometry, usize, usize), NumericsError> {
    if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] || ws[2] % 2 == 0 || ws[3] % 2 == 0 || stride == 0 {
        return Err(mismatch(kind, xs, ws));
    }
    let g = ConvGeometry {
        in_channels: xs[1],
        height: xs[2],
        width: xs[3],
        kernel_h: ws[2],
        kernel_w: ws[3],
        stride,
    };
    Ok((g, xs[0], ws[0]))
}

fn conv2d_forward(kind: &OpKind, x: &Tensor, w: &Tensor, stride: usize) -> Result<Tensor, NumericsError> {
    let (g, batch, out_ch) = conv_geometry(kind, x.shape(), w.shape(), stride)?;
    let (plen, olen) = (g.patch_len(), g.out_len());
    let in_len = g.in_channels * g.height * g.width;
    let mut cols = vec![0.0; plen * olen];
    let mut out = vec![0.0; batch * out_ch * olen];
    for n in 0..batch {
        im2col(&g, &x.data()[n * in_len..(n + 1) * in_len], &mut cols);
        gemm(
            out_ch,
            plen,
            olen,
            w.data(),
            false,
            &cols,
            false,
            &mut out[n * out_ch * olen..(n + 1) * out_ch * olen],
            false,
        );
    }
    Ok(Tensor::from_raw(vec![batch, out_ch, g.out_h(), g.out_w()], out))
}

fn concat_forward(kind: &OpKind, inputs: &[&Tensor], axis: usize) -> Result<Tensor, NumericsError> {
    let first = inputs[0].shape();
    if axis >= first.len() {
        return Err(mismatch(kind, first, &[axis]));
    }
    for t in &inputs[1..] {
        let s = t.shape();
        let compatible = s.len() == first.len()
            && s.iter().zip(first).enumerate().all(|(i, (a, b))| i == axis || a == b);
        if !compatible {
            return Err(mismatch(kind, first, s));
        }
    }
    let (outer, _, inner) = split_axis(first, axis);
    let total_axis: usize = inputs.iter().map(|t| t.shape()[axis]).sum();
    let mut out = Vec::with_capacity(outer * total_axis * inner);
    for o in 0..outer {
        for t in inputs {
            let chunk = t.shape()[axis] * inner;
            out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
        }
    }
    let mut shape = first.to_vec();
    shape[axis] = total_axis;
    Ok(Tensor::from_raw(shape, out))
}

/// Vector-Jacobian product: gradients w.r.t. each input given the output
/// gradient `grad`. `None` marks an input that receives no gradient.
pub(crate) fn backward(
    kind: &OpKind,
    inputs: &[&Tensor],
    output: &Tensor,
    grad: &[f64],
    needs: &[bool],
) -> Vec<Option<Vec<f64>>> {
    let x = inputs[0];
    match kind {
        OpKind::Add => vec![Some(grad.to_vec()), Some(grad.to_vec())],
        OpKind::Sub => vec![Some(grad.to_vec()), Some(grad.iter().map(|g| -g).collect())],
        OpKind::Mul => {
            let y = inputs[1];
            vec![
                Some(grad.iter().zip(y.data()).map(|(g, b)| g * b).collect()),
                Some(grad.iter().zip(x.data()).map(|(g, a)| g * a).collect()),
            ]
        }
        OpKind::Scale(s) => vec![Some(grad.iter().map(|g| g * s).collect())],
        OpKind::Offset(_) => vec![Some(grad.to_vec())],
        OpKind::MatMul => {
            let w = inputs[1];
            let (m, k, n) = (x.shape()[0], x.shape()[1], w.shape()[1]);
            let gx = needs[0].then(|| {
                let mut gx = vec![0.0; m * k];
                gemm(m, n, k, grad, false, w.data(), true, &mut gx, false);
                gx
            });
            let gw = needs[1].then(|| {
                let mut gw = vec![0.0; k * n];
                gemm(k, m, n, x.data(), true, grad, false, &mut gw, false);
                gw
            });
            vec![gx, gw]
        }
        OpKind::BatchMatMul => {
            let w = inputs[1];
            let (b, m, k, n) = (x.shape()[0], x.shape()[1], x.shape()[2], w.shape()[2]);
            let mut gx = vec![0.0; b * m * k];
            let mut gw = vec![0.0; b * k * n];
            for i in 0..b {
                let g = &grad[i * m * n..(i + 1) * m * n];
                gemm(m, n, k, g, false, &w.data()[i * k * n..(i + 1) * k * n], true, &mut gx[i * m * k..(i + 1) * m * k], false);
                gemm(k, m, n, &x.data()[i * m * k..(i + 1) * m * k], true, g, false, &mut gw[i * k * n..(i + 1) * k * n], false);
            }
            vec![Some(gx), Some(gw)]
        }
        OpKind::Transpose => {
            let s = output.shape();
            let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
            let batch = grad.len() / (r * c);
            let mut gx = vec![0.0; grad.len()];
            for b in 0..batch {
                for i in 0..r {
                    for j in 0..c {
                        gx[b * r * c + j * r + i] = grad[b * r * c + i * c + j];
                    }
                }
            }
            vec![Some(gx)]
        }
        OpKind::Conv2d { stride } => {
            let w = inputs[1];
            let (g, batch, out_ch) =
                conv_geometry(kind, x.shape(), w.shape(), *stride).expect("validated in forward");
            let (plen, olen) = (g.patch_len(), g.out_len());
            let in_len = g.in_channels * g.height * g.width;
            let mut cols = vec![0.0; plen * olen];
            let mut dcols = vec![0.0; plen * olen];
            let mut gx = vec![0.0; if needs[0] { x.len() } else { 0 }];
            let mut gw = vec![0.0; w.len()];
            for n in 0..batch {
                let g_out = &grad[n * out_ch * olen..(n + 1) * out_ch * olen];
                if needs[1] {
                    im2col(&g, &x.data()[n * in_len..(n + 1) * in_len], &mut cols);
                    gemm(out_ch, olen, plen, g_out, false, &cols, true, &mut gw, true);
                }
                if needs[0] {
                    gemm(plen, out_ch, olen, w.data(), true, g_out, false, &mut dcols, false);
                    col2im_add(&g, &dcols, &mut gx[n * in_len..(n + 1) * in_len]);
                }
            }
            vec![needs[0].then_some(gx), needs[1].then_some(gw)]
        }
        OpKind::AddBias => {
            let b = inputs[1];
            let (n, c, inner) = bias_layout(kind, x.shape(), b.shape()).expect("validated in forward");
            let per_sample = b.ndim() == 2;
            let mut gb = vec![0.0; b.len()];
            for i in 0..n {
                for ch in 0..c {
                    let base = (i * c + ch) * inner;
                    let s: f64 = grad[base..base + inner].iter().sum();
                    gb[if per_sample { i * c + ch } else { ch }] += s;
                }
            }
            vec![Some(grad.to_vec()), Some(gb)]
        }
        OpKind::Activation(a) => vec![Some(
            grad.iter()
                .zip(x.data().iter().zip(output.data()))
                .map(|(g, (&xv, &yv))| g * a.derivative(xv, yv))
                .collect(),
        )],
        OpKind::ReduceSum => vec![Some(vec![grad[0]; x.len()])],
        OpKind::ReduceMean => vec![Some(vec![grad[0] / x.len() as f64; x.len()])],
        OpKind::Concat { axis } => {
            let (outer, _, inner) = split_axis(output.shape(), *axis);
            let total_axis = output.shape()[*axis];
            let mut grads: Vec<Vec<f64>> = inputs.iter().map(|t| Vec::with_capacity(t.len())).collect();
            for o in 0..outer {
                let mut offset = o * total_axis * inner;
                for (t, gi) in inputs.iter().zip(grads.iter_mut()) {
                    let chunk = t.shape()[*axis] * inner;
                    gi.extend_from_slice(&grad[offset..offset + chunk]);
                    offset += chunk;
                }
            }
            grads.into_iter().map(Some).collect()
        }
        OpKind::Slice { axis, start, len } => {
            let (outer, dim, inner) = split_axis(x.shape(), *axis);
            let mut gx = vec![0.0; x.len()];
            for o in 0..outer {
                let base = (o * dim + start) * inner;
                gx[base..base + len * inner].copy_from_slice(&grad[o * len * inner..(o + 1) * len * inner]);
            }
            vec![Some(gx)]
        }
        OpKind::Softmax { axis } => {
            let (outer, dim, inner) = split_axis(x.shape(), *axis);
            let y = output.data();
            let mut gx = vec![0.0; x.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |d: usize| (o * dim + d) * inner + i;
                    let dot: f64 = (0..dim).map(|d| grad[idx(d)] * y[idx(d)]).sum();
                    for d in 0..dim {
                        gx[idx(d)] = y[idx(d)] * (grad[idx(d)] - dot);
                    }
                }
            }
            vec![Some(gx)]
        }
        OpKind::Reshape(_) => vec![Some(grad.to_vec())],
        OpKind::Upsample2x => {
            let s = x.shape();
            let (nc, h, w) = (s[0] * s[1], s[2], s[3]);
            let mut gx = vec![0.0; x.len()];
            for p in 0..nc {
                for y in 0..2 * h {
                    for xx in 0..2 * w {
                        gx[p * h * w + (y / 2) * w + xx / 2] += grad[p * 4 * h * w + y * 2 * w + xx];
                    }
                }
            }
            vec![Some(gx)]
        }
        OpKind::Gather(indices) => {
            let mut gx = vec![0.0; x.len()];
            for (g, &i) in grad.iter().zip(indices.iter()) {
                gx[i] += g;
            }
            vec![Some(gx)]
        }
        OpKind::SegmentSum { segments, .. } => vec![Some(
            segments.iter().map(|s| s.map_or(0.0, |s| grad[s])).collect(),
        )],
        OpKind::SegmentMin { segments, count } => {
            let arg = segment_argmin(x.data(), segments, *count).expect("validated in forward");
            let mut gx = vec![0.0; x.len()];
            for (s, &i) in arg.iter().enumerate() {
                gx[i] += grad[s];
            }
            vec![Some(gx)]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn add_elementwise() {
        let out = forward(&OpKind::Add, &[&t(&[2], &[1.0, 2.0]), &t(&[2], &[3.0, 4.0])]).unwrap();
        assert_eq!(out.data(), &[4.0, 6.0]);
    }

    #[test]
    fn shape_mismatch_names_op_and_shapes() {
        let err = forward(&OpKind::Add, &[&t(&[2], &[1.0, 2.0]), &t(&[3], &[1.0, 2.0, 3.0])]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("add") && msg.contains("[2]") && msg.contains("[3]"), "{msg}");
    }

    #[test]
    fn identity_matmul() {
        let a = t(&[3, 3], &[1.0, -2.0, 3.5, 0.25, 5.0, 6.0, -7.0, 8.0, 9.0]);
        let out = forward(&OpKind::MatMul, &[&Tensor::eye(3), &a]).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn unit_one_by_one_kernel_is_identity() {
        let grid = t(&[1, 1, 3, 4], &(0..12).map(|v| v as f64 * 0.5 - 2.0).collect::<Vec<_>>());
        let kernel = t(&[1, 1, 1, 1], &[1.0]);
        let out = forward(&OpKind::Conv2d { stride: 1 }, &[&grid, &kernel]).unwrap();
        assert_eq!(out, grid);
    }

    #[test]
    fn conv_same_padding_matches_direct_sum() {
        let x = t(&[1, 2, 3, 3], &(0..18).map(|v| (v as f64 * 0.7).sin()).collect::<Vec<_>>());
        let w = t(&[1, 2, 3, 3], &(0..18).map(|v| (v as f64 * 1.3).cos()).collect::<Vec<_>>());
        let out = forward(&OpKind::Conv2d { stride: 1 }, &[&x, &w]).unwrap();
        for oy in 0..3 {
            for ox in 0..3 {
                let mut acc = 0.0;
                for c in 0..2 {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let (iy, ix) = (oy as isize + ky as isize - 1, ox as isize + kx as isize - 1);
                            if (0..3).contains(&iy) && (0..3).contains(&ix) {
                                acc += x.data()[c * 9 + iy as usize * 3 + ix as usize] * w.data()[c * 9 + ky * 3 + kx];
                            }
                        }
                    }
                }
                assert!((out.data()[oy * 3 + ox] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = t(&[2, 3], &[1.0, 2.0, 3.0, -1.0, 0.0, 1000.0]);
        let y = forward(&OpKind::Softmax { axis: 1 }, &[&x]).unwrap();
        for row in y.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn segment_min_requires_every_segment() {
        let x = t(&[3], &[1.0, 2.0, 3.0]);
        let segs: Arc<[Option<usize>]> = Arc::from(vec![Some(0), Some(0), None]);
        assert!(forward(&OpKind::SegmentMin { segments: segs.clone(), count: 2 }, &[&x]).is_err());
        let out = forward(&OpKind::SegmentMin { segments: segs, count: 1 }, &[&x]).unwrap();
        assert_eq!(out.data(), &[1.0]);
    }

    #[test]
    fn concat_and_slice_are_inverse() {
        let a = t(&[2, 1, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[2, 2, 2], &[5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = forward(&OpKind::Concat { axis: 1 }, &[&a, &b]).unwrap();
        assert_eq!(c.shape(), &[2, 3, 2]);
        let back = forward(&OpKind::Slice { axis: 1, start: 1, len: 2 }, &[&c]).unwrap();
        assert_eq!(back, b);
    }
}
