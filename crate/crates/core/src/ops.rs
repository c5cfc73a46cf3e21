//! Primitive operations: forward kernels and their vector-Jacobian products.
//!
//! Spatial ops take `(C, H, W)` or a batched `(N, C, H, W)` input. Sums that
//! span many terms (convolution, pooling averages, reductions) accumulate in
//! `f64` and round once on output.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// A primitive the tape can record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Op {
    /// Inputs: `x`, `weight (O, C, kh, kw)`, optional `bias (O)`.
    Conv2d { stride: usize, pad: usize },
    Relu,
    MaxPool2d { size: usize, stride: usize },
    /// Inputs: `x (in)`, `weight (out, in)`, optional `bias (out)`.
    Dense,
    Flatten,
    Softmax,
    Add,
    Mul,
    Scale(f32),
    GlobalAvgPool,
    Sum,
    /// Picks one element as a scalar.
    Select(usize),
    /// Softmax cross-entropy of logits against a target index.
    CrossEntropy(usize),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Conv2d { .. } => "conv2d",
            Op::Relu => "relu",
            Op::MaxPool2d { .. } => "maxpool2d",
            Op::Dense => "dense",
            Op::Flatten => "flatten",
            Op::Softmax => "softmax",
            Op::Add => "add",
            Op::Mul => "mul",
            Op::Scale(_) => "scale",
            Op::GlobalAvgPool => "global_avg_pool",
            Op::Sum => "sum",
            Op::Select(_) => "select",
            Op::CrossEntropy(_) => "cross_entropy",
        }
    }
}

/// Evaluates `op` on `inputs`.
pub fn forward_op(op: &Op, inputs: &[&Tensor]) -> Result<Tensor> {
    let name = op.name();
    match *op {
        Op::Conv2d { stride, pad } => {
            arity(name, inputs, 2, 3)?;
            conv2d_forward(inputs[0], inputs[1], inputs.get(2).copied(), stride, pad)
        }
        Op::Relu => {
            arity(name, inputs, 1, 1)?;
            Ok(inputs[0].map(|v| if v > 0.0 { v } else { 0.0 }))
        }
        Op::MaxPool2d { size, stride } => {
            arity(name, inputs, 1, 1)?;
            maxpool_forward(inputs[0], size, stride).map(|(t, _)| t)
        }
        Op::Dense => {
            arity(name, inputs, 2, 3)?;
            dense_forward(inputs[0], inputs[1], inputs.get(2).copied())
        }
        Op::Flatten => {
            arity(name, inputs, 1, 1)?;
            inputs[0].reshape(&[inputs[0].len()])
        }
        Op::Softmax => {
            arity(name, inputs, 1, 1)?;
            rank_is(name, inputs[0], 1)?;
            Ok(Tensor::vector(softmax(inputs[0].data())))
        }
        Op::Add => {
            arity(name, inputs, 2, 2)?;
            inputs[0].add(inputs[1]).map_err(|_| mismatch(name, inputs))
        }
        Op::Mul => {
            arity(name, inputs, 2, 2)?;
            inputs[0].mul(inputs[1]).map_err(|_| mismatch(name, inputs))
        }
        Op::Scale(a) => {
            arity(name, inputs, 1, 1)?;
            Ok(inputs[0].scale(a))
        }
        Op::GlobalAvgPool => {
            arity(name, inputs, 1, 1)?;
            gap_forward(inputs[0])
        }
        Op::Sum => {
            arity(name, inputs, 1, 1)?;
            Ok(Tensor::scalar(inputs[0].sum() as f32))
        }
        Op::Select(i) => {
            arity(name, inputs, 1, 1)?;
            let v = inputs[0].data().get(i).copied().ok_or_else(|| {
                shape_err(name, format!("index {i} out of {} elements", inputs[0].len()))
            })?;
            Ok(Tensor::scalar(v))
        }
        Op::CrossEntropy(target) => {
            arity(name, inputs, 1, 1)?;
            rank_is(name, inputs[0], 1)?;
            let logits = inputs[0].data();
            if target >= logits.len() {
                return Err(shape_err(
                    name,
                    format!("target {target} out of {} classes", logits.len()),
                ));
            }
            Ok(Tensor::scalar(-log_softmax_at(logits, target) as f32))
        }
    }
}

/// Vector-Jacobian product of `op`: given the upstream gradient of the
/// output, returns the gradient for every input flagged in `needs`.
pub fn backward_op(
    op: &Op,
    inputs: &[&Tensor],
    output: &Tensor,
    grad_out: &Tensor,
    needs: &[bool],
) -> Result<Vec<Option<Tensor>>> {
    let need = |i: usize| needs.get(i).copied().unwrap_or(false);
    let mut grads: Vec<Option<Tensor>> = vec![None; inputs.len()];
    match *op {
        Op::Conv2d { stride, pad } => {
            let (gx, gw, gb) = conv2d_backward(
                inputs[0],
                inputs[1],
                grad_out,
                stride,
                pad,
                [need(0), need(1), inputs.len() > 2 && need(2)],
            )?;
            grads[0] = gx;
            grads[1] = gw;
            if inputs.len() > 2 {
                grads[2] = gb;
            }
        }
        Op::Relu => {
            if need(0) {
                // Subgradient at exactly zero is zero.
                grads[0] = Some(inputs[0].zip_map(grad_out, |x, g| if x > 0.0 { g } else { 0.0 })?);
            }
        }
        Op::MaxPool2d { size, stride } => {
            if need(0) {
                let (_, argmax) = maxpool_forward(inputs[0], size, stride)?;
                let mut gx = Tensor::zeros(inputs[0].shape());
                let buf = gx.data_mut();
                for (&src, &g) in argmax.iter().zip(grad_out.data()) {
                    buf[src] += g;
                }
                grads[0] = Some(gx);
            }
        }
        Op::Dense => {
            let (gx, gw, gb) = dense_backward(
                inputs[0],
                inputs[1],
                grad_out,
                [need(0), need(1), inputs.len() > 2 && need(2)],
            )?;
            grads[0] = gx;
            grads[1] = gw;
            if inputs.len() > 2 {
                grads[2] = gb;
            }
        }
        Op::Flatten => {
            if need(0) {
                grads[0] = Some(grad_out.reshape(inputs[0].shape())?);
            }
        }
        Op::Softmax => {
            if need(0) {
                let p = output.data();
                let g = grad_out.data();
                let inner: f64 = p.iter().zip(g).map(|(&p, &g)| p as f64 * g as f64).sum();
                let gx = p
                    .iter()
                    .zip(g)
                    .map(|(&p, &g)| (p as f64 * (g as f64 - inner)) as f32)
                    .collect();
                grads[0] = Some(Tensor::vector(gx));
            }
        }
        Op::Add => {
            for (i, slot) in grads.iter_mut().enumerate() {
                if need(i) {
                    *slot = Some(grad_out.clone());
                }
            }
        }
        Op::Mul => {
            if need(0) {
                grads[0] = Some(grad_out.mul(inputs[1])?);
            }
            if need(1) {
                grads[1] = Some(grad_out.mul(inputs[0])?);
            }
        }
        Op::Scale(a) => {
            if need(0) {
                grads[0] = Some(grad_out.scale(a));
            }
        }
        Op::GlobalAvgPool => {
            if need(0) {
                grads[0] = Some(gap_backward(inputs[0], grad_out)?);
            }
        }
        Op::Sum => {
            if need(0) {
                grads[0] = Some(Tensor::full(inputs[0].shape(), scalar_of(grad_out)?));
            }
        }
        Op::Select(i) => {
            if need(0) {
                let mut gx = Tensor::zeros(inputs[0].shape());
                gx.data_mut()[i] = scalar_of(grad_out)?;
                grads[0] = Some(gx);
            }
        }
        Op::CrossEntropy(target) => {
            if need(0) {
                let g = scalar_of(grad_out)? as f64;
                let mut p = softmax_f64(inputs[0].data());
                p[target] -= 1.0;
                grads[0] = Some(Tensor::vector(p.into_iter().map(|v| (v * g) as f32).collect()));
            }
        }
    }
    Ok(grads)
}

fn arity(op: &'static str, inputs: &[&Tensor], min: usize, max: usize) -> Result<()> {
    if inputs.len() < min || inputs.len() > max {
        return Err(shape_err(
            op,
            format!("expected {min}..={max} inputs, got {}", inputs.len()),
        ));
    }
    Ok(())
}

fn rank_is(op: &'static str, t: &Tensor, rank: usize) -> Result<()> {
    if t.rank() != rank {
        return Err(shape_err(
            op,
            format!("expected rank {rank}, got shape {:?}", t.shape()),
        ));
    }
    Ok(())
}

fn mismatch(op: &'static str, inputs: &[&Tensor]) -> crate::error::Error {
    let shapes: Vec<_> = inputs.iter().map(|t| t.shape().to_vec()).collect();
    shape_err(op, format!("operand shapes {shapes:?}"))
}

fn scalar_of(t: &Tensor) -> Result<f32> {
    t.item()
        .ok_or_else(|| shape_err("backward", format!("expected scalar gradient, got {:?}", t.shape())))
}

fn softmax_f64(logits: &[f32]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = logits.iter().map(|&v| (v as f64 - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f32]) -> Vec<f32> {
    softmax_f64(logits).into_iter().map(|v| v as f32).collect()
}

fn log_softmax_at(logits: &[f32], i: usize) -> f64 {
    let m = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let z: f64 = logits.iter().map(|&v| (v as f64 - m).exp()).sum();
    logits[i] as f64 - m - z.ln()
}

/// `(N, C, H, W)` view of a rank-3 or rank-4 spatial tensor.
fn spatial_dims(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [c, h, w] => Ok((1, c, h, w)),
        [n, c, h, w] => Ok((n, c, h, w)),
        ref s => Err(shape_err(op, format!("expected (C,H,W) or (N,C,H,W), got {s:?}"))),
    }
}

fn spatial_shape(batched: bool, n: usize, c: usize, h: usize, w: usize) -> Vec<usize> {
    if batched {
        vec![n, c, h, w]
    } else {
        vec![c, h, w]
    }
}

fn conv_out(op: &'static str, size: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(shape_err(op, "stride must be positive"));
    }
    let padded = size + 2 * pad;
    if padded < k {
        return Err(shape_err(
            op,
            format!("kernel {k} larger than padded input {padded}"),
        ));
    }
    Ok((padded - k) / stride + 1)
}

struct ConvGeom {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl ConvGeom {
    fn new(x: &Tensor, weight: &Tensor, stride: usize, pad: usize) -> Result<Self> {
        let op = "conv2d";
        let (n, c, h, w) = spatial_dims(op, x)?;
        let [o, wc, kh, kw] = *weight.shape() else {
            return Err(shape_err(
                op,
                format!("weight must be (O,C,kh,kw), got {:?}", weight.shape()),
            ));
        };
        if wc != c {
            return Err(shape_err(
                op,
                format!("input has {c} channels but weight expects {wc}"),
            ));
        }
        let oh = conv_out(op, h, kh, stride, pad)?;
        let ow = conv_out(op, w, kw, stride, pad)?;
        Ok(Self {
            n,
            c,
            h,
            w,
            o,
            kh,
            kw,
            oh,
            ow,
            stride,
            pad,
        })
    }

    /// Output rows `oy` whose input row `oy*stride + k - pad` is in bounds.
    fn valid_range(&self, k: usize, out: usize, size: usize) -> (usize, usize) {
        let s = self.stride as isize;
        let off = k as isize - self.pad as isize;
        // smallest oy with oy*s + off >= 0
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        // largest oy with oy*s + off <= size-1
        let hi_num = size as isize - 1 - off;
        if hi_num < 0 {
            return (0, 0);
        }
        let hi = (hi_num / s + 1).min(out as isize);
        (lo.min(hi) as usize, hi as usize)
    }
}

fn conv2d_forward(
    x: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let g = ConvGeom::new(x, weight, stride, pad)?;
    if let Some(b) = bias {
        if b.shape() != [g.o] {
            return Err(shape_err(
                "conv2d",
                format!("bias must be ({}), got {:?}", g.o, b.shape()),
            ));
        }
    }
    let xd = x.data();
    let wd = weight.data();
    let plane = g.oh * g.ow;
    let mut out = vec![0.0f32; g.n * g.o * plane];
    let mut acc = vec![0.0f64; plane];
    for n in 0..g.n {
        for o in 0..g.o {
            let b = bias.map_or(0.0, |b| b.data()[o] as f64);
            acc.iter_mut().for_each(|a| *a = b);
            for c in 0..g.c {
                let xplane = &xd[(n * g.c + c) * g.h * g.w..][..g.h * g.w];
                for ky in 0..g.kh {
                    let (y0, y1) = g.valid_range(ky, g.oh, g.h);
                    for kx in 0..g.kw {
                        let (x0, x1) = g.valid_range(kx, g.ow, g.w);
                        let wv = wd[((o * g.c + c) * g.kh + ky) * g.kw + kx] as f64;
                        for oy in y0..y1 {
                            let iy = oy * g.stride + ky - g.pad;
                            let row = &xplane[iy * g.w..][..g.w];
                            let arow = &mut acc[oy * g.ow..][..g.ow];
                            for ox in x0..x1 {
                                let ix = ox * g.stride + kx - g.pad;
                                arow[ox] += wv * row[ix] as f64;
                            }
                        }
                    }
                }
            }
            let dst = &mut out[(n * g.o + o) * plane..][..plane];
            for (d, a) in dst.iter_mut().zip(&acc) {
                *d = *a as f32;
            }
        }
    }
    Tensor::from_vec(&spatial_shape(x.rank() == 4, g.n, g.o, g.oh, g.ow), out)
}

type ConvGrads = (Option<Tensor>, Option<Tensor>, Option<Tensor>);

fn conv2d_backward(
    x: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    pad: usize,
    needs: [bool; 3],
) -> Result<ConvGrads> {
    let g = ConvGeom::new(x, weight, stride, pad)?;
    let plane = g.oh * g.ow;
    if grad_out.len() != g.n * g.o * plane {
        return Err(shape_err(
            "conv2d",
            format!("upstream gradient has shape {:?}", grad_out.shape()),
        ));
    }
    let xd = x.data();
    let wd = weight.data();
    let gd = grad_out.data();

    let gx = needs[0].then(|| {
        let mut acc = vec![0.0f64; x.len()];
        for n in 0..g.n {
            for o in 0..g.o {
                let gplane = &gd[(n * g.o + o) * plane..][..plane];
                for c in 0..g.c {
                    let xacc = &mut acc[(n * g.c + c) * g.h * g.w..][..g.h * g.w];
                    for ky in 0..g.kh {
                        let (y0, y1) = g.valid_range(ky, g.oh, g.h);
                        for kx in 0..g.kw {
                            let (x0, x1) = g.valid_range(kx, g.ow, g.w);
                            let wv = wd[((o * g.c + c) * g.kh + ky) * g.kw + kx] as f64;
                            for oy in y0..y1 {
                                let iy = oy * g.stride + ky - g.pad;
                                let grow = &gplane[oy * g.ow..][..g.ow];
                                let xrow = &mut xacc[iy * g.w..][..g.w];
                                for ox in x0..x1 {
                                    let ix = ox * g.stride + kx - g.pad;
                                    xrow[ix] += wv * grow[ox] as f64;
                                }
                            }
                        }
                    }
                }
            }
        }
        Tensor::from_vec(x.shape(), acc.into_iter().map(|v| v as f32).collect())
    });

    let gw = needs[1].then(|| {
        let mut out = vec![0.0f32; weight.len()];
        for o in 0..g.o {
            for c in 0..g.c {
                for ky in 0..g.kh {
                    let (y0, y1) = g.valid_range(ky, g.oh, g.h);
                    for kx in 0..g.kw {
                        let (x0, x1) = g.valid_range(kx, g.ow, g.w);
                        let mut s = 0.0f64;
                        for n in 0..g.n {
                            let gplane = &gd[(n * g.o + o) * plane..][..plane];
                            let xplane = &xd[(n * g.c + c) * g.h * g.w..][..g.h * g.w];
                            for oy in y0..y1 {
                                let iy = oy * g.stride + ky - g.pad;
                                let grow = &gplane[oy * g.ow..][..g.ow];
                                let xrow = &xplane[iy * g.w..][..g.w];
                                for ox in x0..x1 {
                                    s += grow[ox] as f64 * xrow[ox * g.stride + kx - g.pad] as f64;
                                }
                            }
                        }
                        out[((o * g.c + c) * g.kh + ky) * g.kw + kx] = s as f32;
                    }
                }
            }
        }
        Tensor::from_vec(weight.shape(), out)
    });

    let gb = needs[2].then(|| {
        let out = (0..g.o)
            .map(|o| {
                (0..g.n)
                    .flat_map(|n| gd[(n * g.o + o) * plane..][..plane].iter())
                    .map(|&v| v as f64)
                    .sum::<f64>() as f32
            })
            .collect();
        Tensor::vector(out)
    });

    Ok((gx.transpose()?, gw.transpose()?, gb))
}

/// Max pooling; returns the output and, per output cell, the flat input
/// index it was taken from (first maximum in row-major window order).
fn maxpool_forward(x: &Tensor, size: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    let op = "maxpool2d";
    if size == 0 {
        return Err(shape_err(op, "window size must be positive"));
    }
    let (n, c, h, w) = spatial_dims(op, x)?;
    let oh = conv_out(op, h, size, stride, 0)?;
    let ow = conv_out(op, w, size, stride, 0)?;
    let xd = x.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut idx = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * stride * w + ox * stride;
                for ky in 0..size {
                    for kx in 0..size {
                        let i = base + (oy * stride + ky) * w + ox * stride + kx;
                        if xd[i] > xd[best] {
                            best = i;
                        }
                    }
                }
                out.push(xd[best]);
                idx.push(best);
            }
        }
    }
    let t = Tensor::from_vec(&spatial_shape(x.rank() == 4, n, c, oh, ow), out)?;
    Ok((t, idx))
}

fn gap_forward(x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = spatial_dims("global_avg_pool", x)?;
    let hw = h * w;
    let out: Vec<f32> = x
        .data()
        .chunks(hw)
        .map(|p| (p.iter().map(|&v| v as f64).sum::<f64>() / hw as f64) as f32)
        .collect();
    if x.rank() == 4 {
        Tensor::from_vec(&[n, c], out)
    } else {
        Ok(Tensor::vector(out))
    }
}

fn gap_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = spatial_dims("global_avg_pool", x)?;
    if grad_out.len() != n * c {
        return Err(shape_err(
            "global_avg_pool",
            format!("upstream gradient has shape {:?}", grad_out.shape()),
        ));
    }
    let hw = h * w;
    let inv = 1.0 / hw as f64;
    let data = grad_out
        .data()
        .iter()
        .flat_map(|&g| std::iter::repeat_n((g as f64 * inv) as f32, hw))
        .collect();
    Tensor::from_vec(x.shape(), data)
}

fn dense_dims(x: &Tensor, weight: &Tensor) -> Result<(usize, usize)> {
    let op = "dense";
    rank_is(op, x, 1)?;
    let [out, inp] = *weight.shape() else {
        return Err(shape_err(
            op,
            format!("weight must be (out,in), got {:?}", weight.shape()),
        ));
    };
    if inp != x.len() {
        return Err(shape_err(
            op,
            format!("input length {} but weight expects {inp}", x.len()),
        ));
    }
    Ok((out, inp))
}

fn dense_forward(x: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let (out, inp) = dense_dims(x, weight)?;
    if let Some(b) = bias {
        if b.shape() != [out] {
            return Err(shape_err(
                "dense",
                format!("bias must be ({out}), got {:?}", b.shape()),
            ));
        }
    }
    let xd = x.data();
    let y = weight
        .data()
        .chunks(inp)
        .enumerate()
        .map(|(o, row)| {
            let b = bias.map_or(0.0, |b| b.data()[o] as f64);
            (b + row.iter().zip(xd).map(|(&w, &v)| w as f64 * v as f64).sum::<f64>()) as f32
        })
        .collect();
    Ok(Tensor::vector(y))
}

fn dense_backward(
    x: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
    needs: [bool; 3],
) -> Result<ConvGrads> {
    let (out, inp) = dense_dims(x, weight)?;
    if grad_out.len() != out {
        return Err(shape_err(
            "dense",
            format!("upstream gradient has shape {:?}", grad_out.shape()),
        ));
    }
    let gd = grad_out.data();
    let wd = weight.data();
    let gx = needs[0].then(|| {
        let mut acc = vec![0.0f64; inp];
        for (o, &g) in gd.iter().enumerate() {
            let g = g as f64;
            for (a, &w) in acc.iter_mut().zip(&wd[o * inp..][..inp]) {
                *a += g * w as f64;
            }
        }
        Tensor::vector(acc.into_iter().map(|v| v as f32).collect())
    });
    let gw = needs[1].then(|| {
        let data = gd
            .iter()
            .flat_map(|&g| x.data().iter().map(move |&v| g * v))
            .collect();
        Tensor::from_vec(&[out, inp], data)
    });
    let gb = needs[2].then(|| grad_out.clone());
    Ok((gx, gw.transpose()?, gb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_rectifies() {
        let y = forward_op(&Op::Relu, &[&Tensor::vector(vec![-1.0, 0.0, 2.0])]).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn conv_of_ones_sums_window() {
        let x = Tensor::full(&[1, 1, 3, 3], 1.0);
        let w = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = forward_op(&Op::Conv2d { stride: 1, pad: 0 }, &[&x, &w]).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
    }

    #[test]
    fn softmax_symmetric() {
        let y = forward_op(&Op::Softmax, &[&Tensor::vector(vec![0.0, 0.0])]).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5]);
    }

    #[test]
    fn conv_padding_and_stride_shapes() {
        let x = Tensor::full(&[2, 5, 5], 1.0);
        let w = Tensor::full(&[4, 2, 3, 3], 1.0);
        let y = forward_op(&Op::Conv2d { stride: 2, pad: 1 }, &[&x, &w]).unwrap();
        assert_eq!(y.shape(), &[4, 3, 3]);
        // corner sees a 2x2 in-bounds window over 2 channels
        assert_eq!(y.data()[0], 8.0);
        // centre sees the full 3x3 window
        assert_eq!(y.data()[4], 18.0);
    }

    #[test]
    fn conv_channel_mismatch_names_op() {
        let x = Tensor::zeros(&[3, 4, 4]);
        let w = Tensor::zeros(&[1, 2, 3, 3]);
        let err = forward_op(&Op::Conv2d { stride: 1, pad: 0 }, &[&x, &w]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("conv2d") && msg.contains('3') && msg.contains('2'), "{msg}");
    }

    #[test]
    fn maxpool_ties_take_first_index() {
        let x = Tensor::from_vec(&[1, 2, 2], vec![5.0, 5.0, 5.0, 5.0]).unwrap();
        let (y, idx) = maxpool_forward(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[5.0]);
        assert_eq!(idx, vec![0]);
    }

    #[test]
    fn dense_rejects_wrong_width() {
        let x = Tensor::zeros(&[3]);
        let w = Tensor::zeros(&[2, 4]);
        assert!(forward_op(&Op::Dense, &[&x, &w]).is_err());
    }

    #[test]
    fn gap_averages_planes() {
        let x = Tensor::from_vec(&[2, 1, 2], vec![1.0, 3.0, -2.0, 2.0]).unwrap();
        let y = forward_op(&Op::GlobalAvgPool, &[&x]).unwrap();
        assert_eq!(y.data(), &[2.0, 0.0]);
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let y = forward_op(&Op::CrossEntropy(1), &[&Tensor::vector(vec![0.0; 4])]).unwrap();
        assert!((y.data()[0] - 4f32.ln()).abs() < 1e-6);
    }
}
