//! Small image kernels shared by baselines, metrics and file output.

use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

fn dims(t: &Tensor) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [h, w] => Ok((1, h, w)),
        [c, h, w] => Ok((c, h, w)),
        ref s => Err(shape_err("image", format!("expected (H,W) or (C,H,W), got {s:?}"))),
    }
}

/// Separable Gaussian blur with the given `radius`: the kernel spans
/// `2*radius+1` taps with `sigma = radius / 2`; borders clamp.
pub fn gaussian_blur(img: &Tensor, radius: f32) -> Result<Tensor> {
    let (c, h, w) = dims(img)?;
    let half = radius.ceil().max(0.0) as usize;
    if half == 0 {
        return Ok(img.clone());
    }
    let sigma = (radius / 2.0).max(1e-3) as f64;
    let kernel: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let d = i as f64 - half as f64;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.into_iter().map(|k| k / norm).collect();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let src = img.data();
    let mut tmp = vec![0.0f64; src.len()];
    let mut out = vec![0.0f32; src.len()];
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    let xx = clamp(x as isize + k as isize - half as isize, w);
                    s += kv * src[base + y * w + xx] as f64;
                }
                tmp[base + y * w + x] = s;
            }
        }
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    let yy = clamp(y as isize + k as isize - half as isize, h);
                    s += kv * tmp[base + yy * w + x];
                }
                out[base + y * w + x] = s as f32;
            }
        }
    }
    Tensor::from_vec(img.shape(), out)
}

/// Nearest-neighbour resize of an `(H, W)` or `(C, H, W)` tensor.
pub fn resize_nearest(img: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = dims(img)?;
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        for y in 0..out_h {
            let sy = y * h / out_h;
            for x in 0..out_w {
                let sx = x * w / out_w;
                out.push(img.data()[(ch * h + sy) * w + sx]);
            }
        }
    }
    let shape: Vec<usize> = if img.rank() == 2 {
        vec![out_h, out_w]
    } else {
        vec![c, out_h, out_w]
    };
    Tensor::from_vec(&shape, out)
}

/// Bilinear resize with half-pixel centres and clamped borders, so every
/// output lies within the input's `[min, max]`.
pub fn resize_bilinear(img: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = dims(img)?;
    let coord = |o: usize, out: usize, src: usize| -> (usize, usize, f64) {
        let pos = ((o as f64 + 0.5) * src as f64 / out as f64 - 0.5).clamp(0.0, (src - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src - 1);
        (lo, hi, pos - lo as f64)
    };
    let mut out = Vec::with_capacity(c * out_h * out_w);
    let d = img.data();
    for ch in 0..c {
        let p = &d[ch * h * w..][..h * w];
        for y in 0..out_h {
            let (y0, y1, fy) = coord(y, out_h, h);
            for x in 0..out_w {
                let (x0, x1, fx) = coord(x, out_w, w);
                let top = p[y0 * w + x0] as f64 * (1.0 - fx) + p[y0 * w + x1] as f64 * fx;
                let bot = p[y1 * w + x0] as f64 * (1.0 - fx) + p[y1 * w + x1] as f64 * fx;
                out.push((top * (1.0 - fy) + bot * fy) as f32);
            }
        }
    }
    let shape: Vec<usize> = if img.rank() == 2 {
        vec![out_h, out_w]
    } else {
        vec![c, out_h, out_w]
    };
    Tensor::from_vec(&shape, out)
}
