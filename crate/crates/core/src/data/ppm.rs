//! Binary PPM (P6, maxval 255) and heatmap rendering.

use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use super::image::resize_bilinear;
use crate::attribution::normalize_saliency;
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// Largest accepted pixel count (width x height).
const MAX_PIXELS: usize = 1 << 26;

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Tensor> {
    decode_ppm(&fs::read(path)?)
}

pub fn write_ppm(image: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_ppm(image)?)?;
    Ok(())
}

/// Quantises a `(3, H, W)` tensor in `[0, 1]` to P6 bytes.
pub fn encode_ppm(image: &Tensor) -> Result<Vec<u8>> {
    let [3, h, w] = *image.shape() else {
        return Err(shape_err("ppm", format!("expected (3,H,W), got {:?}", image.shape())));
    };
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    let d = image.data();
    let plane = h * w;
    out.reserve(3 * plane);
    for i in 0..plane {
        for c in 0..3 {
            out.push(quantize(d[c * plane + i]));
        }
    }
    Ok(out)
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Parses P6 bytes into a `(3, H, W)` tensor scaled to `[0, 1]`.
pub fn decode_ppm(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(Error::Ppm("bad magic (expected P6)".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        *field = header_number(bytes, &mut pos)?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Ppm(format!("unsupported maxval {maxval} (only 255)")));
    }
    if w == 0 || h == 0 {
        return Err(Error::Ppm("zero image dimension".into()));
    }
    let plane = w
        .checked_mul(h)
        .filter(|&p| p <= MAX_PIXELS)
        .ok_or_else(|| Error::Ppm(format!("dimension overflow: {w}x{h}")))?;
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Ppm("missing whitespace after header".into())),
    }
    let raster = &bytes[pos..];
    if raster.len() < 3 * plane {
        return Err(Error::Ppm(format!(
            "truncated pixel data: expected {} bytes, found {}",
            3 * plane,
            raster.len()
        )));
    }
    let mut data = vec![0.0f32; 3 * plane];
    for i in 0..plane {
        for c in 0..3 {
            data[c * plane + i] = raster[3 * i + c] as f32 / 255.0;
        }
    }
    Tensor::from_vec(&[3, h, w], data)
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(_) => break,
            None => return Err(Error::Ppm("truncated header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .filter(|s| !s.is_empty())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Ppm(format!("malformed header number at byte {start}")))
}

/// 256-entry blue-to-red ramp through green: `r = t`, `g = 1 - |2t - 1|`,
/// `b = 1 - t`.
pub static COLORMAP: LazyLock<[[f32; 3]; 256]> = LazyLock::new(|| {
    std::array::from_fn(|i| {
        let t = i as f32 / 255.0;
        [t, 1.0 - (2.0 * t - 1.0).abs(), 1.0 - t]
    })
});

/// Saliency upsampled to the base image, min-max normalised, coloured and
/// blended 50/50 over `base`.
pub fn heatmap_overlay(saliency: &Tensor, base: &Tensor) -> Result<Tensor> {
    let [3, h, w] = *base.shape() else {
        return Err(shape_err("heatmap", format!("base must be (3,H,W), got {:?}", base.shape())));
    };
    if saliency.rank() != 2 {
        return Err(shape_err("heatmap", format!("saliency must be (H,W), got {:?}", saliency.shape())));
    }
    let sal = if saliency.shape() == [h, w] {
        saliency.clone()
    } else {
        resize_bilinear(saliency, h, w)?
    };
    let norm = normalize_saliency(&sal);
    let plane = h * w;
    let mut out = vec![0.0f32; 3 * plane];
    for (i, &v) in norm.data().iter().enumerate() {
        let color = COLORMAP[(v * 255.0).round().clamp(0.0, 255.0) as usize];
        for c in 0..3 {
            out[c * plane + i] = 0.5 * base.data()[c * plane + i] + 0.5 * color[c];
        }
    }
    Tensor::from_vec(&[3, h, w], out)
}

pub fn write_heatmap(saliency: &Tensor, base: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    write_ppm(&heatmap_overlay(saliency, base)?, path)
}
