//! Procedural dataset: one coloured shape per image on a textured
//! background, with an exact object mask.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LabeledImage;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Circle,
    Square,
    Triangle,
    Cross,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::Circle,
        ShapeKind::Square,
        ShapeKind::Triangle,
        ShapeKind::Cross,
    ];

    /// Whether the point `(dy, dx)` relative to the centre lies inside a
    /// shape of size `r` (circumradius for the triangle, half-extent for
    /// the others).
    fn contains(&self, dy: f64, dx: f64, r: f64) -> bool {
        match self {
            ShapeKind::Circle => dy * dy + dx * dx <= r * r,
            ShapeKind::Square => dy.abs() <= 0.85 * r && dx.abs() <= 0.85 * r,
            ShapeKind::Cross => {
                let arm = r / 3.0;
                (dx.abs() <= arm && dy.abs() <= r) || (dy.abs() <= arm && dx.abs() <= r)
            }
            ShapeKind::Triangle => {
                // apex up; vertices on the circumcircle
                let v: Vec<(f64, f64)> = [-PI / 2.0, PI / 6.0, 5.0 * PI / 6.0]
                    .iter()
                    .map(|a| (r * a.sin(), r * a.cos()))
                    .collect();
                let side = |(ay, ax): (f64, f64), (by, bx): (f64, f64)| {
                    (bx - ax) * (dy - ay) - (by - ay) * (dx - ax)
                };
                let s0 = side(v[0], v[1]);
                let s1 = side(v[1], v[2]);
                let s2 = side(v[2], v[0]);
                (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0)
            }
        }
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(ShapeKind::Circle),
            "square" => Ok(ShapeKind::Square),
            "triangle" => Ok(ShapeKind::Triangle),
            "cross" => Ok(ShapeKind::Cross),
            other => Err(Error::Config(format!("unknown shape `{other}`"))),
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShapeKind::Circle => "circle",
            ShapeKind::Square => "square",
            ShapeKind::Triangle => "triangle",
            ShapeKind::Cross => "cross",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    /// `(3, H, W)` in `[0, 1]`.
    pub image: Tensor,
    pub label: usize,
    /// `(H, W)` with 1 on the shape's pixels.
    pub mask: Tensor,
}

impl SyntheticSample {
    pub fn labeled(&self) -> LabeledImage {
        LabeledImage {
            image: self.image.clone(),
            label: self.label,
        }
    }
}

/// Pixel mask of a shape centred at `(cy, cx)`, sampled at pixel centres.
pub fn render_shape(kind: ShapeKind, cy: f64, cx: f64, r: f64, h: usize, w: usize) -> Vec<bool> {
    let mut mask = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            mask.push(kind.contains(y as f64 + 0.5 - cy, x as f64 + 0.5 - cx, r));
        }
    }
    mask
}

const PALETTE: [[f32; 3]; 6] = [
    [0.95, 0.15, 0.1],
    [0.1, 0.85, 0.2],
    [0.15, 0.3, 0.95],
    [0.95, 0.9, 0.1],
    [0.9, 0.2, 0.9],
    [0.1, 0.9, 0.9],
];

/// `n` samples with labels cycling through `classes`; fully determined by
/// `seed`.
pub fn generate_shapes_dataset(
    n: usize,
    classes: &[ShapeKind],
    h: usize,
    w: usize,
    seed: u64,
) -> Result<Vec<SyntheticSample>> {
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    if h < 32 || w < 32 {
        return Err(Error::Config(format!("image sides must be >= 32, got {h}x{w}")));
    }
    if classes.is_empty() {
        return Err(Error::Config("at least one shape class is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = h.min(w) as f64;
    (0..n)
        .map(|i| {
            let label = i % classes.len();
            let kind = classes[label];
            let r = rng.random_range(0.18 * side..0.3 * side);
            let cy = rng.random_range(r + 1.0..h as f64 - r - 1.0);
            let cx = rng.random_range(r + 1.0..w as f64 - r - 1.0);
            let mask = render_shape(kind, cy, cx, r, h, w);
            if !mask.iter().any(|&m| m) {
                return Err(Error::Config("rendered an empty mask".into()));
            }

            let mut color = PALETTE[rng.random_range(0..PALETTE.len())];
            for c in &mut color {
                *c = (*c + rng.random_range(-0.05..0.05f32)).clamp(0.0, 1.0);
            }
            let level = rng.random_range(0.3..0.55f32);
            let tint: [f32; 3] = std::array::from_fn(|_| rng.random_range(-0.05..0.05f32));
            let waves: [(f64, f64, f64); 2] = std::array::from_fn(|_| {
                (
                    rng.random_range(0.15..0.6),
                    rng.random_range(0.0..PI),
                    rng.random_range(0.0..2.0 * PI),
                )
            });

            let mut img = vec![0.0f32; 3 * h * w];
            for y in 0..h {
                for x in 0..w {
                    let idx = y * w + x;
                    let texture: f64 = waves
                        .iter()
                        .map(|&(freq, angle, phase)| {
                            let t = x as f64 * angle.cos() + y as f64 * angle.sin();
                            0.05 * (freq * t + phase).sin()
                        })
                        .sum();
                    for c in 0..3 {
                        let grain = rng.random_range(-0.04..0.04f32);
                        let v = if mask[idx] {
                            color[c] + grain
                        } else {
                            level + tint[c] + texture as f32 + grain
                        };
                        img[c * h * w + idx] = v.clamp(0.0, 1.0);
                    }
                }
            }
            Ok(SyntheticSample {
                image: Tensor::from_vec(&[3, h, w], img)?,
                label,
                mask: Tensor::from_vec(&[h, w], mask.iter().map(|&m| m as u8 as f32).collect())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_area_matches_pi_r_squared() {
        for r in [6.0, 9.5, 14.0] {
            let mask = render_shape(ShapeKind::Circle, 32.0, 32.0, r, 64, 64);
            let count = mask.iter().filter(|&&m| m).count() as f64;
            let area = PI * r * r;
            assert!((count - area).abs() <= 0.05 * area, "r={r}: {count} vs {area}");
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = generate_shapes_dataset(6, &ShapeKind::ALL, 32, 32, 3).unwrap();
        let b = generate_shapes_dataset(6, &ShapeKind::ALL, 32, 32, 3).unwrap();
        let bits = |s: &[SyntheticSample]| -> Vec<u32> {
            s.iter()
                .flat_map(|x| x.image.data().iter().chain(x.mask.data()).map(|v| v.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn single_class_labels_zero() {
        let s = generate_shapes_dataset(5, &[ShapeKind::Cross], 32, 32, 1).unwrap();
        assert!(s.iter().all(|x| x.label == 0));
    }

    #[test]
    fn masks_nonempty_and_images_in_range() {
        let s = generate_shapes_dataset(20, &ShapeKind::ALL, 32, 40, 2).unwrap();
        for x in &s {
            assert!(x.mask.sum() > 0.0);
            assert_eq!(x.mask.shape(), &[32, 40]);
            assert!(x.image.min() >= 0.0 && x.image.max() <= 1.0);
        }
    }

    #[test]
    fn small_images_rejected() {
        assert!(generate_shapes_dataset(1, &ShapeKind::ALL, 16, 32, 0).is_err());
        assert!(generate_shapes_dataset(0, &ShapeKind::ALL, 32, 32, 0).is_err());
    }
}
