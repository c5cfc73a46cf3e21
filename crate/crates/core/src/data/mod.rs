//! Datasets and image files.

mod cifar;
pub mod image;
mod ppm;
mod shapes;

pub use cifar::{decode_cifar10, read_cifar10_binary, CIFAR_RECORD_LEN};
pub use ppm::{decode_ppm, encode_ppm, heatmap_overlay, read_ppm, write_heatmap, write_ppm, COLORMAP};
pub use shapes::{generate_shapes_dataset, render_shape, ShapeKind, SyntheticSample};

use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: Tensor,
    pub label: usize,
}

/// Per-channel mean over a set of `(C, H, W)` images, in `f64`.
pub fn channel_mean<'a>(images: impl IntoIterator<Item = &'a Tensor>) -> Vec<f32> {
    let mut sums: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for img in images {
        let c = img.shape()[0];
        let plane = img.len() / c;
        if sums.is_empty() {
            sums = vec![0.0; c];
        }
        for (ch, s) in sums.iter_mut().enumerate() {
            *s += img.data()[ch * plane..][..plane]
                .iter()
                .map(|&v| v as f64)
                .sum::<f64>();
        }
        count += plane;
    }
    sums.into_iter().map(|s| (s / count as f64) as f32).collect()
}
