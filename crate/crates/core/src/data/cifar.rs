//! CIFAR-10 binary batches: each record is one label byte followed by
//! 1024 red, 1024 green and 1024 blue bytes in row-major order.

use std::fs;
use std::path::Path;

use super::image::resize_nearest;
use super::LabeledImage;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CIFAR_RECORD_LEN: usize = 3073;

pub fn read_cifar10_binary(path: impl AsRef<Path>, upsample_to: Option<usize>) -> Result<Vec<LabeledImage>> {
    decode_cifar10(&fs::read(path)?, upsample_to)
}

/// Decodes records into `(3, 32, 32)` images in `[0, 1]`, optionally
/// nearest-neighbour upsampled to `(3, n, n)`.
pub fn decode_cifar10(bytes: &[u8], upsample_to: Option<usize>) -> Result<Vec<LabeledImage>> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        return Err(Error::CifarLength {
            len: bytes.len(),
            offset: bytes.len() / CIFAR_RECORD_LEN * CIFAR_RECORD_LEN,
        });
    }
    bytes
        .chunks_exact(CIFAR_RECORD_LEN)
        .map(|rec| {
            let data = rec[1..].iter().map(|&b| b as f32 / 255.0).collect();
            let mut image = Tensor::from_vec(&[3, 32, 32], data)?;
            if let Some(n) = upsample_to {
                if n != 32 {
                    image = resize_nearest(&image, n, n)?;
                }
            }
            Ok(LabeledImage {
                image,
                label: rec[0] as usize,
            })
        })
        .collect()
}
