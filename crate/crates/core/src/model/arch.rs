use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Layer, LayerKind, ModelGraph};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Built-in desk-scale architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arch {
    /// Three conv blocks (conv, relu, 2x2 pool) and two dense layers.
    ToyVgg,
    /// Two conv blocks and one dense layer.
    ToyPlain,
}

impl Arch {
    pub fn id(&self) -> &'static str {
        match self {
            Arch::ToyVgg => "toy_vgg",
            Arch::ToyPlain => "toy_plain",
        }
    }

    /// He-normal weights and zero biases drawn from `seed`.
    pub fn build(&self, input_shape: [usize; 3], classes: usize, seed: u64) -> Result<ModelGraph> {
        let [c, h, w] = input_shape;
        let blocks: &[usize] = match self {
            Arch::ToyVgg => &[8, 16, 32],
            Arch::ToyPlain => &[8, 16],
        };
        let shrink = 1usize << blocks.len();
        if h % shrink != 0 || w % shrink != 0 {
            return Err(Error::Config(format!(
                "{} needs input sides divisible by {shrink}, got {h}x{w}",
                self.id()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut in_ch = c;
        for (i, &out_ch) in blocks.iter().enumerate() {
            let n = i + 1;
            layers.push(Layer::new(
                format!("conv{n}"),
                LayerKind::Conv2d { stride: 1, pad: 1 },
                vec![he(&mut rng, &[out_ch, in_ch, 3, 3], in_ch * 9), Tensor::zeros(&[out_ch])],
            ));
            layers.push(Layer::new(format!("relu{n}"), LayerKind::Relu, vec![]));
            layers.push(Layer::new(
                format!("pool{n}"),
                LayerKind::MaxPool2d { size: 2, stride: 2 },
                vec![],
            ));
            in_ch = out_ch;
        }
        layers.push(Layer::new("flatten", LayerKind::Flatten, vec![]));
        let flat = in_ch * (h / shrink) * (w / shrink);
        match self {
            Arch::ToyVgg => {
                let hidden = 64;
                layers.push(Layer::new(
                    "fc1",
                    LayerKind::Dense,
                    vec![he(&mut rng, &[hidden, flat], flat), Tensor::zeros(&[hidden])],
                ));
                layers.push(Layer::new("relu_fc1", LayerKind::Relu, vec![]));
                layers.push(Layer::new(
                    "fc2",
                    LayerKind::Dense,
                    vec![he(&mut rng, &[classes, hidden], hidden), Tensor::zeros(&[classes])],
                ));
            }
            Arch::ToyPlain => {
                layers.push(Layer::new(
                    "fc1",
                    LayerKind::Dense,
                    vec![he(&mut rng, &[classes, flat], flat), Tensor::zeros(&[classes])],
                ));
            }
        }
        let mut model = ModelGraph::new(input_shape, classes, layers)?;
        model.meta.arch = self.id().to_string();
        model.meta.seed = seed;
        Ok(model)
    }
}

fn he(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let normal = Normal::new(0.0f32, (2.0 / fan_in as f32).sqrt()).expect("finite std");
    let n = shape.iter().product();
    let data = (0..n).map(|_| normal.sample(rng)).collect();
    Tensor::from_vec(shape, data).expect("shape matches generated length")
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy_vgg" => Ok(Arch::ToyVgg),
            "toy_plain" => Ok(Arch::ToyPlain),
            other => Err(Error::Config(format!(
                "unknown architecture `{other}` (expected toy_vgg or toy_plain)"
            ))),
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}
