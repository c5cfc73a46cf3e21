use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Arch, ModelGraph};
use crate::data::{channel_mean, LabeledImage};
use crate::error::{shape_err, Error, Result};
use crate::ops::Op;
use crate::tape::{Tape, TensorId};
use crate::tensor::Tensor;

/// Plain SGD with momentum on softmax cross-entropy.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub arch: Arch,
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f32,
    pub momentum: f32,
    pub batch_size: usize,
    /// Held-out share of the dataset used for validation accuracy.
    pub val_fraction: f64,
    /// Defaults to `max(label) + 1`.
    pub classes: Option<usize>,
    /// Free-form dataset description stored in the checkpoint metadata.
    pub dataset: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: Arch::ToyVgg,
            epochs: 30,
            seed: 7,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 16,
            val_fraction: 0.2,
            classes: None,
            dataset: String::new(),
        }
    }
}

/// Trains `config.arch` on `dataset`. The train/validation split and
/// every epoch's shuffle derive from `config.seed`, so the result is
/// deterministic. `epochs = 0` returns the seeded initialisation.
pub fn train_toy(dataset: &[LabeledImage], config: &TrainConfig) -> Result<ModelGraph> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::Config("training set is empty".into()))?;
    let input_shape: [usize; 3] = first
        .image
        .shape()
        .try_into()
        .map_err(|_| shape_err("train", format!("images must be (C,H,W), got {:?}", first.image.shape())))?;
    if let Some(bad) = dataset.iter().find(|s| s.image.shape() != input_shape) {
        return Err(shape_err(
            "train",
            format!("mixed image shapes {:?} and {:?}", input_shape, bad.image.shape()),
        ));
    }
    let max_label = dataset.iter().map(|s| s.label).max().unwrap_or(0);
    let classes = config.classes.unwrap_or(max_label + 1);
    if max_label >= classes {
        return Err(Error::ClassOutOfRange {
            index: max_label,
            classes,
        });
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }

    let mut model = config.arch.build(input_shape, classes, config.seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((dataset.len() as f64) * config.val_fraction).round() as usize;
    let n_val = n_val.min(dataset.len().saturating_sub(1));
    let (train_idx, val_idx) = order.split_at(dataset.len() - n_val);
    let mut train_idx = train_idx.to_vec();

    let mut velocity: Vec<Vec<Vec<f32>>> = model
        .layers()
        .iter()
        .map(|l| l.params.iter().map(|p| vec![0.0; p.len()]).collect())
        .collect();

    for _ in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        for batch in train_idx.chunks(config.batch_size) {
            let grads = batch_gradients(&model, dataset, batch)?;
            let scale = 1.0 / batch.len() as f32;
            for ((layer, vel), grad) in model.layers_mut().iter_mut().zip(&mut velocity).zip(&grads) {
                for ((param, v), g) in layer.params.iter_mut().zip(vel).zip(grad) {
                    let p = param.data_mut();
                    for i in 0..p.len() {
                        v[i] = config.momentum * v[i] + (g[i] as f32) * scale;
                        p[i] -= config.learning_rate * v[i];
                    }
                }
            }
        }
    }

    let pick = |idx: &[usize]| idx.iter().map(|&i| dataset[i].clone()).collect::<Vec<_>>();
    let train_set = pick(&train_idx);
    let val_set = pick(val_idx);
    model.meta.epochs = config.epochs;
    model.meta.dataset = config.dataset.clone();
    model.meta.train_accuracy = accuracy(&model, &train_set)?;
    model.meta.val_accuracy = if val_set.is_empty() {
        model.meta.train_accuracy
    } else {
        accuracy(&model, &val_set)?
    };
    model.meta.channel_mean = channel_mean(train_set.iter().map(|s| &s.image));
    Ok(model)
}

/// Summed (not averaged) parameter gradients of the batch loss, in `f64`.
fn batch_gradients(
    model: &ModelGraph,
    dataset: &[LabeledImage],
    batch: &[usize],
) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut acc: Vec<Vec<Vec<f64>>> = model
        .layers()
        .iter()
        .map(|l| l.params.iter().map(|p| vec![0.0; p.len()]).collect())
        .collect();
    for &i in batch {
        let sample = &dataset[i];
        let mut tape = Tape::new();
        let param_ids: Vec<Vec<TensorId>> = model
            .layers()
            .iter()
            .map(|l| l.params.iter().map(|p| tape.leaf(p.clone(), true)).collect())
            .collect();
        let x = tape.leaf(sample.image.clone(), false);
        let logits = model.record(&mut tape, x, 0, Some(&param_ids))?;
        let loss = tape.apply(Op::CrossEntropy(sample.label), &[logits])?;
        let mut grads = tape.backward(loss)?;
        for (layer_acc, ids) in acc.iter_mut().zip(&param_ids) {
            for (a, &id) in layer_acc.iter_mut().zip(ids) {
                let g: Tensor = grads.take(id)?;
                for (s, &v) in a.iter_mut().zip(g.data()) {
                    *s += v as f64;
                }
            }
        }
    }
    Ok(acc)
}

/// Fraction of samples whose argmax logit equals the label.
pub fn accuracy(model: &ModelGraph, samples: &[LabeledImage]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for s in samples {
        if model.forward(&s.image)?.argmax() == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, seed: u64) -> Vec<LabeledImage> {
        // class 0: bright left half, class 1: bright right half
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 2;
                let mut data = vec![0.0f32; 3 * 8 * 8];
                for c in 0..3 {
                    for y in 0..8 {
                        for x in 0..8 {
                            let lit = (x < 4) == (label == 0);
                            let base = if lit { 0.8 } else { 0.2 };
                            data[(c * 8 + y) * 8 + x] = base + rng.random_range(-0.1..0.1);
                        }
                    }
                }
                LabeledImage {
                    image: Tensor::from_vec(&[3, 8, 8], data).unwrap(),
                    label,
                }
            })
            .collect()
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let data = blobs(10, 1);
        let cfg = TrainConfig {
            epochs: 0,
            seed: 3,
            ..Default::default()
        };
        let trained = train_toy(&data, &cfg).unwrap();
        let init = Arch::ToyVgg.build([3, 8, 8], 2, 3).unwrap();
        assert_eq!(trained.layers(), init.layers());
    }

    #[test]
    fn separable_blobs_reach_high_accuracy() {
        let data = blobs(200, 2);
        let cfg = TrainConfig {
            arch: Arch::ToyPlain,
            epochs: 5,
            seed: 1,
            ..Default::default()
        };
        let m = train_toy(&data, &cfg).unwrap();
        assert!(m.meta.val_accuracy >= 0.99, "val acc {}", m.meta.val_accuracy);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(40, 5);
        let cfg = TrainConfig {
            arch: Arch::ToyPlain,
            epochs: 2,
            seed: 4,
            ..Default::default()
        };
        assert_eq!(train_toy(&data, &cfg).unwrap(), train_toy(&data, &cfg).unwrap());
    }

    #[test]
    fn empty_and_mismatched_sets_rejected() {
        assert!(train_toy(&[], &TrainConfig::default()).is_err());
        let mut data = blobs(4, 1);
        data[1].image = Tensor::zeros(&[3, 16, 16]);
        assert!(train_toy(&data, &TrainConfig::default()).is_err());
    }
}
