//! Small CNN pipelines with named, targetable layers.

mod arch;
mod checkpoint;
mod train;

pub use arch::Arch;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{accuracy, train_toy, TrainConfig};

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::ops::{softmax, Op};
use crate::tape::{Tape, TensorId};
use crate::tensor::Tensor;

/// Layer operation. Parameterised kinds carry `[weight, bias]` in
/// [`Layer::params`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv2d { stride: usize, pad: usize },
    Relu,
    MaxPool2d { size: usize, stride: usize },
    Flatten,
    Dense,
    GlobalAvgPool,
}

impl LayerKind {
    pub(crate) fn op(&self) -> Op {
        match *self {
            LayerKind::Conv2d { stride, pad } => Op::Conv2d { stride, pad },
            LayerKind::Relu => Op::Relu,
            LayerKind::MaxPool2d { size, stride } => Op::MaxPool2d { size, stride },
            LayerKind::Flatten => Op::Flatten,
            LayerKind::Dense => Op::Dense,
            LayerKind::GlobalAvgPool => Op::GlobalAvgPool,
        }
    }

    fn param_count(&self) -> usize {
        match self {
            LayerKind::Conv2d { .. } | LayerKind::Dense => 2,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
    pub params: Vec<Tensor>,
}

impl Layer {
    pub fn new(name: impl Into<String>, kind: LayerKind, params: Vec<Tensor>) -> Self {
        Self {
            name: name.into(),
            kind,
            params,
        }
    }
}

/// Training provenance stored alongside the weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub arch: String,
    pub dataset: String,
    pub epochs: usize,
    pub seed: u64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    /// Per-channel mean of the training images.
    pub channel_mean: Vec<f32>,
}

/// An ordered layer pipeline mapping `(C, H, W)` inputs to `C` logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    layers: Vec<Layer>,
    class_count: usize,
    input_shape: [usize; 3],
    pub meta: TrainingMeta,
}

/// Target-layer activations and class-score gradients from one pass.
#[derive(Debug, Clone)]
pub struct ActivationTrace {
    pub target_layer: String,
    /// `A^k` at the target layer, shape `(K, s, s)`.
    pub activations: Tensor,
    /// d(pre-softmax logit of the class) / dA, same shape as `activations`.
    pub grads: Tensor,
    pub logits: Tensor,
    pub probs: Tensor,
}

impl ModelGraph {
    /// Validates names, parameter arity and that a zero input produces
    /// `class_count` logits.
    pub fn new(input_shape: [usize; 3], class_count: usize, layers: Vec<Layer>) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::Config("class count must be positive".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layers[..i].iter().any(|l| l.name == layer.name) {
                return Err(Error::Config(format!("duplicate layer name `{}`", layer.name)));
            }
            if layer.params.len() != layer.kind.param_count() {
                return Err(Error::Config(format!(
                    "layer `{}` expects {} parameter tensors, got {}",
                    layer.name,
                    layer.kind.param_count(),
                    layer.params.len()
                )));
            }
        }
        let model = Self {
            layers,
            class_count,
            input_shape,
            meta: TrainingMeta::default(),
        };
        let logits = model.forward(&Tensor::zeros(&input_shape))?;
        if logits.shape() != [class_count] {
            return Err(shape_err(
                "model",
                format!("pipeline yields {:?}, expected [{class_count}] logits", logits.shape()),
            ));
        }
        Ok(model)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLayer(name.to_string()))
    }

    /// The rectified output of the last convolution (or the convolution
    /// itself when nothing rectifies it).
    pub fn default_target_layer(&self) -> Option<&str> {
        let conv = self
            .layers
            .iter()
            .rposition(|l| matches!(l.kind, LayerKind::Conv2d { .. }))?;
        match self.layers.get(conv + 1) {
            Some(next) if next.kind == LayerKind::Relu => Some(&next.name),
            _ => Some(&self.layers[conv].name),
        }
    }

    pub fn resolve_target(&self, name: Option<&str>) -> Result<String> {
        match name {
            Some(n) => {
                self.layer_index(n)?;
                Ok(n.to_string())
            }
            None => self
                .default_target_layer()
                .map(str::to_string)
                .ok_or_else(|| Error::Config("model has no convolutional layer".into())),
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input_shape {
            return Err(shape_err(
                "model",
                format!("input shape {:?}, expected {:?}", x.shape(), self.input_shape),
            ));
        }
        Ok(())
    }

    pub fn check_class(&self, class_index: usize) -> Result<()> {
        if class_index >= self.class_count {
            return Err(Error::ClassOutOfRange {
                index: class_index,
                classes: self.class_count,
            });
        }
        Ok(())
    }

    /// Applies layers `from..to` without recording.
    pub fn forward_range(&self, x: &Tensor, from: usize, to: usize) -> Result<Tensor> {
        let mut cur = x.clone();
        for layer in &self.layers[from..to] {
            let mut args = vec![&cur];
            args.extend(layer.params.iter());
            cur = crate::ops::forward_op(&layer.kind.op(), &args)?;
        }
        Ok(cur)
    }

    /// Logits for one input.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        self.forward_range(x, 0, self.layers.len())
    }

    pub fn probabilities(&self, x: &Tensor) -> Result<Tensor> {
        Ok(Tensor::vector(softmax(self.forward(x)?.data())))
    }

    /// Pre-softmax score of one class.
    pub fn class_score(&self, x: &Tensor, class_index: usize) -> Result<f32> {
        self.check_class(class_index)?;
        Ok(self.forward(x)?.data()[class_index])
    }

    /// Output of the named layer.
    pub fn activations(&self, x: &Tensor, layer: &str) -> Result<Tensor> {
        self.check_input(x)?;
        let idx = self.layer_index(layer)?;
        self.forward_range(x, 0, idx + 1)
    }

    /// Logits computed from a given output of layer `layer`, i.e. running
    /// only the layers after it.
    pub fn forward_from(&self, layer: &str, activation: &Tensor) -> Result<Tensor> {
        let idx = self.layer_index(layer)?;
        self.forward_range(activation, idx + 1, self.layers.len())
    }

    /// Records layers `from..` on `tape`, starting at `input`. With
    /// `params = Some(ids)` the given leaves stand in for each layer's
    /// parameters; otherwise parameters are added as constants.
    pub fn record(
        &self,
        tape: &mut Tape,
        input: TensorId,
        from: usize,
        params: Option<&[Vec<TensorId>]>,
    ) -> Result<TensorId> {
        let mut cur = input;
        for (i, layer) in self.layers.iter().enumerate().skip(from) {
            let mut args = vec![cur];
            match params {
                Some(p) => args.extend(p[i].iter().copied()),
                None => {
                    for t in &layer.params {
                        args.push(tape.leaf(t.clone(), false));
                    }
                }
            }
            cur = tape.apply(layer.kind.op(), &args)?;
        }
        Ok(cur)
    }

    /// Pre-softmax logit of `class_index` and its gradient with respect to
    /// the input.
    pub fn input_gradient(&self, x: &Tensor, class_index: usize) -> Result<(f32, Tensor)> {
        self.check_input(x)?;
        self.check_class(class_index)?;
        let mut tape = Tape::new();
        let xid = tape.leaf(x.clone(), true);
        let logits = self.record(&mut tape, xid, 0, None)?;
        let score = tape.apply(Op::Select(class_index), &[logits])?;
        let value = tape.value(score)?.data()[0];
        let mut grads = tape.backward(score)?;
        Ok((value, grads.take(xid)?))
    }

    /// Activations at `target_layer` and the gradient of the class logit
    /// with respect to them.
    pub fn forward_with_trace(
        &self,
        x: &Tensor,
        class_index: usize,
        target_layer: &str,
    ) -> Result<ActivationTrace> {
        self.check_class(class_index)?;
        let activations = self.activations(x, target_layer)?;
        let (logits, grads) = self.trace_from(target_layer, &activations, class_index)?;
        let probs = Tensor::vector(softmax(logits.data()));
        Ok(ActivationTrace {
            target_layer: target_layer.to_string(),
            activations,
            grads,
            logits,
            probs,
        })
    }

    /// Logits and d(logit_c)/dA when the target layer outputs `activation`.
    pub fn trace_from(
        &self,
        target_layer: &str,
        activation: &Tensor,
        class_index: usize,
    ) -> Result<(Tensor, Tensor)> {
        self.check_class(class_index)?;
        let idx = self.layer_index(target_layer)?;
        let mut tape = Tape::new();
        let aid = tape.leaf(activation.clone(), true);
        let logits = self.record(&mut tape, aid, idx + 1, None)?;
        let score = tape.apply(Op::Select(class_index), &[logits])?;
        let logits = tape.value(logits)?.clone();
        let mut grads = tape.backward(score)?;
        Ok((logits, grads.take(aid)?))
    }

    /// Gradient of the post-softmax probability of `class_index` with
    /// respect to the target activations.
    pub fn probability_trace_grad(
        &self,
        x: &Tensor,
        class_index: usize,
        target_layer: &str,
    ) -> Result<Tensor> {
        self.check_class(class_index)?;
        let activation = self.activations(x, target_layer)?;
        let idx = self.layer_index(target_layer)?;
        let mut tape = Tape::new();
        let aid = tape.leaf(activation, true);
        let logits = self.record(&mut tape, aid, idx + 1, None)?;
        let probs = tape.apply(Op::Softmax, &[logits])?;
        let p = tape.apply(Op::Select(class_index), &[probs])?;
        tape.backward(p)?.take(aid)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params.iter())
            .map(Tensor::len)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// conv with a single identity tap, relu, flatten, dense.
    fn identity_net(dense: Tensor) -> ModelGraph {
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let layers = vec![
            Layer::new(
                "conv",
                LayerKind::Conv2d { stride: 1, pad: 1 },
                vec![Tensor::from_vec(&[1, 1, 3, 3], w).unwrap(), Tensor::zeros(&[1])],
            ),
            Layer::new("relu", LayerKind::Relu, vec![]),
            Layer::new("flat", LayerKind::Flatten, vec![]),
            Layer::new("fc", LayerKind::Dense, vec![dense, Tensor::zeros(&[2])]),
        ];
        ModelGraph::new([1, 2, 2], 2, layers).unwrap()
    }

    #[test]
    fn identity_net_grads_are_dense_row() {
        let dense = Tensor::from_vec(&[2, 4], vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 0.0, 2.0]).unwrap();
        let m = identity_net(dense);
        let x = Tensor::from_vec(&[1, 2, 2], vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let tr = m.forward_with_trace(&x, 1, "relu").unwrap();
        assert_eq!(tr.grads.data(), &[-1.0, 0.5, 0.0, 2.0]);
        assert_eq!(tr.activations.data(), x.data());
        assert!((tr.probs.sum() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn zero_dense_gives_zero_grads_and_logits() {
        let m = identity_net(Tensor::zeros(&[2, 4]));
        let x = Tensor::full(&[1, 2, 2], 0.3);
        let tr = m.forward_with_trace(&x, 0, "relu").unwrap();
        assert!(tr.grads.data().iter().all(|&g| g == 0.0));
        assert!(tr.logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unknown_layer_and_bad_class() {
        let m = identity_net(Tensor::zeros(&[2, 4]));
        let x = Tensor::zeros(&[1, 2, 2]);
        assert!(matches!(
            m.forward_with_trace(&x, 0, "nope"),
            Err(Error::UnknownLayer(_))
        ));
        assert!(matches!(
            m.forward_with_trace(&x, 2, "relu"),
            Err(Error::ClassOutOfRange { index: 2, classes: 2 })
        ));
    }

    #[test]
    fn default_target_is_rectified_last_conv() {
        let m = identity_net(Tensor::zeros(&[2, 4]));
        assert_eq!(m.default_target_layer(), Some("relu"));
    }

    #[test]
    fn duplicate_names_rejected() {
        let layers = vec![
            Layer::new("a", LayerKind::Flatten, vec![]),
            Layer::new("a", LayerKind::Flatten, vec![]),
        ];
        assert!(ModelGraph::new([1, 1, 1], 1, layers).is_err());
    }

    #[test]
    fn trace_uses_logit_not_probability() {
        let dense = Tensor::from_vec(&[2, 4], vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 0.0, 2.0]).unwrap();
        let m = identity_net(dense);
        let x = Tensor::from_vec(&[1, 2, 2], vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let tr = m.forward_with_trace(&x, 0, "relu").unwrap();
        let pgrad = m.probability_trace_grad(&x, 0, "relu").unwrap();
        assert!(tr.grads.max_abs_diff(&pgrad).unwrap() > 1e-3);
        // softmax chain rule: dp0/dA = p0 * (dz0/dA - sum_j p_j dz_j/dA)
        let p = tr.probs.data();
        let rows = [[1.0, 2.0, 3.0, 4.0], [-1.0, 0.5, 0.0, 2.0]];
        for i in 0..4 {
            let mix = p[0] * rows[0][i] + p[1] * rows[1][i];
            let want = p[0] * (rows[0][i] - mix);
            assert!((pgrad.data()[i] - want).abs() < 1e-6);
        }
    }
}
