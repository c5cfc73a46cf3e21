//! Reverse-mode differentiation over recorded primitive ops.
//!
//! A [`Tape`] owns every value produced while it records. Leaves are added
//! with [`Tape::leaf`]; [`Tape::apply`] evaluates an [`Op`] and appends a
//! node. [`Tape::backward`] walks the nodes in strict reverse recording order.

use crate::error::{Error, Result};
use crate::ops::{backward_op, forward_op, Op};
use crate::tensor::Tensor;

/// Handle to a value stored on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TensorId(usize);

impl TensorId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    inputs: Vec<TensorId>,
    output: TensorId,
}

#[derive(Debug, Default)]
pub struct Tape {
    values: Vec<Tensor>,
    requires_grad: Vec<bool>,
    nodes: Vec<Node>,
    paused: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an input value. Gradients only flow to values that depend on a
    /// leaf created with `requires_grad = true`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> TensorId {
        self.push(value, requires_grad)
    }

    fn push(&mut self, value: Tensor, requires_grad: bool) -> TensorId {
        self.values.push(value);
        self.requires_grad.push(requires_grad);
        TensorId(self.values.len() - 1)
    }

    /// Temporarily stop recording: `apply` still evaluates and stores the
    /// result, but it is a constant as far as `backward` is concerned.
    pub fn set_recording(&mut self, on: bool) {
        self.paused = !on;
    }

    pub fn value(&self, id: TensorId) -> Result<&Tensor> {
        self.values.get(id.0).ok_or(Error::UnknownTensor(id.0))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn apply(&mut self, op: Op, inputs: &[TensorId]) -> Result<TensorId> {
        let args = inputs
            .iter()
            .map(|&id| self.value(id))
            .collect::<Result<Vec<_>>>()?;
        let out = forward_op(&op, &args)?;
        let requires = !self.paused && inputs.iter().any(|id| self.requires_grad[id.0]);
        let id = self.push(out, requires);
        if requires {
            self.nodes.push(Node {
                op,
                inputs: inputs.to_vec(),
                output: id,
            });
        }
        Ok(id)
    }

    /// Gradients of the scalar `root` with respect to every value on the
    /// tape. Accumulators start at zero on every call.
    pub fn backward(&self, root: TensorId) -> Result<Gradients> {
        let root_value = self.value(root)?;
        if root_value.len() != 1 {
            return Err(Error::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.values.len()];
        grads[root.0] = Some(Tensor::full(root_value.shape(), 1.0));

        for node in self.nodes.iter().rev() {
            if node.output.0 > root.0 {
                continue;
            }
            let Some(upstream) = grads[node.output.0].take() else {
                continue;
            };
            let args: Vec<&Tensor> = node.inputs.iter().map(|id| &self.values[id.0]).collect();
            let needs: Vec<bool> = node.inputs.iter().map(|id| self.requires_grad[id.0]).collect();
            let local = backward_op(&node.op, &args, &self.values[node.output.0], &upstream, &needs)?;
            grads[node.output.0] = Some(upstream);
            for (id, g) in node.inputs.iter().zip(local) {
                let Some(g) = g else { continue };
                grads[id.0] = Some(match grads[id.0].take() {
                    Some(acc) => acc.add(&g)?,
                    None => g,
                });
            }
        }
        Ok(Gradients {
            shapes: self.values.iter().map(|v| v.shape().to_vec()).collect(),
            grads,
        })
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    shapes: Vec<Vec<usize>>,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `id`; values the root does not depend on get zeros.
    pub fn get(&self, id: TensorId) -> Result<Tensor> {
        let shape = self.shapes.get(id.0).ok_or(Error::UnknownTensor(id.0))?;
        Ok(self.grads[id.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(shape)))
    }

    pub fn take(&mut self, id: TensorId) -> Result<Tensor> {
        let shape = self.shapes.get(id.0).ok_or(Error::UnknownTensor(id.0))?;
        Ok(self.grads[id.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(shape)))
    }
}
