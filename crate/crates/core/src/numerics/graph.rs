use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use super::ops::{self, Activation, OpKind};
use super::{NumericsError, Tensor};

/// Named trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    tensors: BTreeMap<String, Tensor>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.tensors.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar entries across all tensors.
    pub fn element_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.values().all(Tensor::all_finite)
    }
}

/// Gradient of a scalar loss w.r.t. every parameter of a [`Params`] set.
pub type Gradients = BTreeMap<String, Tensor>;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Origin {
    Constant,
    Param,
    Op { kind: OpKind, inputs: Vec<Var> },
}

#[derive(Debug)]
struct Node {
    origin: Origin,
    value: Tensor,
    /// Whether any parameter feeds into this node.
    tracked: bool,
}

/// Tape of recorded operations over one parameter set.
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction. Each parameter is bound to at most one node.
pub struct Graph<'p> {
    params: &'p Params,
    nodes: RefCell<Vec<Node>>,
    bound: RefCell<BTreeMap<String, Var>>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p Params) -> Self {
        Self {
            params,
            nodes: RefCell::new(Vec::new()),
            bound: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn params(&self) -> &'p Params {
        self.params
    }

    fn push(&self, origin: Origin, value: Tensor) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        let tracked = match &origin {
            Origin::Constant => false,
            Origin::Param => true,
            Origin::Op { inputs, .. } => inputs.iter().any(|v| nodes[v.0].tracked),
        };
        nodes.push(Node { origin, value, tracked });
        Var(nodes.len() - 1)
    }

    /// Non-trainable input.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(Origin::Constant, value)
    }

    /// Leaf bound to the named parameter.
    pub fn param(&self, name: &str) -> Result<Var, NumericsError> {
        if let Some(&v) = self.bound.borrow().get(name) {
            return Ok(v);
        }
        let value = self
            .params
            .get(name)
            .ok_or_else(|| NumericsError::UnknownParam(name.to_string()))?
            .clone();
        let var = self.push(Origin::Param, value);
        self.bound.borrow_mut().insert(name.to_string(), var);
        Ok(var)
    }

    pub fn value(&self, var: Var) -> Tensor {
        self.nodes.borrow()[var.0].value.clone()
    }

    pub fn shape(&self, var: Var) -> Vec<usize> {
        self.nodes.borrow()[var.0].value.shape().to_vec()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Evaluates `kind` and records it on the tape.
    pub fn apply(&self, kind: OpKind, inputs: &[Var]) -> Result<Var, NumericsError> {
        let value = {
            let nodes = self.nodes.borrow();
            let values: Vec<&Tensor> = inputs.iter().map(|v| &nodes[v.0].value).collect();
            ops::forward(&kind, &values)?
        };
        Ok(self.push(
            Origin::Op {
                kind,
                inputs: inputs.to_vec(),
            },
            value,
        ))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.apply(OpKind::Add, &[a, b])
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.apply(OpKind::Sub, &[a, b])
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.apply(OpKind::Mul, &[a, b])
    }

    pub fn scale(&self, a: Var, s: f64) -> Result<Var, NumericsError> {
        self.apply(OpKind::Scale(s), &[a])
    }

    pub fn offset(&self, a: Var, c: f64) -> Result<Var, NumericsError> {
        self.apply(OpKind::Offset(c), &[a])
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.apply(OpKind::MatMul, &[a, b])
    }

    pub fn bmm(&self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.apply(OpKind::BatchMatMul, &[a, b])
    }

    pub fn transpose(&self, a: Var) -> Result<Var, NumericsError> {
        self.apply(OpKind::Transpose, &[a])
    }

    pub fn conv2d(&self, x: Var, w: Var, stride: usize) -> Result<Var, NumericsError> {
        self.apply(OpKind::Conv2d { stride }, &[x, w])
    }

    pub fn add_bias(&self, x: Var, b: Var) -> Result<Var, NumericsError> {
        self.apply(OpKind::AddBias, &[x, b])
    }

    pub fn activation(&self, x: Var, a: Activation) -> Result<Var, NumericsError> {
        self.apply(OpKind::Activation(a), &[x])
    }

    pub fn relu(&self, x: Var) -> Result<Var, NumericsError> {
        self.activation(x, Activation::Relu)
    }

    pub fn silu(&self, x: Var) -> Result<Var, NumericsError> {
        self.activation(x, Activation::Silu)
    }

    pub fn square(&self, x: Var) -> Result<Var, NumericsError> {
        self.activation(x, Activation::Square)
    }

    pub fn exp(&self, x: Var) -> Result<Var, NumericsError> {
        self.activation(x, Activation::Exp)
    }

    pub fn sum(&self, x: Var) -> Result<Var, NumericsError> {
        self.apply(OpKind::ReduceSum, &[x])
    }

    pub fn mean(&self, x: Var) -> Result<Var, NumericsError> {
        self.apply(OpKind::ReduceMean, &[x])
    }

    pub fn concat(&self, parts: &[Var], axis: usize) -> Result<Var, NumericsError> {
        self.apply(OpKind::Concat { axis }, parts)
    }

    pub fn slice(&self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var, NumericsError> {
        self.apply(OpKind::Slice { axis, start, len }, &[x])
    }

    pub fn softmax(&self, x: Var, axis: usize) -> Result<Var, NumericsError> {
        self.apply(OpKind::Softmax { axis }, &[x])
    }

    pub fn reshape(&self, x: Var, shape: &[usize]) -> Result<Var, NumericsError> {
        self.apply(OpKind::Reshape(shape.to_vec()), &[x])
    }

    pub fn upsample2x(&self, x: Var) -> Result<Var, NumericsError> {
        self.apply(OpKind::Upsample2x, &[x])
    }

    pub fn gather(&self, x: Var, indices: Vec<usize>) -> Result<Var, NumericsError> {
        self.apply(OpKind::Gather(Arc::from(indices)), &[x])
    }

    pub fn segment_sum(&self, x: Var, segments: Vec<Option<usize>>, count: usize) -> Result<Var, NumericsError> {
        self.apply(
            OpKind::SegmentSum {
                segments: Arc::from(segments),
                count,
            },
            &[x],
        )
    }

    pub fn segment_min(&self, x: Var, segments: Vec<Option<usize>>, count: usize) -> Result<Var, NumericsError> {
        self.apply(
            OpKind::SegmentMin {
                segments: Arc::from(segments),
                count,
            },
            &[x],
        )
    }

    /// Reverse pass from a scalar node. Every parameter of the bound set is
    /// present in the result; those the loss never touched get zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumericsError> {
        let nodes = self.nodes.borrow();
        let loss_value = &nodes[loss.0].value;
        if !loss_value.is_scalar() {
            return Err(NumericsError::NonScalarLoss(loss_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(grad) = grads[id].take() else { continue };
            match &nodes[id].origin {
                Origin::Op { kind, inputs } => {
                    let values: Vec<&Tensor> = inputs.iter().map(|v| &nodes[v.0].value).collect();
                    let needs: Vec<bool> = inputs.iter().map(|v| nodes[v.0].tracked).collect();
                    let input_grads = ops::backward(kind, &values, &nodes[id].value, &grad, &needs);
                    for ((input, g), need) in inputs.iter().zip(input_grads).zip(&needs) {
                        let Some(g) = g.filter(|_| *need) else { continue };
                        match &mut grads[input.0] {
                            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                            slot @ None => *slot = Some(g),
                        }
                    }
                }
                Origin::Param => grads[id] = Some(grad),
                Origin::Constant => {}
            }
        }
        let bound = self.bound.borrow();
        let mut out = Gradients::new();
        for (name, value) in self.params.iter() {
            let g = bound
                .get(name)
                .and_then(|v| grads.get(v.0).cloned().flatten())
                .map(|g| Tensor::from_raw(value.shape().to_vec(), g))
                .unwrap_or_else(|| Tensor::zeros(value.shape()));
            out.insert(name.clone(), g);
        }
        Ok(out)
    }
}
