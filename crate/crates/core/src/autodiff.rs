//! Reverse-mode differentiation over the small, fixed operation set used by
//! the encoder and the two training objectives.
//!
//! A [`Tape`] records nodes in creation order, which is already a topological
//! order. Values are cached during recording; [`Tape::backward`] walks the
//! tape once in reverse and only visits nodes that depend on a requested
//! parameter.
//!
//! The two training objectives are fused nodes ([`ScalarLoss`]) that take the
//! embedding matrix and produce a scalar. They evaluate in row blocks and
//! return their input gradient directly, so no `n × n` intermediate ever
//! lives on the tape.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};

/// Caller-chosen identifier of a trainable leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub u32);

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// A scalar-valued function of one matrix with a hand-derived gradient.
pub trait ScalarLoss: Sync {
    fn name(&self) -> &str;
    fn value(&self, input: &DenseMatrix) -> Result<f64>;
    /// `∂ value / ∂ input`, same shape as `input`.
    fn gradient(&self, input: &DenseMatrix) -> Result<DenseMatrix>;

    /// Both at once; implementations may share work between the two.
    fn value_and_gradient(&self, input: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        Ok((self.value(input)?, self.gradient(input)?))
    }
}

enum Op<'t> {
    Leaf,
    Spmm {
        a: &'t SparseMatrix,
        x: Var,
    },
    /// `(a ∘ W) · x`; `W` is a `1 × nnz(a)` row aligned with `a`'s storage.
    EdgeSpmm {
        a: &'t SparseMatrix,
        weights: Var,
        x: Var,
    },
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Relu(Var),
    Sum(Var),
    /// Input gradient is computed together with the value at record time.
    Loss { input: Var, grad: DenseMatrix },
}

impl Op<'_> {
    fn operands(&self) -> Vec<Var> {
        match *self {
            Op::Leaf => vec![],
            Op::Spmm { x, .. } => vec![x],
            Op::EdgeSpmm { weights, x, .. } => vec![weights, x],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Hadamard(a, b) => vec![a, b],
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::Sigmoid(a)
            | Op::Relu(a)
            | Op::Sum(a) => vec![a],
            Op::Loss { input, .. } => vec![input],
        }
    }
}

struct Node<'t> {
    op: Op<'t>,
    value: Cow<'t, DenseMatrix>,
    param: Option<ParamId>,
}

/// Gradients keyed by parameter, one entry per requested parameter.
#[derive(Debug, Clone, Default)]
pub struct GradientSet {
    grads: BTreeMap<ParamId, DenseMatrix>,
}

impl GradientSet {
    pub fn get(&self, id: ParamId) -> Option<&DenseMatrix> {
        self.grads.get(&id)
    }

    pub fn remove(&mut self, id: ParamId) -> Option<DenseMatrix> {
        self.grads.remove(&id)
    }

    pub fn contains(&self, id: ParamId) -> bool {
        self.grads.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &DenseMatrix)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }
}

#[derive(Default)]
pub struct Tape<'t> {
    nodes: Vec<Node<'t>>,
    params: BTreeMap<ParamId, Var>,
}

impl<'t> Tape<'t> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<'t>, value: Cow<'t, DenseMatrix>) -> Var {
        self.nodes.push(Node {
            op,
            value,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Registers a trainable leaf. The value is borrowed, not copied.
    pub fn param(&mut self, id: ParamId, value: &'t DenseMatrix) -> Result<Var> {
        if self.params.contains_key(&id) {
            return Err(Error::invalid(format!("parameter {id} registered twice")));
        }
        let var = self.push(Op::Leaf, Cow::Borrowed(value));
        self.nodes[var.0].param = Some(id);
        self.params.insert(id, var);
        Ok(var)
    }

    pub fn constant(&mut self, value: &'t DenseMatrix) -> Var {
        self.push(Op::Leaf, Cow::Borrowed(value))
    }

    pub fn constant_owned(&mut self, value: DenseMatrix) -> Var {
        self.push(Op::Leaf, Cow::Owned(value))
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        let m = self.value(v);
        if m.shape() != (1, 1) {
            return Err(Error::invalid(format!("node is {:?}, not a scalar", m.shape())));
        }
        Ok(m.get(0, 0))
    }

    pub fn spmm(&mut self, a: &'t SparseMatrix, x: Var) -> Result<Var> {
        let value = a.spmm(self.value(x))?;
        Ok(self.push(Op::Spmm { a, x }, Cow::Owned(value)))
    }

    pub fn edge_spmm(&mut self, a: &'t SparseMatrix, weights: Var, x: Var) -> Result<Var> {
        let w = self.value(weights);
        if w.rows() != 1 {
            return Err(Error::invalid("edge weights must be a single row"));
        }
        let value = a.spmm_weighted(w.data(), self.value(x))?;
        Ok(self.push(Op::EdgeSpmm { a, weights, x }, Cow::Owned(value)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), Cow::Owned(value)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a), Cow::Owned(value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), Cow::Owned(value)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), Cow::Owned(value)))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(Op::Hadamard(a, b), Cow::Owned(value)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).scale(factor);
        self.push(Op::Scale(a, factor), Cow::Owned(value))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).sigmoid();
        self.push(Op::Sigmoid(a), Cow::Owned(value))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).relu();
        self.push(Op::Relu(a), Cow::Owned(value))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = DenseMatrix::scalar(self.value(a).sum());
        self.push(Op::Sum(a), Cow::Owned(value))
    }

    pub fn loss(&mut self, input: Var, loss: &dyn ScalarLoss) -> Result<Var> {
        let (value, grad) = loss.value_and_gradient(self.value(input))?;
        if grad.shape() != self.value(input).shape() {
            return Err(Error::invalid(format!(
                "{} returned a {:?} gradient for a {:?} input",
                loss.name(),
                grad.shape(),
                self.value(input).shape()
            )));
        }
        Ok(self.push(Op::Loss { input, grad }, Cow::Owned(DenseMatrix::scalar(value))))
    }

    /// Gradient of the scalar `output` with respect to each parameter in
    /// `wrt`. Parameters outside `wrt` get no entry and the parts of the tape
    /// that only feed them are skipped.
    pub fn backward(&self, output: Var, wrt: &[ParamId]) -> Result<GradientSet> {
        if self.value(output).shape() != (1, 1) {
            return Err(Error::invalid(format!(
                "backward needs a scalar output, node is {:?}",
                self.value(output).shape()
            )));
        }
        let wanted: BTreeSet<ParamId> = wrt.iter().copied().collect();
        for id in &wanted {
            if !self.params.contains_key(id) {
                return Err(Error::UnknownParameter(id.0));
            }
        }

        let mut needs = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            needs[i] = match node.param {
                Some(id) => wanted.contains(&id),
                None => node.op.operands().iter().any(|v| needs[v.0]),
            };
        }

        let mut adjoint: Vec<Option<DenseMatrix>> = (0..self.nodes.len()).map(|_| None).collect();
        adjoint[output.0] = Some(DenseMatrix::scalar(1.0));

        for i in (0..=output.0).rev() {
            if !needs[i] {
                continue;
            }
            let Some(g) = adjoint[i].take() else { continue };
            let node = &self.nodes[i];
            if let Some(id) = node.param {
                adjoint[i] = Some(g);
                debug_assert!(wanted.contains(&id));
                continue;
            }
            let mut send = |v: Var, grad: DenseMatrix| -> Result<()> {
                if !needs[v.0] {
                    return Ok(());
                }
                match &mut adjoint[v.0] {
                    Some(acc) => acc.add_assign(&grad),
                    slot @ None => {
                        *slot = Some(grad);
                        Ok(())
                    }
                }
            };
            match node.op {
                Op::Leaf => {}
                Op::Spmm { a, x } => {
                    send(x, a.transpose().spmm(&g)?)?;
                }
                Op::EdgeSpmm { a, weights, x } => {
                    let w = self.value(weights);
                    if needs[x.0] {
                        send(x, a.reweighted(w.data())?.transpose().spmm(&g)?)?;
                    }
                    if needs[weights.0] {
                        let dw = a.sampled_dot(&g, self.value(x))?;
                        send(weights, DenseMatrix::new(1, dw.len(), dw)?)?;
                    }
                }
                Op::MatMul(a, b) => {
                    if needs[a.0] {
                        send(a, g.matmul_nt(self.value(b))?)?;
                    }
                    if needs[b.0] {
                        send(b, self.value(a).matmul_tn(&g)?)?;
                    }
                }
                Op::Transpose(a) => send(a, g.transpose())?,
                Op::Add(a, b) => {
                    if needs[a.0] {
                        send(a, g.clone())?;
                    }
                    send(b, g)?;
                }
                Op::Sub(a, b) => {
                    if needs[b.0] {
                        send(b, g.scale(-1.0))?;
                    }
                    send(a, g)?;
                }
                Op::Hadamard(a, b) => {
                    if needs[a.0] {
                        send(a, g.hadamard(self.value(b))?)?;
                    }
                    if needs[b.0] {
                        send(b, g.hadamard(self.value(a))?)?;
                    }
                }
                Op::Scale(a, f) => send(a, g.scale(f))?,
                Op::Sigmoid(a) => {
                    let s = &node.value;
                    let local = s.map(|v| v * (1.0 - v));
                    send(a, g.hadamard(&local)?)?;
                }
                Op::Relu(a) => {
                    // Subgradient 0 at the kink.
                    let mask = self.value(a).map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    send(a, g.hadamard(&mask)?)?;
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(a).shape();
                    send(a, DenseMatrix::filled(r, c, g.get(0, 0)))?;
                }
                Op::Loss { input, ref grad } => {
                    send(input, grad.scale(g.get(0, 0)))?;
                }
            }
        }

        let mut grads = BTreeMap::new();
        for id in wanted {
            let var = self.params[&id];
            let shape = self.value(var).shape();
            let grad = adjoint[var.0]
                .take()
                .unwrap_or_else(|| DenseMatrix::zeros(shape.0, shape.1));
            grads.insert(id, grad);
        }
        Ok(GradientSet { grads })
    }
}
