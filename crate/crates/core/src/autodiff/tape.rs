//! Matrix-valued reverse-mode tape.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and `backward` is a single reverse sweep.

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine { x: Var, scale: T },
    Sigmoid(Var),
    Relu(Var),
    Log(Var),
    Exp(Var),
    Square(Var),
    Abs(Var),
    Clamp { x: Var, lo: T, hi: T },
    Mean(Var),
    Sum(Var),
    ColMean(Var),
    RowMean(Var),
    MaskedMean { x: Var, rows: Vec<usize> },
    PairwiseDiff(Var),
    GradReverse { x: Var, lambda: T },
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Result of a backward sweep: one optional gradient per node.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

fn broadcast_shape(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<(usize, usize)> {
    let dim = |x: usize, y: usize| match (x, y) {
        _ if x == y => Some(x),
        (1, y) => Some(y),
        (x, 1) => Some(x),
        _ => None,
    };
    match (dim(a.0, b.0), dim(a.1, b.1)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(Error::Shape {
            op,
            left: a,
            right: b,
        }),
    }
}

fn zip_broadcast<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    shape: (usize, usize),
    f: impl Fn(T, T) -> T,
) -> Tensor<T> {
    let (rows, cols) = shape;
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let ra = a.row(if ar == 1 { 0 } else { r });
        let rb = b.row(if br == 1 { 0 } else { r });
        for c in 0..cols {
            let va = ra[if ac == 1 { 0 } else { c }];
            let vb = rb[if bc == 1 { 0 } else { c }];
            out.push(f(va, vb));
        }
    }
    Tensor::from_vec(rows, cols, out).expect("broadcast shape")
}

/// Sum `g` down to `shape` along broadcast dimensions.
fn reduce_to<T: Scalar>(g: Tensor<T>, shape: (usize, usize)) -> Tensor<T> {
    if g.shape() == shape {
        return g;
    }
    let mut out = Tensor::zeros(shape.0, shape.1);
    let (rows, cols) = g.shape();
    for r in 0..rows {
        let tr = if shape.0 == 1 { 0 } else { r };
        for c in 0..cols {
            let tc = if shape.1 == 1 { 0 } else { c };
            let v = out.get(tr, tc) + g.get(r, c);
            out.set(tr, tc, v);
        }
    }
    out
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf: `backward` produces a gradient for it.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-trainable leaf (data, labels, masks).
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&mut self, value: T) -> Var {
        self.constant(Tensor::scalar(value))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        let shape = broadcast_shape(name, self.shape(a), self.shape(b))?;
        let value = zip_broadcast(self.value(a), self.value(b), shape, f);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, op, rg))
    }

    /// Elementwise `a + b` with row/column/scalar broadcasting.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: T, shift: T) -> Var {
        let value = self.value(x).map(|v| scale * v + shift);
        let rg = self.rg(x);
        self.push(value, Op::Affine { x, scale }, rg)
    }

    pub fn scale(&mut self, x: Var, by: T) -> Var {
        self.affine(x, by, T::zero())
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, x: Var) -> Var {
        self.affine(x, -T::one(), T::one())
    }

    fn unary(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let value = self.value(x).map(f);
        let rg = self.rg(x);
        self.push(value, op, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(T::zero()), Op::Relu(x))
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.ln(), Op::Log(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.exp(), Op::Exp(x))
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, |v| v * v, Op::Square(x))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.abs(), Op::Abs(x))
    }

    /// Clamp into `[lo, hi]`; the gradient is zero outside the interval.
    /// NaN passes through unchanged.
    pub fn clamp(&mut self, x: Var, lo: T, hi: T) -> Var {
        self.unary(x, |v| if v.is_nan() { v } else { v.max(lo).min(hi) }, Op::Clamp { x, lo, hi })
    }

    /// Mean of all entries, as `1 x 1`.
    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let m = v.sum() / T::from_count(v.len());
        let rg = self.rg(x);
        self.push(Tensor::scalar(m), Op::Mean(x), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    /// Per-column mean, `n x k -> 1 x k`.
    pub fn col_mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let (rows, cols) = v.shape();
        let mut out = Tensor::zeros(1, cols);
        for r in 0..rows {
            for (o, &e) in out.data_mut().iter_mut().zip(v.row(r)) {
                *o += e;
            }
        }
        let n = T::from_count(rows);
        out.data_mut().iter_mut().for_each(|o| *o /= n);
        let rg = self.rg(x);
        self.push(out, Op::ColMean(x), rg)
    }

    /// Per-row mean, `n x k -> n x 1`.
    pub fn row_mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let (rows, cols) = v.shape();
        let k = T::from_count(cols);
        let data = (0..rows).map(|r| v.row(r).iter().copied().sum::<T>() / k).collect();
        let out = Tensor::from_vec(rows, 1, data).expect("row mean shape");
        let rg = self.rg(x);
        self.push(out, Op::RowMean(x), rg)
    }

    /// Mean of all entries in the rows where `mask` is true, as `1 x 1`.
    pub fn masked_mean(&mut self, x: Var, mask: &[bool]) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        if mask.len() != rows {
            return Err(Error::Shape {
                op: "masked_mean",
                left: (rows, cols),
                right: (mask.len(), 1),
            });
        }
        let selected: Vec<usize> = (0..rows).filter(|&r| mask[r]).collect();
        if selected.is_empty() {
            return Err(Error::Contract("masked_mean over an empty selection".into()));
        }
        let v = self.value(x);
        let total: T = selected.iter().map(|&r| v.row(r).iter().copied().sum::<T>()).sum();
        let m = total / T::from_count(selected.len() * cols);
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(m), Op::MaskedMean { x, rows: selected }, rg))
    }

    /// `n x 1 -> n x n` with entry `(i, j) = x_i - x_j`.
    pub fn pairwise_diff(&mut self, x: Var) -> Result<Var> {
        let (n, c) = self.shape(x);
        if c != 1 {
            return Err(Error::Shape {
                op: "pairwise_diff",
                left: (n, c),
                right: (n, 1),
            });
        }
        let v = self.value(x).data();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(v[i] - v[j]);
            }
        }
        let value = Tensor::from_vec(n, n, data)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::PairwiseDiff(x), rg))
    }

    /// Identity forward; multiplies the incoming gradient by `-lambda`.
    pub fn grad_reverse(&mut self, x: Var, lambda: T) -> Var {
        let value = self.value(x).clone();
        let rg = self.rg(x);
        self.push(value, Op::GradReverse { x, lambda }, rg)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::Contract("loss node is not on this tape".into()));
        }
        if self.shape(loss) != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let contributions = self.local_backward(idx, &g)?;
            grads[idx] = Some(g);
            for (input, contrib) in contributions {
                if !self.rg(input) {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
        // Only trainable leaves keep their gradients.
        for (idx, node) in self.nodes.iter().enumerate() {
            if !(matches!(node.op, Op::Leaf) && node.requires_grad) {
                grads[idx] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn local_backward(&self, idx: usize, g: &Tensor<T>) -> Result<Vec<(Var, Tensor<T>)>> {
        let node = &self.nodes[idx];
        let out = &node.value;
        let elementwise = |x: Var, f: &dyn Fn(T, T, T) -> T| -> Tensor<T> {
            // f(input, output, upstream)
            let xin = self.value(x);
            let data = xin
                .data()
                .iter()
                .zip(out.data())
                .zip(g.data())
                .map(|((&i, &o), &u)| f(i, o, u))
                .collect();
            Tensor::from_vec(out.rows(), out.cols(), data).expect("elementwise grad shape")
        };
        let grads = match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let mut v = Vec::with_capacity(2);
                if self.rg(*a) {
                    v.push((*a, g.matmul_nt(self.value(*b))?));
                }
                if self.rg(*b) {
                    v.push((*b, self.value(*a).matmul_tn(g)?));
                }
                v
            }
            Op::Add(a, b) => vec![
                (*a, reduce_to(g.clone(), self.shape(*a))),
                (*b, reduce_to(g.clone(), self.shape(*b))),
            ],
            Op::Sub(a, b) => vec![
                (*a, reduce_to(g.clone(), self.shape(*a))),
                (*b, reduce_to(g.map(|v| -v), self.shape(*b))),
            ],
            Op::Mul(a, b) => {
                let shape = out.shape();
                let ga = zip_broadcast(g, self.value(*b), shape, |u, y| u * y);
                let gb = zip_broadcast(g, self.value(*a), shape, |u, x| u * x);
                vec![
                    (*a, reduce_to(ga, self.shape(*a))),
                    (*b, reduce_to(gb, self.shape(*b))),
                ]
            }
            Op::Affine { x, scale } => {
                let s = *scale;
                vec![(*x, g.map(|u| u * s))]
            }
            Op::Sigmoid(x) => vec![(*x, elementwise(*x, &|_, o, u| u * o * (T::one() - o)))],
            Op::Relu(x) => vec![(
                *x,
                elementwise(*x, &|i, _, u| if i > T::zero() { u } else { T::zero() }),
            )],
            Op::Log(x) => vec![(*x, elementwise(*x, &|i, _, u| u / i))],
            Op::Exp(x) => vec![(*x, elementwise(*x, &|_, o, u| u * o))],
            Op::Square(x) => vec![(*x, elementwise(*x, &|i, _, u| u * (i + i)))],
            Op::Abs(x) => vec![(
                *x,
                elementwise(*x, &|i, _, u| {
                    if i > T::zero() {
                        u
                    } else if i < T::zero() {
                        -u
                    } else {
                        T::zero()
                    }
                }),
            )],
            Op::Clamp { x, lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                vec![(
                    *x,
                    elementwise(*x, &|i, _, u| if i >= lo && i <= hi { u } else { T::zero() }),
                )]
            }
            Op::Mean(x) => {
                let (r, c) = self.shape(*x);
                let u = g.item() / T::from_count(r * c);
                vec![(*x, Tensor::filled(r, c, u))]
            }
            Op::Sum(x) => {
                let (r, c) = self.shape(*x);
                vec![(*x, Tensor::filled(r, c, g.item()))]
            }
            Op::ColMean(x) => {
                let (r, c) = self.shape(*x);
                let n = T::from_count(r);
                let mut t = Tensor::zeros(r, c);
                for row in 0..r {
                    for col in 0..c {
                        t.set(row, col, g.get(0, col) / n);
                    }
                }
                vec![(*x, t)]
            }
            Op::RowMean(x) => {
                let (r, c) = self.shape(*x);
                let k = T::from_count(c);
                let mut t = Tensor::zeros(r, c);
                for row in 0..r {
                    for col in 0..c {
                        t.set(row, col, g.get(row, 0) / k);
                    }
                }
                vec![(*x, t)]
            }
            Op::MaskedMean { x, rows } => {
                let (r, c) = self.shape(*x);
                let u = g.item() / T::from_count(rows.len() * c);
                let mut t = Tensor::zeros(r, c);
                for &row in rows {
                    for col in 0..c {
                        t.set(row, col, u);
                    }
                }
                vec![(*x, t)]
            }
            Op::PairwiseDiff(x) => {
                let n = self.shape(*x).0;
                let mut t = Tensor::zeros(n, 1);
                for i in 0..n {
                    let mut acc = T::zero();
                    for j in 0..n {
                        // d(x_i - x_j)/dx_i = +1 on row i, -1 on column i.
                        acc += g.get(i, j) - g.get(j, i);
                    }
                    t.set(i, 0, acc);
                }
                vec![(*x, t)]
            }
            Op::GradReverse { x, lambda } => {
                let l = *lambda;
                vec![(*x, g.map(|u| -l * u))]
            }
        };
        Ok(grads)
    }
}
