//! Parameter storage and the MLP used by every method.

use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::{SeededRng, Stream};
use crate::scalar::Scalar;

/// Width of each hidden layer in the default classifier.
pub const DEFAULT_HIDDEN: [usize; 2] = [256, 256];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Option<Tensor<T>>,
    pub(crate) m: Tensor<T>,
    pub(crate) v: Tensor<T>,
}

/// All trainable tensors of a model plus their optimizer state.
#[derive(Debug, Clone, Default)]
pub struct ModelParams<T> {
    params: Vec<Param<T>>,
    pub(crate) step: u64,
}

/// Tape handles for every parameter, valid for one tape.
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            step: 0,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let (r, c) = value.shape();
        self.params.push(Param {
            name: name.into(),
            value,
            grad: None,
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Number of optimizer steps taken so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Place every parameter on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape<T>) -> Bound {
        Bound(self.params.iter().map(|p| tape.param(p.value.clone())).collect())
    }

    /// Move gradients out of a backward sweep into the parameter slots.
    pub fn store_grads(&mut self, grads: &mut Gradients<T>, bound: &Bound) -> Result<()> {
        if bound.0.len() != self.params.len() {
            return Err(Error::Contract("bound handles do not match parameter set".into()));
        }
        for (p, &var) in self.params.iter_mut().zip(&bound.0) {
            let g = grads
                .take(var)
                .unwrap_or_else(|| Tensor::zeros(p.value.rows(), p.value.cols()));
            if g.shape() != p.value.shape() {
                return Err(Error::Shape {
                    op: "store_grads",
                    left: p.value.shape(),
                    right: g.shape(),
                });
            }
            p.grad = Some(g);
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    /// Flat copy of every value, in parameter order.
    pub fn flatten(&self) -> Vec<T> {
        self.params.iter().flat_map(|p| p.value.data().iter().copied()).collect()
    }

    /// Overwrite every value from a flat vector laid out like [`Self::flatten`].
    pub fn assign_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::Contract("flat parameter vector has wrong length".into()));
        }
        let mut off = 0;
        for p in &mut self.params {
            let n = p.value.len();
            p.value.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Little-endian bytes of every value; identical seeds give identical bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.flatten()
            .into_iter()
            .flat_map(|v| v.as_f64().to_le_bytes())
            .collect()
    }
}

/// Fully connected ReLU network. The last layer has no activation.
#[derive(Debug, Clone)]
pub struct Mlp {
    dims: Vec<usize>,
    layers: Vec<(ParamId, ParamId)>,
}

fn xavier_uniform<T: Scalar>(rng: &mut SeededRng, fan_in: usize, fan_out: usize) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| T::lit(rng.uniform_range(-bound, bound)))
        .collect();
    Tensor::from_vec(fan_in, fan_out, data).expect("xavier shape")
}

impl Mlp {
    /// Register the layers of a `dims[0] -> ... -> dims[last]` network in
    /// `params`. Weights are Xavier-uniform, biases zero. Parameter names
    /// are `W1, b1, W2, ...`, prefixed with `"{prefix}."` when non-empty.
    pub fn init<T: Scalar>(
        params: &mut ModelParams<T>,
        prefix: &str,
        dims: &[usize],
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("an MLP needs at least input and output widths".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Config(format!("MLP widths must be positive, got {dims:?}")));
        }
        let name = |kind: &str, i: usize| {
            if prefix.is_empty() {
                format!("{kind}{i}")
            } else {
                format!("{prefix}.{kind}{i}")
            }
        };
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, w) in dims.windows(2).enumerate() {
            let weight = params.add(name("W", i + 1), xavier_uniform(rng, w[0], w[1]));
            let bias = params.add(name("b", i + 1), Tensor::zeros(1, w[1]));
            layers.push((weight, bias));
        }
        Ok(Self {
            dims: dims.to_vec(),
            layers,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("non-empty dims")
    }

    /// Layer parameter ids `(weight, bias)` in order.
    pub fn layers(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }

    /// Pre-activation output of the last layer.
    pub fn logits<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, x: Var) -> Result<Var> {
        let (_, cols) = tape.shape(x);
        if cols != self.input_dim() {
            return Err(Error::Shape {
                op: "mlp input",
                left: tape.shape(x),
                right: (cols, self.input_dim()),
            });
        }
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let z = tape.matmul(h, bound.var(w))?;
            let z = tape.add(z, bound.var(b))?;
            h = if i < last { tape.relu(z) } else { z };
        }
        Ok(h)
    }

    /// `sigmoid(logits)`: scores in `(0, 1)`.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, x: Var) -> Result<Var> {
        let z = self.logits(tape, bound, x)?;
        Ok(tape.sigmoid(z))
    }
}

/// Build the default `d -> hidden... -> 1` classifier.
pub fn init_mlp_params<T: Scalar>(d: usize, hidden: &[usize], seed: u64) -> Result<(ModelParams<T>, Mlp)> {
    if d == 0 {
        return Err(Error::Config("feature count must be at least 1".into()));
    }
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(d);
    dims.extend_from_slice(hidden);
    dims.push(1);
    let mut rng = SeededRng::new(seed, Stream::Init);
    let mut params = ModelParams::new();
    let mlp = Mlp::init(&mut params, "", &dims, &mut rng)?;
    Ok((params, mlp))
}
