//! Reverse-mode differentiation over a recorded tape of tensor operations.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use super::conv::{
    conv1d_fractional, conv1d_fractional_backward, conv1d_strided, conv1d_strided_backward,
};
use super::loss;
use super::{SeganError, Tensor};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    ConvStrided { x: usize, w: usize, b: usize, stride: usize },
    ConvFractional { x: usize, w: usize, b: usize, stride: usize },
    Concat { a: usize, b: usize },
    PRelu { x: usize, slope: usize },
    LeakyRelu { x: usize, slope: f64 },
    Tanh { x: usize },
    Sigmoid { x: usize },
    Dense { x: usize, w: usize, b: usize },
    Stack { xs: Vec<usize> },
    Add { a: usize, b: usize },
    Scale { x: usize, factor: f64 },
    GanValue { real: usize, fake: usize },
    LsganD { real: usize, fake: usize },
    LsganG { fake: usize },
    L1 { a: usize, b: usize },
    SumSquares { x: usize },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Gradients {
    /// Gradients of trainable parameters, keyed by name.
    pub params: BTreeMap<String, Tensor>,
    nodes: Vec<Option<Tensor>>,
    tape: u64,
}

impl Gradients {
    /// Gradient reaching an input leaf (or any node) created with grad tracking.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        if v.tape != self.tape {
            return None;
        }
        self.nodes.get(v.idx).and_then(Option::as_ref)
    }
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    params: BTreeMap<String, usize>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|&v| f(v)).collect())
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::from_parts(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
}

fn scalar(v: f64) -> Tensor {
    Tensor::from_parts(vec![1], vec![v])
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
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

    fn idx(&self, v: Var) -> Result<usize, SeganError> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(SeganError::GraphError(
                "variable was not recorded on this tape".into(),
            ));
        }
        Ok(v.idx)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn push_derived(&mut self, value: Tensor, op: Op, inputs: &[usize]) -> Var {
        let rg = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.push(value, op, rg)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[self.idx(v).expect("foreign variable")].value
    }

    /// Constant input (no gradient).
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Input leaf whose gradient is reported through [`Gradients::wrt`].
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Named parameter. Recording the same name twice returns the first leaf.
    pub fn param(&mut self, name: &str, t: &Tensor, trainable: bool) -> Var {
        if let Some(&idx) = self.params.get(name) {
            return Var { tape: self.id, idx };
        }
        let v = self.push(t.clone(), Op::Param, trainable);
        self.params.insert(name.to_string(), v.idx);
        v
    }

    /// Same value, cut from the graph.
    pub fn detach(&mut self, v: Var) -> Result<Var, SeganError> {
        let i = self.idx(v)?;
        Ok(self.push(self.nodes[i].value.clone(), Op::Leaf, false))
    }

    pub fn conv_strided(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var, SeganError> {
        let (x, w, b) = (self.idx(x)?, self.idx(w)?, self.idx(b)?);
        let n = &self.nodes;
        let y = conv1d_strided(&n[x].value, &n[w].value, &n[b].value, stride)?;
        Ok(self.push_derived(y, Op::ConvStrided { x, w, b, stride }, &[x, w, b]))
    }

    pub fn conv_fractional(
        &mut self,
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
    ) -> Result<Var, SeganError> {
        let (x, w, b) = (self.idx(x)?, self.idx(w)?, self.idx(b)?);
        let n = &self.nodes;
        let y = conv1d_fractional(&n[x].value, &n[w].value, &n[b].value, stride)?;
        Ok(self.push_derived(y, Op::ConvFractional { x, w, b, stride }, &[x, w, b]))
    }

    /// Concatenate two `[C, L]` tensors along channels.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var, SeganError> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        let (ca, la) = self.nodes[a].value.dims2()?;
        let (cb, lb) = self.nodes[b].value.dims2()?;
        if la != lb {
            return Err(SeganError::ShapeMismatch(format!(
                "cannot concatenate lengths {la} and {lb}"
            )));
        }
        let mut data = self.nodes[a].value.data().to_vec();
        data.extend_from_slice(self.nodes[b].value.data());
        let y = Tensor::from_parts(vec![ca + cb, la], data);
        Ok(self.push_derived(y, Op::Concat { a, b }, &[a, b]))
    }

    /// Parametric rectifier with one slope per channel.
    pub fn prelu(&mut self, x: Var, slope: Var) -> Result<Var, SeganError> {
        let (x, s) = (self.idx(x)?, self.idx(slope)?);
        let (c, l) = self.nodes[x].value.dims2()?;
        if self.nodes[s].value.shape() != [c] {
            return Err(SeganError::ShapeMismatch(format!(
                "prelu slopes {:?} for {c} channels",
                self.nodes[s].value.shape()
            )));
        }
        let xs = self.nodes[x].value.data();
        let slopes = self.nodes[s].value.data();
        let data = xs
            .iter()
            .enumerate()
            .map(|(i, &v)| if v > 0.0 { v } else { slopes[i / l] * v })
            .collect();
        let y = Tensor::from_parts(vec![c, l], data);
        Ok(self.push_derived(y, Op::PRelu { x, slope: s }, &[x, s]))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var, SeganError> {
        let x = self.idx(x)?;
        let y = map(&self.nodes[x].value, |v| if v > 0.0 { v } else { slope * v });
        Ok(self.push_derived(y, Op::LeakyRelu { x, slope }, &[x]))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, SeganError> {
        let x = self.idx(x)?;
        let y = map(&self.nodes[x].value, f64::tanh);
        Ok(self.push_derived(y, Op::Tanh { x }, &[x]))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, SeganError> {
        let x = self.idx(x)?;
        let y = map(&self.nodes[x].value, |v| 1.0 / (1.0 + (-v).exp()));
        Ok(self.push_derived(y, Op::Sigmoid { x }, &[x]))
    }

    /// Fully connected layer on the flattened input: `w` is `[out, n]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var, SeganError> {
        let (x, w, b) = (self.idx(x)?, self.idx(w)?, self.idx(b)?);
        let n_in = self.nodes[x].value.len();
        let out = match self.nodes[w].value.shape()[..] {
            [o, i] if i == n_in => o,
            _ => {
                return Err(SeganError::ShapeMismatch(format!(
                    "dense weight {:?} for {n_in} inputs",
                    self.nodes[w].value.shape()
                )))
            }
        };
        if self.nodes[b].value.shape() != [out] {
            return Err(SeganError::ShapeMismatch("dense bias shape".into()));
        }
        let xs = self.nodes[x].value.data();
        let ws = self.nodes[w].value.data();
        let data = (0..out)
            .map(|o| {
                self.nodes[b].value.data()[o]
                    + ws[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(xs)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .collect();
        let y = Tensor::from_parts(vec![out], data);
        Ok(self.push_derived(y, Op::Dense { x, w, b }, &[x, w, b]))
    }

    /// Flatten and concatenate: the batch view of per-example outputs.
    pub fn stack(&mut self, xs: &[Var]) -> Result<Var, SeganError> {
        if xs.is_empty() {
            return Err(SeganError::ShapeMismatch("cannot stack zero tensors".into()));
        }
        let idx: Vec<usize> = xs.iter().map(|&v| self.idx(v)).collect::<Result<_, _>>()?;
        let data: Vec<f64> = idx
            .iter()
            .flat_map(|&i| self.nodes[i].value.data().iter().copied())
            .collect();
        let y = Tensor::from_parts(vec![data.len()], data);
        Ok(self.push_derived(y, Op::Stack { xs: idx.clone() }, &idx))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, SeganError> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        if self.nodes[a].value.shape() != self.nodes[b].value.shape() {
            return Err(SeganError::ShapeMismatch("add of unequal shapes".into()));
        }
        let y = zip_map(&self.nodes[a].value, &self.nodes[b].value, |x, y| x + y);
        Ok(self.push_derived(y, Op::Add { a, b }, &[a, b]))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var, SeganError> {
        let x = self.idx(x)?;
        let y = map(&self.nodes[x].value, |v| v * factor);
        Ok(self.push_derived(y, Op::Scale { x, factor }, &[x]))
    }

    /// `mean(log real) + mean(log(1 - fake))`.
    pub fn gan_value(&mut self, real: Var, fake: Var) -> Result<Var, SeganError> {
        let (r, f) = (self.idx(real)?, self.idx(fake)?);
        let v = loss::loss_gan(&self.nodes[r].value, &self.nodes[f].value)?;
        Ok(self.push_derived(scalar(v), Op::GanValue { real: r, fake: f }, &[r, f]))
    }

    pub fn lsgan_d(&mut self, real: Var, fake: Var) -> Result<Var, SeganError> {
        let (r, f) = (self.idx(real)?, self.idx(fake)?);
        let v = loss::loss_lsgan_d(&self.nodes[r].value, &self.nodes[f].value);
        Ok(self.push_derived(scalar(v), Op::LsganD { real: r, fake: f }, &[r, f]))
    }

    pub fn lsgan_g(&mut self, fake: Var) -> Result<Var, SeganError> {
        let f = self.idx(fake)?;
        let v = loss::loss_lsgan_g(&self.nodes[f].value);
        Ok(self.push_derived(scalar(v), Op::LsganG { fake: f }, &[f]))
    }

    /// `mean(|a - b|)`.
    pub fn l1(&mut self, a: Var, b: Var) -> Result<Var, SeganError> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        if self.nodes[a].value.len() != self.nodes[b].value.len() {
            return Err(SeganError::ShapeMismatch("l1 of unequal sizes".into()));
        }
        let v = loss::l1_mean(&self.nodes[a].value, &self.nodes[b].value);
        Ok(self.push_derived(scalar(v), Op::L1 { a, b }, &[a, b]))
    }

    /// `sum(x^2)`.
    pub fn sum_squares(&mut self, x: Var) -> Result<Var, SeganError> {
        let x = self.idx(x)?;
        let v = self.nodes[x].value.dot(&self.nodes[x].value);
        Ok(self.push_derived(scalar(v), Op::SumSquares { x }, &[x]))
    }

    /// Gradients of the scalar `loss` with respect to every trainable
    /// parameter and every grad-tracking input reachable from it.
    pub fn backward(&self, loss: Var) -> Result<Gradients, SeganError> {
        let root = self.idx(loss).map_err(|_| {
            SeganError::GraphError("backward called on a value with no recorded forward pass".into())
        })?;
        if self.nodes[root].value.len() != 1 {
            return Err(SeganError::GraphError(format!(
                "backward needs a scalar, got shape {:?}",
                self.nodes[root].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root + 1];
        grads[root] = Some(scalar(1.0));

        fn accumulate(grads: &mut [Option<Tensor>], i: usize, g: Tensor) {
            match &mut grads[i] {
                Some(acc) => acc.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=root).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].clone() else { continue };
            let rg = |j: usize| self.nodes[j].requires_grad;
            let val = |j: usize| &self.nodes[j].value;
            match &node.op {
                Op::Leaf | Op::Param => {}
                &Op::ConvStrided { x, w, b, stride } => {
                    let need_params = rg(w) || rg(b);
                    let cg = conv1d_strided_backward(val(x), val(w), &g, stride, rg(x), need_params)?;
                    if let Some(dx) = cg.dx {
                        accumulate(&mut grads, x, dx);
                    }
                    if let (Some(dw), Some(db)) = (cg.dw, cg.db) {
                        accumulate(&mut grads, w, dw);
                        accumulate(&mut grads, b, db);
                    }
                }
                &Op::ConvFractional { x, w, b, stride } => {
                    let need_params = rg(w) || rg(b);
                    let cg =
                        conv1d_fractional_backward(val(x), val(w), &g, stride, rg(x), need_params)?;
                    if let Some(dx) = cg.dx {
                        accumulate(&mut grads, x, dx);
                    }
                    if let (Some(dw), Some(db)) = (cg.dw, cg.db) {
                        accumulate(&mut grads, w, dw);
                        accumulate(&mut grads, b, db);
                    }
                }
                &Op::Concat { a, b } => {
                    let split = val(a).len();
                    let (ga, gb) = g.data().split_at(split);
                    accumulate(&mut grads, a, Tensor::from_parts(val(a).shape().to_vec(), ga.to_vec()));
                    accumulate(&mut grads, b, Tensor::from_parts(val(b).shape().to_vec(), gb.to_vec()));
                }
                &Op::PRelu { x, slope } => {
                    let (c, l) = val(x).dims2()?;
                    let xs = val(x).data();
                    let slopes = val(slope).data();
                    let dx = (0..c * l)
                        .map(|k| if xs[k] > 0.0 { g.data()[k] } else { slopes[k / l] * g.data()[k] })
                        .collect();
                    let ds = (0..c)
                        .map(|ch| {
                            (ch * l..(ch + 1) * l)
                                .filter(|&k| xs[k] <= 0.0)
                                .map(|k| xs[k] * g.data()[k])
                                .sum()
                        })
                        .collect();
                    accumulate(&mut grads, x, Tensor::from_parts(vec![c, l], dx));
                    accumulate(&mut grads, slope, Tensor::from_parts(vec![c], ds));
                }
                &Op::LeakyRelu { x, slope } => {
                    let dx = zip_map(val(x), &g, |v, g| if v > 0.0 { g } else { slope * g });
                    accumulate(&mut grads, x, dx);
                }
                &Op::Tanh { x } => {
                    let dx = zip_map(&node.value, &g, |y, g| (1.0 - y * y) * g);
                    accumulate(&mut grads, x, dx);
                }
                &Op::Sigmoid { x } => {
                    let dx = zip_map(&node.value, &g, |y, g| y * (1.0 - y) * g);
                    accumulate(&mut grads, x, dx);
                }
                &Op::Dense { x, w, b } => {
                    let n_in = val(x).len();
                    let out = val(b).len();
                    let xs = val(x).data();
                    let ws = val(w).data();
                    if rg(x) {
                        let mut dx = vec![0.0; n_in];
                        for o in 0..out {
                            let go = g.data()[o];
                            for (d, wv) in dx.iter_mut().zip(&ws[o * n_in..(o + 1) * n_in]) {
                                *d += go * wv;
                            }
                        }
                        accumulate(&mut grads, x, Tensor::from_parts(val(x).shape().to_vec(), dx));
                    }
                    if rg(w) || rg(b) {
                        let dw = (0..out)
                            .flat_map(|o| xs.iter().map(move |&xv| (o, xv)))
                            .map(|(o, xv)| g.data()[o] * xv)
                            .collect();
                        accumulate(&mut grads, w, Tensor::from_parts(vec![out, n_in], dw));
                        accumulate(&mut grads, b, g.clone());
                    }
                }
                Op::Stack { xs } => {
                    let mut offset = 0;
                    for &x in xs {
                        let n = val(x).len();
                        let part = g.data()[offset..offset + n].to_vec();
                        accumulate(&mut grads, x, Tensor::from_parts(val(x).shape().to_vec(), part));
                        offset += n;
                    }
                }
                &Op::Add { a, b } => {
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g);
                }
                &Op::Scale { x, factor } => {
                    accumulate(&mut grads, x, map(&g, |v| v * factor));
                }
                &Op::GanValue { real, fake } => {
                    let s = g.data()[0];
                    let nr = val(real).len() as f64;
                    let nf = val(fake).len() as f64;
                    accumulate(&mut grads, real, map(val(real), |d| s / (nr * d)));
                    accumulate(&mut grads, fake, map(val(fake), |d| -s / (nf * (1.0 - d))));
                }
                &Op::LsganD { real, fake } => {
                    let s = g.data()[0];
                    let nr = val(real).len() as f64;
                    let nf = val(fake).len() as f64;
                    accumulate(&mut grads, real, map(val(real), |d| s * (d - 1.0) / nr));
                    accumulate(&mut grads, fake, map(val(fake), |d| s * d / nf));
                }
                &Op::LsganG { fake } => {
                    let s = g.data()[0];
                    let n = val(fake).len() as f64;
                    accumulate(&mut grads, fake, map(val(fake), |d| s * (d - 1.0) / n));
                }
                &Op::L1 { a, b } => {
                    let s = g.data()[0] / val(a).len() as f64;
                    // subgradient 0 at ties
                    let da = zip_map(val(a), val(b), |x, y| s * sign(x - y));
                    let db = map(&da, |v| -v);
                    accumulate(&mut grads, a, da);
                    accumulate(&mut grads, b, Tensor::from_parts(val(b).shape().to_vec(), db.into_data()));
                }
                &Op::SumSquares { x } => {
                    let s = 2.0 * g.data()[0];
                    accumulate(&mut grads, x, map(val(x), |v| s * v));
                }
            }
            if !matches!(node.op, Op::Leaf | Op::Param) {
                grads[i] = None;
            }
        }

        let mut params = BTreeMap::new();
        for (name, &i) in &self.params {
            if i <= root && self.nodes[i].requires_grad {
                let g = grads[i]
                    .clone()
                    .unwrap_or_else(|| Tensor::zeros(self.nodes[i].value.shape()));
                params.insert(name.clone(), g);
            }
        }
        Ok(Gradients {
            params,
            nodes: grads,
            tape: self.id,
        })
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
