//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its
//! values, its (initially zero) gradient, and the ids of its parents.
//! Creation order is topological order, so [`Graph::backward`] is a
//! single reverse sweep. Values are never mutated after construction,
//! which lets a closed-over builder be re-run for finite-difference
//! checks. Gradients accumulate additively across backward calls; the
//! caller zeroes them between steps.
//!
//! Elementwise binary ops broadcast per the usual trailing-axis rules;
//! the backward pass sums gradients over the broadcast axes.

use ndarray::{ArrayD, ArrayViewD, Axis, Dimension, IxDyn, Slice};

use crate::{Error, Result};

/// Handle to a node in a [`Graph`]. Plain index; cheap to copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tensor(usize);

/// A named trainable value. The tensor lives outside any graph; each
/// training step leafs it into a fresh tape.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub values: ArrayD<f64>,
}

impl Parameter {
    pub fn new(name: impl Into<String>, values: ArrayD<f64>) -> Self {
        Self { name: name.into(), values }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Matmul(Tensor, Tensor),
    Relu(Tensor),
    Tanh(Tensor),
    Sigmoid(Tensor),
    Exp(Tensor),
    Log(Tensor),
    Softplus(Tensor),
    Square(Tensor),
    Abs(Tensor),
    Scale(Tensor, f64),
    AddScalar(Tensor),
    Clamp(Tensor, f64, f64),
    Sum(Tensor),
    Mean(Tensor),
    SumAxis(Tensor, usize),
    LogSumExp(Tensor, usize),
    Broadcast(Tensor),
    Reshape(Tensor),
    Slice(Tensor, usize, usize, usize),
    Concat(Vec<Tensor>, usize),
}

#[derive(Debug)]
struct Node {
    values: ArrayD<f64>,
    grad: ArrayD<f64>,
    op: Op,
}

/// Wengert tape. One tape per forward pass; drop it to free the graph.
#[derive(Default, Debug)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0usize; n];
    for i in 0..n {
        let da = if i < n - a.len() { 1 } else { a[i - (n - a.len())] };
        let db = if i < n - b.len() { 1 } else { b[i - (n - b.len())] };
        out[i] = if da == db || db == 1 {
            da
        } else if da == 1 {
            db
        } else {
            return Err(Error::ShapeMismatch { op: "broadcast", lhs: a.to_vec(), rhs: b.to_vec() });
        };
    }
    Ok(out)
}

fn broadcast_to(v: &ArrayD<f64>, shape: &[usize]) -> Result<ArrayD<f64>> {
    v.broadcast(IxDyn(shape))
        .map(|view| view.to_owned())
        .ok_or_else(|| Error::ShapeMismatch {
            op: "broadcast",
            lhs: v.shape().to_vec(),
            rhs: shape.to_vec(),
        })
}

/// Sum `g` down to `shape`, undoing a broadcast: leading extra axes are
/// summed away, then any axis that was expanded from size 1 is summed
/// back to size 1.
fn unbroadcast(mut g: ArrayD<f64>, shape: &[usize]) -> ArrayD<f64> {
    while g.ndim() > shape.len() {
        g = g.sum_axis(Axis(0));
    }
    for (ax, (&have, &want)) in g.shape().to_vec().iter().zip(shape).enumerate() {
        if want == 1 && have != 1 {
            g = g.sum_axis(Axis(ax)).insert_axis(Axis(ax));
        }
    }
    g
}

fn stable_softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

fn stable_sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, values: ArrayD<f64>, op: Op) -> Tensor {
        let grad = ArrayD::zeros(values.raw_dim());
        self.nodes.push(Node { values, grad, op });
        Tensor(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, values: ArrayD<f64>) -> Tensor {
        self.push(values, Op::Leaf)
    }

    pub fn scalar(&mut self, v: f64) -> Tensor {
        self.push(ArrayD::from_elem(IxDyn(&[]), v), Op::Leaf)
    }

    pub fn values(&self, t: Tensor) -> &ArrayD<f64> {
        &self.nodes[t.0].values
    }

    pub fn grad(&self, t: Tensor) -> &ArrayD<f64> {
        &self.nodes[t.0].grad
    }

    pub fn shape(&self, t: Tensor) -> &[usize] {
        self.nodes[t.0].values.shape()
    }

    pub fn scalar_value(&self, t: Tensor) -> f64 {
        self.nodes[t.0].values[IxDyn(&[])]
    }

    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            node.grad.fill(0.0);
        }
    }

    fn binary(&mut self, op: &'static str, a: Tensor, b: Tensor, f: impl Fn(f64, f64) -> f64) -> Result<(ArrayD<f64>, ArrayD<f64>, ArrayD<f64>)> {
        let shape = broadcast_shape(self.shape(a), self.shape(b)).map_err(|_| Error::ShapeMismatch {
            op,
            lhs: self.shape(a).to_vec(),
            rhs: self.shape(b).to_vec(),
        })?;
        let av = broadcast_to(&self.nodes[a.0].values, &shape)?;
        let bv = broadcast_to(&self.nodes[b.0].values, &shape)?;
        let mut out = av.clone();
        out.zip_mut_with(&bv, |x, &y| *x = f(*x, y));
        Ok((out, av, bv))
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let (out, _, _) = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let (out, _, _) = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let (out, _, _) = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// 2-D matrix product.
    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch { op: "matmul", lhs: sa, rhs: sb });
        }
        let av = self.nodes[a.0].values.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let bv = self.nodes[b.0].values.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let out = av.dot(&bv).into_dyn();
        Ok(self.push(out, Op::Matmul(a, b)))
    }

    fn unary(&mut self, a: Tensor, op: Op, f: impl Fn(f64) -> f64) -> Tensor {
        let out = self.nodes[a.0].values.mapv(f);
        self.push(out, op)
    }

    pub fn relu(&mut self, a: Tensor) -> Tensor {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn tanh(&mut self, a: Tensor) -> Tensor {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Tensor) -> Tensor {
        self.unary(a, Op::Sigmoid(a), stable_sigmoid)
    }

    pub fn exp(&mut self, a: Tensor) -> Tensor {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    pub fn log(&mut self, a: Tensor) -> Tensor {
        self.unary(a, Op::Log(a), f64::ln)
    }

    pub fn softplus(&mut self, a: Tensor) -> Tensor {
        self.unary(a, Op::Softplus(a), stable_softplus)
    }

    pub fn square(&mut self, a: Tensor) -> Tensor {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    pub fn abs(&mut self, a: Tensor) -> Tensor {
        self.unary(a, Op::Abs(a), f64::abs)
    }

    pub fn scale(&mut self, a: Tensor, c: f64) -> Tensor {
        self.unary(a, Op::Scale(a, c), |x| c * x)
    }

    pub fn neg(&mut self, a: Tensor) -> Tensor {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Tensor, c: f64) -> Tensor {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    /// Elementwise clamp. Gradient is passed only strictly inside the
    /// interval, so saturated entries stop training, matching the usual
    /// straight-through-free convention.
    pub fn clamp(&mut self, a: Tensor, lo: f64, hi: f64) -> Tensor {
        self.unary(a, Op::Clamp(a, lo, hi), |x| x.clamp(lo, hi))
    }

    pub fn sum(&mut self, a: Tensor) -> Tensor {
        let s = self.nodes[a.0].values.sum();
        self.push(ArrayD::from_elem(IxDyn(&[]), s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Tensor) -> Tensor {
        let v = &self.nodes[a.0].values;
        let m = v.sum() / v.len() as f64;
        self.push(ArrayD::from_elem(IxDyn(&[]), m), Op::Mean(a))
    }

    pub fn sum_axis(&mut self, a: Tensor, axis: usize) -> Result<Tensor> {
        self.check_axis(a, axis, "sum_axis")?;
        let out = self.nodes[a.0].values.sum_axis(Axis(axis));
        Ok(self.push(out, Op::SumAxis(a, axis)))
    }

    /// Numerically stable `log Σ exp` along one axis (the axis is removed).
    pub fn logsumexp(&mut self, a: Tensor, axis: usize) -> Result<Tensor> {
        self.check_axis(a, axis, "logsumexp")?;
        let v = &self.nodes[a.0].values;
        let maxes = v.fold_axis(Axis(axis), f64::NEG_INFINITY, |m, &x| m.max(x));
        let mut out = maxes;
        for (idx, slot) in out.indexed_iter_mut() {
            let m = *slot;
            if m == f64::NEG_INFINITY {
                continue;
            }
            let mut full = idx.slice().to_vec();
            full.insert(axis, 0);
            let mut acc = 0.0;
            for k in 0..v.shape()[axis] {
                full[axis] = k;
                acc += (v[IxDyn(&full)] - m).exp();
            }
            *slot = m + acc.ln();
        }
        Ok(self.push(out, Op::LogSumExp(a, axis)))
    }

    pub fn broadcast(&mut self, a: Tensor, shape: &[usize]) -> Result<Tensor> {
        let out = broadcast_to(&self.nodes[a.0].values, shape)?;
        Ok(self.push(out, Op::Broadcast(a)))
    }

    pub fn reshape(&mut self, a: Tensor, shape: &[usize]) -> Result<Tensor> {
        let out = self.nodes[a.0]
            .values
            .clone()
            .into_shape_with_order(IxDyn(shape))
            .map_err(|_| Error::ShapeMismatch {
                op: "reshape",
                lhs: self.shape(a).to_vec(),
                rhs: shape.to_vec(),
            })?;
        Ok(self.push(out, Op::Reshape(a)))
    }

    /// View `[start, end)` along `axis`.
    pub fn slice(&mut self, a: Tensor, axis: usize, start: usize, end: usize) -> Result<Tensor> {
        self.check_axis(a, axis, "slice")?;
        let dim = self.shape(a)[axis];
        if start >= end || end > dim {
            return Err(Error::InvalidArgument(format!(
                "slice [{start}, {end}) out of bounds for axis {axis} of size {dim}"
            )));
        }
        let out = self.nodes[a.0]
            .values
            .slice_axis(Axis(axis), Slice::from(start..end))
            .to_owned();
        Ok(self.push(out, Op::Slice(a, axis, start, end)))
    }

    pub fn concat(&mut self, parts: &[Tensor], axis: usize) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("concat of zero tensors".into()));
        }
        self.check_axis(parts[0], axis, "concat")?;
        let views: Vec<ArrayViewD<f64>> = parts.iter().map(|t| self.nodes[t.0].values.view()).collect();
        let out = ndarray::concatenate(Axis(axis), &views).map_err(|_| Error::ShapeMismatch {
            op: "concat",
            lhs: self.shape(parts[0]).to_vec(),
            rhs: self.shape(*parts.last().unwrap()).to_vec(),
        })?;
        Ok(self.push(out, Op::Concat(parts.to_vec(), axis)))
    }

    fn check_axis(&self, a: Tensor, axis: usize, op: &'static str) -> Result<()> {
        if axis >= self.shape(a).len() {
            return Err(Error::InvalidArgument(format!(
                "{op}: axis {axis} out of range for shape {:?}",
                self.shape(a)
            )));
        }
        Ok(())
    }

    /// Reverse sweep from a scalar loss. Every node reachable from
    /// `loss` receives `∂loss/∂node` added into its gradient. The sweep
    /// runs in a private buffer, so each call contributes exactly one
    /// gradient regardless of what earlier calls left behind.
    pub fn backward(&mut self, loss: Tensor) -> Result<()> {
        if !self.shape(loss).is_empty() {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<ArrayD<f64>> = self
            .nodes
            .iter()
            .map(|n| ArrayD::zeros(n.values.raw_dim()))
            .collect();
        grads[loss.0][IxDyn(&[])] = 1.0;

        fn acc(grads: &mut [ArrayD<f64>], t: Tensor, g: ArrayD<f64>) {
            grads[t.0] += &g;
        }

        for i in (0..=loss.0).rev() {
            let g = grads[i].clone();
            if g.iter().all(|&x| x == 0.0) {
                continue;
            }
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    acc(&mut grads, a, unbroadcast(g.clone(), &self.shape_of(a)));
                    acc(&mut grads, b, unbroadcast(g, &self.shape_of(b)));
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, a, unbroadcast(g.clone(), &self.shape_of(a)));
                    acc(&mut grads, b, unbroadcast(g.mapv(|x| -x), &self.shape_of(b)));
                }
                Op::Mul(a, b) => {
                    let shape = self.nodes[i].values.shape().to_vec();
                    let av = broadcast_to(&self.nodes[a.0].values, &shape)?;
                    let bv = broadcast_to(&self.nodes[b.0].values, &shape)?;
                    acc(&mut grads, a, unbroadcast(&g * &bv, &self.shape_of(a)));
                    acc(&mut grads, b, unbroadcast(&g * &av, &self.shape_of(b)));
                }
                Op::Matmul(a, b) => {
                    let g2 = g.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                    let av = self.nodes[a.0].values.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                    let bv = self.nodes[b.0].values.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                    let da = g2.dot(&bv.t()).into_dyn();
                    let db = av.t().dot(&g2).into_dyn();
                    acc(&mut grads, a, da);
                    acc(&mut grads, b, db);
                }
                Op::Relu(a) => {
                    let mask = self.nodes[a.0].values.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    acc(&mut grads, a, &g * &mask);
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[i].values;
                    let da = &g * &y.mapv(|t| 1.0 - t * t);
                    acc(&mut grads, a, da);
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[i].values;
                    let da = &g * &y.mapv(|s| s * (1.0 - s));
                    acc(&mut grads, a, da);
                }
                Op::Exp(a) => {
                    let da = &g * &self.nodes[i].values;
                    acc(&mut grads, a, da);
                }
                Op::Log(a) => {
                    let inv = self.nodes[a.0].values.mapv(|x| 1.0 / x);
                    acc(&mut grads, a, &g * &inv);
                }
                Op::Softplus(a) => {
                    let s = self.nodes[a.0].values.mapv(stable_sigmoid);
                    acc(&mut grads, a, &g * &s);
                }
                Op::Square(a) => {
                    let two_v = self.nodes[a.0].values.mapv(|x| 2.0 * x);
                    acc(&mut grads, a, &g * &two_v);
                }
                Op::Abs(a) => {
                    let sign = self.nodes[a.0].values.mapv(|x| {
                        if x > 0.0 {
                            1.0
                        } else if x < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    });
                    acc(&mut grads, a, &g * &sign);
                }
                Op::Scale(a, c) => acc(&mut grads, a, g.mapv(|x| c * x)),
                Op::AddScalar(a) => acc(&mut grads, a, g),
                Op::Clamp(a, lo, hi) => {
                    let mask = self.nodes[a.0].values.mapv(|x| if x > lo && x < hi { 1.0 } else { 0.0 });
                    acc(&mut grads, a, &g * &mask);
                }
                Op::Sum(a) => {
                    let gv = g[IxDyn(&[])];
                    let da = ArrayD::from_elem(self.nodes[a.0].values.raw_dim(), gv);
                    acc(&mut grads, a, da);
                }
                Op::Mean(a) => {
                    let n = self.nodes[a.0].values.len() as f64;
                    let gv = g[IxDyn(&[])] / n;
                    let da = ArrayD::from_elem(self.nodes[a.0].values.raw_dim(), gv);
                    acc(&mut grads, a, da);
                }
                Op::SumAxis(a, ax) => {
                    let expanded = g.insert_axis(Axis(ax));
                    let da = broadcast_to(&expanded, self.nodes[a.0].values.shape())?;
                    acc(&mut grads, a, da);
                }
                Op::LogSumExp(a, ax) => {
                    let y = self.nodes[i].values.clone().insert_axis(Axis(ax));
                    let gex = g.insert_axis(Axis(ax));
                    let yb = broadcast_to(&y, self.nodes[a.0].values.shape())?;
                    let gb = broadcast_to(&gex, self.nodes[a.0].values.shape())?;
                    let v = &self.nodes[a.0].values;
                    let mut da = v - &yb;
                    da.mapv_inplace(f64::exp);
                    acc(&mut grads, a, &da * &gb);
                }
                Op::Broadcast(a) => {
                    acc(&mut grads, a, unbroadcast(g, &self.shape_of(a)));
                }
                Op::Reshape(a) => {
                    let da = g.into_shape_with_order(self.nodes[a.0].values.raw_dim()).unwrap();
                    acc(&mut grads, a, da);
                }
                Op::Slice(a, ax, start, end) => {
                    let mut da = ArrayD::zeros(self.nodes[a.0].values.raw_dim());
                    da.slice_axis_mut(Axis(ax), Slice::from(start..end)).assign(&g);
                    acc(&mut grads, a, da);
                }
                Op::Concat(parts, ax) => {
                    let mut offset = 0;
                    for p in parts {
                        let len = self.nodes[p.0].values.shape()[ax];
                        let dp = g.slice_axis(Axis(ax), Slice::from(offset..offset + len)).to_owned();
                        acc(&mut grads, p, dp);
                        offset += len;
                    }
                }
            }
        }
        for (node, g) in self.nodes.iter_mut().zip(grads) {
            node.grad += &g;
        }
        Ok(())
    }

    fn shape_of(&self, t: Tensor) -> Vec<usize> {
        self.nodes[t.0].values.shape().to_vec()
    }
}

/// Central finite-difference check of a scalar builder against its own
/// analytic gradient. Returns the max over all parameter entries of
/// `|analytic − (f(p+h) − f(p−h)) / 2h| / max(1, |analytic|)`.
pub fn grad_check<F>(build: F, params: &[ArrayD<f64>], h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Tensor]) -> Result<Tensor>,
{
    if h <= 0.0 {
        return Err(Error::InvalidArgument("grad_check: step h must be > 0".into()));
    }
    let eval = |ps: &[ArrayD<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let leaves: Vec<Tensor> = ps.iter().map(|p| g.leaf(p.clone())).collect();
        let out = build(&mut g, &leaves)?;
        let v = g.scalar_value(out);
        if !v.is_finite() {
            return Err(Error::NonFinite("grad_check objective".into()));
        }
        Ok(v)
    };

    let mut g = Graph::new();
    let leaves: Vec<Tensor> = params.iter().map(|p| g.leaf(p.clone())).collect();
    let out = build(&mut g, &leaves)?;
    if !g.scalar_value(out).is_finite() {
        return Err(Error::NonFinite("grad_check objective".into()));
    }
    g.backward(out)?;

    let mut worst = 0.0f64;
    for (pi, p) in params.iter().enumerate() {
        let analytic = g.grad(leaves[pi]).clone();
        for (lin, _) in p.iter().enumerate() {
            let mut plus = params.to_vec();
            let mut minus = params.to_vec();
            plus[pi].as_slice_mut().unwrap()[lin] += h;
            minus[pi].as_slice_mut().unwrap()[lin] -= h;
            let fd = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
            let a = analytic.as_slice().unwrap()[lin];
            let rel = (a - fd).abs() / a.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
