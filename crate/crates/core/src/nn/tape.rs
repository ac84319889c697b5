//! Reverse-mode differentiation over a recorded operation list.

use indexmap::IndexMap;

use super::params::{Gradients, ParamSet};
use super::tensor::{matmul, matmul_at, matmul_bt, Tensor};
use crate::error::{Result, VenomError};

/// Handle to a value recorded on a [`GradTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Exp(Var),
    Gelu(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        offset: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    SliceRows {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    MeanRows {
        x: Var,
        rows: Vec<usize>,
    },
    BroadcastRows(Var),
    Sum(Var),
    Mean(Var),
    HalfMse {
        pred: Var,
        target: Tensor,
        cols: usize,
    },
    Mse {
        pred: Var,
        target: Vec<f64>,
    },
    BceLogits {
        logits: Var,
        labels: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Operation recorder bound to one parameter set.
///
/// Parameters enter the tape lazily through [`GradTape::param`]. After
/// [`GradTape::backward`], every parameter has a gradient accumulator of its
/// own shape; parameters the loss never touched keep an exact zero.
pub struct GradTape<'p> {
    params: &'p ParamSet,
    param_vars: Vec<Option<Var>>,
    nodes: Vec<Node>,
    param_grads: Vec<Tensor>,
}

impl<'p> GradTape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        GradTape {
            params,
            param_vars: vec![None; params.len()],
            nodes: Vec::new(),
            param_grads: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn params(&self) -> &ParamSet {
        self.params
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        let idx = self
            .params
            .index_of(name)
            .ok_or_else(|| VenomError::Contract(format!("unknown parameter {name}")))?;
        if let Some(v) = self.param_vars[idx] {
            return Ok(v);
        }
        let value = self.params.by_index(idx).1.clone();
        let v = self.push(value, Op::Param(idx));
        self.param_vars[idx] = Some(v);
        Ok(v)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        self.value(v).dims()
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.dims(a) != self.dims(b) {
            return Err(VenomError::Dimension {
                op,
                left: self.value(a).shape().to_vec(),
                right: self.value(b).shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, k) = self.dims(a);
        let (k2, c) = self.dims(b);
        if k != k2 {
            return Err(VenomError::Dimension {
                op: "matmul",
                left: self.value(a).shape().to_vec(),
                right: self.value(b).shape().to_vec(),
            });
        }
        let out = matmul(self.value(a).data(), self.value(b).data(), r, k, c);
        Ok(self.push(Tensor::from_parts(vec![r, c], out), Op::MatMul(a, b)))
    }

    /// `a * b^T`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, k) = self.dims(a);
        let (c, k2) = self.dims(b);
        if k != k2 {
            return Err(VenomError::Dimension {
                op: "matmul_bt",
                left: self.value(a).shape().to_vec(),
                right: self.value(b).shape().to_vec(),
            });
        }
        let out = matmul_bt(self.value(a).data(), self.value(b).data(), r, k, c);
        Ok(self.push(Tensor::from_parts(vec![r, c], out), Op::MatMulBt(a, b)))
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let va = self.value(a);
        let data = va
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        Tensor::from_parts(va.shape().to_vec(), data)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let va = self.value(a);
        Tensor::from_parts(va.shape().to_vec(), va.data().iter().map(|x| f(*x)).collect())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let t = self.zip_map(a, b, |x, y| x + y);
        Ok(self.push(t, Op::Add(a, b)))
    }

    /// Adds a length-`c` row vector to every row of an `r x c` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        if self.value(row).len() != c {
            return Err(VenomError::Dimension {
                op: "add_row",
                left: self.value(a).shape().to_vec(),
                right: self.value(row).shape().to_vec(),
            });
        }
        let bias = self.value(row).data();
        let mut out = self.value(a).data().to_vec();
        for i in 0..r {
            for (o, b) in out[i * c..(i + 1) * c].iter_mut().zip(bias) {
                *o += b;
            }
        }
        Ok(self.push(Tensor::from_parts(vec![r, c], out), Op::AddRow(a, row)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let t = self.zip_map(a, b, |x, y| x - y);
        Ok(self.push(t, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let t = self.zip_map(a, b, |x, y| x * y);
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let t = self.map(a, |x| x * factor);
        self.push(t, Op::Scale(a, factor))
    }

    pub fn offset(&mut self, a: Var, constant: f64) -> Var {
        let t = self.map(a, |x| x + constant);
        self.push(t, Op::Offset(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let t = self.map(a, f64::exp);
        self.push(t, Op::Exp(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let t = self.map(a, gelu);
        self.push(t, Op::Gelu(a))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let x = self.value(a).data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &x[i * c..(i + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let o = &mut out[i * c..(i + 1) * c];
            let mut s = 0.0;
            for (oj, xj) in o.iter_mut().zip(row) {
                *oj = (xj - m).exp();
                s += *oj;
            }
            o.iter_mut().for_each(|v| *v /= s);
        }
        self.push(Tensor::from_parts(vec![r, c], out), Op::SoftmaxRows(a))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, offset: Var, eps: f64) -> Result<Var> {
        let (r, d) = self.dims(x);
        if self.value(gain).len() != d || self.value(offset).len() != d {
            return Err(VenomError::Dimension {
                op: "layer_norm",
                left: self.value(x).shape().to_vec(),
                right: self.value(gain).shape().to_vec(),
            });
        }
        if eps <= 0.0 {
            return Err(VenomError::Contract("layer_norm eps must be positive".into()));
        }
        let xv = self.value(x).data();
        let g = self.value(gain).data();
        let b = self.value(offset).data();
        let mut xhat = vec![0.0; r * d];
        let mut inv_std = vec![0.0; r];
        let mut out = vec![0.0; r * d];
        for i in 0..r {
            let row = &xv[i * d..(i + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[i] = inv;
            for j in 0..d {
                let h = (row[j] - mean) * inv;
                xhat[i * d + j] = h;
                out[i * d + j] = h * g[j] + b[j];
            }
        }
        Ok(self.push(
            Tensor::from_parts(vec![r, d], out),
            Op::LayerNorm {
                x,
                gain,
                offset,
                xhat,
                inv_std,
            },
        ))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.dims(x);
        if len == 0 || start + len > c {
            return Err(VenomError::Contract(format!(
                "column slice {start}..{} out of range for width {c}",
                start + len
            )));
        }
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&xv[i * c + start..i * c + start + len]);
        }
        Ok(self.push(Tensor::from_parts(vec![r, len], out), Op::SliceCols { x, start }))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.dims(x);
        if len == 0 || start + len > r {
            return Err(VenomError::Contract(format!(
                "row slice {start}..{} out of range for {r} rows",
                start + len
            )));
        }
        let out = self.value(x).data()[start * c..(start + len) * c].to_vec();
        Ok(self.push(Tensor::from_parts(vec![len, c], out), Op::SliceRows { x, start }))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let r = parts
            .first()
            .map(|p| self.dims(*p).0)
            .ok_or_else(|| VenomError::Contract("concat of nothing".into()))?;
        if parts.iter().any(|p| self.dims(*p).0 != r) {
            return Err(VenomError::Contract("concat_cols row counts differ".into()));
        }
        let total: usize = parts.iter().map(|p| self.dims(*p).1).sum();
        let mut out = Vec::with_capacity(r * total);
        for i in 0..r {
            for p in parts {
                out.extend_from_slice(self.value(*p).row(i));
            }
        }
        Ok(self.push(
            Tensor::from_parts(vec![r, total], out),
            Op::ConcatCols(parts.to_vec()),
        ))
    }

    /// Mean over the listed rows, giving a `1 x c` row.
    pub fn mean_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let (r, c) = self.dims(x);
        if rows.is_empty() || rows.iter().any(|&i| i >= r) {
            return Err(VenomError::Contract("mean_rows needs valid, non-empty rows".into()));
        }
        let mut out = vec![0.0; c];
        for &i in rows {
            for (o, v) in out.iter_mut().zip(self.value(x).row(i)) {
                *o += v;
            }
        }
        let n = rows.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        Ok(self.push(
            Tensor::from_parts(vec![1, c], out),
            Op::MeanRows {
                x,
                rows: rows.to_vec(),
            },
        ))
    }

    /// Repeats a single row `rows` times.
    pub fn broadcast_rows(&mut self, x: Var, rows: usize) -> Result<Var> {
        let (r, c) = self.dims(x);
        if r != 1 || rows == 0 {
            return Err(VenomError::Contract("broadcast_rows needs one row".into()));
        }
        let out = self.value(x).data().repeat(rows);
        Ok(self.push(Tensor::from_parts(vec![rows, c], out), Op::BroadcastRows(x)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().sum::<f64>() / v.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(x))
    }

    /// `0.5 * mean((pred - target)^2)` over all rows and the first `cols` columns.
    pub fn half_mse(&mut self, pred: Var, target: Tensor, cols: usize) -> Result<Var> {
        let (r, c) = self.dims(pred);
        if target.dims() != (r, c) || cols == 0 || cols > c {
            return Err(VenomError::Dimension {
                op: "half_mse",
                left: self.value(pred).shape().to_vec(),
                right: target.shape().to_vec(),
            });
        }
        let p = self.value(pred).data();
        let t = target.data();
        let mut s = 0.0;
        for i in 0..r {
            for j in 0..cols {
                let d = p[i * c + j] - t[i * c + j];
                s += d * d;
            }
        }
        let loss = 0.5 * s / (r * cols) as f64;
        Ok(self.push(Tensor::scalar(loss), Op::HalfMse { pred, target, cols }))
    }

    /// Mean squared error against a fixed target of the same length.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        if self.value(pred).len() != target.len() {
            return Err(VenomError::Dimension {
                op: "mse",
                left: self.value(pred).shape().to_vec(),
                right: vec![target.len()],
            });
        }
        let n = target.len() as f64;
        let s = self
            .value(pred)
            .data()
            .iter()
            .zip(target)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        Ok(self.push(
            Tensor::scalar(s),
            Op::Mse {
                pred,
                target: target.to_vec(),
            },
        ))
    }

    /// Mean binary cross-entropy on logits with labels in {0, 1}.
    pub fn bce_logits(&mut self, logits: Var, labels: &[f64]) -> Result<Var> {
        if self.value(logits).len() != labels.len() {
            return Err(VenomError::Dimension {
                op: "bce_logits",
                left: self.value(logits).shape().to_vec(),
                right: vec![labels.len()],
            });
        }
        let n = labels.len() as f64;
        let s = self
            .value(logits)
            .data()
            .iter()
            .zip(labels)
            .map(|(l, y)| l.max(0.0) - l * y + (-l.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        Ok(self.push(
            Tensor::scalar(s),
            Op::BceLogits {
                logits,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Back-propagate from a scalar `loss`, adding into the parameter
    /// accumulators. Calling it again without [`GradTape::reset_grads`]
    /// accumulates.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(VenomError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let (r, c) = node.value.dims();
            match &node.op {
                Op::Input => {}
                Op::Param(pi) => {
                    for (a, v) in self.param_grads[*pi].data_mut().iter_mut().zip(&g) {
                        *a += v;
                    }
                }
                Op::MatMul(a, b) => {
                    let (_, k) = self.dims(*a);
                    let da = matmul_bt(&g, self.value(*b).data(), r, c, k);
                    let db = matmul_at(self.value(*a).data(), &g, r, k, c);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulBt(a, b) => {
                    let (_, k) = self.dims(*a);
                    let da = matmul(&g, self.value(*b).data(), r, c, k);
                    let db = matmul_at(&g, self.value(*a).data(), r, c, k);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    let mut dr = vec![0.0; c];
                    for i in 0..r {
                        for (d, v) in dr.iter_mut().zip(&g[i * c..(i + 1) * c]) {
                            *d += v;
                        }
                    }
                    accumulate(&mut grads, *row, dr);
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.iter().map(|v| -v).collect());
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let va = self.value(*a).data();
                    let vb = self.value(*b).data();
                    let da = g.iter().zip(vb).map(|(x, y)| x * y).collect();
                    let db = g.iter().zip(va).map(|(x, y)| x * y).collect();
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, f) => {
                    accumulate(&mut grads, *a, g.iter().map(|v| v * f).collect());
                }
                Op::Offset(a) => accumulate(&mut grads, *a, g),
                Op::Exp(a) => {
                    let d = g.iter().zip(node.value.data()).map(|(x, y)| x * y).collect();
                    accumulate(&mut grads, *a, d);
                }
                Op::Gelu(a) => {
                    let xa = self.value(*a).data();
                    let d = g.iter().zip(xa).map(|(x, v)| x * gelu_grad(*v)).collect();
                    accumulate(&mut grads, *a, d);
                }
                Op::SoftmaxRows(a) => {
                    let y = node.value.data();
                    let mut d = vec![0.0; r * c];
                    for i in 0..r {
                        let yr = &y[i * c..(i + 1) * c];
                        let gr = &g[i * c..(i + 1) * c];
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for j in 0..c {
                            d[i * c + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    offset,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(*gain).data();
                    let d = c;
                    let mut dx = vec![0.0; r * d];
                    let mut dgain = vec![0.0; d];
                    let mut doff = vec![0.0; d];
                    for i in 0..r {
                        let gr = &g[i * d..(i + 1) * d];
                        let hr = &xhat[i * d..(i + 1) * d];
                        let mut mean_dh = 0.0;
                        let mut mean_dh_h = 0.0;
                        for j in 0..d {
                            let dh = gr[j] * gv[j];
                            mean_dh += dh;
                            mean_dh_h += dh * hr[j];
                            dgain[j] += gr[j] * hr[j];
                            doff[j] += gr[j];
                        }
                        mean_dh /= d as f64;
                        mean_dh_h /= d as f64;
                        for j in 0..d {
                            let dh = gr[j] * gv[j];
                            dx[i * d + j] = inv_std[i] * (dh - mean_dh - hr[j] * mean_dh_h);
                        }
                    }
                    let (x, gain, offset) = (*x, *gain, *offset);
                    accumulate(&mut grads, x, dx);
                    accumulate(&mut grads, gain, dgain);
                    accumulate(&mut grads, offset, doff);
                }
                Op::SliceCols { x, start } => {
                    let (xr, xc) = self.dims(*x);
                    let mut d = vec![0.0; xr * xc];
                    for i in 0..r {
                        d[i * xc + start..i * xc + start + c].copy_from_slice(&g[i * c..(i + 1) * c]);
                    }
                    accumulate(&mut grads, *x, d);
                }
                Op::SliceRows { x, start } => {
                    let (xr, xc) = self.dims(*x);
                    let mut d = vec![0.0; xr * xc];
                    d[start * xc..(start + r) * xc].copy_from_slice(&g);
                    accumulate(&mut grads, *x, d);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let pc = self.dims(*p).1;
                        let mut d = Vec::with_capacity(r * pc);
                        for i in 0..r {
                            d.extend_from_slice(&g[i * c + offset..i * c + offset + pc]);
                        }
                        offset += pc;
                        accumulate(&mut grads, *p, d);
                    }
                }
                Op::MeanRows { x, rows } => {
                    let (xr, xc) = self.dims(*x);
                    let n = rows.len() as f64;
                    let mut d = vec![0.0; xr * xc];
                    for &i in rows {
                        for (dv, gv) in d[i * xc..(i + 1) * xc].iter_mut().zip(&g) {
                            *dv += gv / n;
                        }
                    }
                    accumulate(&mut grads, *x, d);
                }
                Op::BroadcastRows(x) => {
                    let mut d = vec![0.0; c];
                    for i in 0..r {
                        for (dv, gv) in d.iter_mut().zip(&g[i * c..(i + 1) * c]) {
                            *dv += gv;
                        }
                    }
                    accumulate(&mut grads, *x, d);
                }
                Op::Sum(x) => {
                    let n = self.value(*x).len();
                    accumulate(&mut grads, *x, vec![g[0]; n]);
                }
                Op::Mean(x) => {
                    let n = self.value(*x).len();
                    accumulate(&mut grads, *x, vec![g[0] / n as f64; n]);
                }
                Op::HalfMse { pred, target, cols } => {
                    let (pr, pc) = self.dims(*pred);
                    let p = self.value(*pred).data();
                    let t = target.data();
                    let scale = g[0] / (pr * cols) as f64;
                    let mut d = vec![0.0; pr * pc];
                    for i in 0..pr {
                        for j in 0..*cols {
                            d[i * pc + j] = scale * (p[i * pc + j] - t[i * pc + j]);
                        }
                    }
                    accumulate(&mut grads, *pred, d);
                }
                Op::Mse { pred, target } => {
                    let n = target.len() as f64;
                    let d = self
                        .value(*pred)
                        .data()
                        .iter()
                        .zip(target)
                        .map(|(p, t)| g[0] * 2.0 * (p - t) / n)
                        .collect();
                    accumulate(&mut grads, *pred, d);
                }
                Op::BceLogits { logits, labels } => {
                    let n = labels.len() as f64;
                    let d = self
                        .value(*logits)
                        .data()
                        .iter()
                        .zip(labels)
                        .map(|(l, y)| g[0] * (sigmoid(*l) - y) / n)
                        .collect();
                    accumulate(&mut grads, *logits, d);
                }
            }
        }
        Ok(())
    }

    pub fn reset_grads(&mut self) {
        for g in &mut self.param_grads {
            g.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn gradients(&self) -> Gradients {
        let map: IndexMap<String, Tensor> = self
            .params
            .iter()
            .zip(&self.param_grads)
            .map(|((name, _), g)| (name.to_string(), g.clone()))
            .collect();
        Gradients::new(map)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, d: Vec<f64>) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.iter_mut().zip(d) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_with(name: &str, t: Tensor) -> ParamSet {
        let mut p = ParamSet::new(0);
        p.insert(name, t).unwrap();
        p
    }

    #[test]
    fn identity_loss_has_unit_gradient() {
        let p = params_with("x", Tensor::scalar(3.0));
        let mut tape = GradTape::new(&p);
        let x = tape.param("x").unwrap();
        tape.backward(x).unwrap();
        assert_eq!(tape.gradients().get("x").unwrap().data(), &[1.0]);
    }

    #[test]
    fn linear_loss_gradient_is_input() {
        let p = params_with("w", Tensor::vector(vec![0.5, -1.0, 2.0]).unwrap());
        let mut tape = GradTape::new(&p);
        let w = tape.param("w").unwrap();
        let x = tape.input(Tensor::vector(vec![1.5, 2.5, -3.0]).unwrap());
        let wx = tape.mul(w, x).unwrap();
        let loss = tape.sum(wx);
        tape.backward(loss).unwrap();
        assert_eq!(tape.gradients().get("w").unwrap().data(), &[1.5, 2.5, -3.0]);
    }

    #[test]
    fn repeated_backward_accumulates() {
        let p = params_with("x", Tensor::scalar(3.0));
        let mut tape = GradTape::new(&p);
        let x = tape.param("x").unwrap();
        let y = tape.scale(x, 2.0);
        tape.backward(y).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.gradients().get("x").unwrap().data(), &[4.0]);
        tape.reset_grads();
        assert_eq!(tape.gradients().get("x").unwrap().data(), &[0.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let p = params_with("x", Tensor::vector(vec![1.0, 2.0]).unwrap());
        let mut tape = GradTape::new(&p);
        let x = tape.param("x").unwrap();
        assert!(matches!(tape.backward(x), Err(VenomError::Contract(_))));
    }

    #[test]
    fn untouched_parameters_have_zero_gradient() {
        let mut p = ParamSet::new(0);
        p.insert("a", Tensor::scalar(1.0)).unwrap();
        p.insert("b", Tensor::vector(vec![1.0, 2.0]).unwrap()).unwrap();
        let mut tape = GradTape::new(&p);
        let a = tape.param("a").unwrap();
        let l = tape.exp(a);
        tape.backward(l).unwrap();
        let g = tape.gradients();
        assert_eq!(g.get("b").unwrap().data(), &[0.0, 0.0]);
        assert_eq!(g.get("b").unwrap().shape(), &[2]);
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let p = ParamSet::new(0);
        let mut tape = GradTape::new(&p);
        let x = tape.input(Tensor::matrix(1, 3, vec![1000.0, 1001.0, 999.0]).unwrap());
        let y = tape.softmax_rows(x);
        let v = tape.value(y);
        assert!(v.is_finite());
        assert!((v.data().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bce_is_finite_for_extreme_logits() {
        let p = ParamSet::new(0);
        let mut tape = GradTape::new(&p);
        let x = tape.input(Tensor::vector(vec![800.0, -800.0]).unwrap());
        let l = tape.bce_logits(x, &[0.0, 1.0]).unwrap();
        assert!((tape.value(l).item() - 800.0).abs() < 1e-9);
    }
}
