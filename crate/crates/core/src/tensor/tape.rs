use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::conv::{conv1d_backward_raw, conv1d_forward_raw, conv_geometry};
use super::Tensor;
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Exp(usize),
    Softplus(usize),
    Log1p(usize),
    LeakyRelu(usize, f64),
    Sum(usize),
    SumSquares(usize),
    Conv1d {
        input: usize,
        kernels: usize,
        bias: usize,
        stride: usize,
        padding: usize,
    },
    Slice {
        src: usize,
        row0: usize,
        col0: usize,
    },
    ConcatRows(Vec<usize>),
    ResampleRows {
        src: usize,
        taps: Arc<[(usize, f64)]>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradient tape: an append-only record of primitive ops.
///
/// Nodes are stored in creation order, so every node's inputs precede it and
/// a single reverse sweep is a valid topological traversal.
#[derive(Debug)]
pub struct Graph {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

/// Result of [`Graph::backward`]: one gradient per node that requires one.
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, or `None` when `v` does not
    /// require a gradient (or belongs to another tape).
    pub fn get(&self, v: Var) -> Option<Tensor> {
        if v.tape != self.tape {
            return None;
        }
        self.grads[v.index].as_ref().map(|g| Tensor {
            shape: self.shapes[v.index].clone(),
            data: g.clone(),
        })
    }

    /// Like [`get`](Self::get) but returns zeros for nodes the loss does not
    /// depend on.
    pub fn get_or_zero(&self, v: Var) -> Tensor {
        self.get(v).unwrap_or_else(|| Tensor {
            shape: self.shapes[v.index].clone(),
            data: vec![0.0; self.shapes[v.index].iter().product()],
        })
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize, f: impl Fn(&mut [f64])) {
    let buf = slot.get_or_insert_with(|| vec![0.0; len]);
    f(buf);
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::Tape(format!(
                "variable from tape {} used on tape {}",
                v.tape, self.id
            )));
        }
        Ok(v.index)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool, name: &str) -> Result<Var> {
        value.ensure_finite(name)?;
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        })
    }

    fn rg(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    /// Current value of `v`.
    ///
    /// Panics if `v` was recorded on a different tape.
    pub fn value(&self, v: Var) -> &Tensor {
        assert_eq!(v.tape, self.id, "variable belongs to another tape");
        &self.nodes[v.index].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        v.tape == self.id && self.nodes[v.index].requires_grad
    }

    fn binary(&mut self, a: Var, b: Var, name: &str) -> Result<(usize, usize)> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        self.nodes[ia]
            .value
            .same_shape(&self.nodes[ib].value, name)?;
        Ok((ia, ib))
    }

    fn zip_with(&self, ia: usize, ib: usize, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (x, y) = (&self.nodes[ia].value, &self.nodes[ib].value);
        Tensor {
            shape: x.shape.clone(),
            data: x.data.iter().zip(&y.data).map(|(&p, &q)| f(p, q)).collect(),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = self.binary(a, b, "add")?;
        let v = self.zip_with(ia, ib, |p, q| p + q);
        let rg = self.rg(ia) || self.rg(ib);
        self.push(v, Op::Add(ia, ib), rg, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = self.binary(a, b, "sub")?;
        let v = self.zip_with(ia, ib, |p, q| p - q);
        let rg = self.rg(ia) || self.rg(ib);
        self.push(v, Op::Sub(ia, ib), rg, "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = self.binary(a, b, "mul")?;
        let v = self.zip_with(ia, ib, |p, q| p * q);
        let rg = self.rg(ia) || self.rg(ib);
        self.push(v, Op::Mul(ia, ib), rg, "mul")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = self.nodes[ia].value.map(|x| x * c);
        let rg = self.rg(ia);
        self.push(v, Op::Scale(ia, c), rg, "scale")
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = self.nodes[ia].value.map(|x| x + c);
        let rg = self.rg(ia);
        self.push(v, Op::AddScalar(ia), rg, "add_scalar")
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = self.nodes[ia].value.map(f64::exp);
        let rg = self.rg(ia);
        self.push(v, Op::Exp(ia), rg, "exp")
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = self.nodes[ia].value.map(softplus);
        let rg = self.rg(ia);
        self.push(v, Op::Softplus(ia), rg, "softplus")
    }

    /// `ln(1 + x)`; inputs at or below -1 raise a numerics error.
    pub fn log1p(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = self.nodes[ia].value.map(f64::ln_1p);
        let rg = self.rg(ia);
        self.push(v, Op::Log1p(ia), rg, "log1p")
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = self.nodes[ia]
            .value
            .map(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.rg(ia);
        self.push(v, Op::LeakyRelu(ia, slope), rg, "leaky_relu")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = Tensor::scalar(self.nodes[ia].value.sum());
        let rg = self.rg(ia);
        self.push(v, Op::Sum(ia), rg, "sum")
    }

    /// Squared L2 norm over all elements.
    pub fn sum_squares(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let v = Tensor::scalar(self.nodes[ia].value.sum_squares());
        let rg = self.rg(ia);
        self.push(v, Op::SumSquares(ia), rg, "sum_squares")
    }

    /// `‖a − b‖²` summed over every element.
    pub fn squared_distance(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        self.sum_squares(d)
    }

    pub fn conv1d(
        &mut self,
        input: Var,
        kernels: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let (ii, ik, ib) = (self.idx(input)?, self.idx(kernels)?, self.idx(bias)?);
        let g = conv_geometry(
            &self.nodes[ii].value,
            &self.nodes[ik].value,
            &self.nodes[ib].value,
            stride,
            padding,
        )?;
        let v = conv1d_forward_raw(&self.nodes[ii].value, &self.nodes[ik].value, &self.nodes[ib].value, &g);
        let rg = self.rg(ii) || self.rg(ik) || self.rg(ib);
        self.push(
            v,
            Op::Conv1d {
                input: ii,
                kernels: ik,
                bias: ib,
                stride,
                padding,
            },
            rg,
            "conv1d",
        )
    }

    /// Rectangular window `[row0, row0+rows) x [col0, col0+cols)` of a matrix.
    pub fn slice(&mut self, a: Var, row0: usize, rows: usize, col0: usize, cols: usize) -> Result<Var> {
        let ia = self.idx(a)?;
        let (r, c) = self.nodes[ia].value.dims2()?;
        if rows == 0 || cols == 0 || row0 + rows > r || col0 + cols > c {
            return Err(Error::Shape(format!(
                "slice rows {row0}+{rows}, cols {col0}+{cols} out of {r}x{c}"
            )));
        }
        let src = &self.nodes[ia].value.data;
        let mut data = Vec::with_capacity(rows * cols);
        for row in row0..row0 + rows {
            data.extend_from_slice(&src[row * c + col0..row * c + col0 + cols]);
        }
        let v = Tensor {
            shape: vec![rows, cols],
            data,
        };
        let rg = self.rg(ia);
        self.push(v, Op::Slice { src: ia, row0, col0 }, rg, "slice")
    }

    /// Stacks matrices with equal column counts along the row axis.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Shape("concat_rows of nothing".into()));
        }
        let idx: Vec<usize> = parts.iter().map(|&p| self.idx(p)).collect::<Result<_>>()?;
        let cols = self.nodes[idx[0]].value.dims2()?.1;
        let mut rows = 0;
        let mut data = Vec::new();
        for &i in &idx {
            let (r, c) = self.nodes[i].value.dims2()?;
            if c != cols {
                return Err(Error::Shape(format!(
                    "concat_rows column mismatch: {c} vs {cols}"
                )));
            }
            rows += r;
            data.extend_from_slice(&self.nodes[i].value.data);
        }
        let rg = idx.iter().any(|&i| self.rg(i));
        self.push(
            Tensor {
                shape: vec![rows, cols],
                data,
            },
            Op::ConcatRows(idx),
            rg,
            "concat_rows",
        )
    }

    /// Linear interpolation along the row axis onto `out_rows` evenly spaced
    /// positions spanning the same first and last rows.
    pub fn resample_rows(&mut self, a: Var, out_rows: usize) -> Result<Var> {
        let ia = self.idx(a)?;
        let (r, c) = self.nodes[ia].value.dims2()?;
        if out_rows == 0 {
            return Err(Error::Shape("resample to zero rows".into()));
        }
        let taps: Arc<[(usize, f64)]> = linear_taps(r, out_rows).into();
        let src = &self.nodes[ia].value.data;
        let mut data = vec![0.0; out_rows * c];
        for (o, &(i0, w)) in taps.iter().enumerate() {
            let dst = &mut data[o * c..(o + 1) * c];
            let lo = &src[i0 * c..(i0 + 1) * c];
            if w == 0.0 {
                dst.copy_from_slice(lo);
            } else {
                let hi = &src[(i0 + 1) * c..(i0 + 2) * c];
                for ((d, &l), &h) in dst.iter_mut().zip(lo).zip(hi) {
                    *d = (1.0 - w) * l + w * h;
                }
            }
        }
        let rg = self.rg(ia);
        self.push(
            Tensor {
                shape: vec![out_rows, c],
                data,
            },
            Op::ResampleRows { src: ia, taps },
            rg,
            "resample_rows",
        )
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.tape != self.id || loss.index >= self.nodes.len() {
            return Err(Error::Tape("loss was not recorded on this tape".into()));
        }
        let root = loss.index;
        if !self.nodes[root].value.is_scalar() {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[root].value.shape
            )));
        }
        let n = root + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[root].requires_grad {
            grads[root] = Some(vec![1.0]);
        }
        for i in (0..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape.clone()).collect(),
        })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |i: usize| &self.nodes[i].value.data;
        let len = |i: usize| self.nodes[i].value.data.len();
        let rg = |i: usize| self.nodes[i].requires_grad;
        match node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for (x, s) in [(a, 1.0), (b, 1.0)] {
                    if rg(x) {
                        accumulate(&mut grads[x], len(x), |buf| {
                            buf.iter_mut().zip(g).for_each(|(d, &gi)| *d += s * gi)
                        });
                    }
                }
            }
            Op::Sub(a, b) => {
                if rg(a) {
                    accumulate(&mut grads[a], len(a), |buf| {
                        buf.iter_mut().zip(g).for_each(|(d, &gi)| *d += gi)
                    });
                }
                if rg(b) {
                    accumulate(&mut grads[b], len(b), |buf| {
                        buf.iter_mut().zip(g).for_each(|(d, &gi)| *d -= gi)
                    });
                }
            }
            Op::Mul(a, b) => {
                if rg(a) {
                    let other = val(b);
                    accumulate(&mut grads[a], len(a), |buf| {
                        for ((d, &gi), &o) in buf.iter_mut().zip(g).zip(other) {
                            *d += gi * o;
                        }
                    });
                }
                if rg(b) {
                    let other = val(a);
                    accumulate(&mut grads[b], len(b), |buf| {
                        for ((d, &gi), &o) in buf.iter_mut().zip(g).zip(other) {
                            *d += gi * o;
                        }
                    });
                }
            }
            Op::Scale(a, c) => {
                if rg(a) {
                    accumulate(&mut grads[a], len(a), |buf| {
                        buf.iter_mut().zip(g).for_each(|(d, &gi)| *d += c * gi)
                    });
                }
            }
            Op::AddScalar(a) => {
                if rg(a) {
                    accumulate(&mut grads[a], len(a), |buf| {
                        buf.iter_mut().zip(g).for_each(|(d, &gi)| *d += gi)
                    });
                }
            }
            Op::Exp(a) => {
                if rg(a) {
                    let out = &node.value.data;
                    accumulate(&mut grads[a], len(a), |buf| {
                        for ((d, &gi), &o) in buf.iter_mut().zip(g).zip(out) {
                            *d += gi * o;
                        }
                    });
                }
            }
            Op::Softplus(a) => {
                if rg(a) {
                    let x = val(a);
                    accumulate(&mut grads[a], len(a), |buf| {
                        for ((d, &gi), &xi) in buf.iter_mut().zip(g).zip(x) {
                            *d += gi * sigmoid(xi);
                        }
                    });
                }
            }
            Op::Log1p(a) => {
                if rg(a) {
                    let x = val(a);
                    accumulate(&mut grads[a], len(a), |buf| {
                        for ((d, &gi), &xi) in buf.iter_mut().zip(g).zip(x) {
                            *d += gi / (1.0 + xi);
                        }
                    });
                }
            }
            Op::LeakyRelu(a, slope) => {
                if rg(a) {
                    let x = val(a);
                    accumulate(&mut grads[a], len(a), |buf| {
                        for ((d, &gi), &xi) in buf.iter_mut().zip(g).zip(x) {
                            *d += if xi > 0.0 { gi } else { slope * gi };
                        }
                    });
                }
            }
            Op::Sum(a) => {
                if rg(a) {
                    let g0 = g[0];
                    accumulate(&mut grads[a], len(a), |buf| buf.iter_mut().for_each(|d| *d += g0));
                }
            }
            Op::SumSquares(a) => {
                if rg(a) {
                    let g0 = g[0];
                    let x = val(a);
                    accumulate(&mut grads[a], len(a), |buf| {
                        for (d, &xi) in buf.iter_mut().zip(x) {
                            *d += 2.0 * xi * g0;
                        }
                    });
                }
            }
            Op::Conv1d {
                input,
                kernels,
                bias,
                stride,
                padding,
            } => {
                let (x, w, b) = (
                    &self.nodes[input].value,
                    &self.nodes[kernels].value,
                    &self.nodes[bias].value,
                );
                let geo = conv_geometry(x, w, b, stride, padding).expect("validated in forward");
                let [dx, dw, db] =
                    conv1d_backward_raw(x, w, g, &geo, [rg(input), rg(kernels), rg(bias)]);
                for (slot, d) in [(input, dx), (kernels, dw), (bias, db)] {
                    if let Some(d) = d {
                        accumulate(&mut grads[slot], d.data.len(), |buf| {
                            buf.iter_mut().zip(&d.data).for_each(|(a, b)| *a += b)
                        });
                    }
                }
            }
            Op::Slice { src, row0, col0 } => {
                if rg(src) {
                    let c = self.nodes[src].value.shape[1];
                    let (rows, cols) = (node.value.shape[0], node.value.shape[1]);
                    accumulate(&mut grads[src], len(src), |buf| {
                        for r in 0..rows {
                            let dst = &mut buf[(row0 + r) * c + col0..(row0 + r) * c + col0 + cols];
                            for (d, &gi) in dst.iter_mut().zip(&g[r * cols..(r + 1) * cols]) {
                                *d += gi;
                            }
                        }
                    });
                }
            }
            Op::ConcatRows(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = len(p);
                    if rg(p) {
                        accumulate(&mut grads[p], n, |buf| {
                            for (d, &gi) in buf.iter_mut().zip(&g[offset..offset + n]) {
                                *d += gi;
                            }
                        });
                    }
                    offset += n;
                }
            }
            Op::ResampleRows { src, ref taps } => {
                if rg(src) {
                    let c = node.value.shape[1];
                    accumulate(&mut grads[src], len(src), |buf| {
                        for (o, &(i0, w)) in taps.iter().enumerate() {
                            let go = &g[o * c..(o + 1) * c];
                            for (d, &gi) in buf[i0 * c..(i0 + 1) * c].iter_mut().zip(go) {
                                *d += (1.0 - w) * gi;
                            }
                            if w != 0.0 {
                                for (d, &gi) in buf[(i0 + 1) * c..(i0 + 2) * c].iter_mut().zip(go) {
                                    *d += w * gi;
                                }
                            }
                        }
                    });
                }
            }
        }
    }
}

/// Interpolation taps `(lower index, upper weight)` mapping `n_in` evenly
/// spaced samples onto `n_out` samples with shared endpoints.
pub(crate) fn linear_taps(n_in: usize, n_out: usize) -> Vec<(usize, f64)> {
    (0..n_out)
        .map(|o| {
            if n_in == 1 || n_out == 1 {
                return (0, 0.0);
            }
            let pos = o as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
            let i0 = (pos.floor() as usize).min(n_in - 1);
            let w = pos - i0 as f64;
            if i0 == n_in - 1 || w < 1e-12 {
                (i0, 0.0)
            } else {
                (i0, w)
            }
        })
        .collect()
}
