//! Differentiable primitive operations on the tape.

use super::linalg::gemm;
use super::{Tape, Tensor, Var};
use crate::error::{invalid, shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    Max,
}

/// Maps every flat index of `shape` to the flat index of the reduced output.
fn reduce_index_map(shape: &[usize], axes: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let out_shape: Vec<usize> = shape
        .iter()
        .enumerate()
        .filter(|(i, _)| !axes.contains(i))
        .map(|(_, &d)| d)
        .collect();
    let total: usize = shape.iter().product();
    let out_shape = if out_shape.is_empty() { vec![1] } else { out_shape };
    let mut sorted = axes.to_vec();
    sorted.sort_unstable();
    if sorted.iter().enumerate().all(|(i, &ax)| ax == shape.len() - sorted.len() + i) {
        // trailing axes: each output owns one contiguous run
        let inner: usize = shape[shape.len() - sorted.len()..].iter().product();
        return (out_shape, (0..total).map(|i| i / inner.max(1)).collect());
    }
    let mut map = Vec::with_capacity(total);
    let mut coord = vec![0usize; shape.len()];
    for _ in 0..total {
        let mut o = 0;
        for (ax, (&c, &d)) in coord.iter().zip(shape).enumerate() {
            if !axes.contains(&ax) {
                o = o * d + c;
            }
        }
        map.push(o);
        for ax in (0..shape.len()).rev() {
            coord[ax] += 1;
            if coord[ax] < shape[ax] {
                break;
            }
            coord[ax] = 0;
        }
    }
    (out_shape, map)
}

impl Tape {
    /// `a op b` for equal shapes, or with a one-element `b` broadcast over `a`.
    pub fn elementwise(&mut self, op: ElementwiseOp, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let broadcast = if ta.shape() == tb.shape() {
            false
        } else if tb.is_scalar() {
            true
        } else {
            return shape_err(format!(
                "elementwise {op:?}: shapes {:?} and {:?} are incompatible",
                ta.shape(),
                tb.shape()
            ));
        };
        let bv = |i: usize| if broadcast { tb.data()[0] } else { tb.data()[i] };
        let data: Vec<f64> = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| match op {
                ElementwiseOp::Add => x + bv(i),
                ElementwiseOp::Sub => x - bv(i),
                ElementwiseOp::Mul => x * bv(i),
            })
            .collect();
        let out = Tensor::from_parts(ta.shape().to_vec(), data);
        Ok(self.record(
            out,
            &[a, b],
            Box::new(move |g, inputs, needs| {
                let (ta, tb) = (inputs[0], inputs[1]);
                let bv = |i: usize| if broadcast { tb.data()[0] } else { tb.data()[i] };
                let ga = needs[0].then(|| match op {
                    ElementwiseOp::Add | ElementwiseOp::Sub => g.to_vec(),
                    ElementwiseOp::Mul => g.iter().enumerate().map(|(i, &gi)| gi * bv(i)).collect(),
                });
                let gb = needs[1].then(|| {
                    let per: Vec<f64> = match op {
                        ElementwiseOp::Add => g.to_vec(),
                        ElementwiseOp::Sub => g.iter().map(|x| -x).collect(),
                        ElementwiseOp::Mul => {
                            g.iter().zip(ta.data()).map(|(gi, ai)| gi * ai).collect()
                        }
                    };
                    if broadcast {
                        vec![per.iter().sum()]
                    } else {
                        per
                    }
                });
                vec![ga, gb]
            }),
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Add, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Mul, a, b)
    }

    /// `[M×K] · [K×N]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (&[m, k], &[k2, n]) = (ta.shape(), tb.shape()) else {
            return shape_err(format!(
                "matmul needs 2-D operands, got {:?} and {:?}",
                ta.shape(),
                tb.shape()
            ));
        };
        if k != k2 {
            return shape_err(format!("matmul inner extents differ: {k} vs {k2}"));
        }
        let mut c = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), false, &mut c, 0.0);
        Ok(self.record(
            Tensor::from_parts(vec![m, n], c),
            &[a, b],
            Box::new(move |g, inputs, needs| {
                // dA = dC · Bᵀ, dB = Aᵀ · dC
                let ga = needs[0].then(|| {
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, g, false, inputs[1].data(), true, &mut ga, 0.0);
                    ga
                });
                let gb = needs[1].then(|| {
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, inputs[0].data(), true, g, false, &mut gb, 0.0);
                    gb
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Reduces over `axes`. Max routes the gradient to the first maximal
    /// element (row-major order) of each reduced group.
    pub fn reduce(&mut self, op: ReduceOp, x: Var, axes: &[usize]) -> Result<Var> {
        let tx = self.value(x);
        let rank = tx.shape().len();
        for (i, &ax) in axes.iter().enumerate() {
            if ax >= rank {
                return invalid(format!("axis {ax} out of range for rank {rank}"));
            }
            if axes[..i].contains(&ax) {
                return invalid(format!("axis {ax} repeated"));
            }
        }
        if axes.is_empty() {
            return invalid("reduce needs at least one axis");
        }
        let (out_shape, map) = reduce_index_map(tx.shape(), axes);
        let out_len: usize = out_shape.iter().product();
        let group = tx.len() / out_len;
        let mut out = match op {
            ReduceOp::Max => vec![f64::NEG_INFINITY; out_len],
            _ => vec![0.0; out_len],
        };
        let mut argmax = vec![usize::MAX; out_len];
        for (i, (&v, &o)) in tx.data().iter().zip(&map).enumerate() {
            match op {
                ReduceOp::Sum | ReduceOp::Mean => out[o] += v,
                ReduceOp::Max => {
                    if argmax[o] == usize::MAX || v > out[o] {
                        out[o] = v;
                        argmax[o] = i;
                    }
                }
            }
        }
        if op == ReduceOp::Mean {
            out.iter_mut().for_each(|v| *v /= group as f64);
        }
        let len = tx.len();
        Ok(self.record(
            Tensor::from_parts(out_shape, out),
            &[x],
            Box::new(move |g, _, _| {
                let gx = match op {
                    ReduceOp::Sum => map.iter().map(|&o| g[o]).collect(),
                    ReduceOp::Mean => map.iter().map(|&o| g[o] / group as f64).collect(),
                    ReduceOp::Max => {
                        let mut gx = vec![0.0; len];
                        for (o, &i) in argmax.iter().enumerate() {
                            gx[i] = g[o];
                        }
                        gx
                    }
                };
                vec![Some(gx)]
            }),
        ))
    }

    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        let axes: Vec<usize> = (0..self.shape(x).len()).collect();
        self.reduce(ReduceOp::Sum, x, &axes)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).reshaped(shape)?;
        Ok(self.record(out, &[x], Box::new(|g, _, _| vec![Some(g.to_vec())])))
    }

    /// Adds a `[U]` bias to every row of an `[N×U]` matrix.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let &[_, u] = tx.shape() else {
            return shape_err(format!("row bias needs a 2-D input, got {:?}", tx.shape()));
        };
        if tb.len() != u {
            return shape_err(format!("bias has {} entries, rows have {u}", tb.len()));
        }
        let data: Vec<f64> = tx
            .data()
            .chunks(u)
            .flat_map(|row| row.iter().zip(tb.data()).map(|(a, b)| a + b))
            .collect();
        let out = Tensor::from_parts(tx.shape().to_vec(), data);
        Ok(self.record(
            out,
            &[x, bias],
            Box::new(move |g, _, needs| {
                let gb = needs[1].then(|| {
                    let mut gb = vec![0.0; u];
                    for row in g.chunks(u) {
                        gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                    }
                    gb
                });
                vec![needs[0].then(|| g.to_vec()), gb]
            }),
        ))
    }
}
