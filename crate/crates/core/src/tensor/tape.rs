use super::Tensor;
use crate::error::{invalid, Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule of a recorded operation.
///
/// Called with the output gradient, the input values and a mask telling
/// which inputs need a gradient; returns one entry per input (`None` where
/// not needed).
pub type BackwardRule =
    Box<dyn Fn(&[f64], &[&Tensor], &[bool]) -> Vec<Option<Vec<f64>>>>;

struct Node {
    value: Tensor,
    inputs: Vec<Var>,
    rule: Option<BackwardRule>,
}

/// Ordered record of operations. Nodes are appended as operations run, so
/// every node's inputs precede it and a reverse sweep is a valid
/// topological order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf value. Its `requires_grad` flag is kept.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            inputs: Vec::new(),
            rule: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a leaf that requires a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value.with_requires_grad(true))
    }

    /// Records a constant leaf (no gradient).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value.with_requires_grad(false))
    }

    /// Appends an operation result. The output requires a gradient iff any
    /// input does; the rule is dropped otherwise.
    pub fn record(&mut self, value: Tensor, inputs: &[Var], rule: BackwardRule) -> Var {
        let needs = inputs.iter().any(|v| self.nodes[v.0].value.requires_grad());
        self.nodes.push(Node {
            value: value.with_requires_grad(needs),
            inputs: inputs.to_vec(),
            rule: needs.then_some(rule),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad()
    }

    /// Moves a recorded value out, leaving an empty placeholder.
    pub fn take(&mut self, v: Var) -> Tensor {
        std::mem::replace(&mut self.nodes[v.0].value, Tensor::scalar(0.0))
    }

    /// Reverse sweep from a scalar `loss`. Gradients accumulate additively
    /// when a value feeds several operations.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = &self.nodes[loss.0].value;
        if !root.is_scalar() {
            return invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.shape()
            ));
        }
        if !root.all_finite() {
            return Err(Error::NonFinite(format!("loss value {}", root.item())));
        }
        for node in &mut self.nodes {
            node.value.set_grad(None);
        }
        if !self.nodes[loss.0].value.requires_grad() {
            return Ok(());
        }
        self.nodes[loss.0].value.set_grad(Some(vec![1.0]));

        for idx in (0..=loss.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(idx);
            let node = &mut rest[0];
            let Some(rule) = node.rule.as_ref() else {
                continue;
            };
            let Some(out_grad) = node.value.grad() else {
                continue;
            };
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|v| &before[v.0].value).collect();
            let needs: Vec<bool> = inputs.iter().map(|t| t.requires_grad()).collect();
            let grads = rule(out_grad, &inputs, &needs);
            drop(inputs);
            for (input, g) in node.inputs.iter().zip(grads) {
                let Some(g) = g else { continue };
                let target = &mut before[input.0].value;
                if !target.requires_grad() {
                    continue;
                }
                if g.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "gradient flowing into node {}",
                        input.0
                    )));
                }
                match target.grad_mut() {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{ElementwiseOp, ReduceOp};

    #[test]
    fn backward_of_sum() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap());
        let s = tape.reduce(ReduceOp::Sum, x, &[0]).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_square() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(&[1], vec![2.0]).unwrap());
        let sq = tape.elementwise(ElementwiseOp::Mul, x, x).unwrap();
        let s = tape.reduce(ReduceOp::Sum, sq, &[0]).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[4.0]);
    }

    #[test]
    fn fan_out_accumulates() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(&[4], vec![0.5, -1.0, 3.0, 2.0]).unwrap());
        let a = tape.reduce(ReduceOp::Sum, x, &[0]).unwrap();
        let b = tape.reduce(ReduceOp::Sum, x, &[0]).unwrap();
        let l = tape.elementwise(ElementwiseOp::Add, a, b).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[2.0; 4]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(&[2], vec![1.0, 2.0]).unwrap());
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(&[2], vec![1.0, 2.0]).unwrap());
        let c = tape.constant(Tensor::new(&[2], vec![3.0, 4.0]).unwrap());
        let p = tape.elementwise(ElementwiseOp::Mul, x, c).unwrap();
        let s = tape.reduce(ReduceOp::Sum, p, &[0]).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[3.0, 4.0]);
        assert!(tape.grad(c).is_none());
    }
}
