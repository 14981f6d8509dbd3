//! Dense row-major `f64` tensors and the gradient tape.

mod gradcheck;
pub(crate) mod linalg;
mod ops;
mod tape;

pub use gradcheck::grad_check;
pub use ops::{ElementwiseOp, ReduceOp};
pub use tape::{BackwardRule, Tape, Var};

use crate::error::{shape_err, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
}

/// Fill argument for [`Tensor::new`].
#[derive(Debug, Clone)]
pub enum Fill {
    Scalar(f64),
    Values(Vec<f64>),
}

impl From<f64> for Fill {
    fn from(v: f64) -> Self {
        Fill::Scalar(v)
    }
}

impl From<Vec<f64>> for Fill {
    fn from(v: Vec<f64>) -> Self {
        Fill::Values(v)
    }
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return shape_err("shape must have at least one extent");
    }
    if let Some(pos) = shape.iter().position(|&d| d == 0) {
        return shape_err(format!("extent {pos} of {shape:?} is zero"));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn new(shape: &[usize], fill: impl Into<Fill>) -> Result<Self> {
        let len = check_shape(shape)?;
        let data = match fill.into() {
            Fill::Scalar(v) => vec![v; len],
            Fill::Values(v) => {
                if v.len() != len {
                    return shape_err(format!(
                        "shape {shape:?} holds {len} values, got {}",
                        v.len()
                    ));
                }
                v
            }
        };
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
            requires_grad: false,
        })
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        Self::new(shape, Fill::Values(data))
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(shape, 0.0)
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
            grad: None,
            requires_grad: false,
        }
    }

    /// Caller guarantees `product(shape) == data.len()` and nonzero extents.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            shape,
            data,
            grad: None,
            requires_grad: false,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn with_requires_grad(mut self, on: bool) -> Self {
        self.requires_grad = on;
        self
    }

    pub(crate) fn set_grad(&mut self, grad: Option<Vec<f64>>) {
        debug_assert!(grad.as_ref().map_or(true, |g| g.len() == self.data.len()));
        self.grad = grad;
    }

    pub(crate) fn grad_mut(&mut self) -> &mut Option<Vec<f64>> {
        &mut self.grad
    }

    pub fn reshaped(&self, shape: &[usize]) -> Result<Tensor> {
        let len = check_shape(shape)?;
        if len != self.data.len() {
            return shape_err(format!("cannot reshape {:?} to {shape:?}", self.shape));
        }
        Ok(Tensor::from_parts(shape.to_vec(), self.data.clone()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_fill() {
        let t = Tensor::new(&[2, 2], 0.0).unwrap();
        assert_eq!(t.data(), &[0.0; 4]);
        assert!(t.grad().is_none());
        assert!(!t.requires_grad());
    }

    #[test]
    fn explicit_fill() {
        let t = Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(Tensor::new(&[2], vec![1.0, 2.0, 3.0]).is_err());
        assert!(Tensor::new(&[0, 2], 1.0).is_err());
        assert!(Tensor::new(&[], 1.0).is_err());
    }
}
