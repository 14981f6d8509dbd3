use crate::error::{shape_err, Result};
use crate::tensor::{Tape, Var};

/// `x·W + b` for `x: [N×F]`, `W: [F×U]`, `b: [U]`. Inputs of higher rank
/// are flattened to `[N×F]` first.
pub fn dense(tape: &mut Tape, x: Var, weights: Var, bias: Var) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    let x = match shape.len() {
        2 => x,
        r if r > 2 => {
            let n = shape[0];
            tape.reshape(x, &[n, shape[1..].iter().product()])?
        }
        _ => return shape_err(format!("dense input must be at least 2-D, got {shape:?}")),
    };
    let xw = tape.matmul(x, weights)?;
    tape.add_row_bias(xw, bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn identity_weights() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(&[2, 2], vec![1.0, -2.0, 3.5, 0.0]).unwrap());
        let w = tape.leaf(Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let b = tape.leaf(Tensor::zeros(&[2]).unwrap());
        let y = dense(&mut tape, x, w, b).unwrap();
        assert_eq!(tape.data(y), &[1.0, -2.0, 3.5, 0.0]);
    }

    #[test]
    fn small_product() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap());
        let w = tape.leaf(Tensor::from_vec(&[2, 1], vec![1.0, 1.0]).unwrap());
        let b = tape.leaf(Tensor::from_vec(&[1], vec![1.0]).unwrap());
        let y = dense(&mut tape, x, w, b).unwrap();
        assert_eq!(tape.data(y), &[4.0]);
    }

    #[test]
    fn mismatch() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(&[1, 3], 1.0).unwrap());
        let w = tape.leaf(Tensor::new(&[2, 1], 1.0).unwrap());
        let b = tape.leaf(Tensor::zeros(&[1]).unwrap());
        assert!(dense(&mut tape, x, w, b).is_err());
    }
}
