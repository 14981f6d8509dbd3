use crate::error::Result;
use crate::tensor::{Tape, Tensor, Var};

/// `max(0, x)`. The subgradient at exactly 0 is 0.
pub fn relu(tape: &mut Tape, x: Var) -> Result<Var> {
    let tx = tape.value(x);
    let out = Tensor::from_parts(
        tx.shape().to_vec(),
        tx.data().iter().map(|&v| v.max(0.0)).collect(),
    );
    Ok(tape.record(
        out,
        &[x],
        Box::new(|g, inputs, _| {
            let gx = g
                .iter()
                .zip(inputs[0].data())
                .map(|(&gi, &xi)| if xi > 0.0 { gi } else { 0.0 })
                .collect();
            vec![Some(gx)]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clips_negatives() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap());
        let y = relu(&mut tape, x).unwrap();
        assert_eq!(tape.data(y), &[0.0, 0.0, 2.0]);
        let s = tape.sum_all(y).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn identity_on_nonnegative() {
        let mut tape = Tape::new();
        let v = vec![0.0, 0.5, 3.0, 7.25];
        let x = tape.leaf(Tensor::new(&[4], v.clone()).unwrap());
        let y = relu(&mut tape, x).unwrap();
        assert_eq!(tape.data(y), v.as_slice());
    }
}
