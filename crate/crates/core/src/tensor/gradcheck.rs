use super::{Tape, Tensor, Var};
use crate::error::{invalid, Error, Result};

/// Compares the tape gradient of a scalar function against central
/// differences and returns
/// `max_i |analytic_i − numeric_i| / max(1, |analytic_i|)`.
///
/// `f` records its computation on the tape it is given, starting from the
/// input variable, and returns the scalar output.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("finite-difference step must be positive, got {eps}"));
    }
    let eval = |input: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.constant(input);
        let out = f(&mut tape, v)?;
        let value = tape.value(out);
        if !value.is_scalar() {
            return invalid("grad_check needs a scalar-valued function");
        }
        let y = value.item();
        if !y.is_finite() {
            return Err(Error::NonFinite(format!("function value {y}")));
        }
        Ok(y)
    };

    let mut tape = Tape::new();
    let xv = tape.param(x.clone());
    let out = f(&mut tape, xv)?;
    tape.backward(out)?;
    let analytic = tape
        .grad(xv)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; x.len()]);

    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_exact() {
        let x = Tensor::new(&[4], vec![0.3, -1.2, 2.0, 5.5]).unwrap();
        let err = grad_check(|t, v| t.sum_all(v), &x, 1e-5).unwrap();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn zero_step_rejected() {
        let x = Tensor::new(&[1], vec![1.0]).unwrap();
        assert!(grad_check(|t, v| t.sum_all(v), &x, 0.0).is_err());
    }
}
