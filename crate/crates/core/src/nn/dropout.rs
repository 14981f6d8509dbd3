use crate::error::{invalid, Result};
use crate::nn::Mode;
use crate::rng::RngState;
use crate::tensor::{Tape, Tensor, Var};

/// Inverted-dropout mask: each entry is `1/(1−rate)` with probability
/// `1 − rate`, else 0. One uniform draw per element, in order.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut RngState) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rate) {
        return invalid(format!("dropout rate must be in [0, 1), got {rate}"));
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    Ok((0..len)
        .map(|_| if rng.next_f64() < keep { scale } else { 0.0 })
        .collect())
}

/// Identity in inference mode (and for rate 0); inverted dropout in training.
pub fn dropout(
    tape: &mut Tape,
    x: Var,
    rate: f64,
    mode: Mode,
    rng: RngState,
) -> Result<(Var, RngState)> {
    if !(0.0..1.0).contains(&rate) {
        return invalid(format!("dropout rate must be in [0, 1), got {rate}"));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((x, rng));
    }
    let mut rng = rng;
    let t = tape.value(x);
    let mask = dropout_mask(t.len(), rate, &mut rng)?;
    let data = t.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
    let out = Tensor::from_parts(t.shape().to_vec(), data);
    let var = tape.record(
        out,
        &[x],
        Box::new(move |g, _, _| vec![Some(g.iter().zip(&mask).map(|(a, m)| a * m).collect())]),
    );
    Ok((var, rng))
}
