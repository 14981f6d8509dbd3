use crate::error::{shape_err, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Row-wise max-shifted softmax of an `[N×K]` slice.
pub fn softmax_rows(logits: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        out.extend(row.iter().map(|&z| (z - max).exp()));
        let sum: f64 = out[start..].iter().sum();
        out[start..].iter_mut().for_each(|p| *p /= sum);
    }
    out
}

/// Differentiable softmax over the last axis of `[N×K]` logits.
pub fn softmax(tape: &mut Tape, logits: Var) -> Result<Var> {
    let t = tape.value(logits);
    let &[_, k] = t.shape() else {
        return shape_err(format!("softmax needs [N×K] logits, got {:?}", t.shape()));
    };
    if k < 2 {
        return shape_err("softmax needs at least two classes");
    }
    let probs = softmax_rows(t.data(), k);
    let saved = probs.clone();
    Ok(tape.record(
        Tensor::from_parts(t.shape().to_vec(), probs),
        &[logits],
        Box::new(move |g, _, _| {
            // dz = s ⊙ (g − Σ g·s) per row
            let mut gx = Vec::with_capacity(g.len());
            for (gr, sr) in g.chunks(k).zip(saved.chunks(k)) {
                let dot: f64 = gr.iter().zip(sr).map(|(a, b)| a * b).sum();
                gx.extend(gr.iter().zip(sr).map(|(gi, si)| si * (gi - dot)));
            }
            vec![Some(gx)]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_logits() {
        assert_eq!(softmax_rows(&[0.0, 0.0], 2), vec![0.5, 0.5]);
    }

    #[test]
    fn log_ratio_logits() {
        let p = softmax_rows(&[1f64.ln(), 2f64.ln()], 2);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn shift_invariant() {
        let z = [0.3, -1.2, 2.5, 0.0];
        let shifted: Vec<f64> = z.iter().map(|v| v + 41.7).collect();
        let a = softmax_rows(&z, 4);
        let b = softmax_rows(&shifted, 4);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn single_class_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(&[2, 1], vec![1.0, 2.0]).unwrap());
        assert!(softmax(&mut tape, x).is_err());
    }
}
