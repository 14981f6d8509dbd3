use super::softmax::softmax_rows;
use crate::error::{invalid, shape_err, Result};
use crate::tensor::{Tape, Tensor, Var};

const PROB_FLOOR: f64 = 1e-12;

fn check_labels(labels: &[usize], n: usize, k: usize) -> Result<()> {
    if labels.len() != n {
        return shape_err(format!("{} labels for {n} rows", labels.len()));
    }
    if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return invalid(format!("label {l} at position {i} is outside [0, {k})"));
    }
    Ok(())
}

/// Mean negative log-likelihood of the labelled class,
/// `−(1/N) Σ ln(clamp(p[i, y_i], 1e-12, 1))`.
pub fn sparse_ce_loss(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    let &[n, k] = probs.shape() else {
        return shape_err(format!("expected [N×K] probabilities, got {:?}", probs.shape()));
    };
    check_labels(labels, n, k)?;
    let total: f64 = probs
        .data()
        .chunks(k)
        .zip(labels)
        .map(|(row, &y)| -row[y].clamp(PROB_FLOOR, 1.0).ln())
        .sum();
    Ok(total / n as f64)
}

/// Softmax followed by sparse cross-entropy as one node. Returns the scalar
/// loss and the probabilities; the backward rule is `(p − onehot) / N`.
pub fn softmax_cross_entropy(
    tape: &mut Tape,
    logits: Var,
    labels: &[usize],
) -> Result<(Var, Tensor)> {
    let t = tape.value(logits);
    let &[n, k] = t.shape() else {
        return shape_err(format!("expected [N×K] logits, got {:?}", t.shape()));
    };
    if k < 2 {
        return shape_err("cross-entropy needs at least two classes");
    }
    check_labels(labels, n, k)?;
    let probs = Tensor::from_parts(vec![n, k], softmax_rows(t.data(), k));
    let loss = sparse_ce_loss(&probs, labels)?;
    let saved = probs.data().to_vec();
    let labels = labels.to_vec();
    let var = tape.record(
        Tensor::scalar(loss),
        &[logits],
        Box::new(move |g, _, _| {
            let scale = g[0] / n as f64;
            let mut gx = saved.clone();
            for (row, &y) in gx.chunks_mut(k).zip(&labels) {
                row[y] -= 1.0;
                row.iter_mut().for_each(|v| *v *= scale);
            }
            vec![Some(gx)]
        }),
    );
    Ok((var, probs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certain_correct_class_costs_nothing() {
        let p = Tensor::new(&[1, 2], vec![0.0, 1.0]).unwrap();
        assert_eq!(sparse_ce_loss(&p, &[1]).unwrap(), 0.0);
    }

    #[test]
    fn coin_flip_costs_ln2() {
        let p = Tensor::new(&[1, 2], vec![0.5, 0.5]).unwrap();
        let l = sparse_ce_loss(&p, &[1]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((l - 0.693147).abs() < 1e-6);
    }

    #[test]
    fn uniform_four_way_costs_ln4() {
        let p = Tensor::new(&[2, 4], vec![0.25; 8]).unwrap();
        let l = sparse_ce_loss(&p, &[0, 3]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_label() {
        let p = Tensor::new(&[1, 2], vec![0.5, 0.5]).unwrap();
        assert!(sparse_ce_loss(&p, &[2]).is_err());
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::new(&[1, 2], vec![0.0, 0.0]).unwrap());
        assert!(softmax_cross_entropy(&mut tape, z, &[5]).is_err());
    }

    #[test]
    fn fused_loss_matches_two_step_value() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::new(&[2, 3], vec![0.1, 2.0, -1.0, 0.5, 0.5, 3.0]).unwrap());
        let (l, probs) = softmax_cross_entropy(&mut tape, z, &[1, 2]).unwrap();
        let direct = sparse_ce_loss(&probs, &[1, 2]).unwrap();
        assert_eq!(tape.data(l)[0], direct);
    }
}
