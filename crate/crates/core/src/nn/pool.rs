use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::tensor::{ReduceOp, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Avg,
    Max,
}

/// Collapses `[N×C×H×W]` to `[N×C]` by spatial mean or max.
pub fn global_pool(tape: &mut Tape, x: Var, kind: PoolKind) -> Result<Var> {
    if tape.shape(x).len() != 4 {
        return shape_err(format!("global pooling needs [N×C×H×W], got {:?}", tape.shape(x)));
    }
    let op = match kind {
        PoolKind::Avg => ReduceOp::Mean,
        PoolKind::Max => ReduceOp::Max,
    };
    tape.reduce(op, x, &[2, 3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn pooled(kind: PoolKind, shape: &[usize], v: Vec<f64>) -> Vec<f64> {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(shape, v).unwrap());
        let y = global_pool(&mut tape, x, kind).unwrap();
        tape.data(y).to_vec()
    }

    #[test]
    fn avg_and_max() {
        let v = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(pooled(PoolKind::Avg, &[1, 1, 2, 2], v.clone()), vec![2.5]);
        assert_eq!(pooled(PoolKind::Max, &[1, 1, 2, 2], v), vec![4.0]);
    }

    #[test]
    fn unit_spatial_is_identity() {
        let v = vec![0.3, -2.0, 5.0, 1.5, 0.0, 9.0];
        for kind in [PoolKind::Avg, PoolKind::Max] {
            assert_eq!(pooled(kind, &[2, 3, 1, 1], v.clone()), v);
        }
    }
}
