//! Central finite-difference checks for every differentiable layer, with
//! respect to each of its inputs, on random data.

use fftune::nn::{batch_norm, conv2d, dense, global_pool, relu, softmax, softmax_cross_entropy, BatchNormState, Mode, Padding, PoolKind};
use fftune::rng::RngState;
use fftune::tensor::grad_check;
use fftune::{Result, Tape, Tensor, Var};

const EPS: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn random(shape: &[usize], rng: &mut RngState) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
}

/// `Σ out ⊙ r` with fixed random `r`, so every output element matters.
fn project(tape: &mut Tape, out: Var, r: &Tensor) -> Result<Var> {
    let w = tape.constant(r.clone());
    let prod = tape.mul(out, w)?;
    tape.sum_all(prod)
}

fn weights_for(tape: &Tape, out: Var, seed: u64) -> Tensor {
    random(tape.shape(out), &mut RngState::new(seed))
}

fn check(name: &str, f: impl Fn(&mut Tape, Var) -> Result<Var>, x: &Tensor) {
    let err = grad_check(f, x, EPS).unwrap();
    assert!(err < TOL, "{name}: max relative error {err:e}");
}

/// Gradient of a layer output, projected with random weights, against one
/// input while the others stay fixed.
fn layer_check(name: &str, inputs: &[Tensor], which: usize, layer: impl Fn(&mut Tape, &[Var]) -> Result<Var>) {
    let f = |tape: &mut Tape, v: Var| -> Result<Var> {
        let vars: Vec<Var> = inputs
            .iter()
            .enumerate()
            .map(|(i, t)| if i == which { v } else { tape.constant(t.clone()) })
            .collect();
        let out = layer(tape, &vars)?;
        let r = weights_for(tape, out, 77);
        project(tape, out, &r)
    };
    check(&format!("{name} wrt input {which}"), f, &inputs[which]);
}

#[test]
fn conv2d_same_and_valid_all_inputs() {
    let mut rng = RngState::new(1);
    for (stride, padding) in [(1, Padding::Same), (2, Padding::Same), (1, Padding::Valid), (2, Padding::Valid)] {
        let inputs = [random(&[2, 3, 7, 6], &mut rng), random(&[4, 3, 3, 3], &mut rng), random(&[4], &mut rng)];
        for which in 0..3 {
            layer_check(&format!("conv2d s{stride} {padding:?}"), &inputs, which, |t, v| {
                conv2d(t, v[0], v[1], v[2], stride, padding)
            });
        }
    }
}

#[test]
fn relu_wrt_input() {
    let mut rng = RngState::new(2);
    let inputs = [random(&[3, 4, 5], &mut rng)];
    layer_check("relu", &inputs, 0, |t, v| relu(t, v[0]));
}

#[test]
fn global_pool_both_kinds() {
    let mut rng = RngState::new(3);
    let inputs = [random(&[2, 3, 4, 5], &mut rng)];
    for kind in [PoolKind::Avg, PoolKind::Max] {
        layer_check(&format!("pool {kind:?}"), &inputs, 0, |t, v| global_pool(t, v[0], kind));
    }
}

#[test]
fn batch_norm_train_mode_all_inputs() {
    let mut rng = RngState::new(4);
    for shape in [vec![6, 3], vec![3, 2, 4, 4]] {
        let c = shape[1];
        let inputs = [random(&shape, &mut rng), random(&[c], &mut rng), random(&[c], &mut rng)];
        for which in 0..3 {
            layer_check(&format!("batch_norm {shape:?}"), &inputs, which, |t, v| {
                let mut state = BatchNormState::with_defaults(c)?;
                batch_norm(t, v[0], v[1], v[2], &mut state, Mode::Train)
            });
        }
    }
}

#[test]
fn batch_norm_infer_mode_wrt_input() {
    let mut rng = RngState::new(5);
    let inputs = [random(&[4, 3, 2, 2], &mut rng), random(&[3], &mut rng), random(&[3], &mut rng)];
    layer_check("batch_norm infer", &inputs, 0, |t, v| {
        let mut state = BatchNormState::with_defaults(3)?;
        batch_norm(t, v[0], v[1], v[2], &mut state, Mode::Infer)
    });
}

#[test]
fn dense_all_inputs_and_flattening() {
    let mut rng = RngState::new(6);
    let inputs = [random(&[5, 4], &mut rng), random(&[4, 3], &mut rng), random(&[3], &mut rng)];
    for which in 0..3 {
        layer_check("dense", &inputs, which, |t, v| dense(t, v[0], v[1], v[2]));
    }
    let flat = [random(&[2, 2, 3], &mut rng), random(&[6, 2], &mut rng), random(&[2], &mut rng)];
    layer_check("dense rank-3", &flat, 0, |t, v| dense(t, v[0], v[1], v[2]));
}

#[test]
fn softmax_wrt_logits() {
    let mut rng = RngState::new(7);
    let inputs = [random(&[4, 3], &mut rng)];
    layer_check("softmax", &inputs, 0, |t, v| softmax(t, v[0]));
}

#[test]
fn fused_softmax_cross_entropy() {
    let mut rng = RngState::new(8);
    let logits = random(&[6, 4], &mut rng);
    let labels = [0, 3, 1, 1, 2, 0];
    check("softmax+ce", |t, v| Ok(softmax_cross_entropy(t, v, &labels)?.0), &logits);
}

#[test]
fn small_network_end_to_end() {
    let mut rng = RngState::new(9);
    let k = random(&[3, 2, 3, 3], &mut rng);
    let w = random(&[3, 2], &mut rng);
    let x = random(&[4, 2, 5, 5], &mut rng);
    let labels = [0, 1, 1, 0];
    let net = |t: &mut Tape, kv: Var| -> Result<Var> {
        let xv = t.constant(x.clone());
        let b = t.constant(Tensor::zeros(&[3])?);
        let h = conv2d(t, xv, kv, b, 1, Padding::Same)?;
        let h = relu(t, h)?;
        let g = t.constant(Tensor::new(&[3], 1.0)?);
        let beta = t.constant(Tensor::zeros(&[3])?);
        let mut st = BatchNormState::with_defaults(3)?;
        let h = batch_norm(t, h, g, beta, &mut st, Mode::Train)?;
        let h = global_pool(t, h, PoolKind::Avg)?;
        let wv = t.constant(w.clone());
        let bv = t.constant(Tensor::zeros(&[2])?);
        let logits = dense(t, h, wv, bv)?;
        Ok(softmax_cross_entropy(t, logits, &labels)?.0)
    };
    check("conv→relu→bn→pool→dense→ce", net, &k);
}
