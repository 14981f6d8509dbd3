use crate::error::{invalid, shape_err, Result};
use crate::nn::Mode;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormState {
    /// gamma = 1, beta = 0, running mean 0, running variance 1.
    pub fn new(channels: usize, momentum: f64, eps: f64) -> Result<Self> {
        if !(momentum > 0.0 && momentum < 1.0) {
            return invalid(format!("momentum must lie in (0, 1), got {momentum}"));
        }
        if !(eps > 0.0) {
            return invalid(format!("eps must be positive, got {eps}"));
        }
        Ok(BatchNormState {
            gamma: Tensor::new(&[channels], 1.0)?,
            beta: Tensor::zeros(&[channels])?,
            running_mean: Tensor::zeros(&[channels])?,
            running_var: Tensor::new(&[channels], 1.0)?,
            momentum,
            eps,
        })
    }

    pub fn with_defaults(channels: usize) -> Result<Self> {
        Self::new(channels, 0.9, 1e-5)
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Per-channel normalization of `[N×C]` or `[N×C×…]` input.
///
/// Training mode normalizes with the biased batch statistics over the batch
/// and spatial axes and folds them into the running statistics
/// (`running ← momentum·running + (1 − momentum)·batch`). Inference mode
/// uses the running statistics only and leaves the state untouched.
pub fn batch_norm(
    tape: &mut Tape,
    x: Var,
    gamma: Var,
    beta: Var,
    state: &mut BatchNormState,
    mode: Mode,
) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    if shape.len() < 2 {
        return shape_err(format!("batch norm needs [N×C…] input, got {shape:?}"));
    }
    let (n, c) = (shape[0], shape[1]);
    if c != state.channels() || tape.value(gamma).len() != c || tape.value(beta).len() != c {
        return shape_err(format!("batch norm over {c} channels, state has {}", state.channels()));
    }
    let spatial: usize = shape[2..].iter().product();
    let count = n * spatial;
    let eps = state.eps;

    let (mean, var) = match mode {
        Mode::Train => {
            if n < 2 {
                return invalid("training-mode batch norm needs a batch of at least 2");
            }
            let xd = tape.data(x);
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for (i, plane) in xd.chunks(spatial).enumerate() {
                mean[i % c] += plane.iter().sum::<f64>();
            }
            mean.iter_mut().for_each(|m| *m /= count as f64);
            for (i, plane) in xd.chunks(spatial).enumerate() {
                let m = mean[i % c];
                var[i % c] += plane.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
            }
            var.iter_mut().for_each(|v| *v /= count as f64);
            let mom = state.momentum;
            for ch in 0..c {
                let rm = &mut state.running_mean.data_mut()[ch];
                *rm = mom * *rm + (1.0 - mom) * mean[ch];
                let rv = &mut state.running_var.data_mut()[ch];
                *rv = mom * *rv + (1.0 - mom) * var[ch];
            }
            (mean, var)
        }
        Mode::Infer => (
            state.running_mean.data().to_vec(),
            state.running_var.data().to_vec(),
        ),
    };

    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let xd = tape.data(x);
    let (gd, bd) = (tape.data(gamma), tape.data(beta));
    let mut xhat = Vec::with_capacity(xd.len());
    let mut out = Vec::with_capacity(xd.len());
    for (i, plane) in xd.chunks(spatial).enumerate() {
        let ch = i % c;
        for &v in plane {
            let h = (v - mean[ch]) * inv_std[ch];
            xhat.push(h);
            out.push(gd[ch] * h + bd[ch]);
        }
    }
    let out = Tensor::from_parts(shape, out);

    Ok(tape.record(
        out,
        &[x, gamma, beta],
        Box::new(move |g, inputs, needs| {
            let gd = inputs[1].data();
            let mut sum_g = vec![0.0; c];
            let mut sum_gx = vec![0.0; c];
            for (i, (gp, hp)) in g.chunks(spatial).zip(xhat.chunks(spatial)).enumerate() {
                let ch = i % c;
                sum_g[ch] += gp.iter().sum::<f64>();
                sum_gx[ch] += gp.iter().zip(hp).map(|(a, b)| a * b).sum::<f64>();
            }
            let gx = needs[0].then(|| {
                let mut gx = Vec::with_capacity(g.len());
                for (i, (gp, hp)) in g.chunks(spatial).zip(xhat.chunks(spatial)).enumerate() {
                    let ch = i % c;
                    match mode {
                        Mode::Train => {
                            // dx = γ/σ · (g − mean(g) − x̂·mean(g·x̂))
                            let k = gd[ch] * inv_std[ch];
                            let mg = sum_g[ch] / count as f64;
                            let mgx = sum_gx[ch] / count as f64;
                            gx.extend(gp.iter().zip(hp).map(|(gi, hi)| k * (gi - mg - hi * mgx)));
                        }
                        Mode::Infer => {
                            let k = gd[ch] * inv_std[ch];
                            gx.extend(gp.iter().map(|gi| k * gi));
                        }
                    }
                }
                gx
            });
            vec![gx, needs[1].then_some(sum_gx), needs[2].then_some(sum_g)]
        }),
    ))
}
