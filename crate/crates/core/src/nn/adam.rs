use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};

/// One parameter buffer and its gradient, identified by a stable name.
pub struct ParamGrad<'a> {
    pub name: &'a str,
    pub value: &'a mut [f64],
    pub grad: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Adam with bias correction. Moments are keyed by parameter name.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    moments: BTreeMap<String, Moments>,
}

impl Default for AdamState {
    fn default() -> Self {
        AdamState::new(0.9, 0.999, 1e-8)
    }
}

impl AdamState {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            beta1,
            beta2,
            eps,
            t: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, name: &str) -> Option<&[f64]> {
        self.moments.get(name).map(|m| m.m.as_slice())
    }

    pub fn second_moment(&self, name: &str) -> Option<&[f64]> {
        self.moments.get(name).map(|m| m.v.as_slice())
    }

    /// `t += 1`, then per element
    /// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
    /// `θ ← θ − lr · m̂ / (√v̂ + eps)` with `m̂ = m/(1−β₁ᵗ)`, `v̂ = v/(1−β₂ᵗ)`.
    ///
    /// All gradients are validated before anything is mutated.
    pub fn step(&mut self, lr: f64, params: &mut [ParamGrad<'_>]) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return invalid(format!("learning rate must be positive, got {lr}"));
        }
        for p in params.iter() {
            if p.value.len() != p.grad.len() {
                return invalid(format!(
                    "parameter {} has {} values but {} gradients",
                    p.name,
                    p.value.len(),
                    p.grad.len()
                ));
            }
            if let Some(i) = p.grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient of parameter {} at element {i}",
                    p.name
                )));
            }
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for p in params.iter_mut() {
            let mom = self
                .moments
                .entry(p.name.to_string())
                .or_insert_with(|| Moments {
                    m: vec![0.0; p.value.len()],
                    v: vec![0.0; p.value.len()],
                });
            for (((theta, &g), m), v) in p
                .value
                .iter_mut()
                .zip(p.grad)
                .zip(mom.m.iter_mut())
                .zip(mom.v.iter_mut())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *theta -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
