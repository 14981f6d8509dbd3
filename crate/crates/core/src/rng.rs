//! SplitMix64 generator and the keyed stream derivation used for every random
//! draw in the crate.
//!
//! Step: `state += 0x9E3779B97F4A7C15`, then the output is the finalizer
//!
//! ```text
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! (all arithmetic wrapping, mod 2^64). A uniform `f64` in `[0, 1)` is
//! `(z >> 11) * 2^-53`.
//!
//! Streams are keyed rather than shared: `derive(seed, a, b)` is
//! `mix(mix(mix(seed) ^ a) ^ b)` where `mix(x)` is the finalizer applied to
//! `x + 0x9E3779B97F4A7C15`. Callers pass `a = epoch`, `b = sample index`
//! (or another pair of coordinates), so every sample's randomness is a pure
//! function of its coordinates and independent of evaluation order.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream domains, folded into the seed so that e.g. the shuffle stream of
/// epoch 3 never coincides with the augmentation stream of sample 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Augment = 3,
    Dropout = 4,
    Split = 5,
    Synth = 6,
    Fold = 7,
}

#[inline]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One SplitMix64 output for the state `x` (without keeping the state).
#[inline]
pub fn mix(x: u64) -> u64 {
    finalize(x.wrapping_add(GOLDEN))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngState(pub u64);

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState(seed)
    }

    /// Keyed stream for coordinates `(a, b)` under `seed`.
    pub fn derive(seed: u64, a: u64, b: u64) -> Self {
        RngState(mix(mix(mix(seed) ^ a) ^ b))
    }

    /// [`RngState::derive`] with a domain tag folded into the seed.
    pub fn stream(seed: u64, domain: Stream, a: u64, b: u64) -> Self {
        Self::derive(seed ^ (domain as u64).wrapping_mul(GOLDEN.rotate_left(17)), a, b)
    }

    /// Pure step: returns the raw output and the successor state.
    pub fn step(self) -> (u64, RngState) {
        let state = self.0.wrapping_add(GOLDEN);
        (finalize(state), RngState(state))
    }

    pub fn next_u64(&mut self) -> u64 {
        let (z, next) = self.step();
        *self = next;
        z
    }

    /// Uniform in `[0, 1)` with 53 bits of mantissa.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the range is empty.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.next_f64();
        if hi <= lo {
            lo
        } else {
            lo + (hi - lo) * u
        }
    }

    /// Uniform integer in `[0, n)` by rejection (no modulo bias). `n` must be > 0.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let z = self.next_u64();
            if z < zone {
                return z % n;
            }
        }
    }

    /// Standard normal via Box-Muller (one output per pair of uniforms).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Pure form of the generator step: `(uniform, next_state)`.
pub fn prng_next(s: RngState) -> (f64, RngState) {
    let (z, next) = s.step();
    ((z >> 11) as f64 * (1.0 / (1u64 << 53) as f64), next)
}
