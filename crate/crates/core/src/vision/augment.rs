//! Random rotation, zoom, shear and horizontal flip with equal weight.
//!
//! An [`AffineSpec`] works in coordinates relative to the image centre
//! `((w−1)/2, (h−1)/2)`: output pixel `(u, v)` (centred) samples the source
//! at `centre + M·(u, v, 1)`. The forward geometric transform is
//! `rotation · shear · zoom`; `M` holds its inverse.

use serde::{Deserialize, Serialize};

use super::ImageU8;
use crate::error::{invalid, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fill {
    Zero,
    #[default]
    EdgeClamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    /// Every operation is applied, each with its own draw.
    #[default]
    Compose,
    /// One operation, chosen uniformly, is applied.
    PickOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Symmetric range `±rotation_deg`.
    pub rotation_deg: f64,
    pub zoom: (f64, f64),
    /// Symmetric range `±shear_deg`.
    pub shear_deg: f64,
    pub flip_prob: f64,
    /// Rotation, flip, shear, zoom. Must all be equal.
    pub op_weights: [f64; 4],
    pub mode: AugmentMode,
    pub fill: Fill,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rotation_deg: 15.0,
            zoom: (0.9, 1.1),
            shear_deg: 10.0,
            flip_prob: 0.5,
            op_weights: [1.0; 4],
            mode: AugmentMode::Compose,
            fill: Fill::EdgeClamp,
        }
    }
}

impl AugmentConfig {
    /// Ranges collapsed to their identity values, no flipping.
    pub fn identity() -> Self {
        AugmentConfig {
            rotation_deg: 0.0,
            zoom: (1.0, 1.0),
            shear_deg: 0.0,
            flip_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w0 = self.op_weights[0];
        if !(w0 > 0.0) || self.op_weights.iter().any(|&w| w != w0) {
            return invalid(format!("operation weights must be equal and positive, got {:?}", self.op_weights));
        }
        if !(self.rotation_deg >= 0.0 && self.rotation_deg < 180.0) {
            return invalid(format!("rotation range ±{} is invalid", self.rotation_deg));
        }
        if !(self.shear_deg >= 0.0 && self.shear_deg < 80.0) {
            return invalid(format!("shear range ±{} is invalid", self.shear_deg));
        }
        let (lo, hi) = self.zoom;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
            return invalid(format!("zoom range [{lo}, {hi}] must be positive and contain 1"));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return invalid(format!("flip probability {} outside [0, 1]", self.flip_prob));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineSpec {
    /// Output (centred) → source (centred) map.
    pub matrix: [[f64; 3]; 2],
    pub flip_h: bool,
    pub fill: Fill,
}

impl AffineSpec {
    pub fn identity() -> Self {
        AffineSpec {
            matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            flip_h: false,
            fill: Fill::EdgeClamp,
        }
    }

    /// Inverse of `rotation(rot) · shear(shear) · zoom(zoom)` about the centre.
    pub fn from_params(rotation_deg: f64, zoom: f64, shear_deg: f64, flip_h: bool, fill: Fill) -> Result<Self> {
        let (s, c) = rotation_deg.to_radians().sin_cos();
        let k = shear_deg.to_radians().tan();
        // forward A = R·S·Z with R = [[c,−s],[s,c]], S = [[1,k],[0,1]], Z = zoom·I
        let a = [
            [c * zoom, (c * k - s) * zoom],
            [s * zoom, (s * k + c) * zoom],
        ];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det.abs() <= 1e-9 || !det.is_finite() {
            return invalid(format!("transform is singular (det {det})"));
        }
        let inv = [
            [a[1][1] / det, -a[0][1] / det, 0.0],
            [-a[1][0] / det, a[0][0] / det, 0.0],
        ];
        Ok(AffineSpec { matrix: inv, flip_h, fill })
    }

    pub fn det(&self) -> f64 {
        let m = &self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn is_identity(&self) -> bool {
        *self == AffineSpec { fill: self.fill, ..AffineSpec::identity() }
    }
}

/// Draws rotation, zoom, shear, then flip (always in that order, one
/// uniform each, so streams line up across modes). In `PickOne` mode a
/// selector is drawn first and only the chosen operation is kept.
pub fn sample_augmentation(cfg: &AugmentConfig, rng: RngState) -> Result<(AffineSpec, RngState)> {
    cfg.validate()?;
    let mut rng = rng;
    let pick = match cfg.mode {
        AugmentMode::PickOne => Some(rng.below(4)),
        AugmentMode::Compose => None,
    };
    let mut rotation = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg);
    let mut zoom = rng.uniform(cfg.zoom.0, cfg.zoom.1);
    let mut shear = rng.uniform(-cfg.shear_deg, cfg.shear_deg);
    let mut flip = rng.next_f64() < cfg.flip_prob;
    if let Some(op) = pick {
        // op order matches op_weights: rotation, flip, shear, zoom
        if op != 0 {
            rotation = 0.0;
        }
        if op != 1 {
            flip = false;
        }
        if op != 2 {
            shear = 0.0;
        }
        if op != 3 {
            zoom = 1.0;
        }
    }
    Ok((AffineSpec::from_params(rotation, zoom, shear, flip, cfg.fill)?, rng))
}

/// Inverse-mapped bilinear resample; horizontal mirror applied last.
/// Dimensions and channel order are preserved.
pub fn affine_transform(img: &ImageU8, spec: &AffineSpec) -> Result<ImageU8> {
    let det = spec.det();
    if det.abs() <= 1e-9 || !det.is_finite() {
        return invalid(format!("affine matrix is singular (det {det})"));
    }
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let identity = spec.is_identity();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let m = &spec.matrix;
    let fetch = |y: isize, x: isize, c: usize| -> f64 {
        if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
            img.get(y as usize, x as usize, c) as f64
        } else {
            match spec.fill {
                Fill::Zero => 0.0,
                Fill::EdgeClamp => {
                    img.get(y.clamp(0, h as isize - 1) as usize, x.clamp(0, w as isize - 1) as usize, c) as f64
                }
            }
        }
    };
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for y in 0..h {
        for x in 0..w {
            let xo = if spec.flip_h { w - 1 - x } else { x };
            if identity {
                for c in 0..ch {
                    pixels.push(img.get(y, xo, c));
                }
                continue;
            }
            let (u, v) = (xo as f64 - cx, y as f64 - cy);
            let sx = cx + m[0][0] * u + m[0][1] * v + m[0][2];
            let sy = cy + m[1][0] * u + m[1][1] * v + m[1][2];
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            for c in 0..ch {
                let top = fetch(y0, x0, c) * (1.0 - fx) + fetch(y0, x0 + 1, c) * fx;
                let bot = fetch(y0 + 1, x0, c) * (1.0 - fx) + fetch(y0 + 1, x0 + 1, c) * fx;
                let val = top * (1.0 - fy) + bot * fy;
                pixels.push(val.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(img.with_pixels(pixels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::ChannelOrder;

    fn fixture() -> ImageU8 {
        let v: Vec<u8> = (0..16).map(|i| (i * 13 + 7) as u8).collect();
        ImageU8::new(4, 4, ChannelOrder::Gray, v).unwrap()
    }

    #[test]
    fn identity_draw() {
        let cfg = AugmentConfig::identity();
        let (spec, _) = sample_augmentation(&cfg, RngState::new(42)).unwrap();
        assert!(spec.is_identity());
        assert!(!spec.flip_h);
        let img = fixture();
        assert_eq!(affine_transform(&img, &spec).unwrap(), img);
    }

    #[test]
    fn same_state_same_spec() {
        let cfg = AugmentConfig::default();
        let s = RngState::derive(1000, 3, 17);
        assert_eq!(sample_augmentation(&cfg, s).unwrap(), sample_augmentation(&cfg, s).unwrap());
    }

    #[test]
    fn flip_twice() {
        let img = fixture();
        let spec = AffineSpec { flip_h: true, ..AffineSpec::identity() };
        let once = affine_transform(&img, &spec).unwrap();
        assert_ne!(once, img);
        assert_eq!(once.get(0, 0, 0), img.get(0, 3, 0));
        assert_eq!(affine_transform(&once, &spec).unwrap(), img);
    }

    #[test]
    fn rotate_quarter_turn() {
        // Forward rotation by +90° in (x right, y down) coordinates sends the
        // source pixel at (x, y) to (3−y, x). Hand-rotated fixture:
        let img = fixture();
        let mut expected = [0u8; 16];
        for y in 0..4 {
            for x in 0..4 {
                expected[x * 4 + (3 - y)] = img.get(y, x, 0);
            }
        }
        let spec = AffineSpec::from_params(90.0, 1.0, 0.0, false, Fill::Zero).unwrap();
        let out = affine_transform(&img, &spec).unwrap();
        for (a, b) in out.pixels().iter().zip(&expected) {
            assert!((*a as i32 - *b as i32).abs() <= 1, "{:?} vs {:?}", out.pixels(), expected);
        }
    }

    #[test]
    fn singular_rejected() {
        let spec = AffineSpec { matrix: [[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]], ..AffineSpec::identity() };
        assert!(affine_transform(&fixture(), &spec).is_err());
    }

    #[test]
    fn unequal_weights_rejected() {
        let cfg = AugmentConfig { op_weights: [1.0, 1.0, 2.0, 1.0], ..AugmentConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = AugmentConfig { zoom: (1.05, 1.2), ..AugmentConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn flip_frequency() {
        let cfg = AugmentConfig::default();
        let flips = (0..10_000u64)
            .filter(|&i| sample_augmentation(&cfg, RngState::derive(1000, 0, i)).unwrap().0.flip_h)
            .count();
        let freq = flips as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
    }

    #[test]
    fn pick_one_applies_single_operation() {
        let cfg = AugmentConfig { mode: AugmentMode::PickOne, ..AugmentConfig::default() };
        for i in 0..50 {
            let (spec, _) = sample_augmentation(&cfg, RngState::new(i)).unwrap();
            let m = spec.matrix;
            let rotated_or_sheared = m[0][1].abs() > 1e-12 || m[1][0].abs() > 1e-12;
            let zoomed = !rotated_or_sheared && (m[0][0] - 1.0).abs() > 1e-12;
            let ops = rotated_or_sheared as u8 + zoomed as u8 + spec.flip_h as u8;
            assert!(ops <= 1);
        }
    }
}
