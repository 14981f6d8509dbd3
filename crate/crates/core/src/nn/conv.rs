//! 2-D convolution (cross-correlation, no kernel flip) via im2col + GEMM.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::rng::RngState;
use crate::tensor::linalg::gemm;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Symmetric zero halo of `k / 2`; output extent `ceil(in / stride)`.
    Same,
    /// No halo; output extent `floor((in − k) / stride) + 1`.
    Valid,
}

/// Output extent along one spatial axis, or `None` if the kernel does not fit.
pub fn conv_output_extent(input: usize, kernel: usize, stride: usize, padding: Padding) -> Option<usize> {
    match padding {
        Padding::Same => Some(input.div_ceil(stride)),
        Padding::Valid => (input >= kernel).then(|| (input - kernel) / stride + 1),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `[out_ch × in_ch × kH × kW]`
    pub kernels: Tensor,
    /// `[out_ch]`
    pub bias: Tensor,
    pub stride: usize,
    pub padding: Padding,
}

impl ConvParams {
    pub fn new(kernels: Tensor, bias: Tensor, stride: usize, padding: Padding) -> Result<Self> {
        let &[out_ch, _, kh, kw] = kernels.shape() else {
            return shape_err(format!("kernels must be 4-D, got {:?}", kernels.shape()));
        };
        if bias.len() != out_ch {
            return shape_err(format!("bias has {} entries for {out_ch} output channels", bias.len()));
        }
        if stride == 0 {
            return invalid("stride must be positive");
        }
        if padding == Padding::Same && (kh % 2 == 0 || kw % 2 == 0) {
            return invalid(format!("same padding needs odd kernels, got {kh}×{kw}"));
        }
        Ok(ConvParams { kernels, bias, stride, padding })
    }

    /// He-normal kernels (std `sqrt(2 / fan_in)`), zero bias.
    pub fn he_init(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        rng: &mut RngState,
    ) -> Result<Self> {
        let fan_in = (in_ch * kernel * kernel) as f64;
        let std = (2.0 / fan_in).sqrt();
        let n = out_ch * in_ch * kernel * kernel;
        let w: Vec<f64> = (0..n).map(|_| rng.normal() * std).collect();
        Self::new(
            Tensor::from_vec(&[out_ch, in_ch, kernel, kernel], w)?,
            Tensor::zeros(&[out_ch])?,
            stride,
            padding,
        )
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }
}

struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad_t: usize,
    pad_l: usize,
}

impl Geometry {
    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn out_area(&self) -> usize {
        self.oh * self.ow
    }

    /// Source coordinate for output `o` and kernel tap `k`, if inside the image.
    #[inline]
    fn src(o: usize, k: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
        let pos = (o * stride + k) as isize - pad as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }

    /// Output columns `lo..hi` whose tap `kj` lands inside the row, and the
    /// input column of `lo`.
    #[inline]
    fn valid_cols(&self, kj: usize) -> (usize, usize, usize) {
        let s = self.stride;
        let lo = if self.pad_l > kj { (self.pad_l - kj).div_ceil(s) } else { 0 };
        let hi = if self.w + self.pad_l > kj { ((self.w + self.pad_l - kj - 1) / s + 1).min(self.ow) } else { 0 };
        let hi = hi.max(lo);
        (lo, hi, lo * s + kj - self.pad_l.min(lo * s + kj))
    }

    fn im2col(&self, img: &[f64], cols: &mut [f64]) {
        let area = self.out_area();
        let s = self.stride;
        for c in 0..self.c {
            let plane = &img[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let (lo, hi, ix0) = self.valid_cols(kj);
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let dst = &mut cols[row * area..(row + 1) * area];
                    for oy in 0..self.oh {
                        let line = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        let Some(iy) = Self::src(oy, ki, s, self.pad_t, self.h) else {
                            line.fill(0.0);
                            continue;
                        };
                        line[..lo].fill(0.0);
                        line[hi..].fill(0.0);
                        let src = &plane[iy * self.w..(iy + 1) * self.w];
                        if s == 1 {
                            line[lo..hi].copy_from_slice(&src[ix0..ix0 + hi - lo]);
                        } else {
                            for (v, &x) in line[lo..hi].iter_mut().zip(src[ix0..].iter().step_by(s)) {
                                *v = x;
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], img: &mut [f64]) {
        let area = self.out_area();
        let s = self.stride;
        for c in 0..self.c {
            let plane = &mut img[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let (lo, hi, ix0) = self.valid_cols(kj);
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let src = &cols[row * area..(row + 1) * area];
                    for oy in 0..self.oh {
                        let Some(iy) = Self::src(oy, ki, s, self.pad_t, self.h) else {
                            continue;
                        };
                        let line = &src[oy * self.ow + lo..oy * self.ow + hi];
                        let dst = &mut plane[iy * self.w..(iy + 1) * self.w];
                        for (d, &v) in dst[ix0..].iter_mut().step_by(s).zip(line) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
}

/// Convolves `x: [N×C×H×W]` with `kernels: [O×C×kH×kW]` and adds `bias: [O]`.
pub fn conv2d(
    tape: &mut Tape,
    x: Var,
    kernels: Var,
    bias: Var,
    stride: usize,
    padding: Padding,
) -> Result<Var> {
    let (tx, tk, tb) = (tape.value(x), tape.value(kernels), tape.value(bias));
    let &[n, c, h, w] = tx.shape() else {
        return shape_err(format!("conv2d input must be [N×C×H×W], got {:?}", tx.shape()));
    };
    let &[o, kc, kh, kw] = tk.shape() else {
        return shape_err(format!("kernels must be 4-D, got {:?}", tk.shape()));
    };
    if kc != c {
        return shape_err(format!("input has {c} channels, kernels expect {kc}"));
    }
    if tb.len() != o {
        return shape_err(format!("bias has {} entries for {o} output channels", tb.len()));
    }
    if stride == 0 {
        return invalid("stride must be positive");
    }
    if padding == Padding::Same && (kh % 2 == 0 || kw % 2 == 0) {
        return invalid(format!("same padding needs odd kernels, got {kh}×{kw}"));
    }
    let (Some(oh), Some(ow)) = (
        conv_output_extent(h, kh, stride, padding),
        conv_output_extent(w, kw, stride, padding),
    ) else {
        return shape_err(format!("{kh}×{kw} kernel does not fit a {h}×{w} input"));
    };
    let (pad_t, pad_l) = match padding {
        Padding::Same => (kh / 2, kw / 2),
        Padding::Valid => (0, 0),
    };
    let geo = Geometry { c, h, w, kh, kw, oh, ow, stride, pad_t, pad_l };
    let (patch, area) = (geo.patch(), geo.out_area());

    let mut cols = vec![0.0; n * patch * area];
    let mut out = vec![0.0; n * o * area];
    for i in 0..n {
        let img = &tx.data()[i * c * h * w..(i + 1) * c * h * w];
        let col = &mut cols[i * patch * area..(i + 1) * patch * area];
        geo.im2col(img, col);
        let dst = &mut out[i * o * area..(i + 1) * o * area];
        for (oc, plane) in dst.chunks_mut(area).enumerate() {
            plane.iter_mut().for_each(|v| *v = tb.data()[oc]);
        }
        gemm(o, patch, area, tk.data(), false, col, false, dst, 1.0);
    }

    Ok(tape.record(
        Tensor::from_parts(vec![n, o, oh, ow], out),
        &[x, kernels, bias],
        Box::new(move |g, inputs, needs| {
            let wk = inputs[1].data();
            let gx = needs[0].then(|| {
                let mut gx = vec![0.0; n * c * h * w];
                let mut dcol = vec![0.0; patch * area];
                for i in 0..n {
                    let gi = &g[i * o * area..(i + 1) * o * area];
                    gemm(patch, o, area, wk, true, gi, false, &mut dcol, 0.0);
                    geo.col2im(&dcol, &mut gx[i * c * h * w..(i + 1) * c * h * w]);
                }
                gx
            });
            let gk = needs[1].then(|| {
                let mut gk = vec![0.0; o * patch];
                for i in 0..n {
                    let gi = &g[i * o * area..(i + 1) * o * area];
                    let col = &cols[i * patch * area..(i + 1) * patch * area];
                    gemm(o, area, patch, gi, false, col, true, &mut gk, 1.0);
                }
                gk
            });
            let gb = needs[2].then(|| {
                let mut gb = vec![0.0; o];
                for i in 0..n {
                    for (oc, plane) in g[i * o * area..(i + 1) * o * area].chunks(area).enumerate() {
                        gb[oc] += plane.iter().sum::<f64>();
                    }
                }
                gb
            });
            vec![gx, gk, gb]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(x: Tensor, k: Tensor, b: Tensor, stride: usize, pad: Padding) -> Result<Tensor> {
        let mut tape = Tape::new();
        let (xv, kv, bv) = (tape.leaf(x), tape.leaf(k), tape.leaf(b));
        let y = conv2d(&mut tape, xv, kv, bv, stride, pad)?;
        Ok(tape.value(y).clone())
    }

    #[test]
    fn counting_window() {
        let y = run(
            Tensor::new(&[1, 1, 3, 3], 1.0).unwrap(),
            Tensor::new(&[1, 1, 2, 2], 1.0).unwrap(),
            Tensor::zeros(&[1]).unwrap(),
            1,
            Padding::Valid,
        )
        .unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[4.0; 4]);
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::from_vec(&[1, 1, 3, 4], (0..12).map(|v| v as f64 - 3.5).collect()).unwrap();
        let y = run(
            x.clone(),
            Tensor::new(&[1, 1, 1, 1], 1.0).unwrap(),
            Tensor::zeros(&[1]).unwrap(),
            1,
            Padding::Same,
        )
        .unwrap();
        assert_eq!(y, x.reshaped(&[1, 1, 3, 4]).unwrap());
    }

    #[test]
    fn no_kernel_flip() {
        // Kernel picks the right-hand neighbour: cross-correlation keeps tap order.
        let x = Tensor::from_vec(&[1, 1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let k = Tensor::from_vec(&[1, 1, 1, 2], vec![0.0, 1.0]).unwrap();
        let y = run(x, k, Tensor::zeros(&[1]).unwrap(), 1, Padding::Valid).unwrap();
        assert_eq!(y.data(), &[2.0, 3.0]);
    }

    #[test]
    fn same_padding_extents() {
        let y = run(
            Tensor::new(&[2, 3, 7, 6], 0.5).unwrap(),
            Tensor::new(&[4, 3, 3, 3], 0.1).unwrap(),
            Tensor::zeros(&[4]).unwrap(),
            2,
            Padding::Same,
        )
        .unwrap();
        assert_eq!(y.shape(), &[2, 4, 4, 3]);
        assert_eq!(conv_output_extent(9, 3, 2, Padding::Valid), Some(4));
        assert_eq!(conv_output_extent(2, 3, 1, Padding::Valid), None);
    }

    #[test]
    fn channel_mismatch() {
        let r = run(
            Tensor::new(&[1, 2, 3, 3], 1.0).unwrap(),
            Tensor::new(&[1, 3, 1, 1], 1.0).unwrap(),
            Tensor::zeros(&[1]).unwrap(),
            1,
            Padding::Valid,
        );
        assert!(r.is_err());
    }

    #[test]
    fn even_kernel_same_padding_rejected() {
        assert!(ConvParams::new(
            Tensor::new(&[1, 1, 2, 2], 1.0).unwrap(),
            Tensor::zeros(&[1]).unwrap(),
            1,
            Padding::Same
        )
        .is_err());
    }
}
