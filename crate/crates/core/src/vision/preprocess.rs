//! resize → sharpen → colour conversion → unit scaling.

use serde::{Deserialize, Serialize};

use super::{ChannelOrder, ImageU8};
use crate::error::{invalid, Result};
use crate::tensor::Tensor;

/// Half-pixel-centred bilinear resize with edge clamping, rounding
/// half away from zero.
pub fn resize_bilinear(img: &ImageU8, out_h: usize, out_w: usize) -> Result<ImageU8> {
    if out_h == 0 || out_w == 0 {
        return invalid(format!("target size must be positive, got {out_h}×{out_w}"));
    }
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    if (h, w) == (out_h, out_w) {
        return Ok(img.clone());
    }
    let taps = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|d| {
                let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let ys = taps(out_h, h);
    let xs = taps(out_w, w);
    let mut pixels = Vec::with_capacity(out_h * out_w * ch);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..ch {
                let top = img.get(y0, x0, c) as f64 * (1.0 - fx) + img.get(y0, x1, c) as f64 * fx;
                let bot = img.get(y1, x0, c) as f64 * (1.0 - fx) + img.get(y1, x1, c) as f64 * fx;
                let v = top * (1.0 - fy) + bot * fy;
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(ImageU8::from_raw(out_h, out_w, img.order(), pixels))
}

const SHARPEN: [[i32; 3]; 3] = [[0, -1, 0], [-1, 5, -1], [0, -1, 0]];

/// 3×3 sharpening (`[[0,−1,0],[−1,5,−1],[0,−1,0]]`) per channel with
/// edge-clamped borders; results clamped to `[0, 255]`.
pub fn sharpen(img: &ImageU8) -> ImageU8 {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0i32;
                for (dy, row) in SHARPEN.iter().enumerate() {
                    let sy = (y + dy).saturating_sub(1).min(h - 1);
                    for (dx, &k) in row.iter().enumerate() {
                        if k != 0 {
                            let sx = (x + dx).saturating_sub(1).min(w - 1);
                            acc += k * img.get(sy, sx, c) as i32;
                        }
                    }
                }
                pixels.push(acc.clamp(0, 255) as u8);
            }
        }
    }
    img.with_pixels(pixels)
}

/// Swaps channels 0 and 2 of a BGR image and tags it RGB.
pub fn bgr_to_rgb(img: &ImageU8) -> Result<ImageU8> {
    if img.order() != ChannelOrder::Bgr {
        return invalid(format!("bgr_to_rgb needs a BGR image, got {:?}", img.order()));
    }
    let mut pixels = img.pixels().to_vec();
    for px in pixels.chunks_mut(3) {
        px.swap(0, 2);
    }
    img.with_pixels(pixels).with_order(ChannelOrder::Rgb)
}

/// `value / 255` in channel-major `[C×H×W]` layout. Grayscale input is
/// replicated to three channels when `out_channels` is 3.
pub fn scale_to_unit(img: &ImageU8, out_channels: usize) -> Result<Tensor> {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let replicate = match (ch, out_channels) {
        (a, b) if a == b => false,
        (1, 3) => true,
        _ => return invalid(format!("cannot map {ch} channels to {out_channels}")),
    };
    let mut data = Vec::with_capacity(out_channels * h * w);
    for c in 0..out_channels {
        let src_c = if replicate { 0 } else { c };
        for y in 0..h {
            for x in 0..w {
                data.push(img.get(y, x, src_c) as f64 / 255.0);
            }
        }
    }
    Tensor::from_vec(&[out_channels, h, w], data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceOrder {
    Bgr,
    #[default]
    Rgb,
}

impl SourceOrder {
    pub fn channel_order(self) -> ChannelOrder {
        match self {
            SourceOrder::Bgr => ChannelOrder::Bgr,
            SourceOrder::Rgb => ChannelOrder::Rgb,
        }
    }
}

/// The fixed preprocessing chain: resize to `size × size`, sharpen, convert
/// BGR sources to RGB. [`Preprocess::to_tensor`] then scales to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preprocess {
    pub size: usize,
    pub channels: usize,
}

impl Preprocess {
    pub fn new(size: usize) -> Self {
        Preprocess { size, channels: 3 }
    }

    pub fn apply(&self, img: &ImageU8) -> Result<ImageU8> {
        let resized = resize_bilinear(img, self.size, self.size)?;
        let sharp = sharpen(&resized);
        match sharp.order() {
            ChannelOrder::Bgr => bgr_to_rgb(&sharp),
            _ => Ok(sharp),
        }
    }

    pub fn to_tensor(&self, img: &ImageU8) -> Result<Tensor> {
        scale_to_unit(img, self.channels)
    }

    pub fn run(&self, img: &ImageU8) -> Result<Tensor> {
        self.to_tensor(&self.apply(img)?)
    }
}
