use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelOrder {
    Bgr,
    Rgb,
    Gray,
}

/// Decoded 8-bit raster, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageU8 {
    height: usize,
    width: usize,
    channels: usize,
    order: ChannelOrder,
    pixels: Vec<u8>,
}

impl ImageU8 {
    pub fn new(height: usize, width: usize, order: ChannelOrder, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return shape_err(format!("image extents must be positive, got {height}×{width}"));
        }
        let channels = if order == ChannelOrder::Gray { 1 } else { 3 };
        if pixels.len() != height * width * channels {
            return shape_err(format!(
                "{height}×{width}×{channels} image needs {} bytes, got {}",
                height * width * channels,
                pixels.len()
            ));
        }
        Ok(ImageU8 { height, width, channels, order, pixels })
    }

    pub fn filled(height: usize, width: usize, order: ChannelOrder, value: u8) -> Result<Self> {
        let channels = if order == ChannelOrder::Gray { 1 } else { 3 };
        Self::new(height, width, order, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn order(&self) -> ChannelOrder {
        self.order
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// Re-tags a 3-channel image without touching the bytes.
    pub fn with_order(mut self, order: ChannelOrder) -> Result<Self> {
        if (order == ChannelOrder::Gray) != (self.channels == 1) {
            return shape_err(format!("cannot tag a {}-channel image as {order:?}", self.channels));
        }
        self.order = order;
        Ok(self)
    }

    /// Same geometry and tag, new bytes (length must match).
    pub(crate) fn with_pixels(&self, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        ImageU8 {
            height: self.height,
            width: self.width,
            channels: self.channels,
            order: self.order,
            pixels,
        }
    }

    pub(crate) fn from_raw(height: usize, width: usize, order: ChannelOrder, pixels: Vec<u8>) -> Self {
        let channels = if order == ChannelOrder::Gray { 1 } else { 3 };
        debug_assert_eq!(pixels.len(), height * width * channels);
        ImageU8 { height, width, channels, order, pixels }
    }
}
