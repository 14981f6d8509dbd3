//! Binary PPM (P6) / PGM (P5) and 8-bit non-interlaced PNG.

use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChannelOrder, ImageU8};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Ppm,
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "ppm" => Some(ImageFormat::Ppm),
            "pgm" => Some(ImageFormat::Pgm),
            "png" => Some(ImageFormat::Png),
            _ => None,
        }
    }
}

fn decode_err<T>(offset: usize, reason: impl Into<String>) -> Result<T> {
    Err(Error::Decode { offset, reason: reason.into() })
}

/// Decodes `bytes`. Three-channel images are tagged `color_order` (the
/// source corpus convention); single-channel images are tagged `Gray`.
pub fn decode_image(bytes: &[u8], hint: ImageFormat, color_order: ChannelOrder) -> Result<ImageU8> {
    if bytes.is_empty() {
        return decode_err(0, "empty input");
    }
    if color_order == ChannelOrder::Gray {
        return Err(Error::InvalidArgument("colour order for 3-channel sources cannot be gray".into()));
    }
    match hint {
        ImageFormat::Ppm => decode_pnm(bytes, b"P6", color_order),
        ImageFormat::Pgm => decode_pnm(bytes, b"P5", ChannelOrder::Gray),
        ImageFormat::Png => decode_png(bytes, color_order),
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return decode_err(start, format!("expected {what}"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map_or_else(|| decode_err(start, format!("{what} out of range")), Ok)
    }
}

fn decode_pnm(bytes: &[u8], magic: &[u8; 2], order: ChannelOrder) -> Result<ImageU8> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return decode_err(0, format!("missing {} magic", String::from_utf8_lossy(magic)));
    }
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number("width")?;
    let height = r.number("height")?;
    let maxval = r.number("maxval")?;
    if width == 0 || height == 0 {
        return decode_err(r.pos, "zero image extent");
    }
    if !(1..=255).contains(&maxval) {
        return decode_err(r.pos, format!("unsupported maxval {maxval} (8-bit only)"));
    }
    match bytes.get(r.pos) {
        Some(b' ' | b'\t' | b'\r' | b'\n') => r.pos += 1,
        _ => return decode_err(r.pos, "expected a single whitespace before raster"),
    }
    let channels = if order == ChannelOrder::Gray { 1 } else { 3 };
    let need = width * height * channels;
    let raster = &bytes[r.pos..];
    if raster.len() < need {
        return decode_err(bytes.len(), format!("raster truncated: need {need} bytes, have {}", raster.len()));
    }
    let mut pixels = raster[..need].to_vec();
    if maxval != 255 {
        for (i, p) in pixels.iter_mut().enumerate() {
            if *p as usize > maxval {
                return decode_err(r.pos + i, format!("sample {p} exceeds maxval {maxval}"));
            }
            *p = ((*p as u32 * 255 + maxval as u32 / 2) / maxval as u32) as u8;
        }
    }
    ImageU8::new(height, width, order, pixels)
}

fn decode_png(bytes: &[u8], color_order: ChannelOrder) -> Result<ImageU8> {
    let mut cursor = Cursor::new(bytes);
    let result = (|| {
        let decoder = png::Decoder::new(&mut cursor);
        let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
        let info = reader.info();
        if info.interlaced {
            return Err("interlaced PNG is not supported".to_string());
        }
        if info.bit_depth != png::BitDepth::Eight {
            return Err(format!("unsupported bit depth {:?}", info.bit_depth));
        }
        let order = match info.color_type {
            png::ColorType::Grayscale => ChannelOrder::Gray,
            png::ColorType::Rgb => color_order,
            other => return Err(format!("unsupported colour type {other:?}")),
        };
        let mut buf = vec![0; reader.output_buffer_size()];
        let frame = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
        buf.truncate(frame.buffer_size());
        Ok((frame.height as usize, frame.width as usize, order, buf))
    })();
    match result {
        Ok((h, w, order, buf)) => ImageU8::new(h, w, order, buf),
        Err(reason) => decode_err(cursor.position() as usize, reason),
    }
}

/// Binary P6; the bytes are written in stored order regardless of the tag.
pub fn encode_ppm(img: &ImageU8) -> Result<Vec<u8>> {
    if img.channels() != 3 {
        return Err(Error::InvalidArgument("PPM needs a 3-channel image".into()));
    }
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    Ok(out)
}

pub fn encode_pgm(img: &ImageU8) -> Result<Vec<u8>> {
    if img.channels() != 1 {
        return Err(Error::InvalidArgument("PGM needs a 1-channel image".into()));
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    Ok(out)
}

pub fn encode_png(img: &ImageU8) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(if img.channels() == 1 {
            png::ColorType::Grayscale
        } else {
            png::ColorType::Rgb
        });
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        w.write_image_data(img.pixels())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(out)
}
