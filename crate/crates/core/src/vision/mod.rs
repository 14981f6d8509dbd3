//! Image decoding, the preprocessing chain and affine augmentation.

mod augment;
mod codec;
mod image;
mod preprocess;

pub use augment::{affine_transform, sample_augmentation, AffineSpec, AugmentConfig, AugmentMode, Fill};
pub use codec::{decode_image, encode_pgm, encode_png, encode_ppm, ImageFormat};
pub use image::{ChannelOrder, ImageU8};
pub use preprocess::{bgr_to_rgb, resize_bilinear, scale_to_unit, sharpen, Preprocess, SourceOrder};
