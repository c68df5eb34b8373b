//! 8-bit PNG/JPEG I/O. Masks are single-channel with 0 = background and 255 = foreground.

use std::path::Path;

use image::{GrayImage, ImageFormat, Luma, RgbImage};

use super::plane::{BinaryMask, ImageF, Plane, Rgb, SoftMask};
use crate::error::{Error, Result};

fn codec(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Codec {
            path: path.to_path_buf(),
            source,
        },
    }
}

#[inline]
pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn from_rgb8(img: &RgbImage) -> Result<ImageF> {
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| Rgb(p.0.map(|c| c as f64 / 255.0))).collect();
    Plane::from_vec(h as usize, w as usize, data)
}

pub fn to_rgb8(img: &ImageF) -> RgbImage {
    let (h, w) = img.dims();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        image::Rgb(img.get(y as usize, x as usize).0.map(to_u8))
    })
}

pub fn load_image(path: &Path) -> Result<ImageF> {
    let img = image::open(path).map_err(codec(path))?.to_rgb8();
    from_rgb8(&img)
}

pub fn save_image(img: &ImageF, path: &Path) -> Result<()> {
    to_rgb8(img)
        .save_with_format(path, ImageFormat::Png)
        .map_err(codec(path))
}

pub fn load_gray(path: &Path) -> Result<SoftMask> {
    let img = image::open(path).map_err(codec(path))?.to_luma8();
    let (w, h) = img.dimensions();
    Plane::from_vec(
        h as usize,
        w as usize,
        img.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
    )
}

/// Loads a mask; any value of 128 or more is foreground.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    Ok(load_gray(path)?.map(|v| v >= 128.0 / 255.0))
}

pub fn save_gray(mask: &SoftMask, path: &Path) -> Result<()> {
    let (h, w) = mask.dims();
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([to_u8(mask.get(y as usize, x as usize))])
    })
    .save_with_format(path, ImageFormat::Png)
    .map_err(codec(path))
}

pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    save_gray(&mask.to_soft(), path)
}

/// Reads only the header to get `(height, width)`.
pub fn image_dims(path: &Path) -> Result<(usize, usize)> {
    let (w, h) = image::image_dimensions(path).map_err(codec(path))?;
    Ok((h as usize, w as usize))
}
