//! Corruptions of the blended image. None of them touches the label or the image size.

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::ImageFormat;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::params::{chance, CorruptionParams};
use crate::error::{Error, Result};
use crate::imgcore::{
    color::{hsv_to_rgb_pixel, rgb_to_hsv_pixel},
    gaussian_blur,
    io::{from_rgb8, to_rgb8},
    resize_exact, BinaryMask, ImageF, Plane, Rgb,
};

fn map_pixels(img: &ImageF, f: impl Fn(Rgb) -> Rgb) -> ImageF {
    img.map(|p| f(p).clamped())
}

/// Black rectangles of random size and position.
pub fn cutout<R: Rng + ?Sized>(img: &ImageF, count: usize, size_fraction: (f64, f64), rng: &mut R) -> ImageF {
    let (h, w) = img.dims();
    let mut out = img.clone();
    for _ in 0..count {
        let ch = ((rng.random_range(size_fraction.0..=size_fraction.1) * h as f64).round() as usize).clamp(1, h);
        let cw = ((rng.random_range(size_fraction.0..=size_fraction.1) * w as f64).round() as usize).clamp(1, w);
        let top = rng.random_range(0..=h - ch);
        let left = rng.random_range(0..=w - cw);
        for y in top..top + ch {
            for x in left..left + cw {
                out.set(y, x, Rgb::BLACK);
            }
        }
    }
    out
}

/// Smooth random field in [0,1]: two octaves of bilinearly interpolated value noise.
pub fn value_noise<R: Rng + ?Sized>(h: usize, w: usize, rng: &mut R) -> Result<Plane<f64>> {
    let mut field = Plane::filled(h, w, 0.0);
    for (cells, weight) in [
        (rng.random_range(2..=4usize), 1.0),
        (rng.random_range(6..=10usize), 0.5),
    ] {
        let grid = Plane::from_fn(cells + 1, cells + 1, |_, _| rng.random::<f64>());
        let up = resize_exact(&grid, h, w)?;
        for (f, u) in field.as_mut_slice().iter_mut().zip(up.as_slice()) {
            *f += weight * u / 1.5;
        }
    }
    Ok(field)
}

/// Whitish haze whose opacity follows a smooth noise field.
pub fn smoke<R: Rng + ?Sized>(img: &ImageF, intensity: f64, rng: &mut R) -> Result<ImageF> {
    let (h, w) = img.dims();
    let field = value_noise(h, w, rng)?;
    let color = Rgb::gray(rng.random_range(0.75..=0.95));
    img.zip_map(&field, |p, f| p.lerp(color, intensity * f).clamped())
}

/// Even-odd point-in-polygon test.
fn inside(poly: &[(f64, f64)], y: f64, x: f64) -> bool {
    let mut c = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (yi, xi) = poly[i];
        let (yj, xj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            c = !c;
        }
        j = i;
    }
    c
}

/// Darkens a random soft-edged polygon by `strength`.
pub fn shadow<R: Rng + ?Sized>(img: &ImageF, strength: f64, rng: &mut R) -> Result<ImageF> {
    let (h, w) = img.dims();
    let n = rng.random_range(3..=6usize);
    let (cy, cx) = (rng.random_range(0.0..h as f64), rng.random_range(0.0..w as f64));
    let reach = 0.5 * h.max(w) as f64;
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let poly: Vec<(f64, f64)> = angles
        .iter()
        .map(|a| {
            let r = rng.random_range(0.2 * reach..=reach);
            (cy + r * a.sin(), cx + r * a.cos())
        })
        .collect();
    let hard = BinaryMask::from_fn(h, w, |y, x| inside(&poly, y as f64 + 0.5, x as f64 + 0.5));
    let k = (2 * (h.min(w) / 40) + 1).max(3);
    let soft = gaussian_blur(&hard.to_soft(), k)?;
    img.zip_map(&soft, |p, s| (p * (1.0 - strength * s)).clamped())
}

/// Round trip through an in-memory JPEG at `quality` (1..=100).
pub fn jpeg(img: &ImageF, quality: u8) -> Result<ImageF> {
    let codec = |source| Error::Codec {
        path: "<in-memory jpeg>".into(),
        source,
    };
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality.clamp(1, 100))
        .encode_image(&to_rgb8(img))
        .map_err(codec)?;
    let decoded = image::load(Cursor::new(buf), ImageFormat::Jpeg).map_err(codec)?;
    from_rgb8(&decoded.to_rgb8())
}

pub fn rgb_shift(img: &ImageF, shift: [f64; 3]) -> ImageF {
    map_pixels(img, |p| Rgb([p.0[0] + shift[0], p.0[1] + shift[1], p.0[2] + shift[2]]))
}

/// Hue rotation (wrapping) plus saturation and value offsets, in HSV.
pub fn hsv_shift(img: &ImageF, dh: f64, ds: f64, dv: f64) -> ImageF {
    map_pixels(img, |p| {
        let [h, s, v] = rgb_to_hsv_pixel(p).0;
        hsv_to_rgb_pixel(Rgb([
            (h + dh).rem_euclid(1.0),
            (s + ds).clamp(0.0, 1.0),
            (v + dv).clamp(0.0, 1.0),
        ]))
    })
}

pub fn brightness(img: &ImageF, factor: f64) -> ImageF {
    map_pixels(img, |p| p * factor)
}

/// Each pixel scaled by one factor drawn uniformly from `range`.
pub fn multiplicative_noise<R: Rng + ?Sized>(img: &ImageF, range: (f64, f64), rng: &mut R) -> ImageF {
    let mut out = img.clone();
    for p in out.as_mut_slice() {
        *p = (*p * rng.random_range(range.0..=range.1)).clamped();
    }
    out
}

/// Independent zero-mean Gaussian noise per channel.
pub fn gaussian_noise<R: Rng + ?Sized>(img: &ImageF, sigma: f64, rng: &mut R) -> ImageF {
    if sigma <= 0.0 {
        return img.clone();
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    let mut out = img.clone();
    for p in out.as_mut_slice() {
        *p = Rgb(p.0.map(|v| v + n.sample(rng))).clamped();
    }
    out
}

/// Sensor noise: Poisson shot noise on luminance plus Gaussian hue jitter.
///
/// Higher `intensity` means fewer photons per unit of luminance.
pub fn iso_noise<R: Rng + ?Sized>(img: &ImageF, intensity: f64, color_shift: f64, rng: &mut R) -> ImageF {
    let photons = 100.0 / intensity.max(1e-3);
    let hue = Normal::new(0.0, color_shift.max(0.0)).expect("finite shift");
    let mut out = img.clone();
    for p in out.as_mut_slice() {
        let [h, s, v] = rgb_to_hsv_pixel(*p).0;
        let v2 = if v > 0.0 {
            let count: f64 = Poisson::new(v * photons).map_or(v * photons, |d| d.sample(rng));
            count / photons
        } else {
            0.0
        };
        let h2 = (h + hue.sample(rng)).rem_euclid(1.0);
        *p = hsv_to_rgb_pixel(Rgb([h2, s, v2.clamp(0.0, 1.0)])).clamped();
    }
    out
}

/// Mean over a `k`-pixel line through each pixel at `angle` radians; edges replicate.
pub fn motion_blur(img: &ImageF, k: usize, angle: f64) -> ImageF {
    let (sin, cos) = angle.sin_cos();
    let r = (k / 2) as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .map(|t| ((t as f64 * sin).round() as isize, (t as f64 * cos).round() as isize))
        .collect();
    let inv = 1.0 / offsets.len() as f64;
    let (h, w) = img.dims();
    Plane::from_fn(h, w, |y, x| {
        offsets.iter().fold(Rgb::BLACK, |acc, &(dy, dx)| {
            acc + img.get_clamped(y as isize + dy, x as isize + dx)
        }) * inv
    })
}

/// Per-channel median over a `k`×`k` window; edges replicate.
pub fn median_blur(img: &ImageF, k: usize) -> ImageF {
    let r = (k / 2) as isize;
    let (h, w) = img.dims();
    let mut window = Vec::with_capacity(k * k);
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut px = [0.0; 3];
            for (c, slot) in px.iter_mut().enumerate() {
                window.clear();
                for dy in -r..=r {
                    for dx in -r..=r {
                        window.push(img.get_clamped(y as isize + dy, x as isize + dx).0[c]);
                    }
                }
                let mid = window.len() / 2;
                *slot = *window.select_nth_unstable_by(mid, f64::total_cmp).1;
            }
            out.set(y, x, Rgb(px));
        }
    }
    out
}

/// Applies each corruption independently with its probability.
///
/// Returns the image and the names of the corruptions applied, in order.
pub fn corrupt_blended<R: Rng + ?Sized>(
    img: &ImageF,
    rng: &mut R,
    p: &CorruptionParams,
) -> Result<(ImageF, Vec<&'static str>)> {
    let mut out = img.clone();
    let mut applied = Vec::new();
    if chance(rng, p.p_cutout) {
        let n = p.cutout_count.sample(rng).round() as usize;
        out = cutout(&out, n, (p.cutout_size.lo(), p.cutout_size.hi()), rng);
        applied.push("cutout");
    }
    if chance(rng, p.p_smoke) {
        let i = p.smoke_intensity.sample(rng);
        out = smoke(&out, i, rng)?;
        applied.push("smoke");
    }
    if chance(rng, p.p_shadow) {
        let s = p.shadow_strength.sample(rng);
        out = shadow(&out, s, rng)?;
        applied.push("shadow");
    }
    if chance(rng, p.p_rgb_shift) {
        let m = p.rgb_shift;
        let shift = [0; 3].map(|_| rng.random_range(-m..=m));
        out = rgb_shift(&out, shift);
        applied.push("rgb_shift");
    }
    if chance(rng, p.p_hsv_shift) {
        let dh = rng.random_range(-p.hue_shift..=p.hue_shift);
        let ds = rng.random_range(-p.sat_shift..=p.sat_shift);
        let dv = rng.random_range(-p.val_shift..=p.val_shift);
        out = hsv_shift(&out, dh, ds, dv);
        applied.push("hsv_shift");
    }
    if chance(rng, p.p_brightness) {
        out = brightness(&out, p.brightness.sample(rng));
        applied.push("brightness");
    }
    if chance(rng, p.p_multiplicative_noise) {
        out = multiplicative_noise(&out, (p.multiplicative_noise.lo(), p.multiplicative_noise.hi()), rng);
        applied.push("multiplicative_noise");
    }
    if chance(rng, p.p_gaussian_noise) {
        let s = p.gaussian_sigma.sample(rng);
        out = gaussian_noise(&out, s, rng);
        applied.push("gaussian_noise");
    }
    if chance(rng, p.p_iso_noise) {
        let i = p.iso_intensity.sample(rng);
        let c = p.iso_color_shift.sample(rng);
        out = iso_noise(&out, i, c, rng);
        applied.push("iso_noise");
    }
    if chance(rng, p.p_gaussian_blur) {
        let k = p.blur_kernels[rng.random_range(0..p.blur_kernels.len())];
        out = gaussian_blur(&out, k)?;
        applied.push("gaussian_blur");
    }
    if chance(rng, p.p_motion_blur) {
        let k = p.blur_kernels[rng.random_range(0..p.blur_kernels.len())];
        out = motion_blur(&out, k, rng.random_range(0.0..std::f64::consts::PI));
        applied.push("motion_blur");
    }
    if chance(rng, p.p_median_blur) {
        let k = p.blur_kernels[rng.random_range(0..p.blur_kernels.len())];
        out = median_blur(&out, k);
        applied.push("median_blur");
    }
    if chance(rng, p.p_jpeg) {
        let q = p.jpeg_quality.sample(rng).round() as u8;
        out = jpeg(&out, q)?;
        applied.push("jpeg");
    }
    Ok((out, applied))
}
