use super::plane::{BinaryMask, Linear, Plane};
use crate::error::{Error, Result};

/// Bilinear resample to exactly `height x width`, using pixel-center alignment.
pub fn resize_exact<T: Linear>(src: &Plane<T>, height: usize, width: usize) -> Result<Plane<T>> {
    if src.is_empty() || height == 0 || width == 0 {
        return Err(Error::invalid(
            "dims",
            format!("cannot resize {:?} to {height}x{width}", src.dims()),
        ));
    }
    if src.dims() == (height, width) {
        return Ok(src.clone());
    }
    let (sh, sw) = src.dims();
    let sy = sh as f64 / height as f64;
    let sx = sw as f64 / width as f64;
    let cols: Vec<(usize, usize, f64)> = (0..width).map(|x| taps(x, sx, sw)).collect();
    Ok(Plane::from_fn(height, width, |y, x| {
        let (y0, y1, fy) = taps(y, sy, sh);
        let (x0, x1, fx) = cols[x];
        let top = src.get(y0, x0) * (1.0 - fx) + src.get(y0, x1) * fx;
        let bottom = src.get(y1, x0) * (1.0 - fx) + src.get(y1, x1) * fx;
        top * (1.0 - fy) + bottom * fy
    }))
}

fn taps(dst: usize, scale: f64, src_len: usize) -> (usize, usize, f64) {
    let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = pos.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, pos - i0 as f64)
}

/// Output height for a width-standardizing resize: `round(target_width * H / W)`.
pub fn scaled_height(height: usize, width: usize, target_width: usize) -> usize {
    ((target_width as f64 * height as f64 / width as f64).round() as usize).max(1)
}

/// Resizes to `target_width`, keeping the aspect ratio.
pub fn resize_keep_aspect<T: Linear>(img: &Plane<T>, target_width: usize) -> Result<Plane<T>> {
    if target_width == 0 {
        return Err(Error::invalid("target_width", "must be at least 1"));
    }
    if img.is_empty() {
        return Err(Error::invalid("dims", "degenerate input image"));
    }
    let height = scaled_height(img.height(), img.width(), target_width);
    resize_exact(img, height, target_width)
}

/// Resizes a binary mask by bilinear interpolation and re-thresholding at 0.5.
pub fn resize_mask(mask: &BinaryMask, height: usize, width: usize) -> Result<BinaryMask> {
    if mask.dims() == (height, width) {
        return Ok(mask.clone());
    }
    Ok(resize_exact(&mask.to_soft(), height, width)?.map(|v| v >= 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::plane::{ImageF, Rgb};

    #[test]
    fn standard_frame_sizes() {
        assert_eq!(scaled_height(3024, 4032, 640), 480);
        assert_eq!(scaled_height(2240, 3360, 640), 427);
        assert_eq!(scaled_height(1080, 1920, 640), 360);
    }

    #[test]
    fn same_width_is_identity() {
        let img = ImageF::from_fn(48, 64, |y, x| Rgb::gray(((y * 7 + x * 3) % 11) as f64 / 10.0));
        assert_eq!(resize_keep_aspect(&img, 64).unwrap(), img);
    }

    #[test]
    fn downscale_dims() {
        let img = ImageF::new(302, 403);
        let out = resize_keep_aspect(&img, 64).unwrap();
        assert_eq!(out.dims(), (48, 64));
    }

    #[test]
    fn zero_width_rejected() {
        assert!(resize_keep_aspect(&ImageF::new(4, 4), 0).is_err());
    }

    #[test]
    fn constant_stays_constant() {
        let img = Plane::filled(17, 23, 0.25);
        let out = resize_exact(&img, 40, 9).unwrap();
        assert!(out.as_slice().iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn mask_resize_thresholds() {
        let mut m = BinaryMask::new(4, 4);
        for y in 0..4 {
            for x in 0..2 {
                m.set(y, x, true);
            }
        }
        let r = resize_mask(&m, 8, 8).unwrap();
        assert!(r.get(3, 1) && !r.get(3, 6));
    }
}
