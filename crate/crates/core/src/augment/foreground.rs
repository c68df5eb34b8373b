//! Foreground and background transforms and pair standardization.

use rand::Rng;

use super::params::{chance, BackgroundParams, ForegroundParams};
use crate::chroma::ForegroundSample;
use crate::error::Result;
use crate::imgcore::{
    resize::scaled_height, resize_keep_aspect, resize_mask, Affine, BinaryMask, GeometricTransform, ImageF, Rgb,
};

/// An augmented foreground together with the geometric transform that produced it.
#[derive(Clone, Debug)]
pub struct AugmentedForeground {
    pub sample: ForegroundSample,
    pub transform: GeometricTransform,
    /// Geometric draws rejected before acceptance (equal to `max_attempts` on fallback).
    pub rejected: usize,
}

pub fn draw_foreground_transform<R: Rng + ?Sized>(rng: &mut R, p: &ForegroundParams) -> GeometricTransform {
    let zoom = if chance(rng, p.p_zoom) { p.zoom.sample(rng) } else { 1.0 };
    let rotation_deg = if chance(rng, p.p_rotate) {
        p.rotation_deg.sample(rng)
    } else {
        0.0
    };
    let (shift_x, shift_y) = if chance(rng, p.p_shift) {
        (p.shift.sample(rng), p.shift.sample(rng))
    } else {
        (0.0, 0.0)
    };
    let affine = Affine {
        zoom,
        rotation_deg,
        shift_x,
        shift_y,
    };
    GeometricTransform {
        affine: (affine != Affine::IDENTITY).then_some(affine),
        flip_horizontal: chance(rng, p.p_flip_horizontal),
        flip_vertical: chance(rng, p.p_flip_vertical),
        quarter_turns: 0,
    }
}

/// Random geometric and photometric foreground augmentation.
///
/// Geometric draws whose mask is empty or detached from the image border are
/// redrawn up to `max_attempts` times, then the identity is used. Photometric
/// changes and overlays only touch pixels inside the mask.
pub fn augment_foreground<R: Rng + ?Sized>(
    s: &ForegroundSample,
    rng: &mut R,
    p: &ForegroundParams,
) -> AugmentedForeground {
    let mut chosen = None;
    let mut rejected = 0;
    for _ in 0..p.max_attempts {
        let t = draw_foreground_transform(rng, p);
        if t.is_identity() {
            chosen = Some((t, s.mask.clone()));
            break;
        }
        let mask = t.apply_mask(&s.mask);
        if mask.any() && mask.touches_border() {
            chosen = Some((t, mask));
            break;
        }
        rejected += 1;
    }
    let (transform, mask) = chosen.unwrap_or_else(|| (GeometricTransform::identity(), s.mask.clone()));
    let mut image = transform.apply(&s.image);

    if chance(rng, p.p_brightness) {
        let factor = p.brightness.sample(rng);
        brighten_inside(&mut image, &mask, factor);
    }
    if chance(rng, p.p_droplets) {
        let n = p.droplet_count.sample(rng).round() as usize;
        add_droplets(&mut image, &mask, n, rng);
    }
    if chance(rng, p.p_debris) {
        let n = p.debris_count.sample(rng).round() as usize;
        add_debris(&mut image, &mask, n, rng);
    }
    AugmentedForeground {
        sample: ForegroundSample {
            image,
            mask,
            instrument_count: s.instrument_count,
            source_id: s.source_id.clone(),
        },
        transform,
        rejected,
    }
}

pub fn brighten_inside(image: &mut ImageF, mask: &BinaryMask, factor: f64) {
    for (px, &m) in image.as_mut_slice().iter_mut().zip(mask.as_slice()) {
        if m {
            *px = (*px * factor).clamped();
        }
    }
}

fn mask_pixels(mask: &BinaryMask) -> Vec<usize> {
    mask.as_slice()
        .iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect()
}

/// Alpha-composites `color` over every mask pixel inside the rotated ellipse.
#[allow(clippy::too_many_arguments)]
fn paint_ellipse(
    image: &mut ImageF,
    mask: &BinaryMask,
    (cy, cx): (f64, f64),
    (ry, rx): (f64, f64),
    angle: f64,
    color: Rgb,
    alpha: f64,
) {
    let (h, w) = image.dims();
    let reach = ry.max(rx).ceil() as isize + 1;
    let (sin, cos) = angle.sin_cos();
    let (y0, x0) = (cy as isize, cx as isize);
    for y in (y0 - reach).max(0)..(y0 + reach + 1).min(h as isize) {
        for x in (x0 - reach).max(0)..(x0 + reach + 1).min(w as isize) {
            let (y, x) = (y as usize, x as usize);
            if !mask.get(y, x) {
                continue;
            }
            let (dy, dx) = (y as f64 - cy, x as f64 - cx);
            let u = cos * dx + sin * dy;
            let v = -sin * dx + cos * dy;
            if (u / rx).powi(2) + (v / ry).powi(2) <= 1.0 {
                image.set(y, x, image.get(y, x).lerp(color, alpha));
            }
        }
    }
}

/// Dark-red elliptical blood droplets centered on mask pixels.
pub fn add_droplets<R: Rng + ?Sized>(image: &mut ImageF, mask: &BinaryMask, count: usize, rng: &mut R) {
    let pixels = mask_pixels(mask);
    if pixels.is_empty() {
        return;
    }
    let w = image.width();
    let max_r = (0.03 * image.height().min(w) as f64).max(3.0);
    for _ in 0..count {
        let i = pixels[rng.random_range(0..pixels.len())];
        let center = ((i / w) as f64, (i % w) as f64);
        let radii = (rng.random_range(1.5..=max_r), rng.random_range(1.5..=max_r));
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        let color = Rgb::new(
            rng.random_range(0.3..=0.6),
            rng.random_range(0.0..=0.1),
            rng.random_range(0.0..=0.1),
        );
        let alpha = rng.random_range(0.4..=0.9);
        paint_ellipse(image, mask, center, radii, angle, color, alpha);
    }
}

/// Small desaturated blobs of tissue debris on mask pixels.
pub fn add_debris<R: Rng + ?Sized>(image: &mut ImageF, mask: &BinaryMask, count: usize, rng: &mut R) {
    let pixels = mask_pixels(mask);
    if pixels.is_empty() {
        return;
    }
    let w = image.width();
    let max_r = (0.012 * image.height().min(w) as f64).max(2.0);
    for _ in 0..count {
        let i = pixels[rng.random_range(0..pixels.len())];
        let center = ((i / w) as f64, (i % w) as f64);
        let r = rng.random_range(1.0..=max_r);
        let g: f64 = rng.random_range(0.3..=0.7);
        let color = Rgb::new(g + 0.06, g, g - 0.04).clamped();
        let alpha = rng.random_range(0.3..=0.8);
        paint_ellipse(
            image,
            mask,
            center,
            (r, r * rng.random_range(0.6..=1.0)),
            0.0,
            color,
            alpha,
        );
    }
}

/// Flips, quarter turns and a global brightness change.
pub fn augment_background<R: Rng + ?Sized>(img: &ImageF, rng: &mut R, p: &BackgroundParams) -> ImageF {
    let t = GeometricTransform {
        affine: None,
        flip_horizontal: chance(rng, p.p_flip_horizontal),
        flip_vertical: chance(rng, p.p_flip_vertical),
        quarter_turns: if chance(rng, p.p_rotate90) {
            rng.random_range(1..=3)
        } else {
            0
        },
    };
    let mut out = t.apply(img);
    if chance(rng, p.p_brightness) {
        let factor = p.brightness.sample(rng);
        out.as_mut_slice()
            .iter_mut()
            .for_each(|px| *px = (*px * factor).clamped());
    }
    out
}

/// Vertical crop offsets of height `crop` that keep a nonempty mask touching the crop border.
///
/// Falls back to the offset that keeps the most mask pixels when none exists.
fn mask_crop_offsets(mask: &BinaryMask, crop: usize) -> (Vec<usize>, usize) {
    let (h, w) = mask.dims();
    let mut row_count = vec![0usize; h];
    let mut edge_prefix = vec![0usize; h + 1];
    let mut count_prefix = vec![0usize; h + 1];
    for y in 0..h {
        row_count[y] = (0..w).filter(|&x| mask.get(y, x)).count();
        let edge = (mask.get(y, 0) || mask.get(y, w - 1)) as usize;
        edge_prefix[y + 1] = edge_prefix[y] + edge;
        count_prefix[y + 1] = count_prefix[y] + row_count[y];
    }
    let mut valid = Vec::new();
    let mut best = (0, 0);
    for o in 0..=h - crop {
        let end = o + crop;
        if row_count[o] > 0 || row_count[end - 1] > 0 || edge_prefix[end] > edge_prefix[o] {
            valid.push(o);
        }
        let kept = count_prefix[end] - count_prefix[o];
        if kept > best.1 {
            best = (o, kept);
        }
    }
    (valid, best.0)
}

/// Resizes both elements to `target_width` and crops the taller one to the shorter height.
pub fn standardize_pair<R: Rng + ?Sized>(
    fg: &ForegroundSample,
    bg: &ImageF,
    target_width: usize,
    rng: &mut R,
) -> Result<(ForegroundSample, ImageF)> {
    let (fh, fw) = fg.dims();
    let fg_h = scaled_height(fh, fw, target_width);
    let mut image = resize_keep_aspect(&fg.image, target_width)?;
    let mut mask = resize_mask(&fg.mask, fg_h, target_width)?;
    let mut bg = resize_keep_aspect(bg, target_width)?;
    let bg_h = bg.height();
    if fg_h > bg_h {
        let (valid, fallback) = mask_crop_offsets(&mask, bg_h);
        let top = if valid.is_empty() {
            fallback
        } else {
            valid[rng.random_range(0..valid.len())]
        };
        image = image.crop(top, 0, bg_h, target_width)?;
        mask = mask.crop(top, 0, bg_h, target_width)?;
    } else if bg_h > fg_h {
        let top = rng.random_range(0..=bg_h - fg_h);
        bg = bg.crop(top, 0, fg_h, target_width)?;
    }
    Ok((
        ForegroundSample {
            image,
            mask,
            instrument_count: fg.instrument_count,
            source_id: fg.source_id.clone(),
        },
        bg,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::AugmentParams;
    use crate::eval::iou;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tool_sample(h: usize, w: usize) -> ForegroundSample {
        // a bar entering from the left edge
        let mask = BinaryMask::from_fn(h, w, |y, x| y >= h / 3 && y < h / 2 && x < 2 * w / 3);
        let image = ImageF::from_fn(h, w, |y, x| {
            if mask.get(y, x) {
                Rgb::new(0.6, 0.6, 0.65 + 0.1 * (x as f64 / w as f64))
            } else {
                Rgb::BLACK
            }
        });
        ForegroundSample::new(image, mask, 1, "tool").unwrap()
    }

    #[test]
    fn disabled_is_identity() {
        let s = tool_sample(40, 60);
        let p = AugmentParams::disabled();
        let out = augment_foreground(&s, &mut ChaCha8Rng::seed_from_u64(1), &p.foreground);
        assert_eq!(out.sample.image, s.image);
        assert_eq!(out.sample.mask, s.mask);
        assert!(out.transform.is_identity());
        let bg = ImageF::from_fn(30, 20, |y, x| Rgb::gray((y * 20 + x) as f64 / 600.0));
        assert_eq!(
            augment_background(&bg, &mut ChaCha8Rng::seed_from_u64(1), &p.background),
            bg
        );
    }

    #[test]
    fn horizontal_flip_only() {
        let s = tool_sample(40, 60);
        let mut p = AugmentParams::disabled().foreground;
        p.p_flip_horizontal = 1.0;
        let out = augment_foreground(&s, &mut ChaCha8Rng::seed_from_u64(1), &p);
        assert_eq!(out.sample.mask, s.mask.flip_horizontal());
        assert_eq!(out.sample.image, s.image.flip_horizontal());
    }

    #[test]
    fn accepted_draws_touch_border() {
        let s = tool_sample(48, 64);
        let p = AugmentParams::default().foreground;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let out = augment_foreground(&s, &mut rng, &p);
            assert!(out.sample.mask.any() && out.sample.mask.touches_border());
            assert_eq!(out.sample.mask, out.transform.apply_mask(&s.mask));
        }
    }

    #[test]
    fn rotation_label_matches_independent_transform() {
        let s = tool_sample(64, 64);
        let mut p = AugmentParams::disabled().foreground;
        p.p_rotate = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let out = augment_foreground(&s, &mut rng, &p);
            // independent nearest-neighbour rotation of the original mask
            let a = out.transform.affine.map_or(0.0, |a| a.rotation_deg).to_radians();
            let (sin, cos) = a.sin_cos();
            let independent = BinaryMask::from_fn(64, 64, |y, x| {
                let (dy, dx) = (y as f64 + 0.5 - 32.0, x as f64 + 0.5 - 32.0);
                let sx = cos * dx + sin * dy + 32.0 - 0.5;
                let sy = -sin * dx + cos * dy + 32.0 - 0.5;
                let (sy, sx) = (sy.round(), sx.round());
                sy >= 0.0 && sx >= 0.0 && sy < 64.0 && sx < 64.0 && s.mask.get(sy as usize, sx as usize)
            });
            assert!(iou(&out.sample.mask, &independent).unwrap() >= 0.9);
        }
    }

    #[test]
    fn photometric_only_inside_mask() {
        let s = tool_sample(40, 60);
        let mut p = AugmentParams::disabled().foreground;
        p.p_brightness = 1.0;
        p.p_droplets = 1.0;
        p.p_debris = 1.0;
        let out = augment_foreground(&s, &mut ChaCha8Rng::seed_from_u64(5), &p);
        let mut changed = 0;
        for i in 0..s.image.len() {
            let (a, b) = (s.image.as_slice()[i], out.sample.image.as_slice()[i]);
            if !s.mask.as_slice()[i] {
                assert_eq!(a, b);
            } else if a != b {
                changed += 1;
            }
        }
        assert!(changed > 0);
    }

    #[test]
    fn droplet_colors_dark_red() {
        let mask = BinaryMask::filled(50, 50, true);
        let mut img = ImageF::filled(50, 50, Rgb::gray(1.0));
        add_droplets(&mut img, &mask, 5, &mut ChaCha8Rng::seed_from_u64(6));
        for p in img.as_slice() {
            if *p != Rgb::gray(1.0) {
                assert!(p.0[0] >= p.0[1] && p.0[0] >= p.0[2]);
            }
        }
    }

    #[test]
    fn background_involution() {
        let bg = ImageF::from_fn(30, 20, |y, x| Rgb::new(y as f64 / 30.0, x as f64 / 20.0, 0.5));
        assert_eq!(bg.rotate90(2).rotate90(2), bg);
        let mut p = AugmentParams::disabled().background;
        p.p_brightness = 1.0;
        p.brightness = super::super::params::Range(1.0, 1.0);
        let out = augment_background(&bg, &mut ChaCha8Rng::seed_from_u64(7), &p);
        assert!(out.max_abs_diff(&bg) < 1e-12);
        let mut p = AugmentParams::disabled().background;
        p.p_rotate90 = 1.0;
        let out = augment_background(&bg, &mut ChaCha8Rng::seed_from_u64(7), &p);
        assert!(out.dims() == (30, 20) || out.dims() == (20, 30));
    }

    #[test]
    fn standardize_example_sizes() {
        let fg = tool_sample(3024 / 8, 4032 / 8);
        let bg = ImageF::new(1080 / 8, 1920 / 8);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (f, b) = standardize_pair(&fg, &bg, 64, &mut rng).unwrap();
        assert_eq!(f.dims(), (36, 64));
        assert_eq!(b.dims(), (36, 64));
        assert_eq!(f.mask.dims(), (36, 64));
        assert!(f.mask.any() && f.mask.touches_border());
    }

    #[test]
    fn standardize_equal_aspect_no_crop() {
        let fg = tool_sample(30, 40);
        let bg = ImageF::from_fn(60, 80, |y, _| Rgb::gray(y as f64 / 60.0));
        let (f, b) = standardize_pair(&fg, &bg, 40, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!((f.dims(), b.dims()), ((30, 40), (30, 40)));
        assert_eq!(f.image, fg.image);
    }

    #[test]
    fn standardize_tall_background_crop_reproducible() {
        let fg = tool_sample(20, 40);
        let bg = ImageF::from_fn(80, 40, |y, _| Rgb::gray(y as f64 / 80.0));
        let a = standardize_pair(&fg, &bg, 40, &mut ChaCha8Rng::seed_from_u64(10))
            .unwrap()
            .1;
        let b = standardize_pair(&fg, &bg, 40, &mut ChaCha8Rng::seed_from_u64(10))
            .unwrap()
            .1;
        assert_eq!(a.dims(), (20, 40));
        assert_eq!(a, b);
    }

    #[test]
    fn crop_offsets_keep_border_contact() {
        // mask touching only the top row; only crops that include it are valid
        let mask = BinaryMask::from_fn(20, 10, |y, x| y < 3 && x == 5);
        let (valid, _) = mask_crop_offsets(&mask, 10);
        assert_eq!(valid, vec![0, 1, 2]);
        let empty = BinaryMask::new(20, 10);
        let (valid, fallback) = mask_crop_offsets(&empty, 10);
        assert!(valid.is_empty());
        assert_eq!(fallback, 0);
    }
}
