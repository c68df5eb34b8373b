//! Scene-level augmentations: flying distractors and endoscopic padding.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::params::{chance, DistractorParams, PaddingParams};
use crate::blend::{BlendBasis, Compositor};
use crate::error::Result;
use crate::imgcore::{plane::ensure_same_dims, Affine, BinaryMask, GeometricTransform, ImageF, Rgb};

/// Number of distractors for one sample: zero unless enabled, else Poisson capped at `max_count`.
pub fn draw_distractor_count<R: Rng + ?Sized>(rng: &mut R, p: &DistractorParams) -> usize {
    if !chance(rng, p.probability) {
        return 0;
    }
    let n: f64 = Poisson::new(p.mean_count).map_or(0.0, |d| d.sample(rng));
    (n as usize).min(p.max_count)
}

/// Random tool-shaped cutout: `tool_mask` zoomed, rotated, shifted and flipped.
pub fn distractor_shape<R: Rng + ?Sized>(tool_mask: &BinaryMask, rng: &mut R, p: &DistractorParams) -> BinaryMask {
    let t = GeometricTransform {
        affine: Some(Affine {
            zoom: p.zoom.sample(rng),
            rotation_deg: rng.random_range(-180.0..=180.0),
            shift_x: p.shift.sample(rng),
            shift_y: p.shift.sample(rng),
        }),
        flip_horizontal: rng.random(),
        flip_vertical: rng.random(),
        quarter_turns: 0,
    };
    t.apply_mask(tool_mask)
}

/// Blends `count` tool-shaped cutouts of `donor` into `bg` with the sample's compositor.
///
/// The result is background class: callers never add these shapes to the label.
#[allow(clippy::too_many_arguments)]
pub fn add_flying_distractors<R: Rng + ?Sized>(
    bg: &ImageF,
    donor: &ImageF,
    tool_mask: &BinaryMask,
    compositor: &Compositor,
    basis: &BlendBasis,
    count: usize,
    rng: &mut R,
    p: &DistractorParams,
) -> Result<ImageF> {
    ensure_same_dims(bg.dims(), donor.dims())?;
    ensure_same_dims(bg.dims(), tool_mask.dims())?;
    let mut out = bg.clone();
    for _ in 0..count {
        let shape = distractor_shape(tool_mask, rng, p);
        if shape.any() {
            out = compositor.composite(donor, &shape, &out, basis)?;
        }
    }
    Ok(out)
}

/// Black frame simulating the endoscope's field of view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Padding {
    Rectangular {
        top: usize,
        bottom: usize,
        left: usize,
        right: usize,
        noise_sigma: f64,
    },
    /// Everything farther than `radius` pixels from the image center is padded.
    Circular { radius: f64, noise_sigma: f64 },
}

impl Padding {
    pub fn noise_sigma(&self) -> f64 {
        match *self {
            Padding::Rectangular { noise_sigma, .. } | Padding::Circular { noise_sigma, .. } => noise_sigma,
        }
    }

    /// Padded pixels of an `h`×`w` image.
    pub fn region(&self, h: usize, w: usize) -> BinaryMask {
        match *self {
            Padding::Rectangular {
                top,
                bottom,
                left,
                right,
                ..
            } => BinaryMask::from_fn(h, w, |y, x| y < top || y + bottom >= h || x < left || x + right >= w),
            Padding::Circular { radius, .. } => {
                let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
                BinaryMask::from_fn(h, w, |y, x| {
                    let (dy, dx) = (y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
                    dy * dy + dx * dx > radius * radius
                })
            }
        }
    }
}

fn draw_padding<R: Rng + ?Sized>(h: usize, w: usize, rng: &mut R, p: &PaddingParams) -> Padding {
    let circular = rng.random::<bool>();
    let noise_sigma = p.noise_sigma.sample(rng);
    if circular {
        let half_diagonal = ((h * h + w * w) as f64).sqrt() / 2.0;
        Padding::Circular {
            radius: p.radius_fraction.sample(rng) * half_diagonal,
            noise_sigma,
        }
    } else {
        let mut side = |dim: usize| (p.border_fraction.sample(rng) * dim as f64).floor() as usize;
        Padding::Rectangular {
            top: side(h),
            bottom: side(h),
            left: side(w),
            right: side(w),
            noise_sigma,
        }
    }
}

/// Applies a fixed padding: padded pixels become black plus clamped Gaussian noise,
/// and the label under the padding becomes background.
pub fn apply_padding<R: Rng + ?Sized>(
    img: &ImageF,
    label: &BinaryMask,
    padding: &Padding,
    rng: &mut R,
) -> Result<(ImageF, BinaryMask)> {
    ensure_same_dims(img.dims(), label.dims())?;
    let (h, w) = img.dims();
    let region = padding.region(h, w);
    let sigma = padding.noise_sigma();
    let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
    let mut out = img.clone();
    for (px, &padded) in out.as_mut_slice().iter_mut().zip(region.as_slice()) {
        if padded {
            *px = match &noise {
                Some(n) => Rgb([n.sample(rng), n.sample(rng), n.sample(rng)]).clamped(),
                None => Rgb::BLACK,
            };
        }
    }
    let label = label.zip_map(&region, |l, padded| l && !padded)?;
    Ok((out, label))
}

/// Randomly pads the image; skipped when it would erase a nonempty label.
pub fn endoscopic_padding<R: Rng + ?Sized>(
    img: &ImageF,
    label: &BinaryMask,
    rng: &mut R,
    p: &PaddingParams,
) -> Result<(ImageF, BinaryMask, Option<Padding>)> {
    ensure_same_dims(img.dims(), label.dims())?;
    if !chance(rng, p.probability) {
        return Ok((img.clone(), label.clone(), None));
    }
    let (h, w) = img.dims();
    let padding = draw_padding(h, w, rng, p);
    let (out, new_label) = apply_padding(img, label, &padding, rng)?;
    if label.any() && !new_label.any() {
        return Ok((img.clone(), label.clone(), None));
    }
    Ok((out, new_label, Some(padding)))
}

/// True when some label pixel lies on the image border or next to a padded pixel.
pub fn touches_frame(label: &BinaryMask, padding: Option<&Padding>) -> bool {
    if label.touches_border() {
        return true;
    }
    let Some(padding) = padding else { return false };
    let (h, w) = label.dims();
    let region = padding.region(h, w);
    (0..h).any(|y| {
        (0..w).any(|x| {
            label.get(y, x)
                && (-1isize..=1).any(|dy| (-1isize..=1).any(|dx| region.get_clamped(y as isize + dy, x as isize + dx)))
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::AugmentParams;
    use crate::blend::{BlendMethod, BlendWeights};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bar(h: usize, w: usize) -> BinaryMask {
        BinaryMask::from_fn(h, w, |y, x| y >= h / 3 && y < h / 2 && x < 2 * w / 3)
    }

    fn gradient(h: usize, w: usize, c: f64) -> ImageF {
        ImageF::from_fn(h, w, |y, x| Rgb::new(y as f64 / h as f64, x as f64 / w as f64, c))
    }

    #[test]
    fn zero_distractors_unchanged() {
        let bg = gradient(32, 48, 0.2);
        let donor = gradient(32, 48, 0.9);
        let p = DistractorParams::default();
        let out = add_flying_distractors(
            &bg,
            &donor,
            &bar(32, 48),
            &Compositor::Member { index: 0 },
            &BlendBasis::default(),
            0,
            &mut ChaCha8Rng::seed_from_u64(1),
            &p,
        )
        .unwrap();
        assert_eq!(out, bg);
    }

    #[test]
    fn identical_donor_trivial_unchanged() {
        let bg = gradient(32, 48, 0.2);
        let p = DistractorParams::default();
        let out = add_flying_distractors(
            &bg,
            &bg,
            &bar(32, 48),
            &Compositor::Member { index: 0 },
            &BlendBasis::default(),
            3,
            &mut ChaCha8Rng::seed_from_u64(2),
            &p,
        )
        .unwrap();
        assert_eq!(out, bg);
    }

    #[test]
    fn distractors_change_background_only_with_donor_pixels() {
        let bg = ImageF::filled(32, 48, Rgb::gray(0.1));
        let donor = ImageF::filled(32, 48, Rgb::gray(0.9));
        let p = DistractorParams::default();
        let basis = BlendBasis {
            methods: vec![BlendMethod::Trivial, BlendMethod::GaussianFeather],
        };
        let mix = Compositor::Mix {
            weights: BlendWeights::fixed(vec![0.5, 0.5]).unwrap(),
        };
        let out = add_flying_distractors(
            &bg,
            &donor,
            &bar(32, 48),
            &mix,
            &basis,
            3,
            &mut ChaCha8Rng::seed_from_u64(3),
            &p,
        )
        .unwrap();
        assert!(out
            .as_slice()
            .iter()
            .all(|px| px.0[0] >= 0.1 - 1e-12 && px.0[0] <= 0.9 + 1e-12));
        assert!(out.as_slice().iter().any(|px| px.0[0] > 0.5));
        assert!(add_flying_distractors(
            &bg,
            &gradient(8, 8, 0.0),
            &bar(32, 48),
            &mix,
            &basis,
            1,
            &mut ChaCha8Rng::seed_from_u64(3),
            &p
        )
        .is_err());
    }

    #[test]
    fn distractor_count_capped() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = DistractorParams {
            probability: 1.0,
            mean_count: 20.0,
            ..DistractorParams::default()
        };
        assert!((0..200).all(|_| draw_distractor_count(&mut rng, &p) <= 3));
        p.probability = 0.0;
        assert!((0..200).all(|_| draw_distractor_count(&mut rng, &p) == 0));
    }

    #[test]
    fn padding_disabled_unchanged() {
        let img = gradient(30, 40, 0.5);
        let label = bar(30, 40);
        let p = AugmentParams::disabled().padding;
        let (out, l, pad) = endoscopic_padding(&img, &label, &mut ChaCha8Rng::seed_from_u64(5), &p).unwrap();
        assert_eq!((out, l, pad), (img, label, None));
    }

    #[test]
    fn circular_padding_noise_statistics() {
        let (h, w) = (300, 400);
        let img = ImageF::filled(h, w, Rgb::gray(0.8));
        let label = BinaryMask::new(h, w);
        let sigma = 0.02;
        let pad = Padding::Circular {
            radius: 150.0,
            noise_sigma: sigma,
        };
        let (out, _) = apply_padding(&img, &label, &pad, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let region = pad.region(h, w);
        let values: Vec<f64> = out
            .as_slice()
            .iter()
            .zip(region.as_slice())
            .filter(|(_, &r)| r)
            .flat_map(|(p, _)| p.0)
            .collect();
        assert!(values.len() > 10_000);
        let beyond = values.iter().filter(|&&v| v > 3.0 * sigma).count();
        // Gaussian tail mass beyond 3 sigma is about 0.00135
        assert!((beyond as f64 / values.len() as f64) < 0.003);
        // half of the draws are negative and clamp to zero
        let zeros = values.iter().filter(|&&v| v == 0.0).count() as f64 / values.len() as f64;
        assert!((zeros - 0.5).abs() < 0.02);
        // the inscribed disc is untouched
        assert_eq!(out.get(150, 200), Rgb::gray(0.8));
    }

    #[test]
    fn padding_only_removes_foreground() {
        let img = gradient(60, 80, 0.5);
        let label = bar(60, 80);
        let mut p = AugmentParams::default().padding;
        p.probability = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let (out, l, pad) = endoscopic_padding(&img, &label, &mut rng, &p).unwrap();
            assert!(l.count_ones() <= label.count_ones());
            assert!(l.as_slice().iter().zip(label.as_slice()).all(|(&a, &b)| !a || b));
            if let Some(pad) = pad {
                let region = pad.region(60, 80);
                assert!(region.as_slice().iter().zip(l.as_slice()).all(|(&r, &v)| !(r && v)));
                assert!(touches_frame(&l, Some(&pad)));
                assert!(out
                    .as_slice()
                    .iter()
                    .zip(region.as_slice())
                    .all(|(px, &r)| !r || px.0.iter().all(|&c| c <= 0.2)));
            }
        }
    }

    #[test]
    fn rectangular_region() {
        let pad = Padding::Rectangular {
            top: 1,
            bottom: 2,
            left: 3,
            right: 0,
            noise_sigma: 0.0,
        };
        let r = pad.region(10, 10);
        assert_eq!(r.count_ones(), 100 - 7 * 7);
        assert!(r.get(0, 5) && r.get(8, 5) && !r.get(7, 5) && r.get(5, 2) && !r.get(5, 9));
    }

    #[test]
    fn frame_contact() {
        let inner = BinaryMask::from_fn(10, 10, |y, x| (3..7).contains(&y) && (2..5).contains(&x));
        assert!(!touches_frame(&inner, None));
        let pad = Padding::Rectangular {
            top: 0,
            bottom: 0,
            left: 1,
            right: 0,
            noise_sigma: 0.0,
        };
        assert!(!touches_frame(&inner, Some(&pad)));
        let pad = Padding::Rectangular {
            top: 0,
            bottom: 0,
            left: 2,
            right: 0,
            noise_sigma: 0.0,
        };
        assert!(touches_frame(&inner, Some(&pad)));
    }
}
