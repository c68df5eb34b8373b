//! Square-element morphology and Gaussian smoothing.

use super::plane::{BinaryMask, Linear, Plane};
use crate::error::{Error, Result};

/// How pixels beyond the image edge are treated by morphology.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Border {
    /// Outside pixels are background; erosion eats into the frame edge.
    Background,
    /// Outside pixels copy the nearest edge pixel; shapes cut by the frame are not eroded there.
    Replicate,
}

fn check_kernel(k: usize) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::invalid(
            "k",
            format!("kernel size must be odd and >= 1, got {k}"),
        ));
    }
    Ok(())
}

/// Erosion with a `k x k` square, treating the outside as background.
pub fn erode(mask: &BinaryMask, k: usize) -> Result<BinaryMask> {
    erode_with_border(mask, k, Border::Background)
}

pub fn erode_with_border(mask: &BinaryMask, k: usize, border: Border) -> Result<BinaryMask> {
    check_kernel(k)?;
    Ok(square_filter(mask, k, true, border))
}

/// Dilation with a `k x k` square; the outside never contributes foreground.
pub fn dilate(mask: &BinaryMask, k: usize) -> Result<BinaryMask> {
    check_kernel(k)?;
    Ok(square_filter(mask, k, false, Border::Background))
}

// `all == true` is erosion (AND over the window), otherwise dilation (OR).
fn square_filter(mask: &BinaryMask, k: usize, all: bool, border: Border) -> BinaryMask {
    let r = (k / 2) as isize;
    let (h, w) = mask.dims();
    let sample = |m: &BinaryMask, y: isize, x: isize| -> bool {
        if y >= 0 && x >= 0 && (y as usize) < m.height() && (x as usize) < m.width() {
            m.get(y as usize, x as usize)
        } else {
            match border {
                Border::Replicate => m.get_clamped(y, x),
                Border::Background => false,
            }
        }
    };
    let combine = |acc: bool, v: bool| if all { acc && v } else { acc || v };
    let rows = Plane::from_fn(h, w, |y, x| {
        (-r..=r).fold(all, |acc, d| combine(acc, sample(mask, y as isize, x as isize + d)))
    });
    Plane::from_fn(h, w, |y, x| {
        (-r..=r).fold(all, |acc, d| combine(acc, sample(&rows, y as isize + d, x as isize)))
    })
}

/// Window-to-sigma rule for a Gaussian kernel of size `k`.
pub fn sigma_for_window(k: usize) -> f64 {
    0.3 * ((k as f64 - 1.0) / 2.0 - 1.0) + 0.8
}

/// Normalized 1-D Gaussian taps of odd length `k`.
pub fn gaussian_kernel(k: usize) -> Result<Vec<f64>> {
    check_kernel(k)?;
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let sigma = sigma_for_window(k);
    let r = (k / 2) as f64;
    let taps: Vec<f64> = (0..k)
        .map(|i| {
            let d = i as f64 - r;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / sum).collect())
}

/// Separable convolution with the same 1-D kernel on both axes, replicating edges.
pub fn convolve_separable<T: Linear>(src: &Plane<T>, kernel: &[f64]) -> Plane<T> {
    let r = (kernel.len() / 2) as isize;
    let (h, w) = src.dims();
    let rows = Plane::from_fn(h, w, |y, x| {
        kernel.iter().enumerate().fold(T::default(), |acc, (i, &k)| {
            acc + src.get_clamped(y as isize, x as isize + i as isize - r) * k
        })
    });
    Plane::from_fn(h, w, |y, x| {
        kernel.iter().enumerate().fold(T::default(), |acc, (i, &k)| {
            acc + rows.get_clamped(y as isize + i as isize - r, x as isize) * k
        })
    })
}

/// Gaussian blur with window `k`; sigma follows [`sigma_for_window`].
pub fn gaussian_blur<T: Linear>(src: &Plane<T>, k: usize) -> Result<Plane<T>> {
    let kernel = gaussian_kernel(k)?;
    Ok(convolve_separable(src, &kernel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::plane::SoftMask;
    use proptest::prelude::*;

    #[test]
    fn erode_all_ones_loses_frame() {
        let m = BinaryMask::filled(6, 7, true);
        let e = erode(&m, 3).unwrap();
        for y in 0..6 {
            for x in 0..7 {
                let inner = y > 0 && y < 5 && x > 0 && x < 6;
                assert_eq!(e.get(y, x), inner, "({y},{x})");
            }
        }
    }

    #[test]
    fn erode_replicate_keeps_full_mask() {
        let m = BinaryMask::filled(6, 7, true);
        assert_eq!(erode_with_border(&m, 3, Border::Replicate).unwrap(), m);
    }

    #[test]
    fn erode_zeros() {
        let m = BinaryMask::new(5, 5);
        assert_eq!(erode(&m, 3).unwrap(), m);
    }

    #[test]
    fn even_kernel_rejected() {
        let m = BinaryMask::new(5, 5);
        assert!(erode(&m, 4).is_err());
        assert!(dilate(&m, 0).is_err());
        assert!(gaussian_blur(&m.to_soft(), 2).is_err());
    }

    #[test]
    fn dilate_point() {
        let mut m = BinaryMask::new(7, 7);
        m.set(3, 3, true);
        let d = dilate(&m, 3).unwrap();
        assert_eq!(d.count_ones(), 9);
        assert!(d.get(2, 2) && d.get(4, 4) && !d.get(1, 3));
    }

    #[test]
    fn sigma_rule() {
        assert!((sigma_for_window(5) - 1.1).abs() < 1e-12);
        assert!((sigma_for_window(3) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn blur_of_impulse_matches_outer_product() {
        // independent oracle: explicit 2-D kernel from the 1-D Gaussian
        let sigma: f64 = 1.1;
        let g: Vec<f64> = (-2..=2)
            .map(|d: i32| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = g.iter().sum::<f64>().powi(2);
        let mut m = SoftMask::new(9, 9);
        m.set(4, 4, 1.0);
        let b = gaussian_blur(&m, 5).unwrap();
        let mut sum = 0.0;
        for y in 0..9 {
            for x in 0..9 {
                let expected = if (2..=6).contains(&y) && (2..=6).contains(&x) {
                    g[y - 2] * g[x - 2] / total
                } else {
                    0.0
                };
                assert!((b.get(y, x) - expected).abs() < 1e-15);
                sum += b.get(y, x);
            }
        }
        assert!((sum - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn erosion_anti_extensive(bits in proptest::collection::vec(any::<bool>(), 64), k in prop::sample::select(vec![1usize, 3, 5])) {
            let m = BinaryMask::from_vec(8, 8, bits).unwrap();
            let e = erode(&m, k).unwrap();
            for (a, b) in e.as_slice().iter().zip(m.as_slice()) {
                prop_assert!(!a || *b);
            }
        }

        #[test]
        fn blur_preserves_range(vals in proptest::collection::vec(0.0f64..=1.0, 100)) {
            let m = SoftMask::from_vec(10, 10, vals).unwrap();
            let b = gaussian_blur(&m, 5).unwrap();
            prop_assert!(b.as_slice().iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        }
    }
}
