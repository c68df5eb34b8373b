//! Gaussian and Laplacian pyramids.
//!
//! Reduce blurs with the binomial kernel [1,4,6,4,1]/16 (edge replication) and
//! keeps every other sample, so level `k` has dims `ceil(dims(k-1) / 2)`.
//! Expand is the matching interpolating upsample: even output samples take
//! weights (1,6,1)/8 of their coarse neighbours and odd samples (4,4)/8, so a
//! constant plane stays exactly constant across both operations.

use super::plane::{Linear, Plane};
use crate::error::{Error, Result};

const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Clone, Debug)]
pub struct GaussianPyramid<T> {
    pub levels: Vec<Plane<T>>,
}

/// Band-pass levels plus the coarsest Gaussian level as the last entry.
#[derive(Clone, Debug)]
pub struct LaplacianPyramid<T> {
    pub levels: Vec<Plane<T>>,
}

impl<T> GaussianPyramid<T> {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }
}

impl<T> LaplacianPyramid<T> {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }
}

fn check_levels(dims: (usize, usize), levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::invalid("levels", "must be at least 1"));
    }
    let min_dim = dims.0.min(dims.1);
    if levels > 63 || min_dim < 1usize << (levels - 1) {
        return Err(Error::TooManyLevels {
            height: dims.0,
            width: dims.1,
            levels,
        });
    }
    Ok(())
}

fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Row `y` of the output is `sum_k weight_k * src_row(index_k)`, with row indices clamped.
fn combine_rows<T: Linear>(src: &Plane<T>, height: usize, taps: impl Fn(usize) -> Vec<(isize, f64)>) -> Plane<T> {
    let (sh, w) = src.dims();
    let data = src.as_slice();
    let mut out = Vec::with_capacity(height * w);
    for y in 0..height {
        let rows: Vec<(&[T], f64)> = taps(y)
            .into_iter()
            .map(|(j, k)| {
                let r = clamp_index(j, sh);
                (&data[r * w..(r + 1) * w], k)
            })
            .collect();
        out.extend((0..w).map(|x| rows.iter().fold(T::default(), |acc, (row, k)| acc + row[x] * *k)));
    }
    Plane::from_vec(height, w, out).expect("length matches")
}

/// Blur then 2x decimate. Only the retained samples are filtered.
pub fn reduce<T: Linear>(src: &Plane<T>) -> Plane<T> {
    let (h, w) = src.dims();
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let data = src.as_slice();
    let rows = Plane::from_fn(h, ow, |y, x| {
        let row = &data[y * w..(y + 1) * w];
        match row.get((2 * x).wrapping_sub(2)..2 * x + 3) {
            Some(window) => window
                .iter()
                .zip(BINOMIAL)
                .fold(T::default(), |acc, (&v, k)| acc + v * k),
            None => BINOMIAL.iter().enumerate().fold(T::default(), |acc, (i, &k)| {
                acc + row[clamp_index((2 * x + i) as isize - 2, w)] * k
            }),
        }
    });
    combine_rows(&rows, oh, |y| {
        BINOMIAL
            .iter()
            .enumerate()
            .map(|(i, &k)| ((2 * y + i) as isize - 2, k))
            .collect()
    })
}

/// Coarse taps of fine sample `i`.
fn expand_taps(i: usize) -> &'static [(isize, f64)] {
    const EVEN: [(isize, f64); 3] = [(-1, 1.0 / 8.0), (0, 6.0 / 8.0), (1, 1.0 / 8.0)];
    const ODD: [(isize, f64); 2] = [(0, 4.0 / 8.0), (1, 4.0 / 8.0)];
    if i.is_multiple_of(2) {
        &EVEN
    } else {
        &ODD
    }
}

/// Upsamples `src` to `height x width` (each at most twice the source size).
pub fn expand<T: Linear>(src: &Plane<T>, height: usize, width: usize) -> Plane<T> {
    let (_, sw) = src.dims();
    let data = src.as_slice();
    let rows = Plane::from_fn(src.height(), width, |y, x| {
        let row = &data[y * sw..(y + 1) * sw];
        let c = (x / 2) as isize;
        expand_taps(x)
            .iter()
            .fold(T::default(), |acc, &(d, k)| acc + row[clamp_index(c + d, sw)] * k)
    });
    combine_rows(&rows, height, |y| {
        let c = (y / 2) as isize;
        expand_taps(y).iter().map(|&(d, k)| (c + d, k)).collect()
    })
}

pub fn build_gaussian_pyramid<T: Linear>(img: &Plane<T>, levels: usize) -> Result<GaussianPyramid<T>> {
    check_levels(img.dims(), levels)?;
    let mut out = Vec::with_capacity(levels);
    out.push(img.clone());
    for k in 1..levels {
        let next = reduce(&out[k - 1]);
        out.push(next);
    }
    Ok(GaussianPyramid { levels: out })
}

pub fn build_laplacian_pyramid<T: Linear>(img: &Plane<T>, levels: usize) -> Result<LaplacianPyramid<T>> {
    let gauss = build_gaussian_pyramid(img, levels)?;
    let mut out = Vec::with_capacity(levels);
    for k in 0..levels - 1 {
        let fine = &gauss.levels[k];
        let up = expand(&gauss.levels[k + 1], fine.height(), fine.width());
        out.push(fine.zip_map(&up, |a, b| a - b)?);
    }
    out.push(gauss.levels[levels - 1].clone());
    Ok(LaplacianPyramid { levels: out })
}

/// Reconstructs the finest level. Values are not clamped here.
pub fn collapse_laplacian<T: Linear>(pyr: &LaplacianPyramid<T>) -> Result<Plane<T>> {
    let mut levels = pyr.levels.iter().rev();
    let mut acc = levels
        .next()
        .ok_or_else(|| Error::invalid("levels", "empty pyramid"))?
        .clone();
    for band in levels {
        let up = expand(&acc, band.height(), band.width());
        acc = band.zip_map(&up, |a, b| a + b)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::plane::{ImageF, Rgb};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> ImageF {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageF::from_fn(h, w, |_, _| Rgb::new(rng.random(), rng.random(), rng.random()))
    }

    #[test]
    fn level_dims_round_up() {
        let img = ImageF::new(45, 30);
        let g = build_gaussian_pyramid(&img, 4).unwrap();
        let dims: Vec<_> = g.levels.iter().map(|l| l.dims()).collect();
        assert_eq!(dims, vec![(45, 30), (23, 15), (12, 8), (6, 4)]);
    }

    #[test]
    fn single_level_is_identity() {
        let img = random_image(9, 13, 1);
        let l = build_laplacian_pyramid(&img, 1).unwrap();
        assert_eq!(l.levels.len(), 1);
        assert_eq!(collapse_laplacian(&l).unwrap(), img);
    }

    #[test]
    fn constant_image_has_no_band_pass() {
        let img = ImageF::filled(33, 40, Rgb::new(0.2, 0.5, 0.9));
        let l = build_laplacian_pyramid(&img, 4).unwrap();
        for band in &l.levels[..3] {
            assert!(band.as_slice().iter().all(|p| p.0.iter().all(|c| c.abs() < 1e-12)));
        }
        assert!(l.levels[3].max_abs_diff(&ImageF::filled(5, 5, Rgb::new(0.2, 0.5, 0.9))) < 1e-12);
    }

    #[test]
    fn round_trip_random() {
        let img = random_image(256, 256, 7);
        let l = build_laplacian_pyramid(&img, 5).unwrap();
        assert!(collapse_laplacian(&l).unwrap().max_abs_diff(&img) < 1e-4);
    }

    #[test]
    fn round_trip_odd_dims() {
        let img = random_image(37, 51, 3);
        let l = build_laplacian_pyramid(&img, 5).unwrap();
        assert!(collapse_laplacian(&l).unwrap().max_abs_diff(&img) < 1e-12);
    }

    #[test]
    fn too_many_levels() {
        let img = ImageF::new(15, 64);
        assert!(build_laplacian_pyramid(&img, 4).is_ok());
        assert!(matches!(
            build_laplacian_pyramid(&img, 5),
            Err(Error::TooManyLevels { .. })
        ));
        assert!(build_gaussian_pyramid(&img, 0).is_err());
    }

    #[test]
    fn expand_preserves_constants() {
        let p = Plane::filled(3, 4, 0.7);
        let e = expand(&p, 5, 8);
        assert!(e.as_slice().iter().all(|v| (v - 0.7).abs() < 1e-15));
    }
}
