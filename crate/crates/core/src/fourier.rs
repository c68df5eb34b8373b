//! Inference-time domain adaptation by swapping low-frequency Fourier
//! amplitudes.
//!
//! A real image keeps its phase and high-frequency amplitude but takes the
//! low-frequency amplitude of a synthetic image, which moves its global
//! color and illumination toward the synthetic domain. Spectra are kept in
//! the centered layout (zero frequency at `(h/2, w/2)`).

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::imgcore::{plane::ensure_same_dims, resize_exact, BinaryMask, ImageF, Plane, Rgb, SoftMask};

pub const DEFAULT_BETA: f64 = 0.001;

/// Per-channel 2D DFT in centered layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    height: usize,
    width: usize,
    channels: [Vec<Complex<f64>>; 3],
}

fn fft2(data: &mut [Complex<f64>], h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    row.process(data);
    let mut column = vec![Complex::default(); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
}

/// Moves index `k` of the natural layout to `(k + n/2) mod n`; `inverse` undoes it.
fn shift(data: &[Complex<f64>], h: usize, w: usize, inverse: bool) -> Vec<Complex<f64>> {
    let (dy, dx) = if inverse {
        (h - h / 2, w - w / 2)
    } else {
        (h / 2, w / 2)
    };
    let mut out = vec![Complex::default(); data.len()];
    for y in 0..h {
        for x in 0..w {
            out[((y + dy) % h) * w + (x + dx) % w] = data[y * w + x];
        }
    }
    out
}

impl Spectrum {
    pub fn forward(img: &ImageF) -> Spectrum {
        let (h, w) = img.dims();
        let channels = [0, 1, 2].map(|c| {
            let mut buf: Vec<Complex<f64>> = img.as_slice().iter().map(|p| Complex::new(p.0[c], 0.0)).collect();
            fft2(&mut buf, h, w, false);
            shift(&buf, h, w, false)
        });
        Spectrum {
            height: h,
            width: w,
            channels,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn channel(&self, c: usize) -> &[Complex<f64>] {
        &self.channels[c]
    }

    /// Coefficient at centered position `(y, x)`.
    pub fn get(&self, c: usize, y: usize, x: usize) -> Complex<f64> {
        self.channels[c][y * self.width + x]
    }

    /// Modulus of the inverse transform, unclamped.
    pub fn inverse_modulus(&self) -> ImageF {
        let (h, w) = (self.height, self.width);
        let n = (h * w) as f64;
        let planes = self.channels.each_ref().map(|ch| {
            let mut buf = shift(ch, h, w, true);
            fft2(&mut buf, h, w, true);
            buf.iter().map(|z| z.norm() / n).collect::<Vec<f64>>()
        });
        Plane::from_fn(h, w, |y, x| {
            let i = y * w + x;
            Rgb::new(planes[0][i], planes[1][i], planes[2][i])
        })
    }
}

/// Centered low-frequency window with half-sizes `max(1, floor(beta * dim))`.
pub fn lowfreq_mask(height: usize, width: usize, beta: f64) -> Result<BinaryMask> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
    }
    let window = |dim: usize| {
        let half = ((beta * dim as f64).floor() as usize).max(1);
        let c = dim / 2;
        c.saturating_sub(half)..(c + half).min(dim)
    };
    let (rows, cols) = (window(height), window(width));
    Ok(BinaryMask::from_fn(height, width, |y, x| {
        rows.contains(&y) && cols.contains(&x)
    }))
}

/// Source amplitude inside `mask`, target amplitude outside, target phase everywhere.
pub fn compose_spectrum(target: &Spectrum, source: &Spectrum, mask: &BinaryMask) -> Result<Spectrum> {
    ensure_same_dims(target.dims(), source.dims())?;
    ensure_same_dims(target.dims(), mask.dims())?;
    let channels = [0, 1, 2].map(|c| {
        target.channels[c]
            .iter()
            .zip(&source.channels[c])
            .zip(mask.as_slice())
            .map(|((&t, &s), &m)| if m { Complex::from_polar(s.norm(), t.arg()) } else { t })
            .collect()
    });
    Ok(Spectrum {
        height: target.height,
        width: target.width,
        channels,
    })
}

/// Moves `x_t` toward the domain of `x_s`; `x_s` is first resized to `x_t`'s size.
pub fn adapt(x_t: &ImageF, x_s: &ImageF, beta: f64) -> Result<ImageF> {
    let (h, w) = x_t.dims();
    let mask = lowfreq_mask(h, w, beta)?;
    let source = resize_exact(x_s, h, w)?;
    let composed = compose_spectrum(&Spectrum::forward(x_t), &Spectrum::forward(&source), &mask)?;
    let mut out = composed.inverse_modulus();
    out.clamp_in_place();
    Ok(out)
}

/// Mean of `predictor` over `n_s` adapted copies of `x_t`, sources drawn with replacement.
pub fn ensemble_predict<R, F>(
    x_t: &ImageF,
    sources: &[ImageF],
    mut predictor: F,
    n_s: usize,
    beta: f64,
    rng: &mut R,
) -> Result<SoftMask>
where
    R: Rng + ?Sized,
    F: FnMut(&ImageF) -> Result<SoftMask>,
{
    if n_s == 0 {
        return Err(Error::invalid("n_s", "need at least one source draw"));
    }
    if sources.is_empty() {
        return Err(Error::EmptyPool("no source-domain images".into()));
    }
    let (h, w) = x_t.dims();
    let mut sum = SoftMask::new(h, w);
    for _ in 0..n_s {
        let source = &sources[rng.random_range(0..sources.len())];
        let pred = predictor(&adapt(x_t, source, beta)?)?;
        ensure_same_dims((h, w), pred.dims())?;
        for (acc, p) in sum.as_mut_slice().iter_mut().zip(pred.as_slice()) {
            *acc += p;
        }
    }
    let mut out = sum.map(|v| v / n_s as f64);
    out.clamp_in_place();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> ImageF {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageF::from_fn(h, w, |_, _| Rgb::new(rng.random(), rng.random(), rng.random()))
    }

    fn naive_dft(img: &ImageF, c: usize, u: usize, v: usize) -> Complex<f64> {
        let (h, w) = img.dims();
        let mut acc = Complex::new(0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let phase = -2.0 * std::f64::consts::PI * ((u * y) as f64 / h as f64 + (v * x) as f64 / w as f64);
                acc += Complex::from_polar(img.get(y, x).0[c], phase);
            }
        }
        acc
    }

    #[test]
    fn forward_matches_naive_dft_centered() {
        let img = random_image(6, 5, 1);
        let s = Spectrum::forward(&img);
        for u in 0..6 {
            for v in 0..5 {
                let expected = naive_dft(&img, 1, u, v);
                let got = s.get(1, (u + 3) % 6, (v + 2) % 5);
                assert!((expected - got).norm() < 1e-9);
            }
        }
        // DC sits at the center
        let dc = s.get(0, 3, 2).re;
        let sum: f64 = img.as_slice().iter().map(|p| p.0[0]).sum();
        assert!((dc - sum).abs() < 1e-9);
    }

    #[test]
    fn roundtrip() {
        for (h, w) in [(16, 16), (7, 9), (1, 4)] {
            let img = random_image(h, w, 2);
            assert!(Spectrum::forward(&img).inverse_modulus().max_abs_diff(&img) < 1e-6);
        }
    }

    #[test]
    fn mask_window() {
        let m = lowfreq_mask(256, 256, 0.001).unwrap();
        assert_eq!(m.count_ones(), 4);
        for y in 127..129 {
            for x in 127..129 {
                assert!(m.get(y, x));
            }
        }
        let m = lowfreq_mask(100, 50, 0.1).unwrap();
        assert_eq!(m.count_ones(), 20 * 10);
        assert!(m.get(40, 20) && !m.get(39, 20) && m.get(59, 29) && !m.get(60, 29));
        assert_eq!(lowfreq_mask(10, 12, 5.0).unwrap().count_ones(), 120);
        let m = lowfreq_mask(9, 9, 0.2).unwrap();
        let comp = m.not();
        assert!(m.as_slice().iter().zip(comp.as_slice()).all(|(a, b)| a ^ b));
        assert!(lowfreq_mask(4, 4, 0.0).is_err());
        assert!(lowfreq_mask(4, 4, -1.0).is_err());
    }

    #[test]
    fn adapt_with_itself_is_identity() {
        let img = random_image(32, 24, 3);
        assert!(adapt(&img, &img, DEFAULT_BETA).unwrap().max_abs_diff(&img) < 1e-3);
        assert!(adapt(&img, &img, 0.2).unwrap().max_abs_diff(&img) < 1e-3);
    }

    #[test]
    fn adapt_keeps_dims_and_range() {
        let t = random_image(20, 30, 4);
        let s = random_image(11, 13, 5);
        let out = adapt(&t, &s, 0.1).unwrap();
        assert_eq!(out.dims(), (20, 30));
        assert!(out
            .as_slice()
            .iter()
            .all(|p| p.0.iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn high_frequencies_unchanged() {
        let t = Spectrum::forward(&random_image(16, 20, 6));
        let s = Spectrum::forward(&random_image(16, 20, 7));
        let m = lowfreq_mask(16, 20, 0.1).unwrap();
        let out = compose_spectrum(&t, &s, &m).unwrap();
        for c in 0..3 {
            for i in 0..16 * 20 {
                let (o, tt, ss) = (out.channel(c)[i], t.channel(c)[i], s.channel(c)[i]);
                if m.as_slice()[i] {
                    assert!((o.norm() - ss.norm()).abs() < 1e-6);
                } else {
                    assert!((o - tt).norm() < 1e-6);
                }
                assert!(tt.norm() < 1e-9 || (o.arg() - tt.arg()).abs() < 1e-6 || o.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn full_window_takes_source_amplitude() {
        let t = random_image(8, 8, 8);
        let s = random_image(8, 8, 9);
        let out = compose_spectrum(
            &Spectrum::forward(&t),
            &Spectrum::forward(&s),
            &lowfreq_mask(8, 8, 10.0).unwrap(),
        )
        .unwrap();
        let (st, ss) = (Spectrum::forward(&t), Spectrum::forward(&s));
        for i in 0..64 {
            assert!((out.channel(2)[i].norm() - ss.channel(2)[i].norm()).abs() < 1e-9);
            if st.channel(2)[i].norm() > 1e-9 {
                assert!((out.channel(2)[i].arg() - st.channel(2)[i].arg()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_target_takes_source_mean() {
        // only the DC term and three neighbours are swapped in, so the output
        // is the source mean plus at most those neighbours' amplitude / N
        let (h, w) = (64, 64);
        let t = ImageF::filled(h, w, Rgb::new(0.2, 0.5, 0.9));
        let s = random_image(h, w, 10);
        let out = adapt(&t, &s, DEFAULT_BETA).unwrap();
        let ss = Spectrum::forward(&s);
        let mask = lowfreq_mask(h, w, DEFAULT_BETA).unwrap();
        let mu = s.mean();
        for c in 0..3 {
            let bound: f64 = (0..h * w)
                .filter(|&i| mask.as_slice()[i] && i != (h / 2) * w + w / 2)
                .map(|i| ss.channel(c)[i].norm() / (h * w) as f64)
                .sum();
            for p in out.as_slice() {
                assert!((p.0[c] - mu.0[c]).abs() <= bound + 1e-9);
            }
            assert!(bound < 0.01);
        }
    }

    #[test]
    fn ensemble_single_draw_is_plain_prediction() {
        let t = random_image(12, 12, 11);
        let sources = vec![random_image(12, 12, 12)];
        let predictor = |img: &ImageF| Ok(img.map(|p| p.luma()));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = ensemble_predict(&t, &sources, predictor, 1, DEFAULT_BETA, &mut rng).unwrap();
        let expected = predictor(&adapt(&t, &sources[0], DEFAULT_BETA).unwrap()).unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn ensemble_averages() {
        let t = random_image(8, 8, 13);
        let sources = vec![random_image(8, 8, 14), random_image(8, 8, 15)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = ensemble_predict(&t, &sources, |_| Ok(SoftMask::filled(8, 8, 0.7)), 5, 0.01, &mut rng).unwrap();
        assert!(out.as_slice().iter().all(|&v| (v - 0.7).abs() < 1e-12));
        let mut calls = 0;
        let out = ensemble_predict(
            &t,
            &sources,
            |_| {
                calls += 1;
                Ok(SoftMask::filled(8, 8, if calls == 1 { 0.2 } else { 0.6 }))
            },
            2,
            0.01,
            &mut rng,
        )
        .unwrap();
        assert!(out.as_slice().iter().all(|&v| (v - 0.4).abs() < 1e-12));
    }

    #[test]
    fn ensemble_errors() {
        let t = random_image(8, 8, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ok = |_: &ImageF| Ok(SoftMask::new(8, 8));
        assert!(ensemble_predict(&t, &[], ok, 1, 0.01, &mut rng).is_err());
        assert!(ensemble_predict(&t, std::slice::from_ref(&t), ok, 0, 0.01, &mut rng).is_err());
        let bad = |_: &ImageF| Ok(SoftMask::new(4, 4));
        assert!(matches!(
            ensemble_predict(&t, std::slice::from_ref(&t), bad, 1, 0.01, &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ensemble_deterministic() {
        let t = random_image(8, 8, 17);
        let sources: Vec<ImageF> = (0..4).map(|i| random_image(8, 8, 20 + i)).collect();
        let pred = |img: &ImageF| Ok(img.map(|p| p.0[0]));
        let a = ensemble_predict(&t, &sources, pred, 3, 0.1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = ensemble_predict(&t, &sources, pred, 3, 0.1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }
}
