//! Full-covariance RGB Gaussian mixtures for the GrabCut color models.

use crate::error::{Error, Result};
use crate::imgcore::{BinaryMask, ImageF};

/// Added to every covariance diagonal.
pub const COVARIANCE_REGULARIZER: f64 = 1e-6;
pub const EM_ROUNDS: usize = 3;
const KMEANS_ROUNDS: usize = 10;

type Vec3 = [f64; 3];
type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Debug)]
pub struct Gaussian {
    pub mean: Vec3,
    pub covariance: Mat3,
    inverse: Mat3,
    /// `-0.5 * ln det(2 pi cov)`
    log_norm: f64,
}

impl Gaussian {
    fn new(mean: Vec3, mut covariance: Mat3) -> Self {
        for (d, row) in covariance.iter_mut().enumerate() {
            row[d] += COVARIANCE_REGULARIZER;
        }
        let det = det3(&covariance);
        let inverse = inv3(&covariance, det);
        let log_norm = -0.5 * (det.ln() + 3.0 * (2.0 * std::f64::consts::PI).ln());
        Gaussian {
            mean,
            covariance,
            inverse,
            log_norm,
        }
    }

    pub fn log_density(&self, z: Vec3) -> f64 {
        let d = [z[0] - self.mean[0], z[1] - self.mean[1], z[2] - self.mean[2]];
        let mut q = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                q += d[r] * self.inverse[r][c] * d[c];
            }
        }
        self.log_norm - 0.5 * q
    }
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inv3(m: &Mat3, det: f64) -> Mat3 {
    let inv_det = 1.0 / det;
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            *v = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) * inv_det;
        }
    }
    out
}

/// A mixture of RGB Gaussians. Components with zero weight are dropped.
#[derive(Clone, Debug)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub components: Vec<Gaussian>,
}

/// Weighted sufficient statistics of one component.
#[derive(Clone, Copy, Default)]
struct Stats {
    weight: f64,
    sum: Vec3,
    prod: Mat3,
}

impl Stats {
    fn add(&mut self, z: Vec3, r: f64) {
        self.weight += r;
        for a in 0..3 {
            self.sum[a] += r * z[a];
            for b in 0..3 {
                self.prod[a][b] += r * z[a] * z[b];
            }
        }
    }

    fn gaussian(&self) -> Gaussian {
        let mean = self.sum.map(|s| s / self.weight);
        let mut cov = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                cov[a][b] = self.prod[a][b] / self.weight - mean[a] * mean[b];
            }
        }
        Gaussian::new(mean, cov)
    }
}

impl Gmm {
    fn from_stats(stats: &[Stats]) -> Gmm {
        let total: f64 = stats.iter().map(|s| s.weight).sum();
        let kept: Vec<&Stats> = stats.iter().filter(|s| s.weight > 0.0).collect();
        let mut weights: Vec<f64> = kept.iter().map(|s| s.weight / total).collect();
        let norm: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= norm);
        Gmm {
            weights,
            components: kept.iter().map(|s| s.gaussian()).collect(),
        }
    }

    pub fn log_likelihood(&self, z: Vec3) -> f64 {
        let mut terms = [f64::NEG_INFINITY; 16];
        let mut best = f64::NEG_INFINITY;
        for (k, (w, g)) in self.weights.iter().zip(&self.components).enumerate() {
            terms[k] = w.ln() + g.log_density(z);
            best = best.max(terms[k]);
        }
        if best == f64::NEG_INFINITY {
            return best;
        }
        best + terms[..self.weights.len()]
            .iter()
            .map(|t| (t - best).exp())
            .sum::<f64>()
            .ln()
    }

    pub fn total_log_likelihood(&self, samples: &[Vec3]) -> f64 {
        samples.iter().map(|&z| self.log_likelihood(z)).sum()
    }

    /// Hard k-means initialization followed by `EM_ROUNDS` of EM.
    pub fn fit(samples: &[Vec3], components: usize) -> Result<GmmFit> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "cannot fit a mixture to an empty class"));
        }
        if components == 0 || components > 16 {
            return Err(Error::invalid("components", format!("{components} outside 1..=16")));
        }
        let init = kmeans(samples, components);
        Ok(init.refine(samples, EM_ROUNDS))
    }

    /// Runs `rounds` EM iterations starting from `self`. The returned trace
    /// holds the data log-likelihood before the first round and after each one.
    pub fn refine(&self, samples: &[Vec3], rounds: usize) -> GmmFit {
        let mut model = self.clone();
        let mut trace = vec![model.total_log_likelihood(samples)];
        let mut resp = vec![0.0; model.weights.len()];
        for _ in 0..rounds {
            let mut stats = vec![Stats::default(); model.weights.len()];
            resp.resize(model.weights.len(), 0.0);
            for &z in samples {
                let mut best = f64::NEG_INFINITY;
                for (k, (w, g)) in model.weights.iter().zip(&model.components).enumerate() {
                    resp[k] = w.ln() + g.log_density(z);
                    best = best.max(resp[k]);
                }
                let mut norm = 0.0;
                for r in resp.iter_mut() {
                    *r = (*r - best).exp();
                    norm += *r;
                }
                for (k, s) in stats.iter_mut().enumerate() {
                    s.add(z, resp[k] / norm);
                }
            }
            model = Gmm::from_stats(&stats);
            trace.push(model.total_log_likelihood(samples));
        }
        GmmFit {
            model,
            log_likelihoods: trace,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmmFit {
    pub model: Gmm,
    pub log_likelihoods: Vec<f64>,
}

/// Deterministic k-means: centers start at the means of equal luminance slices.
fn kmeans(samples: &[Vec3], k: usize) -> Gmm {
    let luma = |z: &Vec3| 0.299 * z[0] + 0.587 * z[1] + 0.114 * z[2];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| luma(&samples[a]).total_cmp(&luma(&samples[b])));
    let k = k.min(samples.len());
    let mut centers: Vec<Vec3> = (0..k)
        .map(|c| {
            let lo = c * samples.len() / k;
            let hi = (c + 1) * samples.len() / k;
            let mut m = [0.0; 3];
            for &i in &order[lo..hi] {
                for d in 0..3 {
                    m[d] += samples[i][d];
                }
            }
            m.map(|v| v / (hi - lo) as f64)
        })
        .collect();

    let mut assignment = vec![0usize; samples.len()];
    for _ in 0..KMEANS_ROUNDS {
        let mut changed = false;
        for (i, z) in samples.iter().enumerate() {
            let nearest = (0..centers.len())
                .min_by(|&a, &b| dist2(z, &centers[a]).total_cmp(&dist2(z, &centers[b])))
                .unwrap_or(0);
            if assignment[i] != nearest {
                assignment[i] = nearest;
                changed = true;
            }
        }
        let mut sums = vec![([0.0; 3], 0usize); centers.len()];
        for (z, &a) in samples.iter().zip(&assignment) {
            for (s, v) in sums[a].0.iter_mut().zip(z) {
                *s += v;
            }
            sums[a].1 += 1;
        }
        for (c, (s, n)) in centers.iter_mut().zip(&sums) {
            if *n > 0 {
                *c = s.map(|v| v / *n as f64);
            }
        }
        if !changed {
            break;
        }
    }

    let mut stats = vec![Stats::default(); centers.len()];
    for (z, &a) in samples.iter().zip(&assignment) {
        stats[a].add(*z, 1.0);
    }
    Gmm::from_stats(&stats)
}

fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    (0..3).map(|d| (a[d] - b[d]).powi(2)).sum()
}

/// Foreground and background color models.
#[derive(Clone, Debug)]
pub struct GmmModel {
    pub foreground: Gmm,
    pub background: Gmm,
}

pub(crate) fn class_samples(img: &ImageF, assignment: &BinaryMask, foreground: bool) -> Vec<Vec3> {
    img.as_slice()
        .iter()
        .zip(assignment.as_slice())
        .filter(|(_, &a)| a == foreground)
        .map(|(p, _)| p.0)
        .collect()
}

/// Fits one mixture per class of `assignment` (1 = foreground).
pub fn fit_gmm(img: &ImageF, assignment: &BinaryMask, components: usize) -> Result<GmmModel> {
    crate::imgcore::plane::ensure_same_dims(img.dims(), assignment.dims())?;
    let fg = class_samples(img, assignment, true);
    let bg = class_samples(img, assignment, false);
    if fg.is_empty() || bg.is_empty() {
        return Err(Error::invalid("assignment", "both classes need at least one pixel"));
    }
    Ok(GmmModel {
        foreground: Gmm::fit(&fg, components)?.model,
        background: Gmm::fit(&bg, components)?.model,
    })
}
