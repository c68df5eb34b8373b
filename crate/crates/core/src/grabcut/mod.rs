//! GrabCut: alternating color-model fitting and graph min-cut.
//!
//! Used both to refine chroma-key masks and to post-process network
//! probability maps. Sure pixels of the trimap are tied to their terminal
//! with an effectively infinite capacity and are never relabeled.

pub mod gmm;
pub mod maxflow;

use crate::error::{Error, Result};
use crate::eval::binarize;
use crate::imgcore::{plane::ensure_same_dims, BinaryMask, ImageF, Plane, SoftMask};

pub use gmm::{fit_gmm, Gmm, GmmModel};
pub use maxflow::FlowGraph;

pub const DEFAULT_COMPONENTS: usize = 5;
pub const DEFAULT_GAMMA: f64 = 50.0;
pub const DEFAULT_ITERATIONS: usize = 5;
pub const DEFAULT_LO: f64 = 0.2;
pub const DEFAULT_HI: f64 = 0.8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TrimapState {
    SureBackground,
    SureForeground,
    #[default]
    Unknown,
}

/// Per-pixel seed states plus the initial labeling of the unknown pixels.
#[derive(Clone, Debug)]
pub struct Trimap {
    states: Plane<TrimapState>,
    prior: BinaryMask,
}

impl Trimap {
    /// Unknown pixels start as foreground.
    pub fn new(states: Plane<TrimapState>) -> Result<Self> {
        let (h, w) = states.dims();
        Self::with_prior(states, BinaryMask::filled(h, w, true))
    }

    pub fn with_prior(states: Plane<TrimapState>, prior: BinaryMask) -> Result<Self> {
        ensure_same_dims(states.dims(), prior.dims())?;
        Ok(Trimap { states, prior })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.states.dims()
    }

    pub fn state(&self, y: usize, x: usize) -> TrimapState {
        self.states.get(y, x)
    }

    pub fn states(&self) -> &Plane<TrimapState> {
        &self.states
    }

    pub fn count(&self, state: TrimapState) -> usize {
        self.states.as_slice().iter().filter(|&&s| s == state).count()
    }

    /// Both color models need seeds whenever there is anything to decide.
    pub fn check_seeds(&self) -> Result<()> {
        if self.count(TrimapState::Unknown) == 0 {
            return Ok(());
        }
        let fg = self.count(TrimapState::SureForeground);
        let bg = self.count(TrimapState::SureBackground);
        if fg == 0 || bg == 0 {
            return Err(Error::SeedingFailed(format!(
                "{fg} sure-foreground and {bg} sure-background pixels"
            )));
        }
        Ok(())
    }

    /// Sure labels, with unknown pixels taken from the prior.
    pub fn initial_labels(&self) -> BinaryMask {
        self.states
            .zip_map(&self.prior, |s, p| match s {
                TrimapState::SureForeground => true,
                TrimapState::SureBackground => false,
                TrimapState::Unknown => p,
            })
            .expect("dims checked on construction")
    }

    /// True if `labels` agrees with every sure pixel.
    pub fn preserved_by(&self, labels: &BinaryMask) -> bool {
        self.states
            .as_slice()
            .iter()
            .zip(labels.as_slice())
            .all(|(s, &l)| match s {
                TrimapState::SureForeground => l,
                TrimapState::SureBackground => !l,
                TrimapState::Unknown => true,
            })
    }
}

/// `p < lo` is sure background, `p >= hi` sure foreground, the rest unknown
/// (initialized by `p >= 0.5`).
pub fn trimap_from_probability(prob: &SoftMask, lo: f64, hi: f64) -> Result<Trimap> {
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::invalid(
            "lo/hi",
            format!("need 0 <= lo < hi <= 1, got {lo}, {hi}"),
        ));
    }
    let states = prob.map(|p| {
        if p < lo {
            TrimapState::SureBackground
        } else if p >= hi {
            TrimapState::SureForeground
        } else {
            TrimapState::Unknown
        }
    });
    let trimap = Trimap::with_prior(states, prob.map(|p| p >= 0.5))?;
    trimap.check_seeds()?;
    Ok(trimap)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrabCutParams {
    pub components: usize,
    pub gamma: f64,
    pub iterations: usize,
}

impl Default for GrabCutParams {
    fn default() -> Self {
        GrabCutParams {
            components: DEFAULT_COMPONENTS,
            gamma: DEFAULT_GAMMA,
            iterations: DEFAULT_ITERATIONS,
        }
    }
}

/// Result of a GrabCut run with its per-iteration trace.
#[derive(Clone, Debug)]
pub struct GrabCutOutcome {
    pub mask: BinaryMask,
    /// Labeling after each iteration.
    pub history: Vec<BinaryMask>,
    /// Energy of each iteration's labeling under that iteration's color models.
    pub energies: Vec<f64>,
}

const OFFSETS: [(usize, isize); 4] = [(0, 1), (1, -1), (1, 0), (1, 1)];

/// Contrast-sensitive pairwise weights on the 8-neighborhood, each unordered
/// pair listed once as `(p, q, weight)`.
fn pairwise_terms(img: &ImageF, gamma: f64) -> Vec<(usize, usize, f64)> {
    let (h, w) = img.dims();
    let mut pairs = Vec::with_capacity(4 * h * w);
    let mut sum = 0.0;
    for y in 0..h {
        for x in 0..w {
            for (dy, dx) in OFFSETS {
                let ny = y + dy;
                let nx = x as isize + dx;
                if ny >= h || nx < 0 || nx >= w as isize {
                    continue;
                }
                let nx = nx as usize;
                let d = img.get(y, x) - img.get(ny, nx);
                let d2 = d.0.iter().map(|c| c * c).sum::<f64>();
                sum += d2;
                pairs.push((y * w + x, ny * w + nx, d2));
            }
        }
    }
    let mean = sum / pairs.len().max(1) as f64;
    let beta = if mean > 0.0 { 1.0 / (2.0 * mean) } else { 0.0 };
    for p in &mut pairs {
        p.2 = gamma * (-beta * p.2).exp();
    }
    pairs
}

fn data_terms(img: &ImageF, models: &GmmModel) -> Vec<(f64, f64)> {
    img.as_slice()
        .iter()
        .map(|p| {
            (
                -models.foreground.log_likelihood(p.0),
                -models.background.log_likelihood(p.0),
            )
        })
        .collect()
}

fn energy(labels: &BinaryMask, data: &[(f64, f64)], pairs: &[(usize, usize, f64)]) -> f64 {
    let l = labels.as_slice();
    let unary: f64 = l.iter().zip(data).map(|(&fg, d)| if fg { d.0 } else { d.1 }).sum();
    let pairwise: f64 = pairs.iter().filter(|(p, q, _)| l[*p] != l[*q]).map(|t| t.2).sum();
    unary + pairwise
}

/// GrabCut with the default color-model size and smoothness weight.
pub fn grabcut(img: &ImageF, trimap: &Trimap, iterations: usize) -> Result<BinaryMask> {
    let params = GrabCutParams {
        iterations,
        ..GrabCutParams::default()
    };
    Ok(grabcut_with(img, trimap, &params)?.mask)
}

pub fn grabcut_with(img: &ImageF, trimap: &Trimap, params: &GrabCutParams) -> Result<GrabCutOutcome> {
    ensure_same_dims(img.dims(), trimap.dims())?;
    trimap.check_seeds()?;
    let mut labels = trimap.initial_labels();
    if trimap.count(TrimapState::Unknown) == 0 || params.iterations == 0 {
        return Ok(GrabCutOutcome {
            mask: labels,
            history: Vec::new(),
            energies: Vec::new(),
        });
    }

    let pairs = pairwise_terms(img, params.gamma);
    let mut neighbor_sum = vec![0.0; img.len()];
    for &(p, q, wgt) in &pairs {
        neighbor_sum[p] += wgt;
        neighbor_sum[q] += wgt;
    }
    // no cut through a sure pixel's terminal link can beat cutting all its neighbors
    let hard = 1.0 + neighbor_sum.iter().cloned().fold(0.0, f64::max);

    let states = trimap.states().as_slice();
    let mut models: Option<GmmModel> = None;
    let mut history = Vec::with_capacity(params.iterations);
    let mut energies = Vec::with_capacity(params.iterations);

    for _ in 0..params.iterations {
        let next_models = match &models {
            // warm-started EM never lowers the likelihood of the current labeling
            Some(m) => GmmModel {
                foreground: m
                    .foreground
                    .refine(&gmm::class_samples(img, &labels, true), gmm::EM_ROUNDS)
                    .model,
                background: m
                    .background
                    .refine(&gmm::class_samples(img, &labels, false), gmm::EM_ROUNDS)
                    .model,
            },
            None => fit_gmm(img, &labels, params.components)?,
        };
        let data = data_terms(img, &next_models);

        let mut graph = FlowGraph::with_edge_capacity(img.len(), pairs.len());
        for (i, (&state, &(d_fg, d_bg))) in states.iter().zip(&data).enumerate() {
            match state {
                TrimapState::SureForeground => graph.add_terminal(i, hard, 0.0),
                TrimapState::SureBackground => graph.add_terminal(i, 0.0, hard),
                TrimapState::Unknown => {
                    // source side = foreground; cutting the source link labels background
                    let m = d_fg.min(d_bg);
                    graph.add_terminal(i, d_bg - m, d_fg - m);
                }
            }
        }
        for &(p, q, wgt) in &pairs {
            graph.add_edge(p, q, wgt, wgt);
        }
        graph.max_flow();

        let (h, w) = img.dims();
        labels = Plane::from_fn(h, w, |y, x| {
            let i = y * w + x;
            match states[i] {
                TrimapState::SureForeground => true,
                TrimapState::SureBackground => false,
                TrimapState::Unknown => graph.is_source_side(i),
            }
        });
        debug_assert!(trimap.preserved_by(&labels));
        energies.push(energy(&labels, &data, &pairs));
        history.push(labels.clone());
        models = Some(next_models);
    }

    Ok(GrabCutOutcome {
        mask: labels,
        history,
        energies,
    })
}

/// Post-processes a probability map; falls back to `p >= 0.5` when the map
/// cannot seed both color models.
pub fn refine_probability(img: &ImageF, prob: &SoftMask, lo: f64, hi: f64, iterations: usize) -> Result<BinaryMask> {
    ensure_same_dims(img.dims(), prob.dims())?;
    match trimap_from_probability(prob, lo, hi) {
        Ok(trimap) => grabcut(img, &trimap, iterations),
        Err(Error::SeedingFailed(reason)) => {
            log::warn!("grabcut seeding failed ({reason}); using thresholded probabilities");
            Ok(binarize(prob, 0.5))
        }
        Err(e) => Err(e),
    }
}
