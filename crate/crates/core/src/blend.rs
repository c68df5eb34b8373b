//! Blending basis and the two ways of using it.
//!
//! The basis holds three ways of pasting a masked foreground onto a
//! background: plain copy, Gaussian feathering of the mask, and Laplacian
//! pyramid blending. *Multi-blend* emits one image per basis member;
//! *mix-blend* emits a convex combination of all members with weights drawn
//! from a Dirichlet distribution, fresh for every sample. The label of a
//! composite never depends on how it was blended.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{
    build_gaussian_pyramid, build_laplacian_pyramid, collapse_laplacian, erode_with_border, gaussian_blur,
    plane::ensure_same_dims, BinaryMask, Border, GeometricTransform, ImageF, LaplacianPyramid, Plane, Rgb,
};

pub const FEATHER_ERODE: usize = 3;
pub const FEATHER_BLUR: usize = 5;
pub const DEFAULT_LAPLACIAN_LEVELS: usize = 4;
/// Lower bound applied to every weight so the draw lies in the open simplex.
pub const MIN_WEIGHT: f64 = 1e-9;

/// One member of the blending basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BlendMethod {
    Trivial,
    GaussianFeather,
    Laplacian { levels: usize },
}

impl BlendMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BlendMethod::Trivial => "trivial",
            BlendMethod::GaussianFeather => "gaussian_feather",
            BlendMethod::Laplacian { .. } => "laplacian",
        }
    }

    pub fn apply(&self, fg: &ImageF, mask: &BinaryMask, bg: &ImageF) -> Result<ImageF> {
        match *self {
            BlendMethod::Trivial => blend_trivial(fg, mask, bg),
            BlendMethod::GaussianFeather => blend_feather(fg, mask, bg),
            BlendMethod::Laplacian { levels } => blend_laplacian(fg, mask, bg, levels),
        }
    }
}

/// Ordered list of blending functions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlendBasis {
    pub methods: Vec<BlendMethod>,
}

impl Default for BlendBasis {
    fn default() -> Self {
        BlendBasis {
            methods: vec![
                BlendMethod::Trivial,
                BlendMethod::GaussianFeather,
                BlendMethod::Laplacian {
                    levels: DEFAULT_LAPLACIAN_LEVELS,
                },
            ],
        }
    }
}

impl BlendBasis {
    pub fn len(&self) -> usize {
        self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.methods.is_empty()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.iter().map(BlendMethod::name).collect()
    }
}

fn check_inputs(fg: &ImageF, mask: &BinaryMask, bg: &ImageF) -> Result<()> {
    ensure_same_dims(fg.dims(), mask.dims())?;
    ensure_same_dims(fg.dims(), bg.dims())
}

/// Copy-paste: foreground where the mask is set, background elsewhere.
pub fn blend_trivial(fg: &ImageF, mask: &BinaryMask, bg: &ImageF) -> Result<ImageF> {
    check_inputs(fg, mask, bg)?;
    let (h, w) = fg.dims();
    Ok(Plane::from_fn(h, w, |y, x| {
        if mask.get(y, x) {
            fg.get(y, x)
        } else {
            bg.get(y, x)
        }
    }))
}

/// Soft alpha from the mask: eroded (k=3) then Gaussian-blurred (k=5).
///
/// The erosion replicates the frame edge so objects cut by the border keep
/// full opacity there.
pub fn feather_alpha(mask: &BinaryMask) -> Result<Plane<f64>> {
    let eroded = erode_with_border(mask, FEATHER_ERODE, Border::Replicate)?;
    gaussian_blur(&eroded.to_soft(), FEATHER_BLUR)
}

pub fn blend_feather(fg: &ImageF, mask: &BinaryMask, bg: &ImageF) -> Result<ImageF> {
    check_inputs(fg, mask, bg)?;
    let alpha = feather_alpha(mask)?;
    let (h, w) = fg.dims();
    Ok(Plane::from_fn(h, w, |y, x| {
        bg.get(y, x).lerp(fg.get(y, x), alpha.get(y, x)).clamped()
    }))
}

/// Laplacian bands of both images mixed with the mask's Gaussian pyramid, then collapsed.
pub fn blend_laplacian(fg: &ImageF, mask: &BinaryMask, bg: &ImageF, levels: usize) -> Result<ImageF> {
    check_inputs(fg, mask, bg)?;
    let lap_fg = build_laplacian_pyramid(fg, levels)?;
    let lap_bg = build_laplacian_pyramid(bg, levels)?;
    let weights = build_gaussian_pyramid(&mask.to_soft(), levels)?;
    let mut bands = Vec::with_capacity(levels);
    for k in 0..levels {
        let (lf, lb, g) = (&lap_fg.levels[k], &lap_bg.levels[k], &weights.levels[k]);
        let (h, w) = lf.dims();
        bands.push(Plane::from_fn(h, w, |y, x| {
            lb.get(y, x).lerp(lf.get(y, x), g.get(y, x))
        }));
    }
    let mut out = collapse_laplacian(&LaplacianPyramid { levels: bands })?;
    out.clamp_in_place();
    Ok(out)
}

/// Every basis member applied to the same inputs, in basis order.
pub fn multi_blend(fg: &ImageF, mask: &BinaryMask, bg: &ImageF, basis: &BlendBasis) -> Result<Vec<ImageF>> {
    basis.methods.iter().map(|m| m.apply(fg, mask, bg)).collect()
}

/// A point of the open probability simplex and the Dirichlet parameter it was drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendWeights {
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl BlendWeights {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Weights given directly (not sampled); `alpha` is left empty.
    pub fn fixed(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() || lambda.iter().any(|&l| l.is_nan() || l <= 0.0) {
            return Err(Error::invalid("lambda", "weights must be positive"));
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("lambda", format!("weights sum to {sum}")));
        }
        Ok(BlendWeights {
            lambda,
            alpha: Vec::new(),
        })
    }
}

pub fn validate_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() {
        return Err(Error::invalid("alpha", "empty Dirichlet parameter"));
    }
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::invalid(
            "alpha",
            format!("components must be positive and finite, got {a}"),
        ));
    }
    Ok(())
}

/// Draws `lambda ~ Dir(alpha)` by normalizing independent Gamma(alpha_m, 1) draws.
///
/// The draws are taken in log space (`G_a = G_{a+1} * U^{1/a}`) so that
/// concentrations far below 1 do not underflow to an all-zero vector.
pub fn sample_weights<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<BlendWeights> {
    validate_alpha(alpha)?;
    let mut logs = Vec::with_capacity(alpha.len());
    for &a in alpha {
        let g: f64 = Gamma::new(a + 1.0, 1.0)
            .map_err(|e| Error::invalid("alpha", e.to_string()))?
            .sample(rng);
        let u: f64 = Open01.sample(rng);
        logs.push(g.ln() + u.ln() / a);
    }
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lambda: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|l| *l = (*l / sum).max(MIN_WEIGHT));
    let sum: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|l| *l /= sum);
    Ok(BlendWeights {
        lambda,
        alpha: alpha.to_vec(),
    })
}

/// Weighted sum of precomputed basis outputs, clamped to [0,1].
pub fn mix_outputs(outputs: &[ImageF], weights: &BlendWeights) -> Result<ImageF> {
    if outputs.len() != weights.len() || outputs.is_empty() {
        return Err(Error::invalid(
            "weights",
            format!("{} weights for {} blends", weights.len(), outputs.len()),
        ));
    }
    for o in &outputs[1..] {
        ensure_same_dims(outputs[0].dims(), o.dims())?;
    }
    let (h, w) = outputs[0].dims();
    Ok(Plane::from_fn(h, w, |y, x| {
        outputs
            .iter()
            .zip(&weights.lambda)
            .fold(Rgb::BLACK, |acc, (o, &l)| acc + o.get(y, x) * l)
            .clamped()
    }))
}

/// `sum_m lambda_m * phi_m(fg, mask, bg)`, clamped to [0,1].
pub fn mix_blend(
    fg: &ImageF,
    mask: &BinaryMask,
    bg: &ImageF,
    weights: &BlendWeights,
    basis: &BlendBasis,
) -> Result<ImageF> {
    if weights.len() != basis.len() {
        return Err(Error::invalid(
            "weights",
            format!("{} weights for a basis of {}", weights.len(), basis.len()),
        ));
    }
    mix_outputs(&multi_blend(fg, mask, bg, basis)?, weights)
}

/// How a composite is produced from the basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Compositor {
    /// A single basis member, by index.
    Member { index: usize },
    /// Convex combination of all members.
    Mix { weights: BlendWeights },
}

impl Compositor {
    pub fn composite(&self, fg: &ImageF, mask: &BinaryMask, bg: &ImageF, basis: &BlendBasis) -> Result<ImageF> {
        match self {
            Compositor::Member { index } => basis
                .methods
                .get(*index)
                .ok_or_else(|| Error::invalid("index", format!("no basis member {index}")))?
                .apply(fg, mask, bg),
            Compositor::Mix { weights } => mix_blend(fg, mask, bg, weights, basis),
        }
    }
}

/// Label of a composite: the foreground mask under the same geometric
/// transform as the foreground image, whatever the blending.
pub fn label_of(fg_mask: &BinaryMask, transform: &GeometricTransform) -> BinaryMask {
    transform.apply_mask(fg_mask)
}
