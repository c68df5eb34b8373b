//! Foreground extraction from chroma-key (green screen) recordings.
//!
//! A frame is converted to HSV and the backdrop color range is thresholded.
//! The complement is the tool mask, cleaned by keeping only the largest
//! `n_instruments` connected components and optionally refined by GrabCut
//! inside a narrow band around the mask boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grabcut::{self, Trimap, TrimapState};
use crate::imgcore::{
    color::rgb_to_hsv_pixel, connected_components, dilate, erode_with_border, BinaryMask, Border, ImageF, Plane,
};

/// Half-width in pixels of the unknown band handed to GrabCut.
pub const REFINE_BAND: usize = 5;

/// Refined masks differing from the threshold mask by more than this fraction
/// of its foreground pixels are flagged for manual review.
pub const QC_CHANGE_FRACTION: f64 = 0.2;

/// An extracted foreground: tool image, its mask and the instrument count.
#[derive(Clone, Debug)]
pub struct ForegroundSample {
    pub image: ImageF,
    pub mask: BinaryMask,
    pub instrument_count: usize,
    pub source_id: String,
}

impl ForegroundSample {
    pub fn new(image: ImageF, mask: BinaryMask, instrument_count: usize, source_id: impl Into<String>) -> Result<Self> {
        crate::imgcore::plane::ensure_same_dims(image.dims(), mask.dims())?;
        if instrument_count == 0 {
            return Err(Error::invalid("instrument_count", "must be at least 1"));
        }
        Ok(ForegroundSample {
            image,
            mask,
            instrument_count,
            source_id: source_id.into(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }
}

/// Backdrop color range in HSV, all bounds in [0,1].
///
/// When `hue_lo > hue_hi` the hue interval wraps around 1.0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsvRange {
    pub hue_lo: f64,
    pub hue_hi: f64,
    pub sat_lo: f64,
    pub val_lo: f64,
}

impl HsvRange {
    /// A generous range around pure green (120 degrees).
    pub const GREEN: HsvRange = HsvRange {
        hue_lo: 70.0 / 360.0,
        hue_hi: 170.0 / 360.0,
        sat_lo: 0.3,
        val_lo: 0.15,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hue_lo", self.hue_lo),
            ("hue_hi", self.hue_hi),
            ("sat_lo", self.sat_lo),
            ("val_lo", self.val_lo),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, format!("{v} outside [0,1]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, hsv: [f64; 3]) -> bool {
        let [h, s, v] = hsv;
        let hue_ok = if self.hue_lo <= self.hue_hi {
            h >= self.hue_lo && h <= self.hue_hi
        } else {
            h >= self.hue_lo || h <= self.hue_hi
        };
        hue_ok && s >= self.sat_lo && v >= self.val_lo
    }
}

/// 1 where the pixel matches the backdrop range.
pub fn hsv_threshold(img: &ImageF, range: &HsvRange) -> BinaryMask {
    img.map(|p| range.contains(rgb_to_hsv_pixel(p).0))
}

/// Keeps only the `n` largest 8-connected components.
pub fn keep_largest(mask: &BinaryMask, n: usize) -> BinaryMask {
    connected_components(mask).largest(n)
}

/// Extraction result with the data needed for quality control.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub sample: ForegroundSample,
    /// Tool mask before refinement.
    pub threshold_mask: BinaryMask,
    /// Whether GrabCut actually ran (it is skipped when seeding fails).
    pub refined: bool,
    /// Pixels changed by refinement relative to the threshold mask's foreground count.
    pub changed_fraction: f64,
    pub qc_flagged: bool,
}

/// Trimap whose unknown region is the band of `band` pixels on both sides of
/// the mask boundary. Shapes cut by the frame edge are not banded there.
pub fn band_trimap(mask: &BinaryMask, band: usize) -> Result<Trimap> {
    let k = 2 * band + 1;
    let inner = erode_with_border(mask, k, Border::Replicate)?;
    let outer = dilate(mask, k)?;
    let (h, w) = mask.dims();
    let states = Plane::from_fn(h, w, |y, x| {
        if inner.get(y, x) {
            TrimapState::SureForeground
        } else if !outer.get(y, x) {
            TrimapState::SureBackground
        } else {
            TrimapState::Unknown
        }
    });
    Trimap::with_prior(states, mask.clone())
}

pub fn extract_foreground(
    img: &ImageF,
    range: &HsvRange,
    n_instruments: usize,
    refine: bool,
    source_id: &str,
) -> Result<Extraction> {
    range.validate()?;
    if n_instruments == 0 {
        return Err(Error::invalid("n_instruments", "must be at least 1"));
    }
    let tool = hsv_threshold(img, range).not();
    let threshold_mask = keep_largest(&tool, n_instruments);
    if !threshold_mask.any() {
        return Err(Error::ExtractionFailed(format!(
            "{source_id}: no foreground pixels outside the chroma range"
        )));
    }

    let mut mask = threshold_mask.clone();
    let mut refined = false;
    if refine {
        let trimap = band_trimap(&threshold_mask, REFINE_BAND)?;
        match grabcut::grabcut(img, &trimap, grabcut::DEFAULT_ITERATIONS) {
            Ok(cut) => {
                let cut = keep_largest(&cut, n_instruments);
                if cut.any() {
                    mask = cut;
                    refined = true;
                }
            }
            Err(Error::SeedingFailed(reason)) => {
                log::debug!("{source_id}: refinement skipped ({reason})");
            }
            Err(e) => return Err(e),
        }
    }

    let changed = mask
        .as_slice()
        .iter()
        .zip(threshold_mask.as_slice())
        .filter(|(a, b)| a != b)
        .count();
    let changed_fraction = changed as f64 / threshold_mask.count_ones() as f64;
    Ok(Extraction {
        sample: ForegroundSample::new(img.clone(), mask, n_instruments, source_id)?,
        threshold_mask,
        refined,
        changed_fraction,
        qc_flagged: changed_fraction > QC_CHANGE_FRACTION,
    })
}
