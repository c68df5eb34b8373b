//! Augmentation probabilities and magnitude ranges.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` with `lo < hi`, written as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    pub fn lo(&self) -> f64 {
        self.0
    }

    pub fn hi(&self) -> f64 {
        self.1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random_range(self.0..=self.1)
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.0.is_finite() && self.1.is_finite() && self.0 < self.1) {
            return Err(Error::invalid(
                name,
                format!("range [{}, {}] is empty or degenerate", self.0, self.1),
            ));
        }
        Ok(())
    }

    fn validate_within(&self, name: &'static str, lo: f64, hi: f64) -> Result<()> {
        self.validate(name)?;
        if self.0 < lo || self.1 > hi {
            return Err(Error::invalid(
                name,
                format!("range [{}, {}] must lie in [{lo}, {hi}]", self.0, self.1),
            ));
        }
        Ok(())
    }
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(name, format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Bernoulli draw; consumes one value even when `p` is 0 or 1 so streams stay aligned.
pub(crate) fn chance<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForegroundParams {
    pub p_zoom: f64,
    pub zoom: Range,
    pub p_rotate: f64,
    pub rotation_deg: Range,
    pub p_shift: f64,
    /// Shift as a fraction of the image size, per axis.
    pub shift: Range,
    pub p_flip_horizontal: f64,
    pub p_flip_vertical: f64,
    pub p_brightness: f64,
    pub brightness: Range,
    pub p_droplets: f64,
    pub droplet_count: Range,
    pub p_debris: f64,
    pub debris_count: Range,
    /// Geometric draws tried before falling back to the identity.
    pub max_attempts: usize,
}

impl Default for ForegroundParams {
    fn default() -> Self {
        ForegroundParams {
            p_zoom: 0.5,
            zoom: Range(0.5, 1.5),
            p_rotate: 0.5,
            rotation_deg: Range(-180.0, 180.0),
            p_shift: 0.5,
            shift: Range(-0.25, 0.25),
            p_flip_horizontal: 0.5,
            p_flip_vertical: 0.5,
            p_brightness: 0.5,
            brightness: Range(0.7, 1.3),
            p_droplets: 0.2,
            droplet_count: Range(1.0, 6.0),
            p_debris: 0.2,
            debris_count: Range(1.0, 10.0),
            max_attempts: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundParams {
    pub p_flip_horizontal: f64,
    pub p_flip_vertical: f64,
    pub p_rotate90: f64,
    pub p_brightness: f64,
    pub brightness: Range,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        BackgroundParams {
            p_flip_horizontal: 0.5,
            p_flip_vertical: 0.5,
            p_rotate90: 0.5,
            p_brightness: 0.5,
            brightness: Range(0.7, 1.3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistractorParams {
    pub probability: f64,
    /// Poisson mean of the distractor count.
    pub mean_count: f64,
    pub max_count: usize,
    pub zoom: Range,
    pub shift: Range,
}

impl Default for DistractorParams {
    fn default() -> Self {
        DistractorParams {
            probability: 0.5,
            mean_count: 1.0,
            max_count: 3,
            zoom: Range(0.3, 0.8),
            shift: Range(-0.4, 0.4),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaddingParams {
    pub probability: f64,
    /// Circle radius as a fraction of the half-diagonal.
    pub radius_fraction: Range,
    /// Rectangular frame thickness per side as a fraction of that dimension.
    pub border_fraction: Range,
    pub noise_sigma: Range,
}

impl Default for PaddingParams {
    fn default() -> Self {
        PaddingParams {
            probability: 0.3,
            radius_fraction: Range(0.7, 0.95),
            border_fraction: Range(0.02, 0.12),
            noise_sigma: Range(0.0, 0.03),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionParams {
    pub p_cutout: f64,
    pub cutout_count: Range,
    /// Cutout side as a fraction of the image side.
    pub cutout_size: Range,
    pub p_smoke: f64,
    pub smoke_intensity: Range,
    pub p_shadow: f64,
    pub shadow_strength: Range,
    pub p_jpeg: f64,
    pub jpeg_quality: Range,
    pub p_rgb_shift: f64,
    pub rgb_shift: f64,
    pub p_hsv_shift: f64,
    pub hue_shift: f64,
    pub sat_shift: f64,
    pub val_shift: f64,
    pub p_brightness: f64,
    pub brightness: Range,
    pub p_multiplicative_noise: f64,
    pub multiplicative_noise: Range,
    pub p_gaussian_noise: f64,
    pub gaussian_sigma: Range,
    pub p_iso_noise: f64,
    pub iso_intensity: Range,
    pub iso_color_shift: Range,
    pub p_gaussian_blur: f64,
    pub p_motion_blur: f64,
    pub p_median_blur: f64,
    pub blur_kernels: Vec<usize>,
}

impl Default for CorruptionParams {
    fn default() -> Self {
        CorruptionParams {
            p_cutout: 0.2,
            cutout_count: Range(1.0, 4.0),
            cutout_size: Range(0.05, 0.2),
            p_smoke: 0.2,
            smoke_intensity: Range(0.2, 0.6),
            p_shadow: 0.2,
            shadow_strength: Range(0.3, 0.7),
            p_jpeg: 0.2,
            jpeg_quality: Range(30.0, 90.0),
            p_rgb_shift: 0.2,
            rgb_shift: 0.08,
            p_hsv_shift: 0.2,
            hue_shift: 0.05,
            sat_shift: 0.1,
            val_shift: 0.1,
            p_brightness: 0.2,
            brightness: Range(0.7, 1.3),
            p_multiplicative_noise: 0.1,
            multiplicative_noise: Range(0.9, 1.1),
            p_gaussian_noise: 0.2,
            gaussian_sigma: Range(0.01, 0.05),
            p_iso_noise: 0.1,
            iso_intensity: Range(0.1, 0.5),
            iso_color_shift: Range(0.01, 0.05),
            p_gaussian_blur: 0.1,
            p_motion_blur: 0.1,
            p_median_blur: 0.1,
            blur_kernels: vec![3, 5, 7],
        }
    }
}

/// Every augmentation stage's settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentParams {
    pub foreground: ForegroundParams,
    pub background: BackgroundParams,
    pub distractors: DistractorParams,
    pub padding: PaddingParams,
    pub corruption: CorruptionParams,
}

impl AugmentParams {
    /// Default ranges with every probability set to zero.
    pub fn disabled() -> Self {
        let mut p = AugmentParams::default();
        let f = &mut p.foreground;
        for v in [
            &mut f.p_zoom,
            &mut f.p_rotate,
            &mut f.p_shift,
            &mut f.p_flip_horizontal,
            &mut f.p_flip_vertical,
            &mut f.p_brightness,
            &mut f.p_droplets,
            &mut f.p_debris,
        ] {
            *v = 0.0;
        }
        let b = &mut p.background;
        for v in [
            &mut b.p_flip_horizontal,
            &mut b.p_flip_vertical,
            &mut b.p_rotate90,
            &mut b.p_brightness,
        ] {
            *v = 0.0;
        }
        p.distractors.probability = 0.0;
        p.padding.probability = 0.0;
        for v in p.corruption.probabilities_mut() {
            *v = 0.0;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.foreground;
        for (name, v) in [
            ("foreground.p_zoom", f.p_zoom),
            ("foreground.p_rotate", f.p_rotate),
            ("foreground.p_shift", f.p_shift),
            ("foreground.p_flip_horizontal", f.p_flip_horizontal),
            ("foreground.p_flip_vertical", f.p_flip_vertical),
            ("foreground.p_brightness", f.p_brightness),
            ("foreground.p_droplets", f.p_droplets),
            ("foreground.p_debris", f.p_debris),
            ("background.p_flip_horizontal", self.background.p_flip_horizontal),
            ("background.p_flip_vertical", self.background.p_flip_vertical),
            ("background.p_rotate90", self.background.p_rotate90),
            ("background.p_brightness", self.background.p_brightness),
            ("distractors.probability", self.distractors.probability),
            ("padding.probability", self.padding.probability),
        ] {
            check_probability(name, v)?;
        }
        f.zoom.validate("foreground.zoom")?;
        if f.zoom.lo() <= 0.0 {
            return Err(Error::invalid("foreground.zoom", "zoom must be positive"));
        }
        f.rotation_deg.validate("foreground.rotation_deg")?;
        f.shift.validate("foreground.shift")?;
        f.brightness.validate_within("foreground.brightness", 0.0, f64::MAX)?;
        f.droplet_count
            .validate_within("foreground.droplet_count", 0.0, f64::MAX)?;
        f.debris_count
            .validate_within("foreground.debris_count", 0.0, f64::MAX)?;
        if f.max_attempts == 0 {
            return Err(Error::invalid("foreground.max_attempts", "must be at least 1"));
        }
        self.background
            .brightness
            .validate_within("background.brightness", 0.0, f64::MAX)?;

        let d = &self.distractors;
        if !(d.mean_count > 0.0 && d.mean_count.is_finite()) {
            return Err(Error::invalid("distractors.mean_count", "must be positive"));
        }
        d.zoom.validate("distractors.zoom")?;
        if d.zoom.lo() <= 0.0 {
            return Err(Error::invalid("distractors.zoom", "zoom must be positive"));
        }
        d.shift.validate("distractors.shift")?;

        let pad = &self.padding;
        pad.radius_fraction
            .validate_within("padding.radius_fraction", 0.0, f64::MAX)?;
        pad.border_fraction
            .validate_within("padding.border_fraction", 0.0, 0.5)?;
        pad.noise_sigma.validate_within("padding.noise_sigma", 0.0, f64::MAX)?;

        self.corruption.validate()
    }
}

impl CorruptionParams {
    pub(crate) fn probabilities_mut(&mut self) -> [&mut f64; 13] {
        [
            &mut self.p_cutout,
            &mut self.p_smoke,
            &mut self.p_shadow,
            &mut self.p_jpeg,
            &mut self.p_rgb_shift,
            &mut self.p_hsv_shift,
            &mut self.p_brightness,
            &mut self.p_multiplicative_noise,
            &mut self.p_gaussian_noise,
            &mut self.p_iso_noise,
            &mut self.p_gaussian_blur,
            &mut self.p_motion_blur,
            &mut self.p_median_blur,
        ]
    }

    fn validate(&self) -> Result<()> {
        let mut copy = self.clone();
        for p in copy.probabilities_mut() {
            check_probability("corruption probability", *p)?;
        }
        self.cutout_count
            .validate_within("corruption.cutout_count", 0.0, f64::MAX)?;
        self.cutout_size.validate_within("corruption.cutout_size", 0.0, 1.0)?;
        self.smoke_intensity
            .validate_within("corruption.smoke_intensity", 0.0, 1.0)?;
        self.shadow_strength
            .validate_within("corruption.shadow_strength", 0.0, 1.0)?;
        self.jpeg_quality
            .validate_within("corruption.jpeg_quality", 1.0, 100.0)?;
        self.brightness
            .validate_within("corruption.brightness", 0.0, f64::MAX)?;
        self.multiplicative_noise
            .validate_within("corruption.multiplicative_noise", 0.0, f64::MAX)?;
        self.gaussian_sigma
            .validate_within("corruption.gaussian_sigma", 0.0, f64::MAX)?;
        self.iso_intensity
            .validate_within("corruption.iso_intensity", 0.0, 1.0)?;
        self.iso_color_shift
            .validate_within("corruption.iso_color_shift", 0.0, 1.0)?;
        for (name, v) in [
            ("corruption.rgb_shift", self.rgb_shift),
            ("corruption.hue_shift", self.hue_shift),
            ("corruption.sat_shift", self.sat_shift),
            ("corruption.val_shift", self.val_shift),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, format!("magnitude {v} outside [0, 1]")));
            }
        }
        if self.blur_kernels.is_empty() || self.blur_kernels.iter().any(|&k| k % 2 == 0) {
            return Err(Error::invalid(
                "corruption.blur_kernels",
                "need a nonempty list of odd sizes",
            ));
        }
        Ok(())
    }
}
