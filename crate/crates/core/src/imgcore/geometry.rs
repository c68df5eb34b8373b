//! Geometric transforms applied identically to an image and its mask.

use serde::{Deserialize, Serialize};

use super::plane::{BinaryMask, Linear, Plane};

/// Zoom, rotation and shift about the image center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub zoom: f64,
    pub rotation_deg: f64,
    /// Shift as a fraction of width.
    pub shift_x: f64,
    /// Shift as a fraction of height.
    pub shift_y: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        zoom: 1.0,
        rotation_deg: 0.0,
        shift_x: 0.0,
        shift_y: 0.0,
    };

    /// Source coordinate sampled by destination pixel center `(y, x)`.
    fn source_of(&self, y: usize, x: usize, h: usize, w: usize) -> (f64, f64) {
        let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
        let dy = y as f64 + 0.5 - cy - self.shift_y * h as f64;
        let dx = x as f64 + 0.5 - cx - self.shift_x * w as f64;
        let (sin, cos) = self.rotation_deg.to_radians().sin_cos();
        // inverse rotation, then inverse zoom
        let sx = (cos * dx + sin * dy) / self.zoom;
        let sy = (-sin * dx + cos * dy) / self.zoom;
        (sy + cy - 0.5, sx + cx - 0.5)
    }

    /// Bilinear warp; samples falling outside the source read `T::default()`.
    pub fn warp<T: Linear>(&self, src: &Plane<T>) -> Plane<T> {
        let (h, w) = src.dims();
        let fetch = |y: isize, x: isize| -> T {
            if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
                T::default()
            } else {
                src.get(y as usize, x as usize)
            }
        };
        Plane::from_fn(h, w, |y, x| {
            let (sy, sx) = self.source_of(y, x, h, w);
            if sy <= -1.0 || sx <= -1.0 || sy >= h as f64 || sx >= w as f64 {
                return T::default();
            }
            let y0 = sy.floor();
            let x0 = sx.floor();
            let fy = sy - y0;
            let fx = sx - x0;
            let (y0, x0) = (y0 as isize, x0 as isize);
            let top = fetch(y0, x0) * (1.0 - fx) + fetch(y0, x0 + 1) * fx;
            let bottom = fetch(y0 + 1, x0) * (1.0 - fx) + fetch(y0 + 1, x0 + 1) * fx;
            top * (1.0 - fy) + bottom * fy
        })
    }
}

/// A composed transform: optional affine warp, then exact flips, then quarter turns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeometricTransform {
    pub affine: Option<Affine>,
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
    /// Counter-clockwise quarter turns.
    pub quarter_turns: u8,
}

impl GeometricTransform {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.affine.is_none() && !self.flip_horizontal && !self.flip_vertical && self.quarter_turns.is_multiple_of(4)
    }

    fn exact<T: Copy>(&self, mut p: Plane<T>) -> Plane<T> {
        if self.flip_horizontal {
            p = p.flip_horizontal();
        }
        if self.flip_vertical {
            p = p.flip_vertical();
        }
        if !self.quarter_turns.is_multiple_of(4) {
            p = p.rotate90(self.quarter_turns);
        }
        p
    }

    pub fn apply<T: Linear>(&self, src: &Plane<T>) -> Plane<T> {
        let warped = match &self.affine {
            Some(a) => a.warp(src),
            None => src.clone(),
        };
        self.exact(warped)
    }

    /// Masks are warped as soft maps and re-thresholded at 0.5; flips and
    /// quarter turns are exact.
    pub fn apply_mask(&self, mask: &BinaryMask) -> BinaryMask {
        let warped = match &self.affine {
            Some(a) => a.warp(&mask.to_soft()).map(|v| v >= 0.5),
            None => mask.clone(),
        };
        self.exact(warped)
    }
}
