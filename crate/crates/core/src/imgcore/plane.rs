//! Row-major pixel containers shared by every module.
//!
//! `ImageF`, `SoftMask` and `BinaryMask` are all `Plane<T>` instantiations, so
//! geometric operations (flip, rotate, crop) are written once.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// An RGB triple with channels nominally in [0,1].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Rgb(pub [f64; 3]);

impl Rgb {
    pub const BLACK: Rgb = Rgb([0.0; 3]);

    #[inline]
    pub fn new(r: f64, g: f64, b: f64) -> Self {
        Rgb([r, g, b])
    }

    pub fn gray(v: f64) -> Self {
        Rgb([v; 3])
    }

    pub fn clamped(self) -> Self {
        Rgb(self.0.map(|c| c.clamp(0.0, 1.0)))
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Rgb(self.0.map(f))
    }

    pub fn max_abs_diff(self, other: Rgb) -> f64 {
        (0..3).map(|c| (self.0[c] - other.0[c]).abs()).fold(0.0, f64::max)
    }

    /// `self + t * (other - self)`; returns `self` bit-exactly when the two are equal.
    #[inline]
    pub fn lerp(self, other: Rgb, t: f64) -> Rgb {
        Rgb(std::array::from_fn(|c| self.0[c] + t * (other.0[c] - self.0[c])))
    }

    pub fn luma(self) -> f64 {
        0.299 * self.0[0] + 0.587 * self.0[1] + 0.114 * self.0[2]
    }
}

impl Add for Rgb {
    type Output = Rgb;
    #[inline]
    fn add(self, rhs: Rgb) -> Rgb {
        Rgb(std::array::from_fn(|c| self.0[c] + rhs.0[c]))
    }
}

impl Sub for Rgb {
    type Output = Rgb;
    #[inline]
    fn sub(self, rhs: Rgb) -> Rgb {
        Rgb(std::array::from_fn(|c| self.0[c] - rhs.0[c]))
    }
}

impl Mul<f64> for Rgb {
    type Output = Rgb;
    #[inline]
    fn mul(self, rhs: f64) -> Rgb {
        Rgb(self.0.map(|c| c * rhs))
    }
}

/// Pixel types that support the linear filtering used by blurs and pyramids.
pub trait Linear: Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}

impl Linear for f64 {}
impl Linear for Rgb {}

/// A `height x width` grid stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

/// H×W×3 floating-point image.
pub type ImageF = Plane<Rgb>;
/// Single-channel map with values in [0,1].
pub type SoftMask = Plane<f64>;
/// Single-channel map restricted to {0,1}.
pub type BinaryMask = Plane<bool>;

impl<T: Copy> Plane<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Plane {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("dims", format!("degenerate {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::invalid(
                "data",
                format!("{} values for {height}x{width}", data.len()),
            ));
        }
        Ok(Plane { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Plane { height, width, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// `(height, width)`.
    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Reads with coordinates clamped to the grid (edge replication).
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize) -> T {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.get(y, x)
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Plane<U> {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<U: Copy, V: Copy>(&self, other: &Plane<U>, f: impl Fn(T, U) -> V) -> Result<Plane<V>> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn flip_horizontal(&self) -> Self {
        Plane::from_fn(self.height, self.width, |y, x| self.get(y, self.width - 1 - x))
    }

    pub fn flip_vertical(&self) -> Self {
        Plane::from_fn(self.height, self.width, |y, x| self.get(self.height - 1 - y, x))
    }

    /// Rotates by `quarter_turns * 90` degrees counter-clockwise.
    pub fn rotate90(&self, quarter_turns: u8) -> Self {
        let (h, w) = self.dims();
        match quarter_turns % 4 {
            0 => self.clone(),
            1 => Plane::from_fn(w, h, |y, x| self.get(x, w - 1 - y)),
            2 => Plane::from_fn(h, w, |y, x| self.get(h - 1 - y, w - 1 - x)),
            _ => Plane::from_fn(w, h, |y, x| self.get(h - 1 - x, y)),
        }
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(Error::invalid(
                "crop",
                format!(
                    "window {height}x{width} at ({top},{left}) outside {}x{}",
                    self.height, self.width
                ),
            ));
        }
        Ok(Plane::from_fn(height, width, |y, x| self.get(top + y, left + x)))
    }
}

impl<T: Copy + Default> Plane<T> {
    pub fn new(height: usize, width: usize) -> Self {
        Plane::filled(height, width, T::default())
    }
}

impl ImageF {
    pub fn clamp_in_place(&mut self) {
        for p in &mut self.data {
            *p = p.clamped();
        }
    }

    pub fn max_abs_diff(&self, other: &ImageF) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.max_abs_diff(*b))
            .fold(0.0, f64::max)
    }

    pub fn mean(&self) -> Rgb {
        let n = self.data.len() as f64;
        self.data.iter().fold(Rgb::BLACK, |acc, &p| acc + p) * (1.0 / n)
    }

    /// Extracts one color channel as a single-channel plane.
    pub fn channel(&self, c: usize) -> Plane<f64> {
        self.map(|p| p.0[c])
    }

    pub fn from_channels(channels: [&Plane<f64>; 3]) -> Result<ImageF> {
        ensure_same_dims(channels[0].dims(), channels[1].dims())?;
        ensure_same_dims(channels[0].dims(), channels[2].dims())?;
        let (h, w) = channels[0].dims();
        Ok(Plane::from_fn(h, w, |y, x| {
            Rgb([channels[0].get(y, x), channels[1].get(y, x), channels[2].get(y, x)])
        }))
    }
}

impl SoftMask {
    pub fn clamp_in_place(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    pub fn max_abs_diff(&self, other: &SoftMask) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl BinaryMask {
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&v| v)
    }

    pub fn to_soft(&self) -> SoftMask {
        self.map(|v| if v { 1.0 } else { 0.0 })
    }

    pub fn not(&self) -> BinaryMask {
        self.map(|v| !v)
    }

    /// True if any foreground pixel lies on the outermost row or column.
    pub fn touches_border(&self) -> bool {
        let (h, w) = self.dims();
        (0..w).any(|x| self.get(0, x) || self.get(h - 1, x)) || (0..h).any(|y| self.get(y, 0) || self.get(y, w - 1))
    }
}

pub(crate) fn ensure_same_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
