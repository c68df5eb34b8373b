//! Hexcone HSV conversion. Hue is stored in [0,1) (degrees / 360).

use super::plane::{ImageF, Rgb};

pub fn rgb_to_hsv_pixel(p: Rgb) -> Rgb {
    let [r, g, b] = p.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    // rem_euclid can return exactly 6.0 for tiny negative inputs
    Rgb([if h >= 1.0 { 0.0 } else { h }, s, v])
}

pub fn hsv_to_rgb_pixel(p: Rgb) -> Rgb {
    let [h, s, v] = p.0;
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p0 = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let rgb = match sector as u32 {
        0 => [v, t, p0],
        1 => [q, v, p0],
        2 => [p0, v, t],
        3 => [p0, q, v],
        4 => [t, p0, v],
        _ => [v, p0, q],
    };
    Rgb(rgb)
}

/// Converts every pixel to (H, S, V), all in [0,1].
pub fn rgb_to_hsv(img: &ImageF) -> ImageF {
    img.map(rgb_to_hsv_pixel)
}

pub fn hsv_to_rgb(img: &ImageF) -> ImageF {
    img.map(|p| hsv_to_rgb_pixel(p).clamped())
}
