#![allow(dead_code)]

use std::path::Path;

use mixblend::imgcore::io::{save_image, save_mask};
use mixblend::imgcore::{BinaryMask, ImageF, Rgb};
use mixblend::pipeline::PipelineConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GREEN: Rgb = Rgb([0.1, 0.75, 0.2]);

/// A tool-like shape entering from one image edge, on a green backdrop.
pub fn green_screen_frame(h: usize, w: usize, seed: u64) -> (ImageF, BinaryMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edge = rng.random_range(0..4);
    let thickness = rng.random_range(h / 8..h / 4).max(2);
    let reach = rng.random_range(0.4..0.7);
    let offset = rng.random_range(0.25..0.6);
    let color = Rgb::new(
        rng.random_range(0.5..0.9),
        rng.random_range(0.0..0.3),
        rng.random_range(0.5..0.95),
    );
    let mask = BinaryMask::from_fn(h, w, |y, x| {
        let (fy, fx) = (y as f64 / h as f64, x as f64 / w as f64);
        let band = |along: f64, t: usize, dim: usize| {
            let c = (offset * dim as f64) as usize;
            along < reach && (c..c + t).contains(&if dim == h { y } else { x })
        };
        match edge {
            0 => band(fx, thickness, h),
            1 => band(1.0 - fx, thickness, h),
            2 => band(fy, thickness, w),
            _ => band(1.0 - fy, thickness, w),
        }
    });
    let image = ImageF::from_fn(h, w, |y, x| {
        if mask.get(y, x) {
            Rgb::new(color.0[0], color.0[1], (color.0[2] + 0.002 * x as f64).min(1.0))
        } else {
            GREEN
        }
    });
    (image, mask)
}

pub fn tissue(h: usize, w: usize, seed: u64) -> ImageF {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (rng.random_range(0.05..0.2), rng.random_range(0.05..0.2));
    ImageF::from_fn(h, w, |y, x| {
        let t = ((y as f64 * a).sin() + (x as f64 * b).cos()) * 0.1;
        Rgb::new(0.7 + t, 0.3 + t, 0.3 + 0.5 * t).clamped()
    })
}

/// Writes `n_fg` foreground pairs and `n_bg` backgrounds and returns a config pointing at them.
pub fn write_pools(root: &Path, n_fg: usize, n_bg: usize) -> PipelineConfig {
    let fg = root.join("fg");
    let bg = root.join("bg");
    std::fs::create_dir_all(&fg).unwrap();
    std::fs::create_dir_all(&bg).unwrap();
    for i in 0..n_fg {
        let (img, mask) = green_screen_frame(60, 80, i as u64);
        save_image(&img, &fg.join(format!("fg{i:02}.png"))).unwrap();
        save_mask(&mask, &fg.join(format!("fg{i:02}_mask.png"))).unwrap();
    }
    for i in 0..n_bg {
        let (h, w) = if i % 2 == 0 { (45, 80) } else { (64, 64) };
        save_image(&tissue(h, w, 100 + i as u64), &bg.join(format!("bg{i:02}.png"))).unwrap();
    }
    let mut config = PipelineConfig::default();
    config.paths.foreground_dir = fg;
    config.paths.background_dir = bg;
    config.paths.output_dir = root.join("out");
    config.target_width = 64;
    config.sample_count = 10;
    config.seed = 42;
    config.workers = 2;
    config
}
