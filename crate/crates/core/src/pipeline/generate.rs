//! Deterministic sample generation, dataset writing and streaming.
//!
//! Sample `i` depends only on the pools, the config and `i`: its seed is a
//! hash of `(config.seed, i)` and every stage draws from its own ChaCha
//! stream under that seed. Worker count and scheduling order therefore never
//! change the output, and the label is identical across blending modes.

use std::path::Path;
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread::JoinHandle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Mode, PipelineConfig};
use super::ingest::DatasetPools;
use crate::augment::{
    add_flying_distractors, augment_background, augment_foreground, corrupt_blended, draw_distractor_count,
    endoscopic_padding, standardize_pair, Padding,
};
use crate::blend::{sample_weights, Compositor};
use crate::error::{Error, Result};
use crate::imgcore::{
    io::{save_image, save_mask},
    resize_exact, BinaryMask, GeometricTransform, ImageF, Plane, Rgb,
};

/// Independent random stream per generation stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Select = 1,
    ForegroundAugment = 2,
    BackgroundAugment = 3,
    Standardize = 4,
    Blend = 5,
    Distractors = 6,
    Corrupt = 7,
    Padding = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-sample seed: a stable 64-bit mix of the run seed and the sample index.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index)
}

pub fn stage_rng(sample_seed: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    rng.set_stream(stage as u64);
    rng
}

/// Everything needed to trace a sample back to its sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub index: u64,
    pub sample_seed: u64,
    pub fg_id: String,
    pub bg_id: String,
    pub distractor_donor_ids: Vec<String>,
    pub mode: String,
    pub blend: Compositor,
    pub foreground_transform: GeometricTransform,
    pub corruptions: Vec<String>,
    pub padding: Option<Padding>,
}

#[derive(Clone, Debug)]
pub struct GeneratedSample {
    pub image: ImageF,
    pub label: BinaryMask,
    pub provenance: Provenance,
}

fn compositor_for(config: &PipelineConfig, index: u64, rng: &mut ChaCha8Rng) -> Result<Compositor> {
    let m = config.basis().len();
    Ok(match config.mode {
        Mode::MixBlend => Compositor::Mix {
            weights: sample_weights(&config.alpha, rng)?,
        },
        Mode::MultiBlend => Compositor::Member {
            index: (index % m as u64) as usize,
        },
        Mode::Single(i) => Compositor::Member { index: i },
    })
}

/// Generates sample `index`; a pure function of the pool contents, the config and `index`.
pub fn generate_sample(pools: &DatasetPools, config: &PipelineConfig, index: u64) -> Result<GeneratedSample> {
    let seed = sample_seed(config.seed, index);
    let aug = &config.augment;
    let basis = config.basis();
    let backgrounds = pools.background_indices(config.split.subset);
    if pools.foregrounds.is_empty() || backgrounds.is_empty() {
        return Err(Error::EmptyPool(
            "no foregrounds or no backgrounds in the selected split".into(),
        ));
    }

    let mut select = stage_rng(seed, Stage::Select);
    let fg_i = select.random_range(0..pools.foregrounds.len());
    let bg_i = backgrounds[select.random_range(0..backgrounds.len())];
    let fg = pools.load_foreground(fg_i)?;
    let bg = pools.load_background(bg_i)?;

    let fg_aug = augment_foreground(&fg, &mut stage_rng(seed, Stage::ForegroundAugment), &aug.foreground);
    let bg = augment_background(&bg, &mut stage_rng(seed, Stage::BackgroundAugment), &aug.background);
    let (fg_std, mut bg_std) = standardize_pair(
        &fg_aug.sample,
        &bg,
        config.target_width,
        &mut stage_rng(seed, Stage::Standardize),
    )?;
    let label = fg_std.mask;
    let (h, w) = label.dims();

    let compositor = compositor_for(config, index, &mut stage_rng(seed, Stage::Blend))?;

    // distractors go into the background before the tools are pasted, so they never cover a tool
    let mut distract = stage_rng(seed, Stage::Distractors);
    let count = draw_distractor_count(&mut distract, &aug.distractors);
    let mut donors = Vec::with_capacity(count);
    for _ in 0..count {
        let mut d = backgrounds[distract.random_range(0..backgrounds.len())];
        if d == bg_i && backgrounds.len() > 1 {
            d = backgrounds[(backgrounds.iter().position(|&b| b == d).unwrap() + 1) % backgrounds.len()];
        }
        let donor = resize_exact(&pools.load_background(d)?, h, w)?;
        bg_std = add_flying_distractors(
            &bg_std,
            &donor,
            &label,
            &compositor,
            &basis,
            1,
            &mut distract,
            &aug.distractors,
        )?;
        donors.push(pools.backgrounds[d].id.clone());
    }

    let blended = compositor.composite(&fg_std.image, &label, &bg_std, &basis)?;
    let (corrupted, applied) = corrupt_blended(&blended, &mut stage_rng(seed, Stage::Corrupt), &aug.corruption)?;
    let (image, label, padding) =
        endoscopic_padding(&corrupted, &label, &mut stage_rng(seed, Stage::Padding), &aug.padding)?;

    Ok(GeneratedSample {
        image,
        label,
        provenance: Provenance {
            index,
            sample_seed: seed,
            fg_id: pools.foregrounds[fg_i].id.clone(),
            bg_id: pools.backgrounds[bg_i].id.clone(),
            distractor_donor_ids: donors,
            mode: config.mode.to_string(),
            blend: compositor,
            foreground_transform: fg_aug.transform,
            corruptions: applied.into_iter().map(String::from).collect(),
            padding,
        },
    })
}

/// Re-creates a sample from its provenance record.
pub fn regenerate(pools: &DatasetPools, config: &PipelineConfig, provenance: &Provenance) -> Result<GeneratedSample> {
    if sample_seed(config.seed, provenance.index) != provenance.sample_seed {
        return Err(Error::Config(format!(
            "provenance seed {} does not match config seed {}",
            provenance.sample_seed, config.seed
        )));
    }
    generate_sample(pools, config, provenance.index)
}

pub fn image_file_name(index: u64) -> String {
    format!("{index:06}.png")
}

pub fn mask_file_name(index: u64) -> String {
    format!("{index:06}_mask.png")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: String,
    pub mask: String,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub index: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub mode: String,
    pub seed: u64,
    pub basis: Vec<String>,
    pub sample_count: usize,
    pub written: usize,
    pub samples: Vec<ManifestEntry>,
    pub failures: Vec<Failure>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn write_sample(dir: &Path, s: &GeneratedSample) -> Result<ManifestEntry> {
    let index = s.provenance.index;
    let (image, mask) = (image_file_name(index), mask_file_name(index));
    save_image(&s.image, &dir.join(&image))?;
    save_mask(&s.label, &dir.join(&mask))?;
    Ok(ManifestEntry {
        image,
        mask,
        provenance: s.provenance.clone(),
    })
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Writes `sample_count` image/label pairs and `manifest.json` into the output directory.
///
/// Per-sample failures are recorded in the manifest and do not stop the run.
pub fn generate_dataset(pools: &DatasetPools, config: &PipelineConfig) -> Result<Manifest> {
    let dir = &config.paths.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let results: Vec<std::result::Result<ManifestEntry, Failure>> = thread_pool(config.workers)?.install(|| {
        (0..config.sample_count as u64)
            .into_par_iter()
            .map(|i| {
                generate_sample(pools, config, i)
                    .and_then(|s| write_sample(dir, &s))
                    .map_err(|e| Failure {
                        index: i,
                        error: e.to_string(),
                    })
            })
            .collect()
    });
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(e) => samples.push(e),
            Err(f) => {
                log::error!("sample {}: {}", f.index, f.error);
                failures.push(f)
            }
        }
    }
    let manifest = Manifest {
        config_hash: config.content_hash(),
        mode: config.mode.to_string(),
        seed: config.seed,
        basis: config.basis().names().into_iter().map(String::from).collect(),
        sample_count: config.sample_count,
        written: samples.len(),
        samples,
        failures,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Unbounded iterator over samples 0, 1, 2, ... produced ahead of time by a background thread.
///
/// At most `prefetch` finished samples wait in the queue; the producer blocks when it is full
/// and stops once the iterator is dropped.
pub struct SampleStream {
    rx: Option<Receiver<Result<GeneratedSample>>>,
    handle: Option<JoinHandle<()>>,
}

impl Iterator for SampleStream {
    type Item = Result<GeneratedSample>;

    fn next(&mut self) -> Option<Self::Item> {
        self.rx.as_ref()?.recv().ok()
    }
}

impl Drop for SampleStream {
    fn drop(&mut self) {
        // closing the channel makes the producer's next send fail
        self.rx.take();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

pub fn stream_samples(pools: DatasetPools, config: PipelineConfig, prefetch: usize) -> Result<SampleStream> {
    let (tx, rx) = sync_channel(prefetch.max(1));
    let pool = thread_pool(config.workers)?;
    let batch = pool.current_num_threads() as u64;
    let handle = std::thread::spawn(move || {
        let mut next = 0u64;
        loop {
            let produced: Vec<_> = pool.install(|| {
                (next..next + batch)
                    .into_par_iter()
                    .map(|i| generate_sample(&pools, &config, i))
                    .collect()
            });
            next += batch;
            for s in produced {
                if tx.send(s).is_err() {
                    return;
                }
            }
        }
    });
    Ok(SampleStream {
        rx: Some(rx),
        handle: Some(handle),
    })
}

/// Image with the label tinted red.
pub fn overlay(image: &ImageF, label: &BinaryMask) -> Result<ImageF> {
    image.zip_map(label, |p, l| if l { p.lerp(Rgb::new(1.0, 0.0, 0.0), 0.45) } else { p })
}

/// Grid of the first `n` samples, each shown as image and label overlay side by side.
pub fn contact_sheet(samples: &[GeneratedSample], tile_width: usize) -> Result<ImageF> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("samples", "nothing to preview"))?;
    let (h0, w0) = first.image.dims();
    let tile_h = ((tile_width * h0) as f64 / w0 as f64).round().max(1.0) as usize;
    let cols = (samples.len() as f64).sqrt().ceil() as usize;
    let rows = samples.len().div_ceil(cols);
    let gap = 4;
    let cell_w = 2 * tile_width + gap;
    let mut sheet = Plane::filled(
        rows * (tile_h + gap) + gap,
        cols * (cell_w + gap) + gap,
        Rgb::gray(0.15),
    );
    for (k, s) in samples.iter().enumerate() {
        let img = resize_exact(&s.image, tile_h, tile_width)?;
        let ov = resize_exact(&overlay(&s.image, &s.label)?, tile_h, tile_width)?;
        let (top, left) = (gap + (k / cols) * (tile_h + gap), gap + (k % cols) * (cell_w + gap));
        for y in 0..tile_h {
            for x in 0..tile_width {
                sheet.set(top + y, left + x, img.get(y, x));
                sheet.set(top + y, left + tile_width + gap + x, ov.get(y, x));
            }
        }
    }
    Ok(sheet)
}

/// Generates the first `n` samples and writes their contact sheet to `out`.
pub fn preview(pools: &DatasetPools, config: &PipelineConfig, n: usize, out: &Path) -> Result<()> {
    let samples: Vec<GeneratedSample> = thread_pool(config.workers)?.install(|| {
        (0..n as u64)
            .into_par_iter()
            .map(|i| generate_sample(pools, config, i))
            .collect::<Result<_>>()
    })?;
    save_image(&contact_sheet(&samples, 160)?, out)
}
