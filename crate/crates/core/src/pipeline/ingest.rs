//! Indexing of foreground and background directories.
//!
//! A foreground is a pair `<id>.png` + `<id>_mask.png`; every other image in
//! the background directory is a background. Files are visited in
//! lexicographic order so re-ingesting the same directories gives the same pools.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, Subset};
use crate::chroma::ForegroundSample;
use crate::error::{Error, Result};
use crate::imgcore::{
    connected_components,
    io::{image_dims, load_image, load_mask},
    ImageF,
};

pub const MASK_SUFFIX: &str = "_mask";
const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForegroundEntry {
    pub id: String,
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundEntry {
    pub id: String,
    pub path: PathBuf,
    pub validation: bool,
}

/// File references; images are loaded on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetPools {
    pub foregrounds: Vec<ForegroundEntry>,
    pub backgrounds: Vec<BackgroundEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rejected: Vec<Rejection>,
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if is_image && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// FNV-1a with a final avalanche; stable across platforms and releases, unlike `std`'s hasher.
fn stable_hash(s: &str) -> u64 {
    let h = s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    let h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    let h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Whether a background with this id belongs to the held-out split.
pub fn is_validation(id: &str, fraction: f64) -> bool {
    (stable_hash(id) as f64 / u64::MAX as f64) < fraction
}

/// Indexes both directories, rejecting malformed foreground pairs with a report.
pub fn ingest(config: &PipelineConfig) -> Result<(DatasetPools, IngestReport)> {
    let mut report = IngestReport::default();
    let fg_files = image_files(&config.paths.foreground_dir)?;
    let mut foregrounds = Vec::new();
    for image_path in fg_files.iter().filter(|p| !stem(p).ends_with(MASK_SUFFIX)) {
        let id = stem(image_path);
        let mask_path = fg_files
            .iter()
            .find(|p| stem(p) == format!("{id}{MASK_SUFFIX}"))
            .cloned();
        let Some(mask_path) = mask_path else {
            report.rejected.push(Rejection {
                path: image_path.clone(),
                reason: "no matching mask".into(),
            });
            continue;
        };
        let dims = image_dims(image_path)?;
        let mask = load_mask(&mask_path)?;
        let reason = if mask.dims() != dims {
            Some(format!("mask is {:?} but image is {:?}", mask.dims(), dims))
        } else if !mask.any() {
            Some("mask is empty".to_string())
        } else {
            None
        };
        match reason {
            Some(reason) => report.rejected.push(Rejection {
                path: image_path.clone(),
                reason,
            }),
            None => foregrounds.push(ForegroundEntry {
                id,
                image_path: image_path.clone(),
                mask_path,
            }),
        }
    }
    if foregrounds.is_empty() {
        return Err(Error::EmptyPool(format!(
            "no valid foreground pairs in {}",
            config.paths.foreground_dir.display()
        )));
    }

    let mut backgrounds = Vec::new();
    for path in image_files(&config.paths.background_dir)? {
        image_dims(&path)?;
        let id = stem(&path);
        backgrounds.push(BackgroundEntry {
            validation: is_validation(&id, config.split.validation_fraction),
            id,
            path,
        });
    }
    if backgrounds.is_empty() {
        return Err(Error::EmptyPool(format!(
            "no backgrounds in {}",
            config.paths.background_dir.display()
        )));
    }
    for r in &report.rejected {
        log::warn!("rejected {}: {}", r.path.display(), r.reason);
    }
    Ok((
        DatasetPools {
            foregrounds,
            backgrounds,
        },
        report,
    ))
}

impl DatasetPools {
    /// Indices of the backgrounds in `subset`.
    pub fn background_indices(&self, subset: Subset) -> Vec<usize> {
        self.backgrounds
            .iter()
            .enumerate()
            .filter(|(_, b)| b.validation == (subset == Subset::Validation))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn load_foreground(&self, i: usize) -> Result<ForegroundSample> {
        let e = &self.foregrounds[i];
        let image = load_image(&e.image_path)?;
        let mask = load_mask(&e.mask_path)?;
        let count = connected_components(&mask).count().max(1);
        ForegroundSample::new(image, mask, count, e.id.clone())
    }

    pub fn load_background(&self, i: usize) -> Result<ImageF> {
        load_image(&self.backgrounds[i].path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::{
        io::{save_image, save_mask},
        BinaryMask, Rgb,
    };

    fn write_fg(dir: &Path, id: &str, dims: (usize, usize), mask_dims: (usize, usize), empty: bool) {
        save_image(
            &ImageF::filled(dims.0, dims.1, Rgb::gray(0.5)),
            &dir.join(format!("{id}.png")),
        )
        .unwrap();
        let mask = BinaryMask::from_fn(mask_dims.0, mask_dims.1, |y, _| !empty && y < 3);
        save_mask(&mask, &dir.join(format!("{id}_mask.png"))).unwrap();
    }

    fn setup(n_bg: usize) -> (tempfile::TempDir, PipelineConfig) {
        let root = tempfile::tempdir().unwrap();
        let fg = root.path().join("fg");
        let bg = root.path().join("bg");
        std::fs::create_dir_all(&fg).unwrap();
        std::fs::create_dir_all(&bg).unwrap();
        write_fg(&fg, "c", (8, 10), (8, 10), false);
        write_fg(&fg, "a", (8, 10), (8, 10), false);
        write_fg(&fg, "b", (8, 10), (8, 10), false);
        write_fg(&fg, "d", (8, 10), (9, 10), false);
        for i in 0..n_bg {
            save_image(&ImageF::filled(6, 6, Rgb::gray(0.2)), &bg.join(format!("bg{i:02}.png"))).unwrap();
        }
        let mut config = PipelineConfig::default();
        config.paths.foreground_dir = fg;
        config.paths.background_dir = bg;
        (root, config)
    }

    #[test]
    fn rejects_mismatched_pair() {
        let (_root, config) = setup(3);
        let (pools, report) = ingest(&config).unwrap();
        let ids: Vec<&str> = pools.foregrounds.iter().map(|f| f.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(report.rejected.len(), 1);
        assert!(report.rejected[0].path.ends_with("d.png"));
        assert_eq!(pools.backgrounds.len(), 3);
        let (again, _) = ingest(&config).unwrap();
        assert_eq!(again, pools);
        let s = pools.load_foreground(0).unwrap();
        assert_eq!((s.dims(), s.instrument_count), ((8, 10), 1));
    }

    #[test]
    fn empty_mask_and_missing_mask_rejected() {
        let (_root, config) = setup(1);
        write_fg(&config.paths.foreground_dir, "e", (8, 10), (8, 10), true);
        save_image(
            &ImageF::filled(4, 4, Rgb::BLACK),
            &config.paths.foreground_dir.join("f.png"),
        )
        .unwrap();
        let (pools, report) = ingest(&config).unwrap();
        assert_eq!(pools.foregrounds.len(), 3);
        assert_eq!(report.rejected.len(), 3);
    }

    #[test]
    fn empty_background_dir_is_fatal() {
        let (_root, config) = setup(0);
        assert!(matches!(ingest(&config), Err(Error::EmptyPool(_))));
    }

    #[test]
    fn missing_dir_is_io_error() {
        let (_root, mut config) = setup(1);
        config.paths.background_dir = "/nonexistent/bg".into();
        assert!(matches!(ingest(&config), Err(Error::Io { .. })));
    }

    #[test]
    fn splits_are_disjoint_and_stable() {
        let (_root, mut config) = setup(40);
        config.split.validation_fraction = 0.3;
        let (pools, _) = ingest(&config).unwrap();
        let train = pools.background_indices(Subset::Train);
        let val = pools.background_indices(Subset::Validation);
        assert_eq!(train.len() + val.len(), 40);
        assert!(train.iter().all(|i| !val.contains(i)));
        assert!(!val.is_empty() && !train.is_empty());
        for b in &pools.backgrounds {
            assert_eq!(b.validation, is_validation(&b.id, 0.3));
        }
    }
}
