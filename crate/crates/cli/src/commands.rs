use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use mixblend::chroma::{extract_foreground, HsvRange};
use mixblend::eval::{binarize, iou, sequence_summary, ScoreReport};
use mixblend::imgcore::io::{load_gray, load_image, load_mask, save_image, save_mask};
use mixblend::pipeline::{self, ingest, PipelineConfig, MANIFEST_FILE};
use mixblend::{Error, Result};

use crate::{AdaptArgs, ConfigArgs, EvaluateArgs, ExtractArgs, GenerateArgs, PreviewArgs, RefineArgs};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn io_error(path: &Path, e: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_error(dir, e))? {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
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

fn write_json(value: &impl Serialize, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

#[derive(Serialize)]
struct ExtractEntry {
    id: String,
    image: String,
    mask: String,
    instrument_count: usize,
    refined: bool,
    changed_fraction: f64,
    qc_flagged: bool,
}

#[derive(Serialize)]
struct ExtractFailure {
    source: PathBuf,
    error: String,
}

#[derive(Serialize)]
struct ExtractManifest {
    range: HsvRange,
    refine: bool,
    entries: Vec<ExtractEntry>,
    failures: Vec<ExtractFailure>,
}

fn extract_one(path: &Path, range: &HsvRange, a: &ExtractArgs) -> Result<ExtractEntry> {
    let id = stem(path);
    let frame = load_image(path)?;
    let ex = extract_foreground(&frame, range, a.instruments, a.refine, &id)?;
    let (image, mask) = (
        format!("{id}.png"),
        format!("{id}{}.png", pipeline::ingest::MASK_SUFFIX),
    );
    save_image(&ex.sample.image, &a.output_dir.join(&image))?;
    save_mask(&ex.sample.mask, &a.output_dir.join(&mask))?;
    if ex.qc_flagged {
        log::warn!(
            "{id}: refinement changed {:.1}% of the mask",
            100.0 * ex.changed_fraction
        );
    }
    Ok(ExtractEntry {
        id,
        image,
        mask,
        instrument_count: ex.sample.instrument_count,
        refined: ex.refined,
        changed_fraction: ex.changed_fraction,
        qc_flagged: ex.qc_flagged,
    })
}

pub fn extract(a: &ExtractArgs) -> Result<()> {
    let range = HsvRange {
        hue_lo: a.hue_lo / 360.0,
        hue_hi: a.hue_hi / 360.0,
        sat_lo: a.sat_lo,
        val_lo: a.val_lo,
    };
    range.validate()?;
    if a.instruments == 0 {
        return Err(Error::Config("--instruments must be at least 1".into()));
    }
    let frames = image_files(&a.input_dir)?;
    if frames.is_empty() {
        return Err(Error::EmptyPool(format!("no images in {}", a.input_dir.display())));
    }
    create_dir(&a.output_dir)?;

    let results: Vec<Result<ExtractEntry>> = frames.par_iter().map(|p| extract_one(p, &range, a)).collect();
    let mut manifest = ExtractManifest {
        range,
        refine: a.refine,
        entries: Vec::new(),
        failures: Vec::new(),
    };
    for (path, r) in frames.iter().zip(results) {
        match r {
            Ok(entry) => manifest.entries.push(entry),
            Err(e) if e.is_config_error() => return Err(e),
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                manifest.failures.push(ExtractFailure {
                    source: path.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    write_json(&manifest, &a.output_dir.join(MANIFEST_FILE))?;
    let flagged = manifest.entries.iter().filter(|e| e.qc_flagged).count();
    println!(
        "extracted {} of {} frames into {} ({flagged} flagged for review)",
        manifest.entries.len(),
        frames.len(),
        a.output_dir.display()
    );
    if manifest.entries.is_empty() {
        return Err(Error::ExtractionFailed("no frame could be extracted".into()));
    }
    Ok(())
}

/// Loads the configuration and applies command-line flags, which take precedence over `--set`.
fn resolve_config(a: &ConfigArgs) -> Result<PipelineConfig> {
    let mut c = PipelineConfig::load(a.config.as_deref(), &a.overrides)?;
    if let Some(d) = &a.fg_dir {
        c.paths.foreground_dir = d.clone();
    }
    if let Some(d) = &a.bg_dir {
        c.paths.background_dir = d.clone();
    }
    if let Some(m) = &a.mode {
        c.mode = m.parse()?;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(w) = a.workers {
        c.workers = w;
    }
    if let Some(w) = a.width {
        c.target_width = w;
    }
    for (name, dir) in [
        ("foreground_dir", &c.paths.foreground_dir),
        ("background_dir", &c.paths.background_dir),
    ] {
        if dir.as_os_str().is_empty() {
            return Err(Error::Config(format!("paths.{name} is not set")));
        }
    }
    Ok(c)
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let mut c = resolve_config(&a.config)?;
    if let Some(n) = a.count {
        c.sample_count = n;
    }
    if let Some(d) = &a.out {
        c.paths.output_dir = d.clone();
    }
    c.validate()?;
    if a.print_config {
        print!("{}", c.to_toml());
        return Ok(());
    }
    if c.paths.output_dir.as_os_str().is_empty() {
        return Err(Error::Config("paths.output_dir is not set".into()));
    }
    let (pools, report) = ingest(&c)?;
    log::info!(
        "{} foregrounds, {} backgrounds, {} rejected",
        pools.foregrounds.len(),
        pools.backgrounds.len(),
        report.rejected.len()
    );
    let manifest = pipeline::generate_dataset(&pools, &c)?;
    println!(
        "wrote {} of {} samples to {} ({} failed)",
        manifest.written,
        manifest.sample_count,
        c.paths.output_dir.display(),
        manifest.failures.len()
    );
    if manifest.written == 0 {
        return Err(Error::EmptyPool("every sample failed".into()));
    }
    Ok(())
}

pub fn preview(a: &PreviewArgs) -> Result<()> {
    let c = resolve_config(&a.config)?;
    c.validate()?;
    if a.count == 0 {
        return Err(Error::Config("--count must be at least 1".into()));
    }
    let (pools, _) = ingest(&c)?;
    pipeline::preview(&pools, &c, a.count, &a.out)
}

pub fn refine(a: &RefineArgs) -> Result<()> {
    let img = load_image(&a.image)?;
    let prob = load_gray(&a.prob)?;
    let mask = mixblend::grabcut::refine_probability(&img, &prob, a.lo, a.hi, a.iters)?;
    save_mask(&mask, &a.out)
}

pub fn adapt(a: &AdaptArgs) -> Result<()> {
    let target = load_image(&a.target)?;
    let source = load_image(&a.source)?;
    save_image(&mixblend::fourier::adapt(&target, &source, a.beta)?, &a.out)
}

#[derive(Serialize)]
struct FrameScore {
    name: String,
    iou: f64,
}

#[derive(Serialize)]
struct EvaluationReport {
    threshold: Option<f64>,
    aggregate: ScoreReport,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    groups: BTreeMap<String, ScoreReport>,
    frames: Vec<FrameScore>,
}

/// Sequence name of a frame: its stem up to the last `_`, or the whole stem.
pub fn sequence_prefix(name: &str) -> &str {
    let stem = name.rsplit_once('.').map_or(name, |(s, _)| s);
    stem.rsplit_once('_').map_or(stem, |(p, _)| p)
}

/// Ground truth for `pred`: the same file name, else `<stem>_mask.png`.
fn ground_truth_path(gt_dir: &Path, pred: &Path) -> Result<PathBuf> {
    let same = gt_dir.join(pred.file_name().unwrap_or_default());
    if same.is_file() {
        return Ok(same);
    }
    let masked = gt_dir.join(format!("{}{}.png", stem(pred), pipeline::ingest::MASK_SUFFIX));
    if masked.is_file() {
        return Ok(masked);
    }
    Err(io_error(
        &same,
        io::Error::new(io::ErrorKind::NotFound, "no ground truth for this prediction"),
    ))
}

fn score_frame(pred_path: &Path, a: &EvaluateArgs) -> Result<f64> {
    let gt = load_mask(&ground_truth_path(&a.gt_dir, pred_path)?)?;
    let pred = if a.prob {
        binarize(&load_gray(pred_path)?, a.threshold)
    } else {
        load_mask(pred_path)?
    };
    iou(&pred, &gt)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    if a.prob && !(0.0..=1.0).contains(&a.threshold) {
        return Err(Error::Config("--threshold must lie in [0,1]".into()));
    }
    let preds = image_files(&a.pred_dir)?;
    if preds.is_empty() {
        return Err(Error::EmptyPool(format!("no predictions in {}", a.pred_dir.display())));
    }
    let scores: Vec<f64> = preds.par_iter().map(|p| score_frame(p, a)).collect::<Result<_>>()?;
    let names: Vec<String> = preds
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();

    let mut groups = BTreeMap::new();
    if a.group_by_prefix {
        let mut by_prefix: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for (name, &s) in names.iter().zip(&scores) {
            by_prefix.entry(sequence_prefix(name)).or_default().push(s);
        }
        for (prefix, s) in by_prefix {
            groups.insert(prefix.to_string(), sequence_summary(&s)?);
        }
    }
    let report = EvaluationReport {
        threshold: a.prob.then_some(a.threshold),
        aggregate: sequence_summary(&scores)?,
        groups,
        frames: names
            .into_iter()
            .zip(scores)
            .map(|(name, iou)| FrameScore { name, iou })
            .collect(),
    };
    match &a.out {
        Some(path) => write_json(&report, path),
        None => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
    }
}
