//! Declarative generation settings, loaded from TOML with dotted-key overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::AugmentParams;
use crate::blend::{validate_alpha, BlendBasis};
use crate::error::{Error, Result};

/// How composites are produced from the blending basis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Mode {
    /// Dirichlet-weighted mixture of all members, fresh weights per sample.
    #[default]
    MixBlend,
    /// Member `index mod M` for sample `index`.
    MultiBlend,
    /// Always the given basis member.
    Single(usize),
}

const SINGLE_NAMES: [&str; 3] = ["trivial", "feather", "laplacian"];

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::MixBlend,
        Mode::MultiBlend,
        Mode::Single(0),
        Mode::Single(1),
        Mode::Single(2),
    ];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::MixBlend => f.write_str("mix_blend"),
            Mode::MultiBlend => f.write_str("multi_blend"),
            Mode::Single(i) => write!(f, "single:{}", SINGLE_NAMES.get(*i).copied().unwrap_or("?")),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mix_blend" => Ok(Mode::MixBlend),
            "multi_blend" => Ok(Mode::MultiBlend),
            _ => s
                .strip_prefix("single:")
                .and_then(|name| SINGLE_NAMES.iter().position(|n| *n == name))
                .map(Mode::Single)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown mode `{s}`; expected mix_blend, multi_blend, single:trivial, single:feather or single:laplacian"
                    ))
                }),
        }
    }
}

impl TryFrom<String> for Mode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Mode> for String {
    fn from(m: Mode) -> String {
        m.to_string()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub foreground_dir: PathBuf,
    pub background_dir: PathBuf,
    pub output_dir: PathBuf,
}

/// Which background split samples are drawn from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    #[default]
    Train,
    Validation,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Fraction of backgrounds held out for validation, chosen by a stable hash of the file name.
    pub validation_fraction: f64,
    pub subset: Subset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub target_width: usize,
    pub alpha: Vec<f64>,
    pub mode: Mode,
    pub sample_count: usize,
    pub seed: u64,
    /// Worker threads; 0 uses one per core. Never affects the output.
    pub workers: usize,
    pub split: SplitConfig,
    pub augment: AugmentParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: Paths::default(),
            target_width: 640,
            alpha: vec![1.0, 1.0, 1.0],
            mode: Mode::MixBlend,
            sample_count: 100_000,
            seed: 0,
            workers: 0,
            split: SplitConfig::default(),
            augment: AugmentParams::default(),
        }
    }
}

/// Smallest output width; the 4-level Laplacian pyramid needs room to decimate.
pub const MIN_TARGET_WIDTH: usize = 16;

fn config_error(e: impl fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Parses the right-hand side of `key=value`: a TOML literal if it parses, else a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `table[a][b]... = value` for a dotted key, creating intermediate tables.
fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| config_error(format!("empty key in `{key}`")))?;
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("`{part}` in `{key}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl PipelineConfig {
    /// Parses TOML text and applies `key=value` overrides (dotted keys address nested sections).
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(config_error)?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| config_error(format!("override `{o}` is not key=value")))?;
            set_dotted(&mut table, key.trim(), parse_value(raw.trim()))?;
        }
        let config: PipelineConfig = toml::Value::Table(table).try_into().map_err(config_error)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn basis(&self) -> BlendBasis {
        BlendBasis::default()
    }

    pub fn validate(&self) -> Result<()> {
        validate_alpha(&self.alpha).map_err(config_error)?;
        let m = self.basis().len();
        if self.alpha.len() != m {
            return Err(Error::Config(format!(
                "alpha has {} entries but the blending basis has {m}",
                self.alpha.len()
            )));
        }
        if let Mode::Single(i) = self.mode {
            if i >= m {
                return Err(Error::Config(format!("no basis member {i}")));
            }
        }
        if self.sample_count == 0 {
            return Err(Error::Config("sample_count must be at least 1".into()));
        }
        if self.target_width < MIN_TARGET_WIDTH {
            return Err(Error::Config(format!(
                "target_width must be at least {MIN_TARGET_WIDTH}"
            )));
        }
        if !(0.0..1.0).contains(&self.split.validation_fraction) {
            return Err(Error::Config("split.validation_fraction must lie in [0, 1)".into()));
        }
        self.augment.validate().map_err(config_error)
    }

    /// SHA-256 over everything that determines the output; `output_dir` and `workers` are excluded.
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.paths.output_dir = PathBuf::new();
        c.workers = 0;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
