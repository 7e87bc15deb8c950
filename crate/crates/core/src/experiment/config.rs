//! Flat key-value configuration with INI-style sections.
//!
//! ```text
//! [dataset]
//! path = ratings.csv
//! preset = movielens
//!
//! [grid]
//! learning_rates = 0.001, 0.01
//! ```
//!
//! `key` under `[section]` is stored as `section.key`; dotted keys may also be
//! written outside any section. `#` and `;` start comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "dataset.path",
    "dataset.preset",
    "split.ratio",
    "split.seed",
    "grid.learning_rates",
    "grid.reg_magnitudes",
    "grid.frameworks",
    "train.k",
    "train.epochs",
    "train.mode",
    "train.seed",
    "train.early_stop_tol",
    "train.init_scale",
    "train.learning_rate",
    "train.reg_learning_rate",
    "train.reg_magnitude",
    "train.framework",
    "metrics.k_top",
    "metrics.clamp",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
    base_dir: Option<PathBuf>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", idx + 1)));
            }
            let full = if section.is_empty() {
                key
            } else {
                format!("{section}.{key}")
            };
            if !KNOWN_KEYS.contains(&full.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key `{full}`", idx + 1)));
            }
            entries.insert(full, value.trim().to_owned());
        }
        Ok(Config {
            entries,
            base_dir: None,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_owned(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn parsed<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("cannot parse {key} = `{v}`")))
            })
            .transpose()
    }

    pub fn list<V: FromStr>(&self, key: &str) -> Result<Option<Vec<V>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse()
                            .map_err(|_| Error::Config(format!("cannot parse `{s}` in {key}")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn flag(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => Ok(true),
                "0" | "false" | "no" | "off" => Ok(false),
                _ => Err(Error::Config(format!("{key} = `{v}` is not a boolean"))),
            })
            .transpose()
    }

    /// A path value, resolved against the config file's directory when
    /// relative.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| {
            let p = PathBuf::from(v);
            match &self.base_dir {
                Some(base) if p.is_relative() => base.join(p),
                _ => p,
            }
        })
    }
}
