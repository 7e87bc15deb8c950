//! Grid search over learning rate × regularization magnitude.

use std::cmp::Ordering;
use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::data::{load_dataset, split, SplitPair, DEFAULT_SPLIT_RATIO};
use crate::error::{Error, Result};
use crate::experiment::config::Config;
use crate::metrics::{evaluate, DEFAULT_K_TOP};
use crate::model::{FrameworkKind, Regularization};
use crate::scalar::Scalar;
use crate::trainer::{train, Hyperparams};

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSource {
    pub path: PathBuf,
    /// Schema preset name, or `canonical`.
    pub preset: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec<T> {
    pub learning_rates: Vec<T>,
    /// β for the scalar frameworks, initial coefficient-vector entry for
    /// `VectorDot`.
    pub reg_magnitudes: Vec<T>,
    pub frameworks: Vec<FrameworkKind>,
    pub dataset: Option<DatasetSource>,
    pub split_ratio: f64,
    pub split_seed: u64,
    pub template: Hyperparams<T>,
    pub k_top: usize,
    pub clamp: bool,
}

impl<T: Scalar> Default for GridSpec<T> {
    fn default() -> Self {
        GridSpec {
            learning_rates: [0.001, 0.003, 0.01, 0.03, 0.1].map(T::of).to_vec(),
            reg_magnitudes: [0.0, 0.001, 0.01, 0.1, 1.0].map(T::of).to_vec(),
            frameworks: vec![FrameworkKind::GlobalScalar, FrameworkKind::VectorDot],
            dataset: None,
            split_ratio: DEFAULT_SPLIT_RATIO,
            split_seed: 42,
            template: Hyperparams::default(),
            k_top: DEFAULT_K_TOP,
            clamp: true,
        }
    }
}

impl<T: Scalar> GridSpec<T> {
    /// Defaults overridden by whatever the config sets.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let mut spec = Self::default();
        if let Some(path) = cfg.path("dataset.path") {
            spec.dataset = Some(DatasetSource {
                path,
                preset: cfg.get("dataset.preset").unwrap_or("movielens").to_owned(),
            });
        }
        if let Some(v) = cfg.parsed("split.ratio")? {
            spec.split_ratio = v;
        }
        if let Some(v) = cfg.parsed("split.seed")? {
            spec.split_seed = v;
        }
        if let Some(v) = cfg.list::<f64>("grid.learning_rates")? {
            spec.learning_rates = v.into_iter().map(T::of).collect();
        }
        if let Some(v) = cfg.list::<f64>("grid.reg_magnitudes")? {
            spec.reg_magnitudes = v.into_iter().map(T::of).collect();
        }
        if let Some(v) = cfg.list("grid.frameworks")? {
            spec.frameworks = v;
        }
        apply_train_keys(cfg, &mut spec.template)?;
        if let Some(v) = cfg.parsed("metrics.k_top")? {
            spec.k_top = v;
        }
        if let Some(v) = cfg.flag("metrics.clamp")? {
            spec.clamp = v;
            spec.template.clamp_predictions = v;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty() || self.reg_magnitudes.is_empty() || self.frameworks.is_empty() {
            return Err(Error::Config("grid axes and framework list must be non-empty".into()));
        }
        if let Some(lr) = self.learning_rates.iter().find(|x| !(x.is_finite() && **x > T::zero())) {
            return Err(Error::Config(format!("learning rates must be positive, got {lr}")));
        }
        if let Some(m) = self.reg_magnitudes.iter().find(|x| !(x.is_finite() && **x >= T::zero())) {
            return Err(Error::Config(format!("regularization magnitudes must be nonnegative, got {m}")));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!("split ratio {} outside (0, 1)", self.split_ratio)));
        }
        if self.k_top == 0 {
            return Err(Error::Config("metrics.k_top must be at least 1".into()));
        }
        self.template.validate()
    }

    /// Cells in (framework name, learning rate, magnitude) order.
    pub fn cells(&self) -> Vec<(FrameworkKind, T, T)> {
        let mut frameworks = self.frameworks.clone();
        frameworks.sort_by_key(|k| k.name());
        frameworks.dedup();
        let mut lrs = self.learning_rates.clone();
        let mut mags = self.reg_magnitudes.clone();
        for axis in [&mut lrs, &mut mags] {
            axis.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
            axis.dedup();
        }
        let mut out = Vec::with_capacity(frameworks.len() * lrs.len() * mags.len());
        for &kind in &frameworks {
            for &lr in &lrs {
                for &mag in &mags {
                    out.push((kind, lr, mag));
                }
            }
        }
        out
    }
}

/// Applies `train.*` keys onto a hyperparameter set.
pub fn apply_train_keys<T: Scalar>(cfg: &Config, h: &mut Hyperparams<T>) -> Result<()> {
    if let Some(v) = cfg.parsed("train.k")? {
        h.k = v;
    }
    if let Some(v) = cfg.parsed("train.epochs")? {
        h.epochs = v;
    }
    if let Some(v) = cfg.parsed("train.mode")? {
        h.mode = v;
    }
    if let Some(v) = cfg.parsed("train.seed")? {
        h.seed = v;
    }
    if let Some(v) = cfg.parsed::<f64>("train.early_stop_tol")? {
        h.early_stop_tol = T::of(v);
    }
    if let Some(v) = cfg.parsed::<f64>("train.init_scale")? {
        h.init_scale_feat = Some(T::of(v));
    }
    if let Some(v) = cfg.parsed::<f64>("train.learning_rate")? {
        h.eta_feat = T::of(v);
        h.eta_reg = T::of(v);
    }
    if let Some(v) = cfg.parsed::<f64>("train.reg_learning_rate")? {
        h.eta_reg = T::of(v);
    }
    if let Some(v) = cfg.parsed::<f64>("train.reg_magnitude")? {
        h.init_reg_value = T::of(v);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    Diverged,
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellStatus::Ok => "ok",
            CellStatus::Diverged => "diverged",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceRow<T> {
    pub framework: FrameworkKind,
    pub learning_rate: T,
    pub reg_magnitude: T,
    pub mae: Option<T>,
    pub dme: Option<T>,
    pub status: CellStatus,
    pub epochs_run: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceTable<T> {
    pub rows: Vec<SurfaceRow<T>>,
    pub split_ratio: f64,
    pub split_seed: u64,
}

impl<T: Scalar> SurfaceTable<T> {
    /// Lowest-MAE ok row of a framework; earliest row wins ties.
    pub fn best_row(&self, kind: FrameworkKind) -> Option<&SurfaceRow<T>> {
        self.rows
            .iter()
            .filter(|r| r.framework == kind && r.status == CellStatus::Ok)
            .filter_map(|r| r.mae.map(|m| (m, r)))
            .fold(None, |best: Option<(T, &SurfaceRow<T>)>, (m, r)| match best {
                Some((b, _)) if b <= m => best,
                _ => Some((m, r)),
            })
            .map(|(_, r)| r)
    }

    pub fn frameworks(&self) -> Vec<FrameworkKind> {
        let mut v: Vec<_> = self.rows.iter().map(|r| r.framework).collect();
        v.dedup();
        v
    }

    pub fn all_diverged(&self) -> bool {
        self.rows.iter().all(|r| r.status == CellStatus::Diverged)
    }

    pub(crate) fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.framework
                .name()
                .cmp(b.framework.name())
                .then(a.learning_rate.partial_cmp(&b.learning_rate).unwrap_or(Ordering::Equal))
                .then(a.reg_magnitude.partial_cmp(&b.reg_magnitude).unwrap_or(Ordering::Equal))
        });
    }
}

/// Framework configuration for one cell.
pub fn cell_framework<T: Scalar>(
    kind: FrameworkKind,
    magnitude: T,
    num_users: usize,
    num_items: usize,
) -> Regularization<T> {
    Regularization::uniform(kind, magnitude, num_users, num_items)
}

/// Hyperparameters for one cell: both step sizes are the cell's learning
/// rate; under `VectorDot` the magnitude seeds the coefficient vectors.
pub fn cell_hyperparams<T: Scalar>(template: &Hyperparams<T>, kind: FrameworkKind, lr: T, mag: T) -> Hyperparams<T> {
    let mut h = template.clone().with_learning_rate(lr);
    if kind == FrameworkKind::VectorDot {
        h.init_reg_value = mag;
    }
    h
}

fn run_cell<T: Scalar>(
    data: &SplitPair<T>,
    spec: &GridSpec<T>,
    (kind, lr, mag): (FrameworkKind, T, T),
) -> Result<SurfaceRow<T>> {
    let h = cell_hyperparams(&spec.template, kind, lr, mag);
    let framework = cell_framework(kind, mag, data.train.num_users(), data.train.num_items());
    let mut row = SurfaceRow {
        framework: kind,
        learning_rate: lr,
        reg_magnitude: mag,
        mae: None,
        dme: None,
        status: CellStatus::Diverged,
        epochs_run: 0,
    };
    match train(&data.train, &h, framework) {
        Ok(res) => {
            let report = evaluate(&res.model, &data.train, &data.test, spec.clamp, spec.k_top)?;
            row.mae = Some(report.mae);
            row.dme = report.dme;
            row.status = CellStatus::Ok;
            row.epochs_run = res.epochs_run;
        }
        Err(Error::Divergence { epoch, .. }) => row.epochs_run = epoch,
        Err(e) => return Err(e),
    }
    Ok(row)
}

/// Runs every cell on an existing split. Cells run on up to `threads`
/// workers; the table is assembled in cell order regardless.
pub fn run_grid_on<T: Scalar>(data: &SplitPair<T>, spec: &GridSpec<T>, threads: usize) -> Result<SurfaceTable<T>> {
    spec.validate()?;
    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let rows: Vec<SurfaceRow<T>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| run_cell(data, spec, cell))
            .collect::<Result<_>>()
    })?;
    let mut table = SurfaceTable {
        rows,
        split_ratio: data.ratio,
        split_seed: data.seed,
    };
    table.sort();
    Ok(table)
}

/// Loads the spec's dataset, splits it and runs the grid.
pub fn run_grid<T: Scalar>(spec: &GridSpec<T>, threads: usize) -> Result<SurfaceTable<T>> {
    spec.validate()?;
    let source = spec
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("dataset.path is not set".into()))?;
    let data = load_dataset(&source.path, &source.preset)?;
    let pair = split(&data, spec.split_ratio, spec.split_seed)?;
    run_grid_on(&pair, spec, threads)
}
