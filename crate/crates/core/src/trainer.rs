//! Model initialization and gradient-descent training.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::RatingsDataset;
use crate::error::{Error, Result};
use crate::gradients::{full_gradient, item_penalty_into, sign_of, user_penalty_into};
use crate::matrix::Matrix;
use crate::model::{FactorModel, FrameworkKind, LossBreakdown, Regularization};
use crate::scalar::{dot, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainMode {
    /// One update per observed rating, in a seeded shuffled order.
    Sgd,
    /// One full-gradient step per epoch.
    BatchGd,
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainMode::Sgd => "sgd",
            TrainMode::BatchGd => "batch_gd",
        })
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "sgd" => Ok(TrainMode::Sgd),
            "batch_gd" | "batch" | "gd" => Ok(TrainMode::BatchGd),
            other => Err(Error::Config(format!(
                "unknown training mode `{other}` (expected sgd or batch_gd)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams<T> {
    pub k: usize,
    /// Step size for the user and item factors.
    pub eta_feat: T,
    /// Step size for the coefficient vectors of `VectorDot`.
    pub eta_reg: T,
    pub epochs: usize,
    pub seed: u64,
    /// Half-width of the uniform factor initialization; `None` means 1/√k.
    pub init_scale_feat: Option<T>,
    /// Initial value of every coefficient-vector entry under `VectorDot`.
    pub init_reg_value: T,
    pub clamp_predictions: bool,
    pub mode: TrainMode,
    pub early_stop_tol: T,
}

impl<T: Scalar> Default for Hyperparams<T> {
    fn default() -> Self {
        Hyperparams {
            k: 10,
            eta_feat: T::of(0.01),
            eta_reg: T::of(0.01),
            epochs: 200,
            seed: 42,
            init_scale_feat: None,
            init_reg_value: T::of(0.01),
            clamp_predictions: true,
            mode: TrainMode::Sgd,
            early_stop_tol: T::of(1e-5),
        }
    }
}

impl<T: Scalar> Hyperparams<T> {
    /// Sets both step sizes.
    pub fn with_learning_rate(mut self, eta: T) -> Self {
        self.eta_feat = eta;
        self.eta_reg = eta;
        self
    }

    pub fn init_scale(&self) -> T {
        self.init_scale_feat
            .unwrap_or_else(|| T::one() / T::of_usize(self.k).sqrt())
    }

    /// Zero step sizes are accepted (they freeze the corresponding
    /// parameters); negative or non-finite ones are not.
    pub fn validate(&self) -> Result<()> {
        let nonneg = |x: T| x.is_finite() && x >= T::zero();
        if self.k == 0 {
            return Err(Error::contract("k must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::contract("epochs must be at least 1"));
        }
        if !nonneg(self.eta_feat) || !nonneg(self.eta_reg) {
            return Err(Error::contract(format!(
                "learning rates must be finite and nonnegative (eta_feat={}, eta_reg={})",
                self.eta_feat, self.eta_reg
            )));
        }
        if !nonneg(self.early_stop_tol) {
            return Err(Error::contract("early_stop_tol must be nonnegative"));
        }
        if !nonneg(self.init_scale()) || !self.init_reg_value.is_finite() {
            return Err(Error::contract("initialization values must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainResult<T> {
    pub model: FactorModel<T>,
    /// Loss after each epoch.
    pub trace: Vec<LossBreakdown<T>>,
    pub epochs_run: usize,
    pub converged: bool,
    /// Number of (uᵢ, vⱼ) update pairs applied. SGD applies one per observed
    /// rating per epoch; batch mode counts one per observation per step.
    pub pair_updates: u64,
}

fn uniform_matrix<T: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: T) -> Matrix<T> {
    let s = scale.to_f64().unwrap_or(0.0);
    let data = (0..rows * cols)
        .map(|_| T::of(s * (2.0 * rng.random::<f64>() - 1.0)))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

fn init_with<T: Scalar>(
    rng: &mut ChaCha8Rng,
    h: &Hyperparams<T>,
    num_users: usize,
    num_items: usize,
    framework: Regularization<T>,
) -> Result<FactorModel<T>> {
    h.validate()?;
    let scale = h.init_scale();
    let users = uniform_matrix(rng, num_users, h.k, scale);
    let items = uniform_matrix(rng, num_items, h.k, scale);
    if framework.kind() == FrameworkKind::VectorDot {
        FactorModel::vector_dot(
            users,
            items,
            Matrix::filled(num_users, h.k, h.init_reg_value),
            Matrix::filled(num_items, h.k, h.init_reg_value),
        )
    } else {
        FactorModel::new(users, items, framework)
    }
}

/// Draws U and V uniformly from [−s, s] (s = `init_scale_feat`, default
/// 1/√k) and fills every coefficient-vector entry with `init_reg_value`.
/// Deterministic in (seed, M, N, k, framework).
pub fn init_model<T: Scalar>(
    h: &Hyperparams<T>,
    num_users: usize,
    num_items: usize,
    framework: Regularization<T>,
) -> Result<FactorModel<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
    init_with(&mut rng, h, num_users, num_items, framework)
}

/// Trains a freshly initialized model on `data`.
pub fn train<T: Scalar>(
    data: &RatingsDataset<T>,
    h: &Hyperparams<T>,
    framework: Regularization<T>,
) -> Result<TrainResult<T>> {
    if data.is_empty() {
        return Err(Error::contract("cannot train on an empty dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
    let model = init_with(&mut rng, h, data.num_users(), data.num_items(), framework)?;
    train_from(model, data, h, &mut rng)
}

/// Continues training an existing model. The generator drives the SGD
/// visiting order.
pub fn train_from<T: Scalar>(
    mut model: FactorModel<T>,
    data: &RatingsDataset<T>,
    h: &Hyperparams<T>,
    rng: &mut ChaCha8Rng,
) -> Result<TrainResult<T>> {
    h.validate()?;
    model.check_dims(data)?;
    if data.is_empty() {
        return Err(Error::contract("cannot train on an empty dataset"));
    }
    if model.k() != h.k {
        return Err(Error::contract(format!(
            "model has k={}, hyperparameters say k={}",
            model.k(),
            h.k
        )));
    }

    let mut trace: Vec<LossBreakdown<T>> = Vec::with_capacity(h.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut scratch = SgdScratch::new(h.k);
    let mut pair_updates = 0u64;
    let mut converged = false;

    for epoch in 1..=h.epochs {
        match h.mode {
            TrainMode::Sgd => {
                order.shuffle(rng);
                for &pos in &order {
                    sgd_step_with(&mut model, data, pos, h, &mut scratch);
                    pair_updates += 1;
                }
            }
            TrainMode::BatchGd => {
                let grad = full_gradient(&model, data)?;
                let (users, items, user_reg, item_reg) = model.parts_mut();
                users.sub_scaled(h.eta_feat, &grad.users);
                items.sub_scaled(h.eta_feat, &grad.items);
                if let (Some(b), Some(db)) = (user_reg, &grad.user_reg) {
                    b.sub_scaled(h.eta_reg, db);
                }
                if let (Some(g), Some(dg)) = (item_reg, &grad.item_reg) {
                    g.sub_scaled(h.eta_reg, dg);
                }
                pair_updates += data.len() as u64;
            }
        }

        if !model.is_finite() {
            return Err(Error::Divergence {
                epoch,
                what: "model parameters",
            });
        }
        let loss = model.total_loss(data)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, what: "loss" });
        }
        let prev = trace.last().map(|l| l.total);
        trace.push(loss);
        if let Some(prev) = prev {
            if (loss.total - prev).abs() < h.early_stop_tol * prev.max(T::one()) {
                converged = true;
                break;
            }
        }
    }

    Ok(TrainResult {
        model,
        epochs_run: trace.len(),
        trace,
        converged,
        pair_updates,
    })
}

struct SgdScratch<T> {
    u: Vec<T>,
    v: Vec<T>,
    pen_u: Vec<T>,
    pen_v: Vec<T>,
}

impl<T: Scalar> SgdScratch<T> {
    fn new(k: usize) -> Self {
        SgdScratch {
            u: vec![T::zero(); k],
            v: vec![T::zero(); k],
            pen_u: vec![T::zero(); k],
            pen_v: vec![T::zero(); k],
        }
    }
}

/// One stochastic update for the observation at `pos` of `data`, exactly as
/// [`train`] applies it. All gradients are evaluated at the pre-update
/// parameters. Penalty gradients are divided by the user's (item's) rating
/// count so that an epoch applies each penalty with total weight one.
pub fn sgd_step<T: Scalar>(
    model: &mut FactorModel<T>,
    data: &RatingsDataset<T>,
    pos: usize,
    h: &Hyperparams<T>,
) -> Result<()> {
    model.check_dims(data)?;
    if pos >= data.len() {
        return Err(Error::contract(format!("observation {pos} out of range")));
    }
    sgd_step_with(model, data, pos, h, &mut SgdScratch::new(model.k()));
    Ok(())
}

fn sgd_step_with<T: Scalar>(
    model: &mut FactorModel<T>,
    data: &RatingsDataset<T>,
    pos: usize,
    h: &Hyperparams<T>,
    s: &mut SgdScratch<T>,
) {
    let r = data.observations()[pos];
    let (i, j) = (r.user, r.item);
    let inv_i = T::one() / T::of_usize(data.user_count(i));
    let inv_j = T::one() / T::of_usize(data.item_count(j));
    let two = T::of(2.0);

    s.u.copy_from_slice(model.user(i));
    s.v.copy_from_slice(model.item(j));
    user_penalty_into(model, i, &mut s.pen_u);
    item_penalty_into(model, j, &mut s.pen_v);
    let err = two * (dot(&s.u, &s.v) - r.value);

    let vector_dot = model.kind() == FrameworkKind::VectorDot;
    let (sign_b, sign_g) = if vector_dot {
        let b = model.user_coef(i).expect("vector_dot");
        let g = model.item_coef(j).expect("vector_dot");
        (sign_of(dot(&s.u, b)), sign_of(dot(&s.v, g)))
    } else {
        (T::zero(), T::zero())
    };

    let eta = h.eta_feat;
    for (x, (&v, &p)) in model.user_mut(i).iter_mut().zip(s.v.iter().zip(&s.pen_u)) {
        *x = *x - eta * (err * v + p * inv_i);
    }
    for (x, (&u, &p)) in model.item_mut(j).iter_mut().zip(s.u.iter().zip(&s.pen_v)) {
        *x = *x - eta * (err * u + p * inv_j);
    }
    if vector_dot {
        let step_b = h.eta_reg * sign_b * inv_i;
        for (c, &u) in model.user_coef_mut(i).expect("vector_dot").iter_mut().zip(&s.u) {
            *c = *c - step_b * u;
        }
        let step_g = h.eta_reg * sign_g * inv_j;
        for (c, &v) in model.item_coef_mut(j).expect("vector_dot").iter_mut().zip(&s.v) {
            *c = *c - step_g * v;
        }
    }
}
