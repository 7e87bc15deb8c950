//! Matrix factorization for explicit ratings under four regularization
//! frameworks: none, one global scalar on the feature norms, per-vector
//! scalars on the feature norms, and per-vector coefficient vectors entering
//! through |β·u| dot products.
//!
//! Besides training and evaluation (MAE and a popularity-bias metric) the
//! crate computes the implied regularization coefficient of every user, the
//! value that would make that user's stationarity condition hold, so the
//! disagreement across users can be inspected directly.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod data;
pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod gradients;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod trainer;

pub use dataset::{IdMap, Rating, RatingsDataset};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{FactorModel, FrameworkKind, LossBreakdown, Regularization};
pub use scalar::Scalar;
pub use trainer::{init_model, sgd_step, train, Hyperparams, TrainMode, TrainResult};

pub type Dataset = RatingsDataset<f64>;
pub type Model = FactorModel<f64>;
pub type Framework = Regularization<f64>;
pub type Params = Hyperparams<f64>;
pub type Loss = LossBreakdown<f64>;
pub type Trained = TrainResult<f64>;
pub type Gradients = gradients::GradientSet<f64>;
pub type Spread = diagnostics::SpreadReport<f64>;
pub type Eval = metrics::EvalReport<f64>;
pub type Spec = experiment::GridSpec<f64>;
pub type Surface = experiment::SurfaceTable<f64>;

pub type Dataset32 = RatingsDataset<f32>;
pub type Model32 = FactorModel<f32>;
pub type Params32 = Hyperparams<f32>;
