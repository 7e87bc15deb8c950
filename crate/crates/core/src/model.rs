//! Factor model, regularization frameworks and the training objective.
//!
//! The objective is the squared error over observed ratings plus one of four
//! penalties:
//!
//! | framework           | penalty                                   |
//! |---------------------|-------------------------------------------|
//! | `None`              | 0                                         |
//! | `GlobalScalar`      | β (Σᵢ ‖uᵢ‖ + Σⱼ ‖vⱼ‖)                      |
//! | `PerVectorScalar`   | Σᵢ βᵢ ‖uᵢ‖ + Σⱼ γⱼ ‖vⱼ‖                    |
//! | `VectorDot`         | Σᵢ \|βᵢ·uᵢ\| + Σⱼ \|γⱼ·vⱼ\|                  |
//!
//! Norms are Euclidean. For `VectorDot` the coefficient vectors βᵢ, γⱼ are
//! rows of the model's `user_reg` / `item_reg` matrices and are trained along
//! with the features.

use std::fmt;
use std::str::FromStr;

use crate::dataset::RatingsDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{dot, norm, Scalar};

/// Framework tag without coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameworkKind {
    None,
    GlobalScalar,
    PerVectorScalar,
    VectorDot,
}

impl FrameworkKind {
    pub const ALL: [FrameworkKind; 4] = [
        FrameworkKind::None,
        FrameworkKind::GlobalScalar,
        FrameworkKind::PerVectorScalar,
        FrameworkKind::VectorDot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FrameworkKind::None => "none",
            FrameworkKind::GlobalScalar => "global_scalar",
            FrameworkKind::PerVectorScalar => "per_vector_scalar",
            FrameworkKind::VectorDot => "vector_dot",
        }
    }
}

impl fmt::Display for FrameworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrameworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        FrameworkKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown framework `{s}` (expected none, global_scalar, per_vector_scalar or vector_dot)"
                ))
            })
    }
}

/// Regularization framework with its scalar coefficients. `VectorDot`
/// carries none here; its coefficient vectors live in [`FactorModel`].
#[derive(Clone, Debug, PartialEq)]
pub enum Regularization<T> {
    None,
    GlobalScalar { beta: T },
    PerVectorScalar { user: Vec<T>, item: Vec<T> },
    VectorDot,
}

impl<T: Scalar> Regularization<T> {
    pub fn kind(&self) -> FrameworkKind {
        match self {
            Regularization::None => FrameworkKind::None,
            Regularization::GlobalScalar { .. } => FrameworkKind::GlobalScalar,
            Regularization::PerVectorScalar { .. } => FrameworkKind::PerVectorScalar,
            Regularization::VectorDot => FrameworkKind::VectorDot,
        }
    }

    /// Builds a framework of the given kind with every scalar coefficient set
    /// to `magnitude`. `VectorDot` ignores it (the trainer uses the magnitude
    /// as the initial coefficient-vector entry instead).
    pub fn uniform(kind: FrameworkKind, magnitude: T, num_users: usize, num_items: usize) -> Self {
        match kind {
            FrameworkKind::None => Regularization::None,
            FrameworkKind::GlobalScalar => Regularization::GlobalScalar { beta: magnitude },
            FrameworkKind::PerVectorScalar => Regularization::PerVectorScalar {
                user: vec![magnitude; num_users],
                item: vec![magnitude; num_items],
            },
            FrameworkKind::VectorDot => Regularization::VectorDot,
        }
    }

    /// Scalar coefficients must be finite and nonnegative.
    pub fn validate(&self) -> Result<()> {
        let bad = |x: &T| !(x.is_finite() && *x >= T::zero());
        match self {
            Regularization::GlobalScalar { beta } if bad(beta) => Err(Error::contract(format!(
                "global coefficient must be nonnegative, got {beta}"
            ))),
            Regularization::PerVectorScalar { user, item } => {
                if let Some(x) = user.iter().chain(item).find(|x| bad(x)) {
                    Err(Error::contract(format!(
                        "per-vector coefficients must be nonnegative, got {x}"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Fit and penalty parts of the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown<T> {
    pub fit: T,
    pub penalty: T,
    pub total: T,
}

impl<T: Scalar> LossBreakdown<T> {
    pub fn new(fit: T, penalty: T) -> Self {
        LossBreakdown {
            fit,
            penalty,
            total: fit + penalty,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.fit.is_finite() && self.penalty.is_finite() && self.total.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel<T> {
    users: Matrix<T>,
    items: Matrix<T>,
    user_reg: Option<Matrix<T>>,
    item_reg: Option<Matrix<T>>,
    framework: Regularization<T>,
}

impl<T: Scalar> FactorModel<T> {
    /// Model under a scalar framework (or none). Use [`FactorModel::vector_dot`]
    /// for the vector framework.
    pub fn new(users: Matrix<T>, items: Matrix<T>, framework: Regularization<T>) -> Result<Self> {
        if framework.kind() == FrameworkKind::VectorDot {
            return Err(Error::contract(
                "vector_dot models need coefficient matrices; use FactorModel::vector_dot",
            ));
        }
        Self::assemble(users, items, None, None, framework)
    }

    pub fn vector_dot(
        users: Matrix<T>,
        items: Matrix<T>,
        user_reg: Matrix<T>,
        item_reg: Matrix<T>,
    ) -> Result<Self> {
        Self::assemble(
            users,
            items,
            Some(user_reg),
            Some(item_reg),
            Regularization::VectorDot,
        )
    }

    pub(crate) fn assemble(
        users: Matrix<T>,
        items: Matrix<T>,
        user_reg: Option<Matrix<T>>,
        item_reg: Option<Matrix<T>>,
        framework: Regularization<T>,
    ) -> Result<Self> {
        let k = users.cols();
        if k == 0 {
            return Err(Error::contract("latent dimension must be at least 1"));
        }
        if items.cols() != k {
            return Err(Error::contract(format!(
                "item factors have {} columns, user factors {k}",
                items.cols()
            )));
        }
        let is_vector = framework.kind() == FrameworkKind::VectorDot;
        if is_vector != (user_reg.is_some() && item_reg.is_some())
            || user_reg.is_some() != item_reg.is_some()
        {
            return Err(Error::contract(
                "coefficient matrices must exist exactly under vector_dot",
            ));
        }
        if let (Some(b), Some(g)) = (&user_reg, &item_reg) {
            if (b.rows(), b.cols()) != (users.rows(), k) || (g.rows(), g.cols()) != (items.rows(), k)
            {
                return Err(Error::contract("coefficient matrices must mirror the factor shapes"));
            }
        }
        if let Regularization::PerVectorScalar { user, item } = &framework {
            if user.len() != users.rows() || item.len() != items.rows() {
                return Err(Error::contract(format!(
                    "per-vector coefficients have lengths {}/{}, model is {}x{}",
                    user.len(),
                    item.len(),
                    users.rows(),
                    items.rows()
                )));
            }
        }
        framework.validate()?;
        Ok(FactorModel {
            users,
            items,
            user_reg,
            item_reg,
            framework,
        })
    }

    pub fn k(&self) -> usize {
        self.users.cols()
    }

    pub fn num_users(&self) -> usize {
        self.users.rows()
    }

    pub fn num_items(&self) -> usize {
        self.items.rows()
    }

    pub fn framework(&self) -> &Regularization<T> {
        &self.framework
    }

    pub fn kind(&self) -> FrameworkKind {
        self.framework.kind()
    }

    pub fn users(&self) -> &Matrix<T> {
        &self.users
    }

    pub fn items(&self) -> &Matrix<T> {
        &self.items
    }

    pub fn user_reg(&self) -> Option<&Matrix<T>> {
        self.user_reg.as_ref()
    }

    pub fn item_reg(&self) -> Option<&Matrix<T>> {
        self.item_reg.as_ref()
    }

    pub fn user(&self, i: usize) -> &[T] {
        self.users.row(i)
    }

    pub fn item(&self, j: usize) -> &[T] {
        self.items.row(j)
    }

    pub fn user_mut(&mut self, i: usize) -> &mut [T] {
        self.users.row_mut(i)
    }

    pub fn item_mut(&mut self, j: usize) -> &mut [T] {
        self.items.row_mut(j)
    }

    /// βᵢ; `None` unless the framework is `VectorDot`.
    pub fn user_coef(&self, i: usize) -> Option<&[T]> {
        self.user_reg.as_ref().map(|b| b.row(i))
    }

    /// γⱼ; `None` unless the framework is `VectorDot`.
    pub fn item_coef(&self, j: usize) -> Option<&[T]> {
        self.item_reg.as_ref().map(|g| g.row(j))
    }

    pub fn user_coef_mut(&mut self, i: usize) -> Option<&mut [T]> {
        self.user_reg.as_mut().map(|b| b.row_mut(i))
    }

    pub fn item_coef_mut(&mut self, j: usize) -> Option<&mut [T]> {
        self.item_reg.as_mut().map(|g| g.row_mut(j))
    }

    #[allow(clippy::type_complexity)]
    pub(crate) fn parts_mut(
        &mut self,
    ) -> (&mut Matrix<T>, &mut Matrix<T>, Option<&mut Matrix<T>>, Option<&mut Matrix<T>>) {
        (
            &mut self.users,
            &mut self.items,
            self.user_reg.as_mut(),
            self.item_reg.as_mut(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.users.is_finite()
            && self.items.is_finite()
            && self.user_reg.as_ref().is_none_or(Matrix::is_finite)
            && self.item_reg.as_ref().is_none_or(Matrix::is_finite)
    }

    /// uᵢ·vⱼ, unclamped.
    pub fn predict(&self, i: usize, j: usize) -> Result<T> {
        if i >= self.num_users() || j >= self.num_items() {
            return Err(Error::contract(format!(
                "prediction index ({i}, {j}) outside {}x{}",
                self.num_users(),
                self.num_items()
            )));
        }
        Ok(dot(self.user(i), self.item(j)))
    }

    /// Penalty term of the objective for the active framework.
    pub fn penalty(&self) -> T {
        match &self.framework {
            Regularization::None => T::zero(),
            Regularization::GlobalScalar { beta } => {
                let sum: T = self
                    .users
                    .iter_rows()
                    .chain(self.items.iter_rows())
                    .map(norm)
                    .fold(T::zero(), |a, b| a + b);
                *beta * sum
            }
            Regularization::PerVectorScalar { user, item } => {
                let u = self
                    .users
                    .iter_rows()
                    .zip(user)
                    .fold(T::zero(), |acc, (row, &c)| acc + c * norm(row));
                self.items
                    .iter_rows()
                    .zip(item)
                    .fold(u, |acc, (row, &c)| acc + c * norm(row))
            }
            Regularization::VectorDot => {
                let (b, g) = match (&self.user_reg, &self.item_reg) {
                    (Some(b), Some(g)) => (b, g),
                    _ => unreachable!("vector_dot model without coefficient matrices"),
                };
                let u = self
                    .users
                    .iter_rows()
                    .zip(b.iter_rows())
                    .fold(T::zero(), |acc, (x, c)| acc + dot(x, c).abs());
                self.items
                    .iter_rows()
                    .zip(g.iter_rows())
                    .fold(u, |acc, (x, c)| acc + dot(x, c).abs())
            }
        }
    }

    pub(crate) fn check_dims(&self, data: &RatingsDataset<T>) -> Result<()> {
        if data.num_users() != self.num_users() || data.num_items() != self.num_items() {
            return Err(Error::contract(format!(
                "model is {}x{}, dataset is {}x{}",
                self.num_users(),
                self.num_items(),
                data.num_users(),
                data.num_items()
            )));
        }
        Ok(())
    }

    /// Squared error over the observed ratings of `data`.
    pub fn fit_error(&self, data: &RatingsDataset<T>) -> Result<T> {
        self.check_dims(data)?;
        Ok(data.observations().iter().fold(T::zero(), |acc, r| {
            let e = r.value - dot(self.user(r.user), self.item(r.item));
            acc + e * e
        }))
    }

    pub fn total_loss(&self, data: &RatingsDataset<T>) -> Result<LossBreakdown<T>> {
        Ok(LossBreakdown::new(self.fit_error(data)?, self.penalty()))
    }
}
