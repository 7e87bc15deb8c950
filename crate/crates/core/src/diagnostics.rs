//! Implied regularization coefficients.
//!
//! Setting the user gradient of the scalar-penalty objective to zero and
//! projecting onto uᵢ gives, per user,
//!
//! ```text
//! β = −(1/‖uᵢ‖) Σ_{j∈Ωᵢ} 2 (Rᵢⱼ − uᵢ·vⱼ) (uᵢ·vⱼ)
//! ```
//!
//! A single global β can only be stationary if this value agrees across all
//! users; [`implied_beta_spread`] measures how far it is from doing so. The
//! same right-hand side is the per-user coefficient of the per-vector
//! framework.
//!
//! [`SignConvention::Unnegated`] drops the leading minus, reproducing the
//! form obtained when the fit gradient is written with the ascent sign. The
//! spread statistics other than the mean are unaffected by the choice.

use std::io::Write;

use crate::dataset::RatingsDataset;
use crate::error::{Error, Result};
use crate::gradients::sign;
use crate::model::{FactorModel, FrameworkKind};
use crate::scalar::{dot, norm, Scalar};

/// Users whose feature norm is at or below this are singular for the solve.
pub const MIN_USER_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SignConvention {
    /// Derived from the descent-consistent gradient.
    #[default]
    Corrected,
    /// Leading minus dropped.
    Unnegated,
}

/// Implied coefficient for user `i`.
pub fn implied_beta<T: Scalar>(
    model: &FactorModel<T>,
    data: &RatingsDataset<T>,
    i: usize,
    convention: SignConvention,
) -> Result<T> {
    model.check_dims(data)?;
    if i >= model.num_users() {
        return Err(Error::contract(format!("user {i} out of range")));
    }
    if data.user_count(i) == 0 {
        return Err(Error::contract(format!("user {i} has no observed ratings")));
    }
    let u = model.user(i);
    let n = norm(u);
    if n <= T::of(MIN_USER_NORM) {
        return Err(Error::Singular(format!("user {i} has a zero feature vector")));
    }
    let two = T::of(2.0);
    let sum = data.user_ratings(i).fold(T::zero(), |acc, r| {
        let p = dot(u, model.item(r.item));
        acc + two * (r.value - p) * p
    });
    let value = sum / n;
    Ok(match convention {
        SignConvention::Corrected => -value,
        SignConvention::Unnegated => value,
    })
}

/// Distribution of implied coefficients across eligible users.
#[derive(Clone, Debug, PartialEq)]
pub struct SpreadReport<T> {
    /// User index of each entry in `values`.
    pub users: Vec<usize>,
    pub values: Vec<T>,
    pub min: T,
    pub max: T,
    pub mean: T,
    /// Population standard deviation.
    pub std: T,
    /// std / |mean|; `None` when the mean is zero.
    pub coefficient_of_variation: Option<T>,
    pub num_users: usize,
    /// Users skipped for having no ratings or a (near-)zero feature vector.
    pub excluded: usize,
}

impl<T: Scalar> SpreadReport<T> {
    pub fn from_values(users: Vec<usize>, values: Vec<T>, excluded: usize) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 eligible users, found {} ({excluded} excluded)",
                values.len()
            )));
        }
        let n = T::of_usize(values.len());
        let min = values.iter().copied().fold(T::infinity(), T::min);
        let max = values.iter().copied().fold(T::neg_infinity(), T::max);
        let sum = values.iter().fold(T::zero(), |a, &b| a + b);
        // rounding can push the mean of identical values just outside them
        let mean = (sum / n).max(min).min(max);
        let var = values
            .iter()
            .fold(T::zero(), |a, &x| a + (x - mean) * (x - mean))
            / n;
        let std = var.sqrt();
        let coefficient_of_variation = (mean != T::zero()).then(|| std / mean.abs());
        Ok(SpreadReport {
            num_users: values.len(),
            users,
            values,
            min,
            max,
            mean,
            std,
            coefficient_of_variation,
            excluded,
        })
    }

    pub fn range(&self) -> T {
        self.max - self.min
    }

    /// `user_index,implied_beta` rows followed by a `#` summary line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "user_index,implied_beta")?;
        for (u, v) in self.users.iter().zip(&self.values) {
            writeln!(w, "{u},{v}")?;
        }
        let cv = self
            .coefficient_of_variation
            .map_or_else(|| "undefined".to_owned(), |c| c.to_string());
        writeln!(
            w,
            "# num_users={} excluded={} min={} max={} mean={} std={} cv={}",
            self.num_users, self.excluded, self.min, self.max, self.mean, self.std, cv
        )
    }
}

/// Implied coefficient for every eligible user. Ineligible users are
/// counted, not reported.
pub fn implied_beta_spread<T: Scalar>(
    model: &FactorModel<T>,
    data: &RatingsDataset<T>,
    convention: SignConvention,
) -> Result<SpreadReport<T>> {
    model.check_dims(data)?;
    let mut users = Vec::new();
    let mut values = Vec::new();
    let mut excluded = 0;
    for i in 0..model.num_users() {
        match implied_beta(model, data, i, convention) {
            Ok(v) => {
                users.push(i);
                values.push(v);
            }
            Err(Error::Singular(_)) | Err(Error::Contract(_)) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    SpreadReport::from_values(users, values, excluded)
}

/// Per-user coefficients usable to configure the per-vector framework:
/// the corrected implied value floored at zero, and zero for ineligible
/// users.
pub fn plug_in_user_coefficients<T: Scalar>(
    model: &FactorModel<T>,
    data: &RatingsDataset<T>,
) -> Result<Vec<T>> {
    model.check_dims(data)?;
    Ok((0..model.num_users())
        .map(|i| {
            implied_beta(model, data, i, SignConvention::Corrected)
                .map_or(T::zero(), |v| v.max(T::zero()))
        })
        .collect())
}

/// Squared norm of βᵢ implied by the stationarity of ∂L/∂uᵢ under the
/// vector framework, next to the actual value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSqCheck<T> {
    pub implied: T,
    pub actual: T,
}

impl<T: Scalar> NormSqCheck<T> {
    pub fn gap(&self) -> T {
        (self.implied - self.actual).abs()
    }
}

/// `Σ_{j∈Ωᵢ} 2(Rᵢⱼ − uᵢ·vⱼ)(βᵢ·vⱼ) / sign(uᵢ·βᵢ)` alongside ‖βᵢ‖².
pub fn implied_beta_norm_sq<T: Scalar>(
    model: &FactorModel<T>,
    data: &RatingsDataset<T>,
    i: usize,
) -> Result<NormSqCheck<T>> {
    model.check_dims(data)?;
    if model.kind() != FrameworkKind::VectorDot {
        return Err(Error::contract("implied_beta_norm_sq needs a vector_dot model"));
    }
    if i >= model.num_users() {
        return Err(Error::contract(format!("user {i} out of range")));
    }
    let u = model.user(i);
    let b = model.user_coef(i).expect("vector_dot");
    let s = match sign(dot(u, b)) {
        0 => {
            return Err(Error::Singular(format!(
                "user {i}: feature and coefficient vectors are orthogonal"
            )))
        }
        1 => T::one(),
        _ => -T::one(),
    };
    let two = T::of(2.0);
    let sum = data.user_ratings(i).fold(T::zero(), |acc, r| {
        let v = model.item(r.item);
        acc + two * (r.value - dot(u, v)) * dot(b, v)
    });
    Ok(NormSqCheck {
        implied: sum / s,
        actual: dot(b, b),
    })
}
