//! Analytic (sub)gradients of the objective for every framework.
//!
//! Conventions at non-differentiable points: `sign(0) = 0`, and the gradient
//! of ‖u‖ at `u = 0` is the zero vector. No smoothing is applied.
//!
//! Two deliberate departures from the textbook-printed forms:
//! - the fit part of ∂L/∂uᵢ is `2(uᵢ·vⱼ − Rᵢⱼ)vⱼ`, the descent direction of
//!   the squared error (the other sign ascends it);
//! - ∂L/∂γⱼ is `sign(vⱼ·γⱼ)vⱼ`, mirroring ∂L/∂βᵢ. The variant written with
//!   `sign(uᵢ·vⱼ)` is not the derivative of `|γⱼ·vⱼ|` and fails a
//!   finite-difference check.

use crate::dataset::RatingsDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{FactorModel, FrameworkKind, Regularization};
use crate::scalar::{dot, norm, Scalar};

/// −1, 0 or +1. No epsilon band around zero.
#[inline]
pub fn sign<T: Scalar>(x: T) -> i8 {
    if x > T::zero() {
        1
    } else if x < T::zero() {
        -1
    } else {
        0
    }
}

#[inline]
pub(crate) fn sign_of<T: Scalar>(x: T) -> T {
    match sign(x) {
        1 => T::one(),
        -1 => -T::one(),
        _ => T::zero(),
    }
}

/// (c/‖x‖)·x, zero at x = 0.
fn scaled_unit_into<T: Scalar>(c: T, x: &[T], out: &mut [T]) {
    let n = norm(x);
    if n == T::zero() {
        out.fill(T::zero());
        return;
    }
    let s = c / n;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = s * v;
    }
}

fn signed_copy_into<T: Scalar>(s: T, x: &[T], out: &mut [T]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o = s * v;
    }
}

fn signed_copy<T: Scalar>(s: T, x: &[T]) -> Vec<T> {
    x.iter().map(|&v| s * v).collect()
}

/// Full gradient of the objective, shaped like the model.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet<T> {
    pub users: Matrix<T>,
    pub items: Matrix<T>,
    pub user_reg: Option<Matrix<T>>,
    pub item_reg: Option<Matrix<T>>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn is_finite(&self) -> bool {
        self.users.is_finite()
            && self.items.is_finite()
            && self.user_reg.as_ref().is_none_or(Matrix::is_finite)
            && self.item_reg.as_ref().is_none_or(Matrix::is_finite)
    }

    pub fn is_zero(&self) -> bool {
        let zero = |m: &Matrix<T>| m.as_slice().iter().all(|x| *x == T::zero());
        zero(&self.users)
            && zero(&self.items)
            && self.user_reg.as_ref().is_none_or(zero)
            && self.item_reg.as_ref().is_none_or(zero)
    }
}

/// Penalty part of ∂L/∂uᵢ.
pub fn grad_u_penalty<T: Scalar>(model: &FactorModel<T>, i: usize) -> Vec<T> {
    let mut out = vec![T::zero(); model.k()];
    user_penalty_into(model, i, &mut out);
    out
}

/// Penalty part of ∂L/∂vⱼ.
pub fn grad_v_penalty<T: Scalar>(model: &FactorModel<T>, j: usize) -> Vec<T> {
    let mut out = vec![T::zero(); model.k()];
    item_penalty_into(model, j, &mut out);
    out
}

pub(crate) fn user_penalty_into<T: Scalar>(model: &FactorModel<T>, i: usize, out: &mut [T]) {
    let u = model.user(i);
    match model.framework() {
        Regularization::None => out.fill(T::zero()),
        Regularization::GlobalScalar { beta } => scaled_unit_into(*beta, u, out),
        Regularization::PerVectorScalar { user, .. } => scaled_unit_into(user[i], u, out),
        Regularization::VectorDot => {
            let b = model.user_coef(i).expect("vector_dot model has coefficients");
            signed_copy_into(sign_of(dot(u, b)), b, out)
        }
    }
}

pub(crate) fn item_penalty_into<T: Scalar>(model: &FactorModel<T>, j: usize, out: &mut [T]) {
    let v = model.item(j);
    match model.framework() {
        Regularization::None => out.fill(T::zero()),
        Regularization::GlobalScalar { beta } => scaled_unit_into(*beta, v, out),
        Regularization::PerVectorScalar { item, .. } => scaled_unit_into(item[j], v, out),
        Regularization::VectorDot => {
            let g = model.item_coef(j).expect("vector_dot model has coefficients");
            signed_copy_into(sign_of(dot(v, g)), g, out)
        }
    }
}

fn require_vector_dot<T: Scalar>(model: &FactorModel<T>, what: &str) -> Result<()> {
    if model.kind() != FrameworkKind::VectorDot {
        return Err(Error::contract(format!(
            "{what} is only defined under vector_dot, model uses {}",
            model.kind()
        )));
    }
    Ok(())
}

/// ∂L/∂βᵢ = sign(uᵢ·βᵢ) uᵢ.
pub fn grad_beta<T: Scalar>(model: &FactorModel<T>, i: usize) -> Result<Vec<T>> {
    require_vector_dot(model, "grad_beta")?;
    let u = model.user(i);
    let b = model.user_coef(i).expect("checked");
    Ok(signed_copy(sign_of(dot(u, b)), u))
}

/// ∂L/∂γⱼ = sign(vⱼ·γⱼ) vⱼ.
pub fn grad_gamma<T: Scalar>(model: &FactorModel<T>, j: usize) -> Result<Vec<T>> {
    require_vector_dot(model, "grad_gamma")?;
    let v = model.item(j);
    let g = model.item_coef(j).expect("checked");
    Ok(signed_copy(sign_of(dot(v, g)), v))
}

/// Gradient of the full objective (observed-entry fit + penalty).
///
/// Each row accumulates its observations in dataset order, so the result
/// does not depend on how callers partition the work.
pub fn full_gradient<T: Scalar>(
    model: &FactorModel<T>,
    data: &RatingsDataset<T>,
) -> Result<GradientSet<T>> {
    model.check_dims(data)?;
    let k = model.k();
    let two = T::of(2.0);
    let mut users = Matrix::zeros(model.num_users(), k);
    let mut items = Matrix::zeros(model.num_items(), k);

    for i in 0..model.num_users() {
        let u = model.user(i);
        let row = users.row_mut(i);
        for r in data.user_ratings(i) {
            let v = model.item(r.item);
            let s = two * (dot(u, v) - r.value);
            for (g, &x) in row.iter_mut().zip(v) {
                *g = *g + s * x;
            }
        }
        for (g, p) in row.iter_mut().zip(grad_u_penalty(model, i)) {
            *g = *g + p;
        }
    }
    for j in 0..model.num_items() {
        let v = model.item(j);
        let row = items.row_mut(j);
        for r in data.item_ratings(j) {
            let u = model.user(r.user);
            let s = two * (dot(v, u) - r.value);
            for (g, &x) in row.iter_mut().zip(u) {
                *g = *g + s * x;
            }
        }
        for (g, p) in row.iter_mut().zip(grad_v_penalty(model, j)) {
            *g = *g + p;
        }
    }

    let (user_reg, item_reg) = if model.kind() == FrameworkKind::VectorDot {
        let mut b = Matrix::zeros(model.num_users(), k);
        for i in 0..model.num_users() {
            b.row_mut(i).copy_from_slice(&grad_beta(model, i)?);
        }
        let mut g = Matrix::zeros(model.num_items(), k);
        for j in 0..model.num_items() {
            g.row_mut(j).copy_from_slice(&grad_gamma(model, j)?);
        }
        (Some(b), Some(g))
    } else {
        (None, None)
    };

    Ok(GradientSet {
        users,
        items,
        user_reg,
        item_reg,
    })
}
