//! Test-only instance generators and brute-force oracles. Nothing here calls
//! into the library's loss, gradient or metric code.

#![allow(dead_code)]

use std::collections::HashMap;

use mfreg::{FactorModel, FrameworkKind, Matrix, Rating, RatingsDataset, Regularization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix<f64> {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Random ratings in [1, 5]; each cell observed with probability `density`,
/// at least one observation overall.
pub fn random_data(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> RatingsDataset<f64> {
    let mut obs = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.random::<f64>() < density {
                obs.push(Rating { user: i, item: j, value: rng.random_range(1.0..5.0) });
            }
        }
    }
    if obs.is_empty() {
        obs.push(Rating { user: 0, item: 0, value: 3.0 });
    }
    RatingsDataset::new(m, n, obs, 1.0, 5.0).unwrap()
}

/// Random model of the given framework; scalar coefficients in [0, 1),
/// everything else in [-1, 1).
pub fn random_model(rng: &mut ChaCha8Rng, kind: FrameworkKind, m: usize, n: usize, k: usize) -> FactorModel<f64> {
    let u = uniform_matrix(rng, m, k, -1.0, 1.0);
    let v = uniform_matrix(rng, n, k, -1.0, 1.0);
    match kind {
        FrameworkKind::None => FactorModel::new(u, v, Regularization::None).unwrap(),
        FrameworkKind::GlobalScalar => {
            FactorModel::new(u, v, Regularization::GlobalScalar { beta: rng.random_range(0.0..1.0) }).unwrap()
        }
        FrameworkKind::PerVectorScalar => {
            let user = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
            let item = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            FactorModel::new(u, v, Regularization::PerVectorScalar { user, item }).unwrap()
        }
        FrameworkKind::VectorDot => {
            let b = uniform_matrix(rng, m, k, -1.0, 1.0);
            let g = uniform_matrix(rng, n, k, -1.0, 1.0);
            FactorModel::vector_dot(u, v, b, g).unwrap()
        }
    }
}

/// Plain nested-vector copy of a model, so oracles can work without the
/// library's accessors.
#[derive(Clone, Debug)]
pub struct RawModel {
    pub kind: FrameworkKind,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub beta: f64,
    pub user_coef: Vec<f64>,
    pub item_coef: Vec<f64>,
}

fn rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

impl RawModel {
    pub fn of(model: &FactorModel<f64>) -> Self {
        let (beta, user_coef, item_coef) = match model.framework() {
            Regularization::GlobalScalar { beta } => (*beta, vec![], vec![]),
            Regularization::PerVectorScalar { user, item } => (0.0, user.clone(), item.clone()),
            _ => (0.0, vec![], vec![]),
        };
        RawModel {
            kind: model.kind(),
            u: rows(model.users()),
            v: rows(model.items()),
            b: model.user_reg().map(rows).unwrap_or_default(),
            g: model.item_reg().map(rows).unwrap_or_default(),
            beta,
            user_coef,
            item_coef,
        }
    }

    pub fn to_model(&self) -> FactorModel<f64> {
        let u = Matrix::from_rows(&self.u);
        let v = Matrix::from_rows(&self.v);
        match self.kind {
            FrameworkKind::None => FactorModel::new(u, v, Regularization::None).unwrap(),
            FrameworkKind::GlobalScalar => {
                FactorModel::new(u, v, Regularization::GlobalScalar { beta: self.beta }).unwrap()
            }
            FrameworkKind::PerVectorScalar => FactorModel::new(
                u,
                v,
                Regularization::PerVectorScalar { user: self.user_coef.clone(), item: self.item_coef.clone() },
            )
            .unwrap(),
            FrameworkKind::VectorDot => {
                FactorModel::vector_dot(u, v, Matrix::from_rows(&self.b), Matrix::from_rows(&self.g)).unwrap()
            }
        }
    }
}

pub fn mac(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for idx in 0..a.len() {
        s += a[idx] * b[idx];
    }
    s
}

pub fn l2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rating_table(data: &RatingsDataset<f64>) -> HashMap<(usize, usize), f64> {
    data.observations().iter().map(|r| ((r.user, r.item), r.value)).collect()
}

/// Penalty by direct per-row accumulation.
pub fn oracle_penalty(m: &RawModel) -> f64 {
    let mut p = 0.0;
    match m.kind {
        FrameworkKind::None => {}
        FrameworkKind::GlobalScalar => {
            for row in m.u.iter().chain(&m.v) {
                p += m.beta * l2(row);
            }
        }
        FrameworkKind::PerVectorScalar => {
            for (row, c) in m.u.iter().zip(&m.user_coef) {
                p += c * l2(row);
            }
            for (row, c) in m.v.iter().zip(&m.item_coef) {
                p += c * l2(row);
            }
        }
        FrameworkKind::VectorDot => {
            for (row, c) in m.u.iter().zip(&m.b) {
                p += mac(row, c).abs();
            }
            for (row, c) in m.v.iter().zip(&m.g) {
                p += mac(row, c).abs();
            }
        }
    }
    p
}

/// Objective by a double loop over every (i, j) cell, skipping unobserved
/// ones.
pub fn oracle_loss(m: &RawModel, table: &HashMap<(usize, usize), f64>) -> f64 {
    let mut fit = 0.0;
    for i in 0..m.u.len() {
        for j in 0..m.v.len() {
            if let Some(r) = table.get(&(i, j)) {
                let e = r - mac(&m.u[i], &m.v[j]);
                fit += e * e;
            }
        }
    }
    fit + oracle_penalty(m)
}

/// Central difference of `f` with respect to one scalar parameter.
pub fn central_diff(m: &RawModel, step: f64, f: impl Fn(&RawModel) -> f64, set: impl Fn(&mut RawModel, f64)) -> f64 {
    let mut plus = m.clone();
    set(&mut plus, step);
    let mut minus = m.clone();
    set(&mut minus, -step);
    (f(&plus) - f(&minus)) / (2.0 * step)
}

pub fn close(analytic: f64, numeric: f64, rel: f64, abs: f64) -> bool {
    (analytic - numeric).abs() <= (rel * analytic.abs().max(numeric.abs())).max(abs)
}

/// True when every |u·β|, |v·γ|, ‖u‖, ‖v‖ is above `eps` (no kink within
/// reach of a finite-difference step).
pub fn away_from_kinks(m: &RawModel, eps: f64) -> bool {
    let norms = m.u.iter().chain(&m.v).all(|r| l2(r) > eps);
    let dots = m.u.iter().zip(&m.b).all(|(u, b)| mac(u, b).abs() > eps)
        && m.v.iter().zip(&m.g).all(|(v, g)| mac(v, g).abs() > eps);
    norms && dots
}

/// Implied coefficient by direct summation (corrected sign).
pub fn oracle_implied_beta(m: &RawModel, table: &HashMap<(usize, usize), f64>, i: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..m.v.len() {
        if let Some(r) = table.get(&(i, j)) {
            let p = mac(&m.u[i], &m.v[j]);
            s += 2.0 * (r - p) * p;
        }
    }
    -s / l2(&m.u[i])
}

/// Zipf slope through the normal equations n·Σxy − Σx·Σy over
/// n·Σx² − (Σx)².
pub fn oracle_zipf(counts: &[f64]) -> f64 {
    let mut c: Vec<f64> = counts.iter().copied().filter(|x| *x > 0.0).collect();
    c.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let n = c.len() as f64;
    let (mut sx, mut sy, mut sxy, mut sxx) = (0.0, 0.0, 0.0, 0.0);
    for (r, y) in c.iter().enumerate() {
        let x = ((r + 1) as f64).ln();
        let y = y.ln();
        sx += x;
        sy += y;
        sxy += x * y;
        sxx += x * x;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Top-k exposure by fully sorting each user's unrated items.
pub fn oracle_exposure(m: &RawModel, train: &RatingsDataset<f64>, k_top: usize) -> Vec<usize> {
    let table = rating_table(train);
    let mut exposure = vec![0; m.v.len()];
    for i in 0..m.u.len() {
        let mut cand: Vec<(f64, usize)> = (0..m.v.len())
            .filter(|j| !table.contains_key(&(i, *j)))
            .map(|j| (mac(&m.u[i], &m.v[j]), j))
            .collect();
        cand.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for (_, j) in cand.into_iter().take(k_top) {
            exposure[j] += 1;
        }
    }
    exposure
}

/// Fixed 3x4 instance with hand-picked values, used for frozen expectations.
pub fn fixed_instance(kind: FrameworkKind) -> (FactorModel<f64>, RatingsDataset<f64>) {
    let raw = RawModel {
        kind,
        u: vec![vec![0.5, -1.2], vec![1.1, 0.3], vec![-0.7, 0.9]],
        v: vec![vec![1.0, 0.4], vec![-0.3, 0.8], vec![0.6, -0.5], vec![0.2, 1.3]],
        b: vec![vec![0.3, 0.1], vec![-0.2, 0.4], vec![0.5, 0.5]],
        g: vec![vec![0.1, -0.2], vec![0.7, 0.0], vec![-0.4, 0.3], vec![0.2, 0.2]],
        beta: 0.7,
        user_coef: vec![0.2, 0.5, 1.0],
        item_coef: vec![0.1, 0.0, 0.3, 0.9],
    };
    let obs = [
        (0, 0, 4.0),
        (0, 2, 2.5),
        (0, 3, 1.0),
        (1, 0, 3.0),
        (1, 1, 5.0),
        (2, 1, 2.0),
        (2, 2, 3.5),
        (2, 3, 4.5),
    ]
    .map(|(user, item, value)| Rating { user, item, value });
    let data = RatingsDataset::new(3, 4, obs.to_vec(), 1.0, 5.0).unwrap();
    (raw.to_model(), data)
}
