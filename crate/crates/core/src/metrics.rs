//! Accuracy and popularity-bias metrics.
//!
//! The Degree of Matthew Effect used here is a stand-in: the log-log
//! rank-frequency slope of top-k recommendation exposure minus the same
//! slope for training-set popularity. Zero means recommendations reproduce
//! the data's popularity skew; negative values mean they concentrate
//! exposure further. Every report carries [`DME_NOTE`].

use std::cmp::Ordering;

use crate::dataset::RatingsDataset;
use crate::error::{Error, Result};
use crate::model::FactorModel;
use crate::scalar::{dot, Scalar};

pub const DME_NOTE: &str =
    "dme = zipf slope(top-k exposure) - zipf slope(train popularity); stand-in definition";

pub const DEFAULT_K_TOP: usize = 10;

/// Prediction source for test pairs the model cannot score: users or items
/// without training ratings get the global training mean.
#[derive(Clone, Debug)]
pub struct ColdStart<T> {
    mean: T,
    user_seen: Vec<bool>,
    item_seen: Vec<bool>,
}

impl<T: Scalar> ColdStart<T> {
    pub fn from_train(train: &RatingsDataset<T>) -> Self {
        ColdStart {
            mean: train.mean_rating(),
            user_seen: (0..train.num_users()).map(|i| train.user_count(i) > 0).collect(),
            item_seen: (0..train.num_items()).map(|j| train.item_count(j) > 0).collect(),
        }
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    fn knows(&self, i: usize, j: usize) -> bool {
        self.user_seen.get(i).copied().unwrap_or(false)
            && self.item_seen.get(j).copied().unwrap_or(false)
    }
}

/// Model prediction, or the fallback when the pair is outside the model or
/// cold. Without a [`ColdStart`] the fallback is the scale midpoint.
pub fn predict_or_fallback<T: Scalar>(
    model: &FactorModel<T>,
    i: usize,
    j: usize,
    scale: (T, T),
    cold: Option<&ColdStart<T>>,
) -> T {
    let in_model = i < model.num_users() && j < model.num_items();
    match cold {
        Some(c) if in_model && c.knows(i, j) => dot(model.user(i), model.item(j)),
        Some(c) => c.mean,
        None if in_model => dot(model.user(i), model.item(j)),
        None => (scale.0 + scale.1) / T::of(2.0),
    }
}

/// Mean absolute error over the test observations. With `clamp`,
/// predictions are first clipped to the test set's rating scale.
pub fn mae<T: Scalar>(
    model: &FactorModel<T>,
    test: &RatingsDataset<T>,
    clamp: bool,
    cold: Option<&ColdStart<T>>,
) -> Result<T> {
    if test.is_empty() {
        return Err(Error::contract("mae needs at least one test rating"));
    }
    let scale = (test.r_min(), test.r_max());
    let sum = test.observations().iter().fold(T::zero(), |acc, r| {
        let mut p = predict_or_fallback(model, r.user, r.item, scale, cold);
        if clamp {
            p = p.max(scale.0).min(scale.1);
        }
        acc + (p - r.value).abs()
    });
    Ok(sum / T::of_usize(test.len()))
}

/// Least-squares slope of ln(count) against ln(rank), counts sorted
/// descending with rank starting at 1. Zero and non-finite counts are
/// dropped first.
pub fn zipf_slope<T: Scalar>(counts: &[T]) -> Result<T> {
    let mut c: Vec<T> = counts
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > T::zero())
        .collect();
    if c.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "zipf slope needs at least 2 positive counts, got {}",
            c.len()
        )));
    }
    c.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let n = T::of_usize(c.len());
    let xs: Vec<T> = (1..=c.len()).map(|r| T::of_usize(r).ln()).collect();
    let ys: Vec<T> = c.iter().map(|x| x.ln()).collect();
    let x_mean = xs.iter().fold(T::zero(), |a, &b| a + b) / n;
    let y_mean = ys.iter().fold(T::zero(), |a, &b| a + b) / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(&ys) {
        sxy = sxy + (x - x_mean) * (y - y_mean);
        sxx = sxx + (x - x_mean) * (x - x_mean);
    }
    Ok(sxy / sxx)
}

/// Higher score first, then lower index. NaN scores rank last.
fn rank_order<T: Scalar>(a: &(T, usize), b: &(T, usize)) -> Ordering {
    match (a.0.is_nan(), b.0.is_nan()) {
        (false, false) => b.0.partial_cmp(&a.0).expect("not nan"),
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (true, true) => Ordering::Equal,
    }
    .then(a.1.cmp(&b.1))
}

/// How many users get each item in their top-`k_top` list, restricted to
/// items the user has not rated in `train`.
pub fn exposure_counts<T: Scalar>(
    model: &FactorModel<T>,
    train: &RatingsDataset<T>,
    k_top: usize,
) -> Result<Vec<usize>> {
    model.check_dims(train)?;
    if k_top == 0 {
        return Err(Error::contract("k_top must be at least 1"));
    }
    let n = model.num_items();
    let mut exposure = vec![0usize; n];
    let mut rated = vec![false; n];
    let mut scored: Vec<(T, usize)> = Vec::with_capacity(n);
    for i in 0..model.num_users() {
        for r in train.user_ratings(i) {
            rated[r.item] = true;
        }
        scored.clear();
        let u = model.user(i);
        scored.extend((0..n).filter(|&j| !rated[j]).map(|j| (dot(u, model.item(j)), j)));
        let take = k_top.min(scored.len());
        if take > 0 {
            if take < scored.len() {
                scored.select_nth_unstable_by(take - 1, rank_order);
            }
            for &(_, j) in &scored[..take] {
                exposure[j] += 1;
            }
        }
        for r in train.user_ratings(i) {
            rated[r.item] = false;
        }
    }
    Ok(exposure)
}

/// Degree of Matthew Effect (see module docs).
pub fn degree_matthew_effect<T: Scalar>(
    model: &FactorModel<T>,
    train: &RatingsDataset<T>,
    k_top: usize,
) -> Result<T> {
    let exposure = exposure_counts(model, train, k_top)?;
    if exposure.iter().all(|&c| c == 0) {
        return Err(Error::InsufficientData(
            "no item received any exposure (every user rated the whole catalog)".into(),
        ));
    }
    let exposure: Vec<T> = exposure.into_iter().map(T::of_usize).collect();
    let popularity: Vec<T> = (0..train.num_items())
        .map(|j| T::of_usize(train.item_count(j)))
        .collect();
    Ok(zipf_slope(&exposure)? - zipf_slope(&popularity)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport<T> {
    pub mae: T,
    /// `None` when the exposure distribution is too degenerate to fit.
    pub dme: Option<T>,
    pub num_test_ratings: usize,
    pub clamped: bool,
}

impl<T: Scalar> EvalReport<T> {
    pub const CSV_HEADER: &'static str = "mae,dme,num_test_ratings";

    pub fn csv_row(&self) -> String {
        let dme = self.dme.map_or_else(String::new, |d| d.to_string());
        format!("{},{},{}", self.mae, dme, self.num_test_ratings)
    }
}

/// MAE on `test` (cold pairs fall back to the training mean) and DME of the
/// model's top-`k_top` lists against `train`.
pub fn evaluate<T: Scalar>(
    model: &FactorModel<T>,
    train: &RatingsDataset<T>,
    test: &RatingsDataset<T>,
    clamp: bool,
    k_top: usize,
) -> Result<EvalReport<T>> {
    let cold = ColdStart::from_train(train);
    let mae = mae(model, test, clamp, Some(&cold))?;
    let dme = match degree_matthew_effect(model, train, k_top) {
        Ok(d) => Some(d),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        mae,
        dme,
        num_test_ratings: test.len(),
        clamped: clamp,
    })
}
