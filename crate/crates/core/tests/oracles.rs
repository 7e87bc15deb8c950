//! Library results checked against hand-computed values and against the
//! brute-force oracles in `common`.

mod common;

use common::*;
use mfreg::diagnostics::{implied_beta, implied_beta_norm_sq, SignConvention};
use mfreg::gradients::{full_gradient, grad_beta, grad_gamma};
use mfreg::metrics::{degree_matthew_effect, exposure_counts, mae, zipf_slope, ColdStart};
use mfreg::{FactorModel, FrameworkKind, Matrix, Rating, RatingsDataset, Regularization};

fn assert_close(got: f64, want: f64, tol: f64) {
    assert!((got - want).abs() <= tol, "got {got}, want {want}");
}

#[test]
fn fixed_instance_prediction_and_fit() {
    let (model, data) = fixed_instance(FrameworkKind::VectorDot);
    assert_close(model.predict(1, 3).unwrap(), 0.61, 1e-12);
    assert_close(model.fit_error(&data).unwrap(), 85.8112, 1e-10);
}

#[test]
fn fixed_instance_penalties() {
    let (vd, data) = fixed_instance(FrameworkKind::VectorDot);
    assert_close(vd.penalty(), 1.15, 1e-12);
    let (gs, _) = fixed_instance(FrameworkKind::GlobalScalar);
    assert_close(gs.penalty(), 5.32567265828093, 1e-12);
    let (pv, _) = fixed_instance(FrameworkKind::PerVectorScalar);
    assert_close(pv.penalty(), 3.4960391034855287, 1e-12);
    let (none, _) = fixed_instance(FrameworkKind::None);
    assert_eq!(none.penalty(), 0.0);

    let loss = gs.total_loss(&data).unwrap();
    assert_close(loss.total, 85.8112 + 5.32567265828093, 1e-10);
    assert_eq!(loss.total, loss.fit + loss.penalty);
}

#[test]
fn fixed_instance_implied_beta() {
    let (model, data) = fixed_instance(FrameworkKind::GlobalScalar);
    let want = [3.187692307692308, -3.0056778321651896, -1.3459332364285663];
    for (i, w) in want.iter().enumerate() {
        let got = implied_beta(&model, &data, i, SignConvention::Corrected).unwrap();
        assert_close(got, *w, 1e-12);
        let lit = implied_beta(&model, &data, i, SignConvention::Unnegated).unwrap();
        assert_close(lit, -w, 1e-12);
    }
}

#[test]
fn fixed_instance_implied_norm_sq() {
    let (model, data) = fixed_instance(FrameworkKind::VectorDot);
    let want = [(4.0572, 0.1), (-3.726, 0.2), (6.177, 0.5)];
    for (i, (implied, actual)) in want.iter().enumerate() {
        let c = implied_beta_norm_sq(&model, &data, i).unwrap();
        assert_close(c.implied, *implied, 1e-10);
        assert_close(c.actual, *actual, 1e-12);
        assert_close(c.gap(), (implied - actual).abs(), 1e-10);
    }
    let (gs, _) = fixed_instance(FrameworkKind::GlobalScalar);
    assert!(implied_beta_norm_sq(&gs, &data, 0).is_err());
}

#[test]
fn zipf_slope_frozen_value() {
    assert_close(zipf_slope(&[5.0, 3.0, 3.0, 1.0, 8.0, 2.0]).unwrap(), -1.0263444349306086, 1e-12);
    // A perfect power law recovers its exponent.
    let counts: Vec<f64> = (1..=50).map(|r| 1000.0 * (r as f64).powf(-1.3)).collect();
    assert_close(zipf_slope(&counts).unwrap(), -1.3, 1e-10);
}

fn dme_instance() -> (FactorModel<f64>, RatingsDataset<f64>) {
    let u = Matrix::from_rows(&[
        vec![0.5, -1.2],
        vec![1.1, 0.3],
        vec![-0.7, 0.9],
        vec![0.9, 0.9],
        vec![-0.2, -0.6],
    ]);
    let v = Matrix::from_rows(&[vec![1.0, 0.4], vec![-0.3, 0.8], vec![0.6, -0.5], vec![0.2, 1.3]]);
    let model = FactorModel::new(u, v, Regularization::None).unwrap();
    let obs = [
        (0, 0, 4.0),
        (0, 2, 2.5),
        (1, 0, 3.0),
        (1, 1, 5.0),
        (2, 1, 2.0),
        (2, 3, 4.5),
        (3, 0, 5.0),
        (3, 1, 1.5),
        (4, 0, 2.0),
    ]
    .map(|(user, item, value)| Rating { user, item, value });
    (model, RatingsDataset::new(5, 4, obs.to_vec(), 1.0, 5.0).unwrap())
}

#[test]
fn dme_frozen_values() {
    let (model, train) = dme_instance();
    assert_eq!(exposure_counts(&model, &train, 1).unwrap(), vec![1, 1, 1, 2]);
    assert_close(degree_matthew_effect(&model, &train, 1).unwrap(), 0.6106552525783914, 1e-12);
    assert_eq!(exposure_counts(&model, &train, 2).unwrap(), vec![1, 2, 4, 3]);
    assert_close(degree_matthew_effect(&model, &train, 2).unwrap(), 0.19441412154641124, 1e-12);
}

#[test]
fn mae_hand_computed() {
    let (model, _) = fixed_instance(FrameworkKind::None);
    // predictions: (0,1) = -1.11, (1,3) = 0.61, (2,0) = -0.34
    let test = RatingsDataset::new(
        3,
        4,
        vec![
            Rating { user: 0, item: 1, value: 2.0 },
            Rating { user: 1, item: 3, value: 1.0 },
            Rating { user: 2, item: 0, value: 4.0 },
        ],
        1.0,
        5.0,
    )
    .unwrap();
    let raw = (3.11 + 0.39 + 4.34) / 3.0;
    assert_close(mae(&model, &test, false, None).unwrap(), raw, 1e-12);
    // clamped to [1, 5]: every prediction becomes 1
    assert_close(mae(&model, &test, true, None).unwrap(), (1.0 + 0.0 + 3.0) / 3.0, 1e-12);
}

#[test]
fn mae_cold_pairs_use_training_mean() {
    let (model, train) = fixed_instance(FrameworkKind::None);
    let train = RatingsDataset::new(
        3,
        4,
        train.observations().iter().filter(|r| r.item != 3).copied().collect(),
        1.0,
        5.0,
    )
    .unwrap();
    let cold = ColdStart::from_train(&train);
    let mean = train.observations().iter().map(|r| r.value).sum::<f64>() / train.len() as f64;
    assert_close(cold.mean(), mean, 1e-12);
    let test = RatingsDataset::new(3, 4, vec![Rating { user: 1, item: 3, value: 4.0 }], 1.0, 5.0).unwrap();
    assert_close(mae(&model, &test, true, Some(&cold)).unwrap(), (mean - 4.0).abs(), 1e-12);
}

fn fd_check(kind: FrameworkKind, seed: u64) -> usize {
    let mut rng = rng(seed);
    let mut checked = 0;
    while checked < 20 {
        let (m, n, k) = (rng_range(&mut rng, 2, 5), rng_range(&mut rng, 2, 6), rng_range(&mut rng, 1, 4));
        let data = random_data(&mut rng, m, n, 0.6);
        let model = random_model(&mut rng, kind, m, n, k);
        let raw = RawModel::of(&model);
        if !away_from_kinks(&raw, 1e-3) {
            continue;
        }
        let table = rating_table(&data);
        let grad = full_gradient(&model, &data).unwrap();
        let f = |x: &RawModel| oracle_loss(x, &table);
        let h = 1e-6;
        for i in 0..m {
            for c in 0..k {
                let num = central_diff(&raw, h, f, |x, d| x.u[i][c] += d);
                assert!(close(grad.users.row(i)[c], num, 1e-4, 1e-7), "{kind} dU[{i}][{c}]");
                if kind == FrameworkKind::VectorDot {
                    let num = central_diff(&raw, h, f, |x, d| x.b[i][c] += d);
                    assert!(close(grad.user_reg.as_ref().unwrap().row(i)[c], num, 1e-4, 1e-7));
                    assert_eq!(grad_beta(&model, i).unwrap()[c], grad.user_reg.as_ref().unwrap().row(i)[c]);
                }
            }
        }
        for j in 0..n {
            for c in 0..k {
                let num = central_diff(&raw, h, f, |x, d| x.v[j][c] += d);
                assert!(close(grad.items.row(j)[c], num, 1e-4, 1e-7), "{kind} dV[{j}][{c}]");
                if kind == FrameworkKind::VectorDot {
                    let num = central_diff(&raw, h, f, |x, d| x.g[j][c] += d);
                    assert!(close(grad.item_reg.as_ref().unwrap().row(j)[c], num, 1e-4, 1e-7));
                    assert_eq!(grad_gamma(&model, j).unwrap()[c], grad.item_reg.as_ref().unwrap().row(j)[c]);
                }
            }
        }
        checked += 1;
    }
    checked
}

fn rng_range(rng: &mut rand_chacha::ChaCha8Rng, lo: usize, hi: usize) -> usize {
    use rand::Rng;
    rng.random_range(lo..=hi)
}

#[test]
fn gradients_match_finite_differences() {
    for (s, kind) in FrameworkKind::ALL.into_iter().enumerate() {
        assert_eq!(fd_check(kind, 100 + s as u64), 20);
    }
}

#[test]
fn coefficient_gradients_need_vector_dot() {
    let (gs, _) = fixed_instance(FrameworkKind::GlobalScalar);
    assert!(grad_beta(&gs, 0).is_err());
    assert!(grad_gamma(&gs, 0).is_err());
}

#[test]
fn loss_matches_brute_force() {
    let mut r = rng(7);
    for kind in FrameworkKind::ALL {
        for _ in 0..25 {
            let data = random_data(&mut r, 6, 7, 0.4);
            let model = random_model(&mut r, kind, 6, 7, 3);
            let raw = RawModel::of(&model);
            let want = oracle_loss(&raw, &rating_table(&data));
            let got = model.total_loss(&data).unwrap();
            assert!(close(got.total, want, 1e-12, 1e-12), "{kind}: {} vs {want}", got.total);
            assert!(close(got.penalty, oracle_penalty(&raw), 1e-12, 1e-12));
        }
    }
}

#[test]
fn implied_beta_matches_brute_force() {
    let mut r = rng(8);
    for _ in 0..25 {
        let data = random_data(&mut r, 5, 8, 0.5);
        let model = random_model(&mut r, FrameworkKind::GlobalScalar, 5, 8, 3);
        let raw = RawModel::of(&model);
        let table = rating_table(&data);
        for i in 0..5 {
            match implied_beta(&model, &data, i, SignConvention::Corrected) {
                Ok(got) => assert!(close(got, oracle_implied_beta(&raw, &table, i), 1e-12, 1e-12)),
                Err(_) => assert_eq!(data.user_count(i), 0),
            }
        }
    }
}

#[test]
fn metrics_match_brute_force() {
    let mut r = rng(9);
    for _ in 0..25 {
        let train = random_data(&mut r, 8, 12, 0.3);
        let model = random_model(&mut r, FrameworkKind::None, 8, 12, 3);
        let raw = RawModel::of(&model);
        for k_top in [1, 3, 5] {
            let exposure = exposure_counts(&model, &train, k_top).unwrap();
            assert_eq!(exposure, oracle_exposure(&raw, &train, k_top));
            let e: Vec<f64> = exposure.iter().map(|&x| x as f64).collect();
            let p: Vec<f64> = (0..12).map(|j| train.item_count(j) as f64).collect();
            let nonzero = |v: &[f64]| v.iter().filter(|x| **x > 0.0).count() >= 2;
            if nonzero(&e) && nonzero(&p) {
                let want = oracle_zipf(&e) - oracle_zipf(&p);
                let got = degree_matthew_effect(&model, &train, k_top).unwrap();
                assert!(close(got, want, 1e-9, 1e-12), "{got} vs {want}");
            }
        }
        let test = random_data(&mut r, 8, 12, 0.2);
        let want = test
            .observations()
            .iter()
            .map(|o| (mac(&raw.u[o.user], &raw.v[o.item]).clamp(1.0, 5.0) - o.value).abs())
            .sum::<f64>()
            / test.len() as f64;
        assert!(close(mae(&model, &test, true, None).unwrap(), want, 1e-12, 1e-12));
    }
}

#[test]
fn f32_objective_tracks_f64() {
    let (model, data) = fixed_instance(FrameworkKind::VectorDot);
    let to32 = |m: &Matrix<f64>| Matrix::from_vec(m.rows(), m.cols(), m.as_slice().iter().map(|&x| x as f32).collect());
    let m32 = FactorModel::vector_dot(
        to32(model.users()),
        to32(model.items()),
        to32(model.user_reg().unwrap()),
        to32(model.item_reg().unwrap()),
    )
    .unwrap();
    let obs = data
        .observations()
        .iter()
        .map(|r| Rating { user: r.user, item: r.item, value: r.value as f32 })
        .collect();
    let d32 = RatingsDataset::new(3, 4, obs, 1.0f32, 5.0).unwrap();
    let loss = m32.total_loss(&d32).unwrap();
    assert!((loss.total as f64 - (85.8112 + 1.15)).abs() < 1e-4);
}
