//! Library routines checked against independent reference computations.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use sohpce::basis::{count_basis, enumerate_partition, eval_multi, hermite_eval, norm_sq, MultiIndex};
use sohpce::doe::{normal_cdf, normal_quantile, sobol_points, DesignOfExperiments, MarginalSpec};
use sohpce::hierarchy::{olsr_fit, sohplsr_fit, FitOptions, OlsrOptions, PceModel};
use sohpce::models::{AnalyticFunction, AnalyticModel, Model};
use sohpce::pls::{corrected_cv, pls_fit};
use sohpce::sensitivity::{mc_sobol_reference, sobol_indices};

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[test]
fn hermite_orthogonality_by_quadrature() {
    let (x, w) = gauss_hermite(20);
    for m in 0..=8 {
        for n in 0..=8 {
            let e: f64 = x
                .iter()
                .zip(&w)
                .map(|(&xi, &wi)| wi * hermite_eval(m, xi).unwrap() * hermite_eval(n, xi).unwrap())
                .sum();
            let expected = if m == n { factorial(n) } else { 0.0 };
            let scale = (factorial(m) * factorial(n)).sqrt();
            assert!((e - expected).abs() < 1e-10 * scale, "E[He{m} He{n}] = {e}");
        }
    }
}

#[test]
fn multivariate_norms_by_tensor_quadrature() {
    let (x, w) = gauss_hermite(8);
    let alpha = MultiIndex::new(vec![2, 0, 1]);
    let mut second = 0.0;
    let mut first = 0.0;
    for (a, wa) in x.iter().zip(&w) {
        for (b, wb) in x.iter().zip(&w) {
            for (c, wc) in x.iter().zip(&w) {
                let v = eval_multi(&alpha, &[*a, *b, *c]).unwrap();
                first += wa * wb * wc * v;
                second += wa * wb * wc * v * v;
            }
        }
    }
    assert!(first.abs() < 1e-12);
    assert!((second - norm_sq(&alpha).unwrap()).abs() < 1e-10);
    assert_eq!(norm_sq(&alpha).unwrap(), 2.0);
}

fn brute_force_count(m: usize, p: usize) -> usize {
    // every degree vector with total degree in 1..=p
    let mut count = 0;
    let mut alpha = vec![0usize; m];
    loop {
        let total: usize = alpha.iter().sum();
        if (1..=p).contains(&total) {
            count += 1;
        }
        let mut k = 0;
        loop {
            if k == m {
                return count;
            }
            alpha[k] += 1;
            if alpha[k] <= p {
                break;
            }
            alpha[k] = 0;
            k += 1;
        }
    }
}

#[test]
fn basis_size_matches_enumeration() {
    for m in 1..=5 {
        for p in 1..=4 {
            let expected = brute_force_count(m, p);
            assert_eq!(count_basis(m, p).unwrap(), expected);
            let partition = enumerate_partition(m, p).unwrap();
            assert_eq!(partition.len(), expected);
            for key in partition.keys() {
                for alpha in partition.group(key).unwrap() {
                    assert_eq!(alpha.interaction_degree(), key.interaction);
                    assert_eq!(alpha.total_degree() as usize, key.degree);
                }
            }
        }
    }
}

#[test]
fn marginal_moments_by_quadrature() {
    let (x, w) = gauss_hermite(60);
    for spec in [
        MarginalSpec::lognormal(2.0e11, 3.0e10),
        MarginalSpec::gumbel_max(1.0e4, 1.5e3),
        MarginalSpec::lognormal(1.0, 0.2),
    ] {
        let mean: f64 = x.iter().zip(&w).map(|(z, wi)| wi * spec.from_gaussian(*z)).sum();
        let var: f64 = x.iter().zip(&w).map(|(z, wi)| wi * (spec.from_gaussian(*z) - mean).powi(2)).sum();
        assert!((mean / spec.mean - 1.0).abs() < 1e-6, "{spec:?}: mean {mean}");
        assert!((var.sqrt() / spec.std - 1.0).abs() < 1e-3, "{spec:?}: std {}", var.sqrt());
    }
}

#[test]
fn normal_quantile_reference_values() {
    let cases = [
        (0.975, 1.959963984540054),
        (0.5, 0.0),
        (0.001, -3.090232306167813),
        (1e-10, -6.361340902404056),
    ];
    for (u, z) in cases {
        assert!((normal_quantile(u).unwrap() - z).abs() < 1e-12, "{u}");
    }
    for z in [-7.0, -2.5, 0.3, 4.0] {
        assert!((normal_quantile(normal_cdf(z)).unwrap() - z).abs() < 1e-9);
    }
}

#[test]
fn sobol_points_match_published_sequence() {
    let u = sobol_points(5, 3, 1).unwrap();
    let expected = [
        [0.5, 0.5, 0.5],
        [0.75, 0.25, 0.25],
        [0.25, 0.75, 0.75],
        [0.375, 0.375, 0.625],
        [0.875, 0.875, 0.125],
    ];
    for (i, row) in expected.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert_eq!(u[(i, j)], *v, "point {i}, dim {j}");
        }
    }
    // 2^k points fill every dyadic interval once in each coordinate
    let u = sobol_points(256, 40, 0).unwrap();
    for c in 0..40 {
        let mut seen = [false; 256];
        for r in 0..256 {
            seen[(u[(r, c)] * 256.0) as usize] = true;
        }
        assert!(seen.iter().all(|s| *s), "dimension {c}");
    }
}

#[test]
fn pls_scores_are_orthogonal() {
    let mut g = rng(1);
    for _ in 0..10 {
        let e = random_centered(30, 6, &mut g);
        let f = centered(DVector::from_fn(30, |i, _| e[(i, 0)] - 2.0 * e[(i, 3)] + 0.1 * (i as f64).sin()));
        let model = pls_with(&e, &f, 6);
        let gram = model.t.transpose() * &model.t;
        for i in 0..6 {
            for j in 0..i {
                let rel = gram[(i, j)].abs() / (gram[(i, i)] * gram[(j, j)]).sqrt();
                assert!(rel < 1e-8, "t{i}.t{j} = {rel}");
            }
        }
    }
}

#[test]
fn full_pls_equals_least_squares() {
    let mut g = rng(2);
    for _ in 0..10 {
        let e = random_centered(30, 5, &mut g);
        let f = centered(DVector::from_fn(30, |i, _| e[(i, 1)] * 3.0 + e[(i, 4)].powi(2) + 0.2 * e[(i, 2)]));
        let model = pls_with(&e, &f, 5);
        let ols = ols_fitted(&e, &f);
        let diff = (model.fitted() - &ols).norm();
        assert!(diff <= 1e-8 * ols.norm(), "{diff}");
        // weight map reproduces the training scores from the original block
        let r = model.weight_map().unwrap();
        let scores = &e * r;
        assert!((&scores - &model.t).norm() <= 1e-8 * model.t.norm());
        let beta = model.regression_vector().unwrap();
        assert!((&e * beta - &ols).norm() <= 1e-8 * ols.norm());
    }
}

#[test]
fn pseudo_loo_equals_refit_loo() {
    let mut g = rng(3);
    for _ in 0..10 {
        let e = random_centered(25, 4, &mut g);
        let f = centered(DVector::from_fn(25, |i, _| e[(i, 0)] + e[(i, 1)] * e[(i, 2)] + 0.3 * e[(i, 3)]));
        let model = pls_with(&e, &f, 4);
        let cv = corrected_cv(&f, &model.fitted(), &model.t).unwrap();
        let loo = refit_loo_residuals(&e, &f);
        let var = f.iter().map(|v| v * v).sum::<f64>() / 24.0;
        let exact = loo.iter().map(|r| r * r).sum::<f64>() / 25.0 / var;
        assert!((cv.eps_loo_p - exact).abs() <= 1e-8 * exact, "{} vs {exact}", cv.eps_loo_p);
        // the corrected error only inflates
        assert!(cv.eps_star > cv.eps_loo_p);
    }
}

#[test]
fn pls_stops_at_first_local_minimum() {
    let mut g = rng(4);
    let e = random_centered(40, 12, &mut g);
    let noise = random_centered(40, 1, &mut g).column(0).into_owned();
    let f = centered(DVector::from_fn(40, |i, _| e[(i, 0)] + 0.3 * e[(i, 5)] + 0.2 * noise[i]));
    let fit = pls_fit(&e, &f, DVector::zeros(12), None).unwrap();
    let trace = &fit.model.eps_star_trace;
    let h = fit.model.h();
    assert!(h >= 1);
    for k in 1..h {
        assert!(trace[k] < trace[k - 1]);
    }
    if trace.len() > h {
        assert!(trace[h] >= trace[h - 1]);
    }
    assert!((fit.eps_star() - trace[h - 1]).abs() < 1e-12 * trace[h - 1]);
}

/// Design matrix of the full basis built from explicit Hermite formulas.
fn explicit_basis(xi: &DMatrix<f64>, alphas: &[MultiIndex]) -> DMatrix<f64> {
    let he = |n: u32, x: f64| match n {
        0 => 1.0,
        1 => x,
        2 => x * x - 1.0,
        3 => x * x * x - 3.0 * x,
        _ => unreachable!(),
    };
    DMatrix::from_fn(xi.nrows(), alphas.len(), |r, c| {
        alphas[c].degrees().iter().enumerate().map(|(k, &d)| he(d, xi[(r, k)])).product()
    })
}

#[test]
fn olsr_matches_explicit_least_squares() {
    let mut g = rng(5);
    let partition = enumerate_partition(3, 3).unwrap();
    let alphas: Vec<MultiIndex> = partition.iter().cloned().collect();
    let xi: DMatrix<f64> = DMatrix::from_fn(60, 3, |_, _| rand::Rng::random_range(&mut g, -2.0..2.0));
    let raw: Vec<f64> = (0..60).map(|r| (xi[(r, 0)]).exp() + xi[(r, 1)] * xi[(r, 2)]).collect();
    let f_mean = raw.iter().sum::<f64>() / 60.0;
    let f = DVector::from_iterator(60, raw.iter().map(|v| v - f_mean));
    let model = olsr_fit(&partition, &xi, &f, f_mean, &OlsrOptions::default()).unwrap();

    let mut psi = explicit_basis(&xi, &alphas);
    for mut c in psi.column_iter_mut() {
        let m = c.mean();
        c.add_scalar_mut(-m);
    }
    let oracle = ols_fitted(&psi, &f);
    let pred = model.pce.predict_rows(&xi).unwrap();
    for r in 0..60 {
        assert!((pred[r] - f_mean - oracle[r]).abs() < 1e-8, "row {r}");
    }
}

#[test]
fn hierarchy_back_substitution_reproduces_training_predictions() {
    let mut g = rng(6);
    for trial in 0..10 {
        let m = 2 + trial % 4;
        let p = 1 + trial % 3;
        let n = 25 + 5 * trial;
        let xi: DMatrix<f64> = DMatrix::from_fn(n, m, |_, _| rand::Rng::random_range(&mut g, -2.5..2.5));
        let raw: Vec<f64> = (0..n)
            .map(|r| xi[(r, 0)] + 0.5 * xi[(r, 0)] * xi[(r, 1)] + (xi[(r, m - 1)]).sin())
            .collect();
        let f_mean = raw.iter().sum::<f64>() / n as f64;
        let f = DVector::from_iterator(n, raw.iter().map(|v| v - f_mean));
        let partition = enumerate_partition(m, p).unwrap();
        let model = sohplsr_fit(&partition, &xi, &f, f_mean, &FitOptions::default()).unwrap();
        let pred = model.pce.predict_rows(&xi).unwrap();
        let tol = 1e-6 * std_dev(&raw);
        for r in 0..n {
            assert!((pred[r] - model.fitted[r]).abs() <= tol, "trial {trial} row {r}");
        }
    }
}

#[test]
fn pce_sobol_indices_match_closed_form() {
    // f = 1 + 2 He1(x1) + He1(x1) He1(x2) + 0.5 He2(x3)
    let terms = vec![
        (MultiIndex::new(vec![1, 0, 0]), 2.0),
        (MultiIndex::new(vec![1, 1, 0]), 1.0),
        (MultiIndex::new(vec![0, 0, 2]), 0.5),
    ];
    let pce = PceModel::new(3, 2, 1.0, terms).unwrap();
    let s = sobol_indices(&pce).unwrap();
    let var = 4.0 + 1.0 + 0.25 * 2.0;
    let main = [4.0 / var, 0.0, 0.5 / var];
    let total = [5.0 / var, 1.0 / var, 0.5 / var];
    for k in 0..3 {
        assert!((s.main[k] - main[k]).abs() < 1e-14);
        assert!((s.total[k] - total[k]).abs() < 1e-14);
    }
    assert!((s.variance - var).abs() < 1e-12);
}

#[test]
fn pick_freeze_recovers_analytic_indices() {
    let model = AnalyticModel::new(AnalyticFunction::Mixed, 3).unwrap();
    let (main, total) = model.exact_sobol();
    let mc = mc_sobol_reference(&model, 40_000, 11).unwrap();
    for k in 0..3 {
        assert!((mc.main[k] - main[k]).abs() < 4.0 * mc.main_se[k] + 1e-3, "S_{k}");
        assert!((mc.total[k] - total[k]).abs() < 4.0 * mc.total_se[k] + 1e-3, "S_T{k}");
    }
    assert_eq!(mc.evaluations, 40_000 * 5);
}

#[test]
fn additive_model_shares_are_recovered() {
    let a = [1.0, -0.5, 0.0, 2.0];
    let model = AnalyticModel::new(AnalyticFunction::Linear { coefficients: a.to_vec() }, 4).unwrap();
    let mut doe = DesignOfExperiments::sobol(50, 4, 1, None).unwrap();
    doe.evaluate(|x| model.evaluate(x)).unwrap();
    let partition = enumerate_partition(4, 3).unwrap();
    let fit = sohplsr_fit(&partition, &doe.xi, &doe.f, doe.f_mean, &FitOptions::default()).unwrap();
    assert_eq!(fit.i_star, 1);
    let s = sobol_indices(&fit.pce).unwrap();
    let (main, total) = model.exact_sobol();
    for k in 0..4 {
        assert!((s.main[k] - main[k]).abs() < 1e-6);
        assert!((s.total[k] - total[k]).abs() < 1e-6);
    }
}
