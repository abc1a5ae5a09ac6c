//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sohpce::pls::{extract_component, PlsBlockModel};

/// Gauss–Hermite rule for the standard normal measure (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let nodes = eig.eigenvalues.iter().copied().collect();
    let weights = (0..n).map(|k| eig.eigenvectors[(0, k)].powi(2)).collect();
    (nodes, weights)
}

/// Column-centered uniform noise.
pub fn random_centered(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
    for mut c in m.column_iter_mut() {
        let mean = c.mean();
        c.add_scalar_mut(-mean);
    }
    m
}

pub fn centered(v: DVector<f64>) -> DVector<f64> {
    let mean = v.mean();
    v.add_scalar(-mean)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Least-squares fit through the origin via the normal equations.
pub fn ols_fitted(e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let coef = (e.transpose() * e).cholesky().expect("full rank").solve(&(e.transpose() * f));
    e * coef
}

/// Leave-one-out residuals by refitting without each row.
pub fn refit_loo_residuals(e: &DMatrix<f64>, f: &DVector<f64>) -> Vec<f64> {
    (0..e.nrows())
        .map(|i| {
            let rows: Vec<usize> = (0..e.nrows()).filter(|&r| r != i).collect();
            let ei = e.select_rows(&rows);
            let fi = DVector::from_fn(rows.len(), |r, _| f[rows[r]]);
            let coef = (ei.transpose() * &ei).cholesky().expect("full rank").solve(&(ei.transpose() * fi));
            f[i] - (e.row(i) * coef)[0]
        })
        .collect()
}

/// PLS model with exactly `h` components and no stopping rule.
pub fn pls_with(e: &DMatrix<f64>, f: &DVector<f64>, h: usize) -> PlsBlockModel {
    let (mut ec, mut fc) = (e.clone(), f.clone());
    let (mut w, mut t, mut p, mut b) = (vec![], vec![], vec![], vec![]);
    for _ in 0..h {
        let step = extract_component(&ec, &fc).expect("component");
        w.push(step.component.w.clone());
        t.push(step.component.t.clone());
        p.push(step.component.p.clone());
        b.push(step.component.b);
        ec = step.e_next;
        fc = step.f_next;
    }
    PlsBlockModel {
        w: DMatrix::from_columns(&w),
        t: DMatrix::from_columns(&t),
        p: DMatrix::from_columns(&p),
        b: DVector::from_vec(b),
        eps_star_trace: Vec::new(),
        col_means: DVector::zeros(e.ncols()),
    }
}

pub fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
