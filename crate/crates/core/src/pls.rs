//! Single-response partial least squares regression.
//!
//! With one response the covariance-maximising weight has the closed form
//! `w = E^T F / |E^T F|`. Components are extracted with deflation of both the
//! predictor block and the response, and the number of components is chosen
//! with the corrected pseudo leave-one-out error
//!
//! ```text
//! eps* = eps_LOO(P) * (1 - h/N)^-1 * (1 + tr((T^T T)^-1))
//! ```
//!
//! where `eps_LOO(P)` uses the hat matrix of the score matrix `T`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of extracted components.
pub const DEFAULT_MAX_COMPONENTS: usize = 200;

const LEVERAGE_LIMIT: f64 = 1.0 - 1e-12;
const MAX_CONDITION: f64 = 1e12;
// Relative to the initial block / response norms.
const RANK_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-13;

/// One latent component: weight, score, loading and inner coefficient.
#[derive(Clone, Debug)]
pub struct Component {
    pub w: DVector<f64>,
    pub t: DVector<f64>,
    pub p: DVector<f64>,
    pub b: f64,
}

/// Result of [`extract_component`]: the component plus deflated data.
#[derive(Clone, Debug)]
pub struct ComponentStep {
    pub component: Component,
    pub e_next: DMatrix<f64>,
    pub f_next: DVector<f64>,
}

/// Extracts one component from centered `e` and `f`.
pub fn extract_component(e: &DMatrix<f64>, f: &DVector<f64>) -> Result<ComponentStep> {
    let mut e_next = e.clone();
    let mut f_next = f.clone();
    let scale = e.norm();
    let component = extract_in_place(&mut e_next, &mut f_next, scale)?;
    Ok(ComponentStep {
        component,
        e_next,
        f_next,
    })
}

fn extract_in_place(e: &mut DMatrix<f64>, f: &mut DVector<f64>, scale: f64) -> Result<Component> {
    if e.nrows() != f.len() {
        return Err(Error::DimensionMismatch {
            expected: e.nrows(),
            got: f.len(),
        });
    }
    let f_norm = f.norm();
    let c = e.tr_mul(f);
    let c_norm = c.norm();
    if f_norm == 0.0 || c_norm <= 1e-14 * scale * f_norm {
        return Err(Error::NoCovariance);
    }
    let w = c / c_norm;
    let t = &*e * &w;
    let tt = t.norm_squared();
    if tt <= (RANK_TOL * scale).powi(2) {
        return Err(Error::DegenerateScore);
    }
    let b = t.dot(f) / tt;
    let p = e.tr_mul(&t) / tt;
    e.ger(-1.0, &t, &p, 1.0);
    f.axpy(-b, &t, 1.0);
    Ok(Component { w, t, p, b })
}

/// Cross-validation summary of a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvError {
    pub eps_loo_p: f64,
    pub eps_star: f64,
    pub hat_diag: Vec<f64>,
    pub trace_term: f64,
}

impl CvError {
    /// Convention for a model with no components.
    pub fn empty(n: usize) -> Self {
        Self {
            eps_loo_p: 1.0,
            eps_star: 1.0,
            hat_diag: vec![0.0; n],
            trace_term: 0.0,
        }
    }
}

/// Diagonal of `T (T^T T)^-1 T^T`, using orthogonality of the score columns.
pub fn hat_diagonal(t: &DMatrix<f64>) -> Result<DVector<f64>> {
    let mut h = DVector::zeros(t.nrows());
    for col in t.column_iter() {
        let tt = col.norm_squared();
        if tt == 0.0 || !tt.is_finite() {
            return Err(Error::Singular("score matrix is rank deficient".into()));
        }
        h.zip_apply(&col, |hi, ti| *hi += ti * ti / tt);
    }
    Ok(h)
}

/// Pseudo leave-one-out error and its corrected form for predictions `f_hat`.
pub fn corrected_cv(f: &DVector<f64>, f_hat: &DVector<f64>, t: &DMatrix<f64>) -> Result<CvError> {
    let n = f.len();
    if f_hat.len() != n || t.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f_hat.len().min(t.nrows()),
        });
    }
    if t.ncols() == 0 {
        return Ok(CvError::empty(n));
    }
    let hat = hat_diagonal(t)?;
    if let Some((index, &leverage)) = hat.iter().enumerate().find(|(_, &v)| v >= LEVERAGE_LIMIT) {
        return Err(Error::SaturatedLeverage { index, leverage });
    }
    let trace_term: f64 = t.column_iter().map(|c| 1.0 / c.norm_squared()).sum();
    let (eps_loo_p, eps_star) = corrected_from_parts(f, f_hat, &hat, trace_term, t.ncols());
    Ok(CvError {
        eps_loo_p,
        eps_star,
        hat_diag: hat.iter().copied().collect(),
        trace_term,
    })
}

fn corrected_from_parts(
    f: &DVector<f64>,
    f_hat: &DVector<f64>,
    hat: &DVector<f64>,
    trace_term: f64,
    h: usize,
) -> (f64, f64) {
    let n = f.len() as f64;
    let err: f64 = f
        .iter()
        .zip(f_hat.iter())
        .zip(hat.iter())
        .map(|((fi, gi), hi)| ((fi - gi) / (1.0 - hi)).powi(2))
        .sum::<f64>()
        / n;
    let var = sample_variance(f);
    let eps = if var > 0.0 { err / var } else { 0.0 };
    let eps_star = eps / (1.0 - h as f64 / n) * (1.0 + trace_term);
    (eps, eps_star)
}

fn sample_variance(f: &DVector<f64>) -> f64 {
    let n = f.len() as f64;
    let mean = f.mean();
    f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// A fitted PLS model of one predictor block.
#[derive(Clone, Debug)]
pub struct PlsBlockModel {
    /// `K x h` unit-norm weights.
    pub w: DMatrix<f64>,
    /// `N x h` training scores.
    pub t: DMatrix<f64>,
    /// `K x h` loadings.
    pub p: DMatrix<f64>,
    /// Inner regression coefficients.
    pub b: DVector<f64>,
    /// Corrected error after each evaluated component count `1, 2, ...`.
    pub eps_star_trace: Vec<f64>,
    /// Means that were removed from the predictor columns.
    pub col_means: DVector<f64>,
}

impl PlsBlockModel {
    fn empty(n: usize, k: usize, col_means: DVector<f64>) -> Self {
        Self {
            w: DMatrix::zeros(k, 0),
            t: DMatrix::zeros(n, 0),
            p: DMatrix::zeros(k, 0),
            b: DVector::zeros(0),
            eps_star_trace: Vec::new(),
            col_means,
        }
    }

    /// Number of components.
    pub fn h(&self) -> usize {
        self.b.len()
    }

    pub fn n_predictors(&self) -> usize {
        self.w.nrows()
    }

    /// `R = W (P^T W)^-1`, mapping centered predictors to scores.
    pub fn weight_map(&self) -> Result<DMatrix<f64>> {
        weight_map(self)
    }

    /// Coefficients of the centered predictors, `R b`.
    pub fn regression_vector(&self) -> Result<DVector<f64>> {
        Ok(self.weight_map()? * &self.b)
    }

    /// Training predictions `T b` of the centered response.
    pub fn fitted(&self) -> DVector<f64> {
        &self.t * &self.b
    }
}

/// `R = W (P^T W)^-1`.
pub fn weight_map(model: &PlsBlockModel) -> Result<DMatrix<f64>> {
    let h = model.h();
    if h == 0 {
        return Ok(DMatrix::zeros(model.n_predictors(), 0));
    }
    let ptw = model.p.tr_mul(&model.w);
    let sv = ptw.clone().singular_values();
    let (max, min) = (sv.max(), sv.min());
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::Conditioning {
            what: "P^T W",
            condition,
        });
    }
    // P^T W is upper triangular, so R^T solves (P^T W)^T R^T = W^T by forward substitution
    let rt = ptw
        .transpose()
        .solve_lower_triangular(&model.w.transpose())
        .ok_or_else(|| Error::Singular("P^T W has a zero pivot".into()))?;
    Ok(rt.transpose())
}

/// A fitted model together with the cross-validation error at the chosen size.
#[derive(Clone, Debug)]
pub struct PlsFit {
    pub model: PlsBlockModel,
    pub cv: CvError,
}

impl PlsFit {
    pub fn eps_star(&self) -> f64 {
        self.cv.eps_star
    }

    /// Deflated response `F - T b`.
    pub fn residual(&self, f: &DVector<f64>) -> DVector<f64> {
        f - self.model.fitted()
    }
}

/// Fits a PLS model of centered `f` on centered `e`, choosing the number of
/// components at the first local minimum of the corrected error.
///
/// `col_means` are recorded in the model for later centering of new rows;
/// pass zeros for blocks that are already centered (e.g. score matrices).
pub fn pls_fit(
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    col_means: DVector<f64>,
    max_h: Option<usize>,
) -> Result<PlsFit> {
    let (n, k) = e.shape();
    if n < 3 {
        return Err(Error::input(format!("PLS needs at least 3 samples, got {n}")));
    }
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    if col_means.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: col_means.len(),
        });
    }
    let cap = (n - 1).min(k).min(max_h.unwrap_or(DEFAULT_MAX_COMPONENTS));
    let f_norm = f.norm();
    let scale = e.norm();
    if f_norm == 0.0 || cap == 0 || scale == 0.0 {
        return Ok(PlsFit {
            model: PlsBlockModel::empty(n, k, col_means),
            cv: CvError::empty(n),
        });
    }

    let mut e_cur = e.clone();
    let mut f_cur = f.clone();
    let mut comps: Vec<Component> = Vec::new();
    let mut trace = Vec::new();
    let mut hat = DVector::zeros(n);
    let mut trace_term = 0.0;
    let mut best = (0usize, 1.0f64);
    let mut prev = 1.0f64;

    while comps.len() < cap {
        if f_cur.norm() <= RESIDUAL_TOL * f_norm || e_cur.norm() <= RANK_TOL * scale {
            break;
        }
        let comp = match extract_in_place(&mut e_cur, &mut f_cur, scale) {
            Ok(c) => c,
            Err(Error::NoCovariance | Error::DegenerateScore) => break,
            Err(err) => return Err(err),
        };
        let tt = comp.t.norm_squared();
        let mut next_hat = hat.clone();
        next_hat.zip_apply(&comp.t, |hi, ti| *hi += ti * ti / tt);
        if next_hat.iter().any(|&v| v >= LEVERAGE_LIMIT) {
            break;
        }
        hat = next_hat;
        trace_term += 1.0 / tt;
        comps.push(comp);
        let h = comps.len();
        let f_hat = f - &f_cur;
        let (_, eps_star) = corrected_from_parts(f, &f_hat, &hat, trace_term, h);
        trace.push(eps_star);
        if eps_star < best.1 {
            best = (h, eps_star);
        }
        if eps_star > prev {
            break;
        }
        prev = eps_star;
    }

    let h = best.0;
    comps.truncate(h);
    let mut model = PlsBlockModel::empty(n, k, col_means);
    model.eps_star_trace = trace;
    if h == 0 {
        return Ok(PlsFit {
            model,
            cv: CvError::empty(n),
        });
    }
    model.w = DMatrix::from_columns(&comps.iter().map(|c| c.w.clone()).collect::<Vec<_>>());
    model.t = DMatrix::from_columns(&comps.iter().map(|c| c.t.clone()).collect::<Vec<_>>());
    model.p = DMatrix::from_columns(&comps.iter().map(|c| c.p.clone()).collect::<Vec<_>>());
    model.b = DVector::from_iterator(h, comps.iter().map(|c| c.b));
    let cv = corrected_cv(f, &model.fitted(), &model.t)?;
    Ok(PlsFit { model, cv })
}
