//! Screening by total Sobol index, surrogate reconstruction on the retained
//! inputs, and Monte Carlo failure probabilities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{count_basis, enumerate_partition};
use crate::error::{Error, Result};
use crate::hierarchy::{olsr_fit, sohplsr_fit, FitOptions, OlsrOptions, PceModel};
use crate::mc::count_events;
use crate::models::Model;
use crate::sensitivity::SobolResult;

/// Variables (0-based, ascending) whose total index exceeds `threshold`.
pub fn screen(sobol: &SobolResult, threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::input(format!("screening threshold must lie in (0, 1), got {threshold}")));
    }
    let retained: Vec<usize> = sobol
        .total
        .iter()
        .enumerate()
        .filter(|(_, &st)| st > threshold)
        .map(|(k, _)| k)
        .collect();
    if retained.is_empty() {
        return Err(Error::NothingRetained { threshold });
    }
    Ok(retained)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    OlsrReconstruct,
    SohplsrReconstruct,
}

/// A surrogate over the retained inputs only.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub retained: Vec<usize>,
    pub strategy: Strategy,
    pub pce: PceModel,
}

/// Refits the training data restricted to `retained` columns: OLSR when the
/// reduced basis is smaller than the sample, the hierarchical PLS otherwise.
pub fn reconstruct(
    retained: &[usize],
    xi: &DMatrix<f64>,
    f: &DVector<f64>,
    f_mean: f64,
    p_max: usize,
    fit: &FitOptions,
    olsr: &OlsrOptions,
) -> Result<Reconstruction> {
    if retained.is_empty() {
        return Err(Error::input("reconstruction needs at least one retained variable"));
    }
    if let Some(&bad) = retained.iter().find(|&&k| k >= xi.ncols()) {
        return Err(Error::input(format!("retained variable {bad} out of range")));
    }
    let reduced = xi.select_columns(retained);
    let partition = enumerate_partition(retained.len(), p_max)?;
    let (strategy, pce) = if count_basis(retained.len(), p_max)? < xi.nrows() {
        let model = olsr_fit(&partition, &reduced, f, f_mean, olsr)?;
        (Strategy::OlsrReconstruct, model.pce)
    } else {
        let model = sohplsr_fit(&partition, &reduced, f, f_mean, fit)?;
        (Strategy::SohplsrReconstruct, model.pce)
    };
    Ok(Reconstruction {
        retained: retained.to_vec(),
        strategy,
        pce,
    })
}

/// A Monte Carlo probability with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    pub pf: f64,
    pub pf_se: f64,
    pub n_mc: usize,
    pub seed: u64,
}

impl Probability {
    fn from_count(hits: u64, n_mc: usize, seed: u64) -> Self {
        let pf = hits as f64 / n_mc as f64;
        Self {
            pf,
            pf_se: (pf * (1.0 - pf) / n_mc as f64).sqrt(),
            n_mc,
            seed,
        }
    }
}

/// `P[model(xi) > level]` for independent standard Gaussian `xi`.
pub fn exceedance_probability<F>(dim: usize, level: f64, n_mc: usize, seed: u64, response: F) -> Result<Probability>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if n_mc == 0 {
        return Err(Error::input("n_mc must be positive"));
    }
    let hits = count_events(n_mc, dim, seed, |x| Ok(response(x)? > level))?;
    Ok(Probability::from_count(hits, n_mc, seed))
}

/// Brute-force failure probability of the true model.
pub fn direct_mc_reference<M: Model + ?Sized>(model: &M, level: f64, n_mc: usize, seed: u64) -> Result<Probability> {
    exceedance_probability(model.dim(), level, n_mc, seed, |x| model.evaluate(x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityResult {
    /// Screening threshold on the total indices.
    pub threshold: f64,
    /// Retained variables, numbered from 1.
    pub retained: Vec<usize>,
    pub strategy: Strategy,
    /// Response level whose exceedance is a failure.
    pub failure_level: f64,
    pub pf: f64,
    pub pf_se: f64,
    pub n_mc: usize,
    pub seed: u64,
    /// No failure observed although `n_mc * expected_pf >= 10`.
    pub possible_surrogate_bias: bool,
}

impl ReliabilityResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn probability(&self) -> Probability {
        Probability {
            pf: self.pf,
            pf_se: self.pf_se,
            n_mc: self.n_mc,
            seed: self.seed,
        }
    }
}

/// Failure probability of a reconstructed surrogate, sampling only the retained inputs.
pub fn failure_probability(
    recon: &Reconstruction,
    screening_threshold: f64,
    failure_level: f64,
    n_mc: usize,
    seed: u64,
    expected_pf: Option<f64>,
) -> Result<ReliabilityResult> {
    let pce = &recon.pce;
    let scratch = pce.dim() * (pce.p_max() + 1);
    let p = exceedance_probability(pce.dim(), failure_level, n_mc, seed, |x| {
        let mut table = vec![0.0; scratch];
        Ok(pce.predict_with(x, &mut table))
    })?;
    let bias = p.pf == 0.0 && expected_pf.is_some_and(|e| n_mc as f64 * e >= 10.0);
    Ok(ReliabilityResult {
        threshold: screening_threshold,
        retained: recon.retained.iter().map(|k| k + 1).collect(),
        strategy: recon.strategy,
        failure_level,
        pf: p.pf,
        pf_se: p.pf_se,
        n_mc,
        seed,
        possible_surrogate_bias: bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::normal_cdf;
    use crate::models::{AnalyticFunction, AnalyticModel};

    fn totals(v: &[f64]) -> SobolResult {
        SobolResult {
            main: v.to_vec(),
            total: v.to_vec(),
            variance: 1.0,
            n_terms: v.len(),
        }
    }

    #[test]
    fn screen_keeps_exceeding_totals() {
        let s = totals(&[0.5, 0.01, 0.3, 0.02]);
        assert_eq!(screen(&s, 0.018).unwrap(), vec![0, 2, 3]);
        assert!(matches!(screen(&s, 0.6), Err(Error::NothingRetained { .. })));
        assert!(screen(&s, 0.0).is_err());
    }

    #[test]
    fn gaussian_tail() {
        let model = AnalyticModel::new(AnalyticFunction::Linear { coefficients: vec![1.0] }, 1).unwrap();
        let p = direct_mc_reference(&model, 3.0, 200_000, 9).unwrap();
        let exact = normal_cdf(-3.0);
        assert!((p.pf - exact).abs() < 3.0 * p.pf_se.max((exact * (1.0 - exact) / 2e5).sqrt()));
        let again = direct_mc_reference(&model, 3.0, 200_000, 9).unwrap();
        assert_eq!(p, again);
        assert_eq!(direct_mc_reference(&model, 1e9, 1000, 1).unwrap().pf, 0.0);
    }
}
