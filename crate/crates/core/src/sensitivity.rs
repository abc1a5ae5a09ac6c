//! Sobol indices: analytic post-processing of chaos coefficients, and a
//! pick-freeze Monte Carlo reference for black-box models.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::norm_sq;
use crate::error::{Error, Result};
use crate::hierarchy::PceModel;
use crate::mc::{chunk_rng, fill_gaussian, CHUNK};
use crate::models::Model;

/// First-order and total Sobol indices per input variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolResult {
    pub main: Vec<f64>,
    pub total: Vec<f64>,
    pub variance: f64,
    /// Number of chaos terms the indices were computed from.
    pub n_terms: usize,
}

/// `S_i` and `S_Ti` from the coefficients of `pce`.
///
/// A term counts towards `S_i` when variable `i` is the only one it involves,
/// and towards `S_Ti` whenever it involves variable `i`.
pub fn sobol_indices(pce: &PceModel) -> Result<SobolResult> {
    let m = pce.dim();
    let mut main = vec![0.0; m];
    let mut total = vec![0.0; m];
    let mut variance = 0.0;
    for (alpha, beta) in pce.terms() {
        let part = beta * beta * norm_sq(alpha)?;
        variance += part;
        let mut support = alpha.support().map(|(k, _)| k);
        let first = support.next();
        let only = support.next().is_none();
        for (k, _) in alpha.support() {
            total[k] += part;
        }
        if let (Some(k), true) = (first, only) {
            main[k] += part;
        }
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::DegenerateModel(format!(
            "surrogate variance is {variance}; Sobol indices are undefined"
        )));
    }
    for v in main.iter_mut().chain(total.iter_mut()) {
        *v /= variance;
    }
    Ok(SobolResult {
        main,
        total,
        variance,
        n_terms: pce.len(),
    })
}

impl SobolResult {
    pub fn dim(&self) -> usize {
        self.main.len()
    }

    /// Variables (0-based) sorted by decreasing index value.
    pub fn ranking(values: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        order
    }

    /// CSV with columns `variable,S_i,S_Ti`; variables are numbered from 1.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["variable", "S_i", "S_Ti"])?;
        for (k, (s, st)) in self.main.iter().zip(&self.total).enumerate() {
            w.write_record([(k + 1).to_string(), format!("{s:?}"), format!("{st:?}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Relative errors `|est - ref| / |ref|` of both index families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrors {
    pub main: Vec<f64>,
    pub total: Vec<f64>,
}

impl RelativeErrors {
    pub fn new(estimate: &SobolResult, reference: &SobolResult) -> Result<Self> {
        if estimate.dim() != reference.dim() {
            return Err(Error::DimensionMismatch {
                expected: reference.dim(),
                got: estimate.dim(),
            });
        }
        let rel = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, r)| (x - r).abs() / r.abs())
                .collect::<Vec<_>>()
        };
        Ok(Self {
            main: rel(&estimate.main, &reference.main),
            total: rel(&estimate.total, &reference.total),
        })
    }

    /// Counts of `floor(log10(e))` per decade, as `(decade, main count, total count)`.
    pub fn magnitude_histogram(&self) -> Vec<(i32, usize, usize)> {
        let decade = |e: f64| (e > 0.0 && e.is_finite()).then(|| e.log10().floor() as i32);
        let mut rows: std::collections::BTreeMap<i32, (usize, usize)> = Default::default();
        for d in self.main.iter().filter_map(|&e| decade(e)) {
            rows.entry(d).or_default().0 += 1;
        }
        for d in self.total.iter().filter_map(|&e| decade(e)) {
            rows.entry(d).or_default().1 += 1;
        }
        rows.into_iter().map(|(d, (a, b))| (d, a, b)).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["variable", "eS_i", "eS_Ti"])?;
        for (k, (a, b)) in self.main.iter().zip(&self.total).enumerate() {
            w.write_record([(k + 1).to_string(), format!("{a:?}"), format!("{b:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pick-freeze Monte Carlo estimates with standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSobolResult {
    pub main: Vec<f64>,
    pub total: Vec<f64>,
    pub main_se: Vec<f64>,
    pub total_se: Vec<f64>,
    pub variance: f64,
    pub mean: f64,
    /// Base sample size per matrix.
    pub n: usize,
    pub evaluations: usize,
    /// The response did not vary; all indices are NaN.
    pub degenerate: bool,
}

impl McSobolResult {
    pub fn as_sobol(&self) -> SobolResult {
        SobolResult {
            main: self.main.clone(),
            total: self.total.clone(),
            variance: self.variance,
            n_terms: 0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["variable", "S_i", "S_Ti", "se_S_i", "se_S_Ti"])?;
        for k in 0..self.main.len() {
            w.write_record([
                (k + 1).to_string(),
                format!("{:?}", self.main[k]),
                format!("{:?}", self.total[k]),
                format!("{:?}", self.main_se[k]),
                format!("{:?}", self.total_se[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pick-freeze estimates of `S_i` (Saltelli 2010) and `S_Ti` (Jansen) from
/// `n` pairs of independent standard Gaussian points; costs `n (M + 2)` model runs.
pub fn mc_sobol_reference<M: Model + ?Sized>(model: &M, n: usize, seed: u64) -> Result<McSobolResult> {
    let m = model.dim();
    if n < 2 || m == 0 {
        return Err(Error::input(format!("pick-freeze needs n >= 2 and M >= 1, got n={n}, M={m}")));
    }
    let width = m + 2;
    let chunks = n.div_ceil(CHUNK);
    // per sample: f(A), f(B), f(A with column i from B) for every i
    let outputs: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            let mut out = Vec::with_capacity(len * width);
            let mut a = vec![0.0; m];
            let mut b = vec![0.0; m];
            for _ in 0..len {
                fill_gaussian(&mut rng, &mut a);
                fill_gaussian(&mut rng, &mut b);
                out.push(model.evaluate(&a)?);
                out.push(model.evaluate(&b)?);
                let mut ab = a.clone();
                for i in 0..m {
                    ab[i] = b[i];
                    out.push(model.evaluate(&ab)?);
                    ab[i] = a[i];
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let rows = || outputs.iter().flat_map(|c| c.chunks_exact(width));

    let nf = n as f64;
    let mean = rows().map(|r| r[0] + r[1]).sum::<f64>() / (2.0 * nf);
    let variance = rows()
        .map(|r| (r[0] - mean).powi(2) + (r[1] - mean).powi(2))
        .sum::<f64>()
        / (2.0 * nf - 1.0);
    let degenerate = !(variance > (f64::EPSILON * mean).powi(2));
    if degenerate {
        return Ok(McSobolResult {
            main: vec![f64::NAN; m],
            total: vec![f64::NAN; m],
            main_se: vec![f64::NAN; m],
            total_se: vec![f64::NAN; m],
            variance,
            mean,
            n,
            evaluations: n * width,
            degenerate: true,
        });
    }

    let mut main = vec![0.0; m];
    let mut total = vec![0.0; m];
    let mut main_se = vec![0.0; m];
    let mut total_se = vec![0.0; m];
    for i in 0..m {
        let (mut s1, mut s2, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0);
        for r in rows() {
            let (ya, yb, yab) = (r[0] - mean, r[1] - mean, r[2 + i] - mean);
            let s = yb * (yab - ya);
            let t = 0.5 * (ya - yab) * (ya - yab);
            s1 += s;
            s2 += s * s;
            t1 += t;
            t2 += t * t;
        }
        let se = |sum: f64, sq: f64| {
            let mu = sum / nf;
            ((sq / nf - mu * mu).max(0.0) / (nf - 1.0)).sqrt()
        };
        main[i] = s1 / nf / variance;
        total[i] = t1 / nf / variance;
        main_se[i] = se(s1, s2) / variance;
        total_se[i] = se(t1, t2) / variance;
    }
    Ok(McSobolResult {
        main,
        total,
        main_se,
        total_se,
        variance,
        mean,
        n,
        evaluations: n * width,
        degenerate: false,
    })
}
