use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{hermite_fill, norm_sq, MultiIndex};
use crate::error::{Error, Result};

/// A polynomial chaos expansion `mean + sum_a beta_a Psi_a(xi)` in explicit form.
#[derive(Clone, Debug, PartialEq)]
pub struct PceModel {
    dim: usize,
    p_max: usize,
    mean: f64,
    alphas: Vec<MultiIndex>,
    betas: Vec<f64>,
    supports: Vec<Vec<(usize, u32)>>,
}

/// On-disk form of a [`PceModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PceFile {
    #[serde(rename = "M")]
    pub m: usize,
    pub p_max: usize,
    #[serde(rename = "F_mean")]
    pub f_mean: f64,
    pub entries: Vec<PceEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PceEntry {
    pub alpha: Vec<u32>,
    pub beta: f64,
}

impl PceModel {
    pub fn new(dim: usize, p_max: usize, mean: f64, terms: Vec<(MultiIndex, f64)>) -> Result<Self> {
        let mut alphas = Vec::with_capacity(terms.len());
        let mut betas = Vec::with_capacity(terms.len());
        let mut supports = Vec::with_capacity(terms.len());
        for (alpha, beta) in terms {
            if alpha.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: alpha.dim(),
                });
            }
            if alpha.total_degree() as usize > p_max || alpha.total_degree() == 0 {
                return Err(Error::input(format!("term {alpha} outside 1..={p_max} total degree")));
            }
            if !beta.is_finite() {
                return Err(Error::input(format!("non-finite coefficient for {alpha}")));
            }
            supports.push(alpha.support().collect());
            alphas.push(alpha);
            betas.push(beta);
        }
        Ok(Self {
            dim,
            p_max,
            mean,
            alphas,
            betas,
            supports,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    /// Constant term; equals the model mean since every `Psi_a` has zero mean.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.alphas.iter().zip(self.betas.iter().copied())
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> Option<f64> {
        self.alphas.iter().position(|a| a == alpha).map(|i| self.betas[i])
    }

    /// `sum_a beta_a^2 E[Psi_a^2]`.
    pub fn variance(&self) -> Result<f64> {
        self.terms()
            .map(|(a, b)| Ok(b * b * norm_sq(a)?))
            .sum()
    }

    pub fn predict(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: xi.len(),
            });
        }
        let mut table = vec![0.0; self.dim * (self.p_max + 1)];
        Ok(self.predict_with(xi, &mut table))
    }

    /// Prediction reusing a caller-owned scratch buffer of length `M * (p_max + 1)`.
    pub fn predict_with(&self, xi: &[f64], table: &mut [f64]) -> f64 {
        let stride = self.p_max + 1;
        for (k, &x) in xi.iter().enumerate() {
            hermite_fill(x, &mut table[k * stride..(k + 1) * stride]);
        }
        let mut y = self.mean;
        for (support, beta) in self.supports.iter().zip(&self.betas) {
            let mut psi = 1.0;
            for &(k, d) in support {
                psi *= table[k * stride + d as usize];
            }
            y += beta * psi;
        }
        y
    }

    /// Predictions for each row of an `n x M` matrix.
    pub fn predict_rows(&self, xi: &DMatrix<f64>) -> Result<Vec<f64>> {
        if xi.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: xi.ncols(),
            });
        }
        let mut table = vec![0.0; self.dim * (self.p_max + 1)];
        let mut point = vec![0.0; self.dim];
        Ok((0..xi.nrows())
            .map(|r| {
                for (k, p) in point.iter_mut().enumerate() {
                    *p = xi[(r, k)];
                }
                self.predict_with(&point, &mut table)
            })
            .collect())
    }

    pub fn to_file(&self) -> PceFile {
        PceFile {
            m: self.dim,
            p_max: self.p_max,
            f_mean: self.mean,
            entries: self
                .terms()
                .map(|(a, b)| PceEntry {
                    alpha: a.degrees().to_vec(),
                    beta: b,
                })
                .collect(),
        }
    }

    pub fn from_file(file: PceFile) -> Result<Self> {
        let terms = file
            .entries
            .into_iter()
            .map(|e| (MultiIndex::new(e.alpha), e.beta))
            .collect();
        Self::new(file.m, file.p_max, file.f_mean, terms)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }
}
