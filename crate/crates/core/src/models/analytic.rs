//! Polynomial test functions of standard Gaussian inputs with closed-form
//! Sobol indices.

use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AnalyticFunction {
    /// `sum_k a_k xi_k`.
    Linear { coefficients: Vec<f64> },
    /// `xi_1 xi_2`.
    Bilinear,
    /// `xi_1 + xi_1 xi_2`.
    Mixed,
    /// `xi_1^3 = He_3 + 3 He_1`.
    Cubic,
}

impl AnalyticFunction {
    /// Number of inputs the function actually uses.
    pub fn active_dim(&self) -> usize {
        match self {
            Self::Linear { coefficients } => coefficients.len(),
            Self::Bilinear | Self::Mixed => 2,
            Self::Cubic => 1,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "bilinear" => Ok(Self::Bilinear),
            "mixed" => Ok(Self::Mixed),
            "cubic" => Ok(Self::Cubic),
            other => {
                if let Some(list) = other.strip_prefix("linear") {
                    let list = list.trim_start_matches([':', '(']).trim_end_matches(')');
                    let coefficients = list
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::input(format!("bad linear coefficients {list:?}: {e}")))?;
                    if coefficients.is_empty() {
                        return Err(Error::input("linear model needs coefficients"));
                    }
                    Ok(Self::Linear { coefficients })
                } else {
                    Err(Error::input(format!(
                        "unknown analytic model {other:?} (expected linear:a,b,..., bilinear, mixed or cubic)"
                    )))
                }
            }
        }
    }
}

/// An analytic function padded with inert inputs up to `dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticModel {
    pub function: AnalyticFunction,
    pub dim: usize,
}

impl AnalyticModel {
    pub fn new(function: AnalyticFunction, dim: usize) -> Result<Self> {
        if dim < function.active_dim() {
            return Err(Error::input(format!(
                "analytic model needs at least {} inputs, got {dim}",
                function.active_dim()
            )));
        }
        Ok(Self { function, dim })
    }

    pub fn variance(&self) -> f64 {
        match &self.function {
            AnalyticFunction::Linear { coefficients } => coefficients.iter().map(|a| a * a).sum(),
            AnalyticFunction::Bilinear => 1.0,
            AnalyticFunction::Mixed => 2.0,
            AnalyticFunction::Cubic => 15.0,
        }
    }

    /// Exact `(S_i, S_Ti)`.
    pub fn exact_sobol(&self) -> (Vec<f64>, Vec<f64>) {
        let mut main = vec![0.0; self.dim];
        let mut total = vec![0.0; self.dim];
        match &self.function {
            AnalyticFunction::Linear { coefficients } => {
                let d = self.variance();
                for (k, a) in coefficients.iter().enumerate() {
                    main[k] = a * a / d;
                    total[k] = main[k];
                }
            }
            AnalyticFunction::Bilinear => {
                total[0] = 1.0;
                total[1] = 1.0;
            }
            AnalyticFunction::Mixed => {
                main[0] = 0.5;
                total[0] = 1.0;
                total[1] = 0.5;
            }
            AnalyticFunction::Cubic => {
                main[0] = 1.0;
                total[0] = 1.0;
            }
        }
        (main, total)
    }
}

impl Model for AnalyticModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: xi.len(),
            });
        }
        Ok(match &self.function {
            AnalyticFunction::Linear { coefficients } => {
                coefficients.iter().zip(xi).map(|(a, x)| a * x).sum()
            }
            AnalyticFunction::Bilinear => xi[0] * xi[1],
            AnalyticFunction::Mixed => xi[0] + xi[0] * xi[1],
            AnalyticFunction::Cubic => xi[0].powi(3),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!(AnalyticFunction::parse("mixed").unwrap(), AnalyticFunction::Mixed);
        assert_eq!(
            AnalyticFunction::parse("linear:1,2.5").unwrap(),
            AnalyticFunction::Linear {
                coefficients: vec![1.0, 2.5]
            }
        );
        assert!(AnalyticFunction::parse("linear:").is_err());
        assert!(AnalyticFunction::parse("ishigami").is_err());
    }

    #[test]
    fn exact_indices() {
        let m = AnalyticModel::new(AnalyticFunction::Linear { coefficients: vec![1.0, 2.0] }, 3).unwrap();
        let (s, st) = m.exact_sobol();
        assert_eq!(s, vec![0.2, 0.8, 0.0]);
        assert_eq!(st, s);
        assert!(AnalyticModel::new(AnalyticFunction::Mixed, 1).is_err());
    }
}
