//! Isoprobabilistic maps between the unit interval, standard Gaussian space
//! and physical marginals.

use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile, polished with one Halley step.
pub fn normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::input(format!(
            "normal quantile requires u in (0,1), got {u}; skip the degenerate first Sobol point"
        )));
    }
    let mut x = if u < 0.5 {
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
    } else {
        std::f64::consts::SQRT_2 * erfc_inv(2.0 * (1.0 - u))
    };
    // residual in the better-conditioned tail
    let e = if x < 0.0 {
        normal_cdf(x) - u
    } else {
        (1.0 - u) - normal_cdf(-x)
    };
    let pdf = normal_pdf(x);
    if pdf > 0.0 {
        let step = e / pdf;
        x -= step / (1.0 + 0.5 * x * step);
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalKind {
    StandardGaussian,
    Lognormal,
    /// Type I largest-value (Gumbel) distribution.
    GumbelMax,
}

/// A marginal law given by its kind and physical mean / standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpec {
    pub kind: MarginalKind,
    #[serde(default)]
    pub mean: f64,
    #[serde(default = "unit")]
    pub std: f64,
}

fn unit() -> f64 {
    1.0
}

impl MarginalSpec {
    pub fn standard_gaussian() -> Self {
        Self {
            kind: MarginalKind::StandardGaussian,
            mean: 0.0,
            std: 1.0,
        }
    }

    pub fn lognormal(mean: f64, std: f64) -> Self {
        Self {
            kind: MarginalKind::Lognormal,
            mean,
            std,
        }
    }

    pub fn gumbel_max(mean: f64, std: f64) -> Self {
        Self {
            kind: MarginalKind::GumbelMax,
            mean,
            std,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std > 0.0 && self.std.is_finite() && self.mean.is_finite()) {
            return Err(Error::input(format!("marginal std must be positive, got {}", self.std)));
        }
        if self.kind == MarginalKind::Lognormal && self.mean <= 0.0 {
            return Err(Error::input(format!(
                "lognormal marginal needs a positive mean, got {}",
                self.mean
            )));
        }
        Ok(())
    }

    /// `(lambda, zeta)` of the underlying normal for a lognormal marginal.
    pub fn lognormal_params(&self) -> (f64, f64) {
        let zeta2 = (1.0 + (self.std / self.mean).powi(2)).ln();
        (self.mean.ln() - 0.5 * zeta2, zeta2.sqrt())
    }

    /// `(location, scale)` of a Gumbel-max marginal.
    pub fn gumbel_params(&self) -> (f64, f64) {
        let scale = self.std * 6f64.sqrt() / std::f64::consts::PI;
        (self.mean - EULER_GAMMA * scale, scale)
    }

    /// Maps a standard Gaussian value to the physical marginal.
    pub fn from_gaussian(&self, xi: f64) -> f64 {
        match self.kind {
            MarginalKind::StandardGaussian => self.mean + self.std * xi,
            MarginalKind::Lognormal => {
                let (lambda, zeta) = self.lognormal_params();
                (lambda + zeta * xi).exp()
            }
            MarginalKind::GumbelMax => {
                let (loc, scale) = self.gumbel_params();
                // ln(Phi(xi)) without cancellation in either tail
                let ln_u = if xi < 0.0 {
                    normal_cdf(xi).ln()
                } else {
                    (-normal_cdf(-xi)).ln_1p()
                };
                loc - scale * (-ln_u).ln()
            }
        }
    }

    /// Maps a uniform value in (0,1) to the physical marginal.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::input(format!("quantile requires u in (0,1), got {u}")));
        }
        Ok(match self.kind {
            MarginalKind::GumbelMax => {
                let (loc, scale) = self.gumbel_params();
                loc - scale * (-u.ln()).ln()
            }
            _ => self.from_gaussian(normal_quantile(u)?),
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            MarginalKind::StandardGaussian => normal_cdf((x - self.mean) / self.std),
            MarginalKind::Lognormal => {
                if x <= 0.0 {
                    return 0.0;
                }
                let (lambda, zeta) = self.lognormal_params();
                normal_cdf((x.ln() - lambda) / zeta)
            }
            MarginalKind::GumbelMax => {
                let (loc, scale) = self.gumbel_params();
                (-(-(x - loc) / scale).exp()).exp()
            }
        }
    }

    /// Inverse of [`from_gaussian`](Self::from_gaussian).
    pub fn to_gaussian(&self, x: f64) -> Result<f64> {
        match self.kind {
            MarginalKind::StandardGaussian => Ok((x - self.mean) / self.std),
            MarginalKind::Lognormal => {
                if x <= 0.0 {
                    return Err(Error::input("lognormal value must be positive"));
                }
                let (lambda, zeta) = self.lognormal_params();
                Ok((x.ln() - lambda) / zeta)
            }
            MarginalKind::GumbelMax => normal_quantile(self.cdf(x)),
        }
    }
}
