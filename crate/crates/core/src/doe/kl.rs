//! Karhunen–Loève expansion of a Gaussian field with exponential correlation
//! `rho(x, x') = exp(-|x - x'| / l)` on `[0, L]`, and the lognormal field
//! built on top of it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomFieldSpec {
    /// Domain length `L` in metres.
    pub domain_length: f64,
    /// Correlation length `l` in metres.
    pub correlation_length: f64,
    /// Mean of the lognormal field.
    pub mean: f64,
    /// Coefficient of variation of the lognormal field.
    pub cov: f64,
    /// Number of retained KL terms.
    pub n_terms: usize,
}

impl RandomFieldSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.domain_length > 0.0
            && self.correlation_length > 0.0
            && self.cov > 0.0
            && self.mean > 0.0
            && self.n_terms >= 1
            && [self.domain_length, self.correlation_length, self.cov, self.mean]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("invalid random field parameters {self:?}")))
        }
    }

    /// Variance of the underlying Gaussian field, `ln(1 + cov^2)`.
    pub fn gaussian_variance(&self) -> f64 {
        (1.0 + self.cov * self.cov).ln()
    }

    /// Mean of the underlying Gaussian field.
    pub fn gaussian_mean(&self) -> f64 {
        self.mean.ln() - 0.5 * self.gaussian_variance()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// One eigenpair of the correlation kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlMode {
    pub eigenvalue: f64,
    pub frequency: f64,
    pub parity: Parity,
    norm: f64,
    center: f64,
}

impl KlMode {
    /// L2-normalised eigenfunction at `x` in `[0, L]`.
    pub fn eval(&self, x: f64) -> f64 {
        let s = x - self.center;
        match self.parity {
            Parity::Even => (self.frequency * s).cos() / self.norm,
            Parity::Odd => (self.frequency * s).sin() / self.norm,
        }
    }
}

const BISECTION_TOL: f64 = 1e-12;

fn bisect(mut lo: f64, mut hi: f64, what: &'static str, f: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo * fhi > 0.0 {
        return Err(Error::RootBracket { what, lo, hi });
    }
    while hi - lo > BISECTION_TOL * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Analytic eigenpairs of the exponential kernel, sorted by decreasing eigenvalue.
///
/// On `[-a, a]` with `c = 1/l` the even modes solve `c - w tan(w a) = 0` and the
/// odd modes `w + c tan(w a) = 0`; both have eigenvalue `2c / (w^2 + c^2)`.
pub fn kl_eigenpairs(spec: &RandomFieldSpec) -> Result<Vec<KlMode>> {
    spec.validate()?;
    let a = 0.5 * spec.domain_length;
    let c = 1.0 / spec.correlation_length;
    let pi = std::f64::consts::PI;
    let n = spec.n_terms;
    let per_family = n / 2 + 1;
    let mut modes = Vec::with_capacity(2 * per_family);
    for k in 1..=per_family {
        let kf = k as f64;
        // pole-free forms of the transcendental equations
        let even = bisect(
            (kf - 1.0) * pi / a,
            (kf - 0.5) * pi / a,
            "even KL frequency",
            |w| c * (w * a).cos() - w * (w * a).sin(),
        )?;
        let odd = bisect(
            (kf - 0.5) * pi / a,
            kf * pi / a,
            "odd KL frequency",
            |w| w * (w * a).cos() + c * (w * a).sin(),
        )?;
        let lam = |w: f64| 2.0 * c / (w * w + c * c);
        let even_norm = (a + (2.0 * even * a).sin() / (2.0 * even)).sqrt();
        let odd_norm = (a - (2.0 * odd * a).sin() / (2.0 * odd)).sqrt();
        modes.push(KlMode {
            eigenvalue: lam(even),
            frequency: even,
            parity: Parity::Even,
            norm: even_norm,
            center: a,
        });
        modes.push(KlMode {
            eigenvalue: lam(odd),
            frequency: odd,
            parity: Parity::Odd,
            norm: odd_norm,
            center: a,
        });
    }
    modes.sort_by(|x, y| y.eigenvalue.total_cmp(&x.eigenvalue));
    modes.truncate(n);
    Ok(modes)
}

/// Fraction of the field variance `L * sigma^2` captured by the modes (unit-variance kernel).
pub fn captured_variance_ratio(spec: &RandomFieldSpec, modes: &[KlMode]) -> f64 {
    modes.iter().map(|m| m.eigenvalue).sum::<f64>() / spec.domain_length
}

/// Lognormal field `exp(N(x))` with `N` expanded on precomputed KL modes.
#[derive(Clone, Debug)]
pub struct LognormalField {
    pub spec: RandomFieldSpec,
    pub modes: Vec<KlMode>,
}

impl LognormalField {
    pub fn new(spec: RandomFieldSpec) -> Result<Self> {
        let modes = kl_eigenpairs(&spec)?;
        Ok(Self { spec, modes })
    }

    /// `sqrt(lambda_k) f_k(x)` for every mode, scaled by the Gaussian std.
    pub fn mode_weights(&self, x: f64) -> Vec<f64> {
        let sigma = self.spec.gaussian_variance().sqrt();
        self.modes
            .iter()
            .map(|m| sigma * m.eigenvalue.sqrt() * m.eval(x))
            .collect()
    }

    pub fn realization(&self, xi: &[f64], x_points: &[f64]) -> Result<Vec<f64>> {
        field_realization(&self.spec, &self.modes, xi, x_points)
    }
}

/// Values of the lognormal field at `x_points` for the KL coordinates `xi`.
pub fn field_realization(
    spec: &RandomFieldSpec,
    modes: &[KlMode],
    xi: &[f64],
    x_points: &[f64],
) -> Result<Vec<f64>> {
    if xi.len() != spec.n_terms || modes.len() != spec.n_terms {
        return Err(Error::DimensionMismatch {
            expected: spec.n_terms,
            got: xi.len(),
        });
    }
    let mu = spec.gaussian_mean();
    let sigma = spec.gaussian_variance().sqrt();
    Ok(x_points
        .iter()
        .map(|&x| {
            let g: f64 = modes
                .iter()
                .zip(xi)
                .map(|(m, z)| m.eigenvalue.sqrt() * m.eval(x) * z)
                .sum();
            (mu + sigma * g).exp()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beam_field(n: usize) -> RandomFieldSpec {
        RandomFieldSpec {
            domain_length: 3.0,
            correlation_length: 0.5,
            mean: 2.1e11,
            cov: 0.2,
            n_terms: n,
        }
    }

    #[test]
    fn eigenvalues_strictly_decreasing_and_alternate() {
        let modes = kl_eigenpairs(&beam_field(40)).unwrap();
        assert_eq!(modes.len(), 40);
        for w in modes.windows(2) {
            assert!(w[0].eigenvalue > w[1].eigenvalue);
        }
        assert_eq!(modes[0].parity, Parity::Even);
        assert_eq!(modes[1].parity, Parity::Odd);
        assert_eq!(modes[2].parity, Parity::Even);
    }

    #[test]
    fn zero_coordinates_give_median_field() {
        let spec = beam_field(5);
        let modes = kl_eigenpairs(&spec).unwrap();
        let vals = field_realization(&spec, &modes, &[0.0; 5], &[0.0, 1.0, 3.0]).unwrap();
        let expected = 2.1e11 / (1.0f64 + 0.04).sqrt();
        for v in vals {
            assert!((v / expected - 1.0).abs() < 1e-12);
        }
        assert!(field_realization(&spec, &modes, &[0.0; 4], &[0.0]).is_err());
    }

    #[test]
    fn invalid_spec() {
        let mut spec = beam_field(3);
        spec.correlation_length = 0.0;
        assert!(kl_eigenpairs(&spec).is_err());
    }
}
