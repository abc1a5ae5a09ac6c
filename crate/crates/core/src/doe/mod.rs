//! Designs of experiments: quasi-random points, isoprobabilistic transforms
//! and random-field discretisation.

mod kl;
mod marginal;
mod sobol;

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

pub use kl::{
    captured_variance_ratio, field_realization, kl_eigenpairs, KlMode, LognormalField, Parity,
    RandomFieldSpec,
};
pub use marginal::{
    normal_cdf, normal_pdf, normal_quantile, MarginalKind, MarginalSpec, EULER_GAMMA,
};
pub use sobol::{max_dimension as sobol_max_dimension, sobol_coordinate, sobol_points};

use crate::error::{Error, Result};

/// Applies `Phi^-1` elementwise.
pub fn to_gaussian(u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(u.nrows(), u.ncols());
    for (dst, &src) in out.iter_mut().zip(u.iter()) {
        *dst = normal_quantile(src)?;
    }
    Ok(out)
}

/// Maps standard Gaussian columns to physical marginals.
pub fn to_physical(xi: &DMatrix<f64>, marginals: &[MarginalSpec]) -> Result<DMatrix<f64>> {
    if xi.ncols() != marginals.len() {
        return Err(Error::DimensionMismatch {
            expected: marginals.len(),
            got: xi.ncols(),
        });
    }
    for m in marginals {
        m.validate()?;
    }
    let mut out = xi.clone();
    for (k, m) in marginals.iter().enumerate() {
        for v in out.column_mut(k).iter_mut() {
            *v = m.from_gaussian(*v);
        }
    }
    Ok(out)
}

/// Maps unit-hypercube columns to physical marginals.
pub fn uniform_to_physical(u: &DMatrix<f64>, marginals: &[MarginalSpec]) -> Result<DMatrix<f64>> {
    to_physical(&to_gaussian(u)?, marginals)
}

/// Sample points in all three spaces plus the centered model response.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignOfExperiments {
    /// `N x M` points in `[0,1)^M`.
    pub u: DMatrix<f64>,
    /// `N x M` standard Gaussian points.
    pub xi: DMatrix<f64>,
    /// `N x M` physical points, when marginals were supplied.
    pub x: Option<DMatrix<f64>>,
    /// Centered response.
    pub f: DVector<f64>,
    /// Mean removed from the raw response.
    pub f_mean: f64,
}

impl DesignOfExperiments {
    /// Sobol design of `n` points (skipping `skip` leading points), without responses yet.
    pub fn sobol(n: usize, m: usize, skip: usize, marginals: Option<&[MarginalSpec]>) -> Result<Self> {
        let u = sobol_points(n, m, skip)?;
        let xi = to_gaussian(&u)?;
        let x = marginals.map(|ms| to_physical(&xi, ms)).transpose()?;
        Ok(Self {
            u,
            xi,
            x,
            f: DVector::zeros(n),
            f_mean: 0.0,
        })
    }

    pub fn nrows(&self) -> usize {
        self.xi.nrows()
    }

    pub fn dim(&self) -> usize {
        self.xi.ncols()
    }

    /// Stores raw responses, centering them.
    pub fn set_response(&mut self, raw: &[f64]) -> Result<()> {
        if raw.len() != self.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.nrows(),
                got: raw.len(),
            });
        }
        if let Some(bad) = raw.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite response {bad}")));
        }
        let (f, mean) = center(raw);
        self.f = f;
        self.f_mean = mean;
        Ok(())
    }

    /// Evaluates `model` on every Gaussian sample row and stores the response.
    pub fn evaluate<F>(&mut self, model: F) -> Result<()>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let raw = crate::mc::map_rows(&self.xi, model)?;
        self.set_response(&raw)
    }

    /// Raw (uncentered) responses.
    pub fn raw_response(&self) -> Vec<f64> {
        self.f.iter().map(|v| v + self.f_mean).collect()
    }

    /// Restricts the design to a subset of columns, keeping the response.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        Self {
            u: self.u.select_columns(columns),
            xi: self.xi.select_columns(columns),
            x: self.x.as_ref().map(|x| x.select_columns(columns)),
            f: self.f.clone(),
            f_mean: self.f_mean,
        }
    }

    /// Writes one CSV row per sample: `u1..uM, xi1..xiM, [x1..xM], y`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        self.write_rows(writer, true)
    }

    /// Same layout with an empty `y` column, for filling in by an external solver.
    pub fn write_csv_template<W: Write>(&self, writer: W) -> Result<()> {
        self.write_rows(writer, false)
    }

    fn write_rows<W: Write>(&self, writer: W, with_response: bool) -> Result<()> {
        let m = self.dim();
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=m).map(|k| format!("u{k}")).collect();
        header.extend((1..=m).map(|k| format!("xi{k}")));
        if self.x.is_some() {
            header.extend((1..=m).map(|k| format!("x{k}")));
        }
        header.push("y".into());
        w.write_record(&header)?;
        let raw = self.raw_response();
        for row in 0..self.nrows() {
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            rec.extend((0..m).map(|k| fmt17(self.u[(row, k)])));
            rec.extend((0..m).map(|k| fmt17(self.xi[(row, k)])));
            if let Some(x) = &self.x {
                rec.extend((0..m).map(|k| fmt17(x[(row, k)])));
            }
            rec.push(if with_response { fmt17(raw[row]) } else { String::new() });
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a design written by [`write_csv`](Self::write_csv) (response column
    /// `y` may have been filled in by an external solver).
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let count = |prefix: &str| {
            header
                .iter()
                .filter(|h| {
                    h.strip_prefix(prefix)
                        .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
                })
                .count()
        };
        let m = count("xi");
        if m == 0 || count("u") != m || header.last().map(String::as_str) != Some("y") {
            return Err(Error::Format(
                "design CSV needs columns u1..uM, xi1..xiM, optional x1..xM and a final y".into(),
            ));
        }
        let has_x = match count("x") {
            0 => false,
            c if c == m => true,
            c => return Err(Error::Format(format!("expected {m} physical columns, found {c}"))),
        };
        let width = if has_x { 3 * m + 1 } else { 2 * m + 1 };
        if header.len() != width {
            return Err(Error::Format(format!("expected {width} columns, found {}", header.len())));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| {
                        Error::Format(format!("bad number {s:?} on data row {}: {e}", rows.len() + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(vals);
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::Format("design CSV has no rows".into()));
        }
        let block = |off: usize| DMatrix::from_fn(n, m, |i, k| rows[i][off + k]);
        let raw: Vec<f64> = rows.iter().map(|r| r[width - 1]).collect();
        let mut doe = Self {
            u: block(0),
            xi: block(m),
            x: has_x.then(|| block(2 * m)),
            f: DVector::zeros(n),
            f_mean: 0.0,
        };
        doe.set_response(&raw)?;
        Ok(doe)
    }
}

/// Shortest decimal that round-trips (at most 17 significant digits).
pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:?}")
}

/// Returns the centered vector and the removed mean.
pub fn center(raw: &[f64]) -> (DVector<f64>, f64) {
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    (DVector::from_iterator(raw.len(), raw.iter().map(|v| v - mean)), mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_centers_response() {
        let mut doe = DesignOfExperiments::sobol(16, 3, 1, None).unwrap();
        let raw: Vec<f64> = (0..16).map(|i| 1e6 + i as f64).collect();
        doe.set_response(&raw).unwrap();
        assert!(doe.f.sum().abs() <= 1e-12 * (doe.f_mean.abs() + 1.0));
        assert!(doe.set_response(&raw[..3]).is_err());
    }

    #[test]
    fn zero_point_is_rejected() {
        assert!(DesignOfExperiments::sobol(4, 2, 0, None).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ms = [MarginalSpec::lognormal(2.0e11, 3.0e10), MarginalSpec::gumbel_max(1.0e4, 1.5e3)];
        let mut doe = DesignOfExperiments::sobol(8, 2, 1, Some(&ms)).unwrap();
        let raw: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        doe.set_response(&raw).unwrap();
        let mut buf = Vec::new();
        doe.write_csv(&mut buf).unwrap();
        let back = DesignOfExperiments::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.u, doe.u);
        assert_eq!(back.xi, doe.xi);
        assert_eq!(back.x, doe.x);
        for (a, b) in back.raw_response().iter().zip(doe.raw_response()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn csv_rejects_bad_header() {
        let text = "a,b\n1,2\n";
        assert!(DesignOfExperiments::read_csv(text.as_bytes()).is_err());
    }
}
