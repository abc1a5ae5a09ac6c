//! Simply supported Euler–Bernoulli beam under uniform load with a lognormal
//! random modulus field.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::banded::BandedSpd;
use super::Model;
use crate::doe::{LognormalField, RandomFieldSpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    /// Span in metres.
    pub length: f64,
    /// Second moment of area in m^4.
    pub inertia: f64,
    /// Uniform load in N/m, acting downwards.
    pub q_load: f64,
    pub n_elements: usize,
    pub field: RandomFieldSpec,
    /// Mid-span deflection (m) above which the beam fails.
    pub failure_threshold: f64,
}

impl Default for BeamSpec {
    fn default() -> Self {
        Self {
            length: 3.0,
            inertia: 8e-6,
            q_load: 13e3,
            n_elements: 100,
            field: RandomFieldSpec {
                domain_length: 3.0,
                correlation_length: 0.5,
                mean: 2.1e11,
                cov: 0.2,
                n_terms: 40,
            },
            failure_threshold: 0.012,
        }
    }
}

impl BeamSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.length, self.inertia, self.q_load, self.failure_threshold]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !positive || self.n_elements < 2 {
            return Err(Error::ModelDefinition(format!("invalid beam definition {self:?}")));
        }
        if (self.field.domain_length - self.length).abs() > 1e-12 * self.length {
            return Err(Error::ModelDefinition(
                "random field domain must match the beam span".into(),
            ));
        }
        self.field.validate()
    }

    /// Element midpoints.
    pub fn midpoints(&self) -> Vec<f64> {
        let le = self.length / self.n_elements as f64;
        (0..self.n_elements).map(|e| (e as f64 + 0.5) * le).collect()
    }
}

/// Mid-span deflection of the beam with element moduli `moduli`.
///
/// Two DOFs per node (deflection, rotation), Hermite cubic elements and
/// consistent nodal loads; deflections are positive downwards.
pub fn beam_deflection(spec: &BeamSpec, moduli: &[f64]) -> Result<f64> {
    let ne = spec.n_elements;
    if moduli.len() != ne {
        return Err(Error::DimensionMismatch {
            expected: ne,
            got: moduli.len(),
        });
    }
    if let Some(bad) = moduli.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::Singular(format!("non-positive element modulus {bad}")));
    }
    let le = spec.length / ne as f64;
    let ndof = 2 * (ne + 1);
    let mut k = BandedSpd::zeros(ndof, 3);
    let mut f = vec![0.0; ndof];
    let q = spec.q_load;
    let fe = [q * le / 2.0, q * le * le / 12.0, q * le / 2.0, -q * le * le / 12.0];
    for (e, &modulus) in moduli.iter().enumerate() {
        let c = modulus * spec.inertia / (le * le * le);
        let ke = [
            [12.0, 6.0 * le, -12.0, 6.0 * le],
            [6.0 * le, 4.0 * le * le, -6.0 * le, 2.0 * le * le],
            [-12.0, -6.0 * le, 12.0, -6.0 * le],
            [6.0 * le, 2.0 * le * le, -6.0 * le, 4.0 * le * le],
        ];
        let base = 2 * e;
        for i in 0..4 {
            f[base + i] += fe[i];
            for j in 0..=i {
                k.add(base + i, base + j, c * ke[i][j]);
            }
        }
    }
    for dof in [0, 2 * ne] {
        k.constrain(dof);
        f[dof] = 0.0;
    }
    let u = k.solve(f)?;

    // Hermite interpolation inside the element holding the mid-span
    let x = 0.5 * spec.length;
    let e = ((x / le).floor() as usize).min(ne - 1);
    let s = (x - e as f64 * le) / le;
    let n1 = 1.0 - 3.0 * s * s + 2.0 * s * s * s;
    let n2 = le * (s - 2.0 * s * s + s * s * s);
    let n3 = 3.0 * s * s - 2.0 * s * s * s;
    let n4 = le * (-s * s + s * s * s);
    let b = 2 * e;
    Ok(n1 * u[b] + n2 * u[b + 1] + n3 * u[b + 2] + n4 * u[b + 3])
}

/// The beam as a function of the KL coordinates.
#[derive(Clone, Debug)]
pub struct BeamModel {
    pub spec: BeamSpec,
    mu: f64,
    /// `n_elements x M` matrix of `sigma sqrt(lambda_k) f_k(x_e)`.
    weights: DMatrix<f64>,
}

impl BeamModel {
    pub fn new(spec: BeamSpec) -> Result<Self> {
        spec.validate()?;
        let field = LognormalField::new(spec.field)?;
        let mids = spec.midpoints();
        let m = spec.field.n_terms;
        let mut weights = DMatrix::zeros(mids.len(), m);
        for (e, &x) in mids.iter().enumerate() {
            for (k, w) in field.mode_weights(x).into_iter().enumerate() {
                weights[(e, k)] = w;
            }
        }
        Ok(Self {
            spec,
            mu: spec.field.gaussian_mean(),
            weights,
        })
    }

    /// Element moduli for KL coordinates `xi`.
    pub fn moduli(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.weights.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.ncols(),
                got: xi.len(),
            });
        }
        Ok((0..self.weights.nrows())
            .map(|e| {
                let g: f64 = self.weights.row(e).iter().zip(xi).map(|(w, z)| w * z).sum();
                (self.mu + g).exp()
            })
            .collect())
    }
}

/// Mid-span deflection for KL coordinates `xi`.
pub fn solve_beam(spec: &BeamSpec, xi: &[f64]) -> Result<f64> {
    BeamModel::new(*spec)?.evaluate(xi)
}

impl Model for BeamModel {
    fn dim(&self) -> usize {
        self.spec.field.n_terms
    }

    fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        beam_deflection(&self.spec, &self.moduli(xi)?)
    }

    fn failure_threshold(&self) -> Option<f64> {
        Some(self.spec.failure_threshold)
    }
}
