//! Deterministic solvers wrapped as functions of standard Gaussian inputs.

mod analytic;
mod banded;
mod beam;
mod truss;

pub use analytic::{AnalyticFunction, AnalyticModel};
pub use banded::BandedSpd;
pub use beam::{beam_deflection, solve_beam, BeamModel, BeamSpec};
pub use truss::{
    solve_truss, ResponseSelector, TrussElement, TrussLoad, TrussModel, TrussNode, TrussSpec,
    TrussSupport,
};

use crate::doe::MarginalSpec;
use crate::error::Result;

/// A scalar response of `dim()` independent standard Gaussian inputs.
pub trait Model: Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, xi: &[f64]) -> Result<f64>;

    /// Response level whose exceedance is a failure.
    fn failure_threshold(&self) -> Option<f64> {
        None
    }

    /// Physical marginals, when inputs have a physical meaning.
    fn marginals(&self) -> Option<Vec<MarginalSpec>> {
        None
    }
}

impl<M: Model + ?Sized> Model for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        (**self).evaluate(xi)
    }

    fn failure_threshold(&self) -> Option<f64> {
        (**self).failure_threshold()
    }

    fn marginals(&self) -> Option<Vec<MarginalSpec>> {
        (**self).marginals()
    }
}

/// Shipped beam definition.
pub fn default_beam() -> Result<BeamSpec> {
    let spec: BeamSpec = toml::from_str(include_str!("../../data/beam.toy"))?;
    spec.validate()?;
    Ok(spec)
}
