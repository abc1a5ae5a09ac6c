//! Experiment configuration: a TOML file and command-line flags share the same
//! partial schema; values from the file take precedence over flags, and
//! anything still unset falls back to a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sohpce::basis::count_basis;
use sohpce::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Beam,
    PlaneTruss,
    SpatialTruss,
    Analytic,
    ExternalCsv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sohplsr,
    Olsr,
}

/// Exactly one of the three ways of sizing the design.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePlan {
    /// Expanded ratio: `N = ceil(gamma * P)`.
    pub gamma: Option<f64>,
    /// Raw ratio: `N = ceil(phi * M)`.
    pub phi: Option<f64>,
    pub n: Option<usize>,
}

impl SamplePlan {
    fn or(self, other: Self) -> Self {
        if self.gamma.is_some() || self.phi.is_some() || self.n.is_some() {
            self
        } else {
            other
        }
    }

    /// Sample size for `m` inputs and basis size `p`.
    pub fn resolve(&self, m: usize, p: usize, field: &str) -> Result<usize> {
        let given = [self.gamma.is_some(), self.phi.is_some(), self.n.is_some()]
            .iter()
            .filter(|g| **g)
            .count();
        if given != 1 {
            return Err(Error::Input(format!(
                "{field}: exactly one of gamma, phi or n must be given (found {given})"
            )));
        }
        let ratio = |v: f64, name: &str, base: usize| {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Input(format!("{field}.{name} must be positive, got {v}")));
            }
            // guard against representation noise such as 0.6 * 1770 = 1062.0000000000002
            let x = v * base as f64;
            let r = x.round();
            Ok(if (x - r).abs() <= 1e-9 * x { r } else { x.ceil() } as usize)
        };
        let n = match (self.gamma, self.phi, self.n) {
            (Some(g), _, _) => ratio(g, "gamma", p)?,
            (_, Some(f), _) => ratio(f, "phi", m)?,
            (_, _, Some(n)) => n,
            _ => unreachable!(),
        };
        if n < 3 {
            return Err(Error::Input(format!("{field}: resolved sample size {n} is below 3")));
        }
        Ok(n)
    }
}

/// One cell of a comparison sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareCell {
    pub method: Method,
    #[serde(flatten)]
    pub plan: SamplePlan,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default)]
    pub cells: Vec<CompareCell>,
    /// Pick-freeze base sample size of the Sobol reference.
    pub reference_n: Option<usize>,
    /// Direct Monte Carlo size of the failure probability reference.
    pub reference_n_mc: Option<usize>,
    /// Parallel sweep workers.
    pub workers: Option<usize>,
}

/// Every field optional; used for both the file and the flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub model: Option<ModelKind>,
    /// Geometry or beam file replacing the shipped default.
    pub geometry: Option<PathBuf>,
    /// Analytic function name, e.g. `mixed` or `linear:1,2,3`.
    pub analytic: Option<String>,
    /// Input dimension of an analytic model (padding with inert inputs).
    pub dim: Option<usize>,
    /// KL terms of the beam field (reduced beam variants).
    pub n_terms: Option<usize>,
    /// Design CSV with responses, for `external_csv`.
    pub design: Option<PathBuf>,
    pub p_max: Option<usize>,
    #[serde(default)]
    pub sample_plan: SamplePlan,
    pub method: Option<Method>,
    pub seed: Option<u64>,
    pub screening_threshold: Option<f64>,
    /// Overrides the model's own failure level.
    pub failure_level: Option<f64>,
    pub n_mc: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub max_components: Option<usize>,
    pub memory_budget_gib: Option<f64>,
    pub compare: Option<CompareConfig>,
}

impl PartialConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Input(format!("config: {}", e.message())))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative paths in a config file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.geometry, &mut cfg.design, &mut cfg.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// `self` wins wherever it is set.
    pub fn over(self, base: Self) -> Self {
        Self {
            model: self.model.or(base.model),
            geometry: self.geometry.or(base.geometry),
            analytic: self.analytic.or(base.analytic),
            dim: self.dim.or(base.dim),
            n_terms: self.n_terms.or(base.n_terms),
            design: self.design.or(base.design),
            p_max: self.p_max.or(base.p_max),
            sample_plan: self.sample_plan.or(base.sample_plan),
            method: self.method.or(base.method),
            seed: self.seed.or(base.seed),
            screening_threshold: self.screening_threshold.or(base.screening_threshold),
            failure_level: self.failure_level.or(base.failure_level),
            n_mc: self.n_mc.or(base.n_mc),
            output_dir: self.output_dir.or(base.output_dir),
            max_components: self.max_components.or(base.max_components),
            memory_budget_gib: self.memory_budget_gib.or(base.memory_budget_gib),
            compare: self.compare.or(base.compare),
        }
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let model = self
            .model
            .ok_or_else(|| Error::Input("model: missing (beam, plane_truss, spatial_truss, analytic or external_csv)".into()))?;
        let p_max = self.p_max.unwrap_or(3);
        if p_max == 0 {
            return Err(Error::Input("p_max: must be at least 1".into()));
        }
        let screening_threshold = self.screening_threshold.unwrap_or(0.01);
        if !(screening_threshold > 0.0 && screening_threshold < 1.0) {
            return Err(Error::Input(format!(
                "screening_threshold: must lie in (0, 1), got {screening_threshold}"
            )));
        }
        let n_mc = self.n_mc.unwrap_or(1_000_000);
        if n_mc == 0 {
            return Err(Error::Input("n_mc: must be positive".into()));
        }
        let memory_budget_gib = self.memory_budget_gib.unwrap_or(4.0);
        if !(memory_budget_gib > 0.0) {
            return Err(Error::Input("memory_budget_gib: must be positive".into()));
        }
        match model {
            ModelKind::Analytic if self.analytic.is_none() => {
                return Err(Error::Input("analytic: required when model = \"analytic\"".into()))
            }
            _ => {}
        }
        if let Some(level) = self.failure_level {
            if !level.is_finite() {
                return Err(Error::Input("failure_level: must be finite".into()));
            }
        }
        Ok(ExperimentConfig {
            model,
            geometry: self.geometry,
            analytic: self.analytic,
            dim: self.dim,
            n_terms: self.n_terms,
            design: self.design,
            p_max,
            sample_plan: self.sample_plan,
            method: self.method.unwrap_or(Method::Sohplsr),
            seed: self.seed.unwrap_or(0),
            screening_threshold,
            failure_level: self.failure_level,
            n_mc,
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            max_components: self.max_components,
            memory_budget_gib,
            compare: self.compare.unwrap_or_default(),
        })
    }
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub geometry: Option<PathBuf>,
    pub analytic: Option<String>,
    pub dim: Option<usize>,
    pub n_terms: Option<usize>,
    pub design: Option<PathBuf>,
    pub p_max: usize,
    pub sample_plan: SamplePlan,
    pub method: Method,
    pub seed: u64,
    pub screening_threshold: f64,
    pub failure_level: Option<f64>,
    pub n_mc: usize,
    pub output_dir: PathBuf,
    pub max_components: Option<usize>,
    pub memory_budget_gib: f64,
    pub compare: CompareConfig,
}

impl ExperimentConfig {
    pub fn memory_budget_bytes(&self) -> u64 {
        (self.memory_budget_gib * (1u64 << 30) as f64) as u64
    }

    /// Sample size for `m` inputs.
    pub fn sample_size(&self, m: usize) -> Result<usize> {
        self.sample_plan
            .resolve(m, count_basis(m, self.p_max)?, "sample_plan")
    }
}
