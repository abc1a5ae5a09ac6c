//! Subcommand implementations. Every function writes its outputs under the
//! configured output directory and returns the in-memory result as well.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sohpce::basis::{count_basis, enumerate_partition};
use sohpce::doe::DesignOfExperiments;
use sohpce::hierarchy::{olsr_fit, sohplsr_fit, FitOptions, OlsrOptions, PceModel, SohplsrModel};
use sohpce::models::{
    default_beam, AnalyticFunction, AnalyticModel, BeamModel, BeamSpec, Model, TrussModel, TrussSpec,
};
use sohpce::reliability::{
    direct_mc_reference, failure_probability, reconstruct, screen, Probability, ReliabilityResult,
};
use sohpce::sensitivity::{mc_sobol_reference, sobol_indices, McSobolResult, RelativeErrors, SobolResult};
use sohpce::doe::MarginalSpec;
use sohpce::{Error, Result};

use crate::config::{ExperimentConfig, Method, ModelKind, SamplePlan};

/// A built-in solver selected by the configuration.
pub enum BuiltModel {
    Beam(BeamModel),
    Truss(TrussModel),
    Analytic(AnalyticModel),
}

impl BuiltModel {
    fn inner(&self) -> &dyn Model {
        match self {
            Self::Beam(m) => m,
            Self::Truss(m) => m,
            Self::Analytic(m) => m,
        }
    }

    /// Closed-form indices, when known.
    pub fn exact_sobol(&self) -> Option<SobolResult> {
        match self {
            Self::Analytic(m) => {
                let (main, total) = m.exact_sobol();
                Some(SobolResult {
                    main,
                    total,
                    variance: m.variance(),
                    n_terms: 0,
                })
            }
            _ => None,
        }
    }
}

impl Model for BuiltModel {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        self.inner().evaluate(xi)
    }

    fn failure_threshold(&self) -> Option<f64> {
        self.inner().failure_threshold()
    }

    fn marginals(&self) -> Option<Vec<MarginalSpec>> {
        self.inner().marginals()
    }
}

/// The solver named by `cfg`; `None` for externally evaluated designs.
pub fn build_model(cfg: &ExperimentConfig) -> Result<Option<BuiltModel>> {
    let truss = |default: fn() -> TrussSpec| -> Result<BuiltModel> {
        let spec = match &cfg.geometry {
            Some(p) => TrussSpec::from_path(p)?,
            None => default(),
        };
        Ok(BuiltModel::Truss(TrussModel::new(spec)?))
    };
    Ok(Some(match cfg.model {
        ModelKind::Beam => {
            let mut spec: BeamSpec = match &cfg.geometry {
                Some(p) => toml::from_str(&fs::read_to_string(p)?)?,
                None => default_beam()?,
            };
            if let Some(n) = cfg.n_terms {
                spec.field.n_terms = n;
            }
            BuiltModel::Beam(BeamModel::new(spec)?)
        }
        ModelKind::PlaneTruss => truss(TrussSpec::plane32)?,
        ModelKind::SpatialTruss => truss(TrussSpec::spatial36)?,
        ModelKind::Analytic => {
            let f = AnalyticFunction::parse(cfg.analytic.as_deref().unwrap_or_default())?;
            let dim = cfg.dim.unwrap_or(f.active_dim());
            BuiltModel::Analytic(AnalyticModel::new(f, dim)?)
        }
        ModelKind::ExternalCsv => return Ok(None),
    }))
}

fn require_model(cfg: &ExperimentConfig, what: &str) -> Result<BuiltModel> {
    build_model(cfg)?
        .ok_or_else(|| Error::Input(format!("{what} needs a built-in model, not external_csv")))
}

/// Training design: a Sobol design evaluated by the built-in model, or the
/// imported CSV.
pub fn training_design(cfg: &ExperimentConfig, model: Option<&BuiltModel>, plan: &SamplePlan) -> Result<DesignOfExperiments> {
    match model {
        Some(model) => {
            let m = model.dim();
            let n = plan.resolve(m, count_basis(m, cfg.p_max)?, "sample_plan")?;
            let marginals = model.marginals();
            let mut doe = DesignOfExperiments::sobol(n, m, 1, marginals.as_deref())?;
            doe.evaluate(|x| model.evaluate(x))?;
            Ok(doe)
        }
        None => {
            let path = cfg
                .design
                .as_ref()
                .ok_or_else(|| Error::Input("design: required when model = \"external_csv\"".into()))?;
            DesignOfExperiments::read_csv(fs::File::open(path)?)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentCount {
    /// `(level, interaction, subblock)` for level one, `(level, interaction)`
    /// for level two and `(level)` for level three.
    pub label: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config: ExperimentConfig,
    pub method: Method,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub gamma: f64,
    pub phi: f64,
    pub i_star: Option<usize>,
    /// Selected `k*` of every evaluated interaction degree.
    pub k_star: Option<Vec<usize>>,
    pub latent: Vec<LatentCount>,
    pub eps_star: Option<f64>,
    pub eps_trace: Option<Vec<f64>>,
    pub n_terms: usize,
    pub warnings: Vec<String>,
}

fn latent_counts(model: &SohplsrModel) -> Vec<LatentCount> {
    let mut out = Vec::new();
    for fo in &model.per_interaction {
        for (k, sub) in fo.level1.iter().enumerate() {
            out.push(LatentCount {
                label: format!("(1,{},{})", fo.interaction, k + 1),
                count: sub.model.h(),
            });
        }
        if let Some(l2) = &fo.level2 {
            out.push(LatentCount {
                label: format!("(2,{})", fo.interaction),
                count: l2.h(),
            });
        }
    }
    if let Some(l3) = &model.level3 {
        out.push(LatentCount {
            label: "(3)".into(),
            count: l3.h(),
        });
    }
    out
}

/// Fits `method` on `doe`.
pub fn fit_design(cfg: &ExperimentConfig, method: Method, doe: &DesignOfExperiments) -> Result<(PceModel, FitReport)> {
    let m = doe.dim();
    let n = doe.nrows();
    let partition = enumerate_partition(m, cfg.p_max)?;
    let p = partition.len();
    let mut report = FitReport {
        config: cfg.clone(),
        method,
        n,
        m,
        p,
        gamma: n as f64 / p as f64,
        phi: n as f64 / m as f64,
        i_star: None,
        k_star: None,
        latent: Vec::new(),
        eps_star: None,
        eps_trace: None,
        n_terms: 0,
        warnings: Vec::new(),
    };
    let pce = match method {
        Method::Sohplsr => {
            let opts = FitOptions {
                max_components: cfg.max_components,
            };
            let model = sohplsr_fit(&partition, &doe.xi, &doe.f, doe.f_mean, &opts)?;
            report.i_star = Some(model.i_star);
            report.k_star = Some(model.k_stars.clone());
            report.latent = latent_counts(&model);
            report.eps_star = Some(model.eps_star());
            report.eps_trace = Some(model.eps_trace.clone());
            model.pce
        }
        Method::Olsr => {
            let opts = OlsrOptions {
                memory_budget: cfg.memory_budget_bytes(),
            };
            let model = olsr_fit(&partition, &doe.xi, &doe.f, doe.f_mean, &opts)?;
            if model.underdetermined {
                report.warnings.push(format!(
                    "underdetermined least squares: N = {n} < P = {p}; minimum-norm solution used"
                ));
            }
            model.pce
        }
    };
    report.n_terms = pce.len();
    Ok((pce, report))
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg.output_dir.clone())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub struct FitOutcome {
    pub doe: DesignOfExperiments,
    pub pce: PceModel,
    pub report: FitReport,
}

/// `fit`: design, evaluation and surrogate; writes `design.csv`, `model.json`
/// and `fit_report.json`.
pub fn run_fit(cfg: &ExperimentConfig) -> Result<FitOutcome> {
    let model = build_model(cfg)?;
    let doe = training_design(cfg, model.as_ref(), &cfg.sample_plan)?;
    let (pce, report) = fit_design(cfg, cfg.method, &doe)?;
    let dir = out_dir(cfg)?;
    doe.write_csv(fs::File::create(dir.join("design.csv"))?)?;
    fs::write(dir.join("model.json"), pce.to_json()? + "\n")?;
    write_json(&dir.join("fit_report.json"), &report)?;
    Ok(FitOutcome { doe, pce, report })
}

#[derive(Deserialize)]
struct IndexFile {
    main: Vec<f64>,
    total: Vec<f64>,
}

/// `sobol`: indices of a saved surrogate; with a reference file (any JSON
/// holding `main` and `total` arrays) also the relative error tables.
pub fn run_sensitivity(model_path: &Path, reference: Option<&Path>, dir: &Path) -> Result<SobolResult> {
    let pce = PceModel::from_json(&fs::read_to_string(model_path)?)?;
    let sobol = sobol_indices(&pce)?;
    fs::create_dir_all(dir)?;
    sobol.write_csv(fs::File::create(dir.join("sobol.csv"))?)?;
    write_json(&dir.join("sobol.json"), &sobol)?;
    if let Some(path) = reference {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("reference file {}: {e}", path.display())))?;
        let r: IndexFile = serde_json::from_str(&text)?;
        let reference = SobolResult {
            main: r.main,
            total: r.total,
            variance: f64::NAN,
            n_terms: 0,
        };
        let errors = RelativeErrors::new(&sobol, &reference)?;
        errors.write_csv(fs::File::create(dir.join("relative_errors.csv"))?)?;
        let mut w = csv::Writer::from_writer(fs::File::create(dir.join("error_magnitudes.csv"))?);
        w.write_record(["log10_decade", "count_S_i", "count_S_Ti"])
            .map_err(Error::from)?;
        for (d, a, b) in errors.magnitude_histogram() {
            w.write_record([d.to_string(), a.to_string(), b.to_string()])
                .map_err(Error::from)?;
        }
        w.flush()?;
    }
    Ok(sobol)
}

fn failure_level(cfg: &ExperimentConfig, model: Option<&BuiltModel>) -> Result<f64> {
    cfg.failure_level
        .or_else(|| model.and_then(|m| m.failure_threshold()))
        .ok_or_else(|| Error::Input("failure_level: required for this model".into()))
}

/// Screening, reconstruction and surrogate Monte Carlo on a fitted design.
pub fn reliability_from(
    cfg: &ExperimentConfig,
    doe: &DesignOfExperiments,
    pce: &PceModel,
    level: f64,
    seed: u64,
) -> Result<ReliabilityResult> {
    let sobol = sobol_indices(pce)?;
    let retained = screen(&sobol, cfg.screening_threshold)?;
    let fit = FitOptions {
        max_components: cfg.max_components,
    };
    let olsr = OlsrOptions {
        memory_budget: cfg.memory_budget_bytes(),
    };
    let recon = reconstruct(&retained, &doe.xi, &doe.f, doe.f_mean, cfg.p_max, &fit, &olsr)?;
    failure_probability(&recon, cfg.screening_threshold, level, cfg.n_mc, seed, None)
}

/// `reliability`: fit (or reuse a saved model and design), then screen,
/// reconstruct and estimate the failure probability; writes `reliability.json`.
pub fn run_reliability(cfg: &ExperimentConfig, saved: Option<(&Path, &Path)>) -> Result<ReliabilityResult> {
    let model = build_model(cfg)?;
    let level = failure_level(cfg, model.as_ref())?;
    let (doe, pce) = match saved {
        Some((model_path, design_path)) => (
            DesignOfExperiments::read_csv(fs::File::open(design_path)?)?,
            PceModel::from_json(&fs::read_to_string(model_path)?)?,
        ),
        None => {
            let fit = run_fit(cfg)?;
            (fit.doe, fit.pce)
        }
    };
    if pce.dim() != doe.dim() {
        return Err(Error::DimensionMismatch {
            expected: doe.dim(),
            got: pce.dim(),
        });
    }
    let result = reliability_from(cfg, &doe, &pce, level, cfg.seed)?;
    write_json(&out_dir(cfg)?.join("reliability.json"), &result)?;
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub failure_level: Option<f64>,
    pub probability: Option<Probability>,
    pub sobol: Option<McSobolResult>,
}

/// `oracle`: brute-force references on the true model; writes `oracle.json`
/// and, for the Sobol reference, `oracle_sobol.csv` / `oracle_sobol.json`.
pub fn run_oracle(cfg: &ExperimentConfig, pf_n_mc: Option<usize>, sobol_n: Option<usize>) -> Result<OracleReport> {
    let model = require_model(cfg, "oracle")?;
    let dir = out_dir(cfg)?;
    let mut report = OracleReport {
        failure_level: None,
        probability: None,
        sobol: None,
    };
    if let Some(n) = pf_n_mc {
        let level = failure_level(cfg, Some(&model))?;
        report.failure_level = Some(level);
        report.probability = Some(direct_mc_reference(&model, level, n, cfg.seed)?);
    }
    if let Some(n) = sobol_n {
        let s = mc_sobol_reference(&model, n, cfg.seed)?;
        s.write_csv(fs::File::create(dir.join("oracle_sobol.csv"))?)?;
        write_json(&dir.join("oracle_sobol.json"), &s)?;
        report.sobol = Some(s);
    }
    write_json(&dir.join("oracle.json"), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub cell: usize,
    pub method: Method,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub phi: Option<f64>,
    pub fit_seconds: Option<f64>,
    pub max_abs_error_main: Option<f64>,
    pub max_abs_error_total: Option<f64>,
    pub pf: Option<f64>,
    pub pf_relative_error: Option<f64>,
    pub error: Option<String>,
}

/// Per-cell seed derived from the master seed.
pub fn cell_seed(master: u64, cell: usize) -> u64 {
    master.wrapping_add((cell as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `compare`: one row per (method, sample plan) cell against shared
/// references; failed cells are recorded and the sweep continues. Writes
/// `compare.csv` and `compare.json`.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<Vec<CompareRow>> {
    if cfg.compare.cells.is_empty() {
        return Err(Error::Input("compare.cells: at least one cell is required".into()));
    }
    let model = require_model(cfg, "compare")?;
    let reference_sobol = match model.exact_sobol() {
        Some(s) => s,
        None => mc_sobol_reference(&model, cfg.compare.reference_n.unwrap_or(10_000), cfg.seed)?.as_sobol(),
    };
    let level = failure_level(cfg, Some(&model)).ok();
    let reference_pf = match level {
        Some(level) => Some(direct_mc_reference(
            &model,
            level,
            cfg.compare.reference_n_mc.unwrap_or(300_000),
            cfg.seed,
        )?),
        None => None,
    };

    let run_cell = |(idx, cell): (usize, &crate::config::CompareCell)| -> CompareRow {
        let mut row = CompareRow {
            cell: idx,
            method: cell.method,
            n: None,
            gamma: None,
            phi: None,
            fit_seconds: None,
            max_abs_error_main: None,
            max_abs_error_total: None,
            pf: None,
            pf_relative_error: None,
            error: None,
        };
        let result = (|| -> Result<()> {
            let doe = training_design(cfg, Some(&model), &cell.plan)?;
            let start = Instant::now();
            let (pce, report) = fit_design(cfg, cell.method, &doe)?;
            row.fit_seconds = Some(start.elapsed().as_secs_f64());
            row.n = Some(report.n);
            row.gamma = Some(report.gamma);
            row.phi = Some(report.phi);
            let s = sobol_indices(&pce)?;
            row.max_abs_error_main = Some(max_abs_diff(&s.main, &reference_sobol.main));
            row.max_abs_error_total = Some(max_abs_diff(&s.total, &reference_sobol.total));
            if let (Some(level), Some(reference)) = (level, reference_pf) {
                let r = reliability_from(cfg, &doe, &pce, level, cell_seed(cfg.seed, idx))?;
                row.pf = Some(r.pf);
                row.pf_relative_error = Some((r.pf - reference.pf) / reference.pf);
            }
            Ok(())
        })();
        if let Err(e) = result {
            row.error = Some(e.to_string());
        }
        row
    };

    let workers = cfg.compare.workers.unwrap_or(1).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Input(format!("compare.workers: {e}")))?;
    let rows: Vec<CompareRow> =
        pool.install(|| cfg.compare.cells.par_iter().enumerate().map(run_cell).collect());

    let dir = out_dir(cfg)?;
    let mut w = csv::Writer::from_writer(fs::File::create(dir.join("compare.csv"))?);
    w.write_record([
        "cell",
        "method",
        "N",
        "gamma",
        "phi",
        "fit_seconds",
        "max_abs_error_S_i",
        "max_abs_error_S_Ti",
        "pf",
        "pf_relative_error",
        "error",
    ])
    .map_err(Error::from)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    for r in &rows {
        w.write_record([
            r.cell.to_string(),
            format!("{:?}", r.method).to_lowercase(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            opt(r.gamma),
            opt(r.phi),
            opt(r.fit_seconds),
            opt(r.max_abs_error_main),
            opt(r.max_abs_error_total),
            opt(r.pf),
            opt(r.pf_relative_error),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(Error::from)?;
    }
    w.flush()?;
    write_json(&dir.join("compare.json"), &rows)?;
    Ok(rows)
}

/// `doe-export`: the design an external solver should evaluate, with an empty `y` column.
pub fn run_doe_export(cfg: &ExperimentConfig, out: &Path, dim: Option<usize>) -> Result<DesignOfExperiments> {
    let model = build_model(cfg)?;
    let (m, marginals) = match (&model, dim.or(cfg.dim)) {
        (Some(model), _) => (model.dim(), model.marginals()),
        (None, Some(m)) => (m, None),
        (None, None) => return Err(Error::Input("dim: required to export a design for external_csv".into())),
    };
    let n = cfg.sample_size(m)?;
    let doe = DesignOfExperiments::sobol(n, m, 1, marginals.as_deref())?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    doe.write_csv_template(fs::File::create(out)?)?;
    Ok(doe)
}

/// `doe-import`: fits a surrogate on an externally evaluated design.
pub fn run_doe_import(cfg: &ExperimentConfig, design: &Path) -> Result<FitOutcome> {
    let mut cfg = cfg.clone();
    cfg.model = ModelKind::ExternalCsv;
    cfg.design = Some(design.to_path_buf());
    run_fit(&cfg)
}
