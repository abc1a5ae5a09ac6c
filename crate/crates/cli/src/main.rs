use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sohpce::{Error, ErrorKind, Result};
use sohpce_cli::config::{ExperimentConfig, Method, ModelKind, PartialConfig, SamplePlan};
use sohpce_cli::runner;

#[derive(Parser)]
#[command(name = "sohpce", version, about = "Hierarchical PLS chaos expansions: fitting, sensitivity and reliability")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a design and fit a surrogate.
    Fit(Common),
    /// Sobol indices of a saved surrogate.
    Sobol {
        #[arg(long)]
        model: PathBuf,
        /// JSON file with reference `main` and `total` arrays.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Screening, reconstruction and failure probability.
    Reliability {
        #[command(flatten)]
        common: Common,
        /// Reuse a saved surrogate (requires --design).
        #[arg(long, requires = "design")]
        model_file: Option<PathBuf>,
    },
    /// Method and sample-size sweep against brute-force references.
    Compare(Common),
    /// Brute-force references on the true model.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Direct Monte Carlo size for the failure probability.
        #[arg(long)]
        pf_n_mc: Option<usize>,
        /// Pick-freeze base sample size for the Sobol indices.
        #[arg(long)]
        sobol_n: Option<usize>,
    },
    /// Write a design for an external solver, with an empty response column.
    DoeExport {
        #[command(flatten)]
        common: Common,
        #[arg(long = "to")]
        to: PathBuf,
    },
    /// Fit a surrogate on an externally evaluated design.
    DoeImport {
        #[command(flatten)]
        common: Common,
        #[arg(long = "from")]
        from: PathBuf,
    },
}

/// Flags mirroring the configuration file; values in `--config` take precedence.
#[derive(Args)]
struct Common {
    /// TOML experiment file; its values take precedence over flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// beam, plane_truss, spatial_truss, analytic or external_csv.
    #[arg(long)]
    model_kind: Option<String>,
    /// Geometry file for the beam or a truss.
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// linear:a,b,..., bilinear, mixed or cubic.
    #[arg(long)]
    analytic: Option<String>,
    /// Input dimension for analytic and external models.
    #[arg(long)]
    dim: Option<usize>,
    /// Karhunen-Loeve terms of the beam field.
    #[arg(long)]
    n_terms: Option<usize>,
    /// Evaluated design CSV.
    #[arg(long)]
    design: Option<PathBuf>,
    /// Maximum total degree.
    #[arg(long)]
    p_max: Option<usize>,
    /// Sample size as a multiple of the basis size.
    #[arg(long)]
    gamma: Option<f64>,
    /// Sample size as a multiple of the input dimension.
    #[arg(long)]
    phi: Option<f64>,
    /// Explicit sample size.
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Seed for Monte Carlo sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Total Sobol index a variable needs to be retained.
    #[arg(long)]
    screening_threshold: Option<f64>,
    /// Failure when the response exceeds this level.
    #[arg(long)]
    failure_level: Option<f64>,
    /// Monte Carlo samples for the failure probability.
    #[arg(long)]
    n_mc: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Cap on PLS components per block.
    #[arg(long)]
    max_components: Option<usize>,
    /// Memory limit for the dense OLSR solve.
    #[arg(long)]
    memory_budget_gib: Option<f64>,
}

impl Common {
    fn resolve(self) -> Result<ExperimentConfig> {
        let model = match self.model_kind {
            Some(name) => Some(
                serde_json::from_value::<ModelKind>(serde_json::Value::String(name.clone()))
                    .map_err(|_| Error::Input(format!("model: unknown kind {name:?}")))?,
            ),
            None => None,
        };
        let flags = PartialConfig {
            model,
            geometry: self.geometry,
            analytic: self.analytic,
            dim: self.dim,
            n_terms: self.n_terms,
            design: self.design,
            p_max: self.p_max,
            sample_plan: SamplePlan {
                gamma: self.gamma,
                phi: self.phi,
                n: self.n,
            },
            method: self.method,
            seed: self.seed,
            screening_threshold: self.screening_threshold,
            failure_level: self.failure_level,
            n_mc: self.n_mc,
            output_dir: self.output_dir,
            max_components: self.max_components,
            memory_budget_gib: self.memory_budget_gib,
            compare: None,
        };
        let merged = match &self.config {
            Some(path) => PartialConfig::from_path(path)?.over(flags),
            None => flags,
        };
        merged.resolve()
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(common) => {
            let fit = runner::run_fit(&common.resolve()?)?;
            let r = &fit.report;
            println!("N = {}, P = {}, terms = {}", r.n, r.p, r.n_terms);
            if let (Some(i), Some(eps)) = (r.i_star, r.eps_star) {
                println!("i* = {i}, eps* = {eps:.6e}");
            }
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Sobol { model, reference, out } => {
            let s = runner::run_sensitivity(&model, reference.as_deref(), &out)?;
            for k in sohpce::sensitivity::SobolResult::ranking(&s.total).into_iter().take(10) {
                println!("xi_{:<4} S = {:.4e}  S_T = {:.4e}", k + 1, s.main[k], s.total[k]);
            }
        }
        Command::Reliability { common, model_file } => {
            let cfg = common.resolve()?;
            let saved = match (&model_file, &cfg.design) {
                (Some(m), Some(d)) => Some((m.clone(), d.clone())),
                _ => None,
            };
            let r = runner::run_reliability(&cfg, saved.as_ref().map(|(m, d)| (m.as_path(), d.as_path())))?;
            println!("retained = {:?} ({:?})", r.retained, r.strategy);
            println!("pf = {:.4e} +/- {:.1e}", r.pf, r.pf_se);
            if r.possible_surrogate_bias {
                eprintln!("warning: no failures observed; the surrogate may be biased");
            }
        }
        Command::Compare(common) => {
            for row in runner::run_compare(&common.resolve()?)? {
                match &row.error {
                    Some(e) => println!("cell {}: failed: {e}", row.cell),
                    None => println!(
                        "cell {}: {:?} N = {} max|dS| = {:.3e} max|dS_T| = {:.3e}",
                        row.cell,
                        row.method,
                        row.n.unwrap_or(0),
                        row.max_abs_error_main.unwrap_or(f64::NAN),
                        row.max_abs_error_total.unwrap_or(f64::NAN)
                    ),
                }
            }
        }
        Command::Oracle { common, pf_n_mc, sobol_n } => {
            let cfg = common.resolve()?;
            let pf_n_mc = pf_n_mc.or(if sobol_n.is_none() { Some(cfg.n_mc) } else { None });
            let report = runner::run_oracle(&cfg, pf_n_mc, sobol_n)?;
            if let Some(p) = report.probability {
                println!("pf = {:.4e} +/- {:.1e}", p.pf, p.pf_se);
            }
            if let Some(s) = report.sobol {
                println!("pick-freeze: n = {}, evaluations = {}", s.n, s.evaluations);
            }
        }
        Command::DoeExport { common, to } => {
            let cfg = common.resolve()?;
            let doe = runner::run_doe_export(&cfg, &to, cfg.dim)?;
            println!("wrote {} x {} design to {}", doe.nrows(), doe.dim(), to.display());
        }
        Command::DoeImport { mut common, from } => {
            common.model_kind.get_or_insert_with(|| "external_csv".into());
            let fit = runner::run_doe_import(&common.resolve()?, &from)?;
            println!("N = {}, P = {}, terms = {}", fit.report.n, fit.report.p, fit.report.n_terms);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Numeric => 3,
                ErrorKind::Budget => 4,
            })
        }
    }
}
