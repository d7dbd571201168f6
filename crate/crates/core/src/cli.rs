//! Command-line front end shared by the `circfit` binary and the tests.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::bands::{confidence_band_with, BandOptions};
use crate::error::{CircError, Result};
use crate::family::Family;
use crate::io::{read_table_path, to_json, write_atomic, AngleUnit, Table};
use crate::kernel::Kernel;
use crate::local_fit::fit_curve;
use crate::partial_linear::{backfit, KappaSelector, PartialLinearData, PartialLinearFit};
use crate::quadrature::circular_grid;
use crate::sample::CircularSample;
use crate::selection::{select_kappa, KappaGrid, SelectionOptions, SelectionResult, Selector};
use crate::sim::{monte_carlo, table2, table2_csv, table_selectors, ModelId, ModelSpec, MonteCarloOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Fit a curve on an equispaced grid.
    Fit,
    /// Fit a curve and a pointwise confidence band.
    Bands,
    /// Run a concentration selector and report its objective trace.
    Select,
    /// Monte Carlo comparison of selectors on one simulation model.
    Simulate,
    /// Mean-ISE table over models and sample sizes.
    Table2,
    /// Partially linear model by backfitting.
    Plm,
}

/// Everything one invocation needs.
#[derive(Debug, Clone, Parser)]
#[command(name = "circfit", version, about = "Local likelihood regression on a circular covariate")]
pub struct RunConfig {
    pub command: Command,
    #[arg(long, default_value = "normal")]
    pub family: Family,
    /// Local polynomial degree.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Derivative order to estimate.
    #[arg(long, default_value_t = 0)]
    pub nu: usize,
    /// Concentration selector (default `refined` unless --kappa is given).
    #[arg(long, conflicts_with = "kappa")]
    pub selector: Option<Selector>,
    /// Fixed kernel concentration.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Number of equispaced output angles.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Pilot concentration for the band bias estimate.
    #[arg(long)]
    pub pilot_kappa: Option<f64>,
    #[arg(long, value_enum, default_value = "rad")]
    pub unit: AngleUnit,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "CIRCFIT_THREADS")]
    pub threads: Option<usize>,
    /// Simulation models, comma separated.
    #[arg(long, alias = "model", value_delimiter = ',')]
    pub models: Vec<ModelId>,
    /// Sample sizes, comma separated.
    #[arg(long = "n", value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Monte Carlo replications.
    #[arg(long = "B", default_value_t = 100)]
    pub replications: usize,
}

/// Text produced by a command, plus a computational failure to report
/// after the artifact has been written.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub contents: String,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    pub family: Family,
    pub p: usize,
    pub nu: usize,
    pub n: usize,
    pub selection: Option<SelectionResult>,
    pub feasible: Vec<bool>,
    pub failures: Vec<Option<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveOutput {
    pub grid: Vec<f64>,
    pub ghat: Vec<f64>,
    pub kappa: f64,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, Serialize)]
pub struct BandDiagnostics {
    #[serde(flatten)]
    pub fit: FitDiagnostics,
    pub z: f64,
    pub pilot_kappa: f64,
    pub smoothed_bias: Vec<f64>,
    pub smoothed_variance: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BandOutput {
    pub grid: Vec<f64>,
    pub ghat: Vec<f64>,
    pub kappa: f64,
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub diagnostics: BandDiagnostics,
}

impl RunConfig {
    fn input_table(&self) -> Result<Table> {
        let path = self
            .input
            .as_ref()
            .ok_or_else(|| CircError::InvalidArgument(format!("--in is required for {:?}", self.command)))?;
        read_table_path(path, self.unit)
    }

    fn sample(&self) -> Result<(Table, CircularSample)> {
        let table = self.input_table()?;
        let sample = CircularSample::for_family(table.theta.clone(), table.y.clone(), self.family)?;
        Ok((table, sample))
    }

    fn selector_or_default(&self) -> Selector {
        self.selector.unwrap_or(Selector::Refined)
    }

    /// The fixed κ, or the selector's choice together with its trace.
    fn resolve_kappa(&self, sample: &CircularSample, kernel: &Kernel) -> Result<(f64, Option<SelectionResult>)> {
        if let Some(kappa) = self.kappa {
            return Ok((kappa, None));
        }
        let result = select_kappa(
            self.selector_or_default(),
            sample,
            self.family,
            self.p,
            self.nu,
            kernel,
            &KappaGrid::default(),
            &SelectionOptions::default(),
        )?;
        Ok((result.kappa_hat, Some(result)))
    }

    fn check(&self) -> Result<()> {
        if self.selector.is_some() && self.kappa.is_some() {
            return Err(CircError::InvalidArgument("give either --selector or --kappa, not both".into()));
        }
        if self.grid == 0 {
            return Err(CircError::InvalidArgument("--grid must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(CircError::InvalidArgument("--threads must be positive".into()));
        }
        Ok(())
    }
}

fn failure_summary(failures: &[Option<String>]) -> Option<String> {
    let count = failures.iter().filter(|f| f.is_some()).count();
    let first = failures.iter().enumerate().find_map(|(i, f)| f.as_ref().map(|r| (i, r)));
    first.map(|(i, reason)| format!("{count} grid angles have no estimate; first at index {i}: {reason}"))
}

fn run_fit(config: &RunConfig) -> Result<Artifact> {
    let kernel = Kernel::von_mises();
    let (_, sample) = config.sample()?;
    let (kappa, selection) = config.resolve_kappa(&sample, &kernel)?;
    let grid = circular_grid(config.grid);
    let curve = fit_curve(&sample, config.family, &grid, config.p, config.nu, kappa, &kernel)?;
    let failure = failure_summary(&curve.failures);
    let output = CurveOutput {
        grid: curve.grid,
        ghat: curve.values,
        kappa,
        diagnostics: FitDiagnostics {
            family: config.family,
            p: config.p,
            nu: config.nu,
            n: sample.len(),
            selection,
            feasible: curve.fits.iter().map(|f| f.as_ref().is_some_and(|f| f.converged)).collect(),
            failures: curve.failures,
        },
    };
    Ok(Artifact {
        contents: to_json(&output)?,
        failure,
    })
}

fn run_bands(config: &RunConfig) -> Result<Artifact> {
    let kernel = Kernel::von_mises();
    let (_, sample) = config.sample()?;
    let (kappa, selection) = config.resolve_kappa(&sample, &kernel)?;
    let grid = circular_grid(config.grid);
    let options = BandOptions {
        pilot_kappa: config.pilot_kappa,
        ..BandOptions::default()
    };
    let band = confidence_band_with(
        &sample,
        config.family,
        &grid,
        config.p,
        config.nu,
        kappa,
        config.level,
        &kernel,
        &options,
    )?;
    let failure = band
        .feasible
        .iter()
        .position(|f| !f)
        .map(|i| format!("band has gaps; first at index {i}"));
    let failures = band
        .feasible
        .iter()
        .map(|&f| if f { None } else { Some("no estimate".to_string()) })
        .collect();
    let output = BandOutput {
        grid: band.grid,
        ghat: band.estimate,
        kappa,
        center: band.center,
        lower: band.lower,
        upper: band.upper,
        level: band.level,
        diagnostics: BandDiagnostics {
            fit: FitDiagnostics {
                family: config.family,
                p: config.p,
                nu: config.nu,
                n: sample.len(),
                selection,
                feasible: band.feasible,
                failures,
            },
            z: band.z,
            pilot_kappa: band.pilot_kappa,
            smoothed_bias: band.smoothed_bias,
            smoothed_variance: band.smoothed_variance,
        },
    };
    Ok(Artifact {
        contents: to_json(&output)?,
        failure,
    })
}

fn run_select(config: &RunConfig) -> Result<Artifact> {
    if config.kappa.is_some() {
        return Err(CircError::InvalidArgument("select takes --selector, not --kappa".into()));
    }
    let kernel = Kernel::von_mises();
    let (_, sample) = config.sample()?;
    let (_, selection) = config.resolve_kappa(&sample, &kernel)?;
    Ok(Artifact {
        contents: to_json(&selection)?,
        failure: None,
    })
}

fn monte_carlo_options(config: &RunConfig) -> MonteCarloOptions {
    MonteCarloOptions {
        p: config.p,
        ..MonteCarloOptions::default()
    }
}

fn run_simulate(config: &RunConfig) -> Result<Artifact> {
    let [model] = config.models[..] else {
        return Err(CircError::InvalidArgument("simulate needs exactly one model in --models".into()));
    };
    let [n] = config.n[..] else {
        return Err(CircError::InvalidArgument("simulate needs exactly one sample size in --n".into()));
    };
    let spec = ModelSpec::new(model);
    let selectors = match config.selector {
        Some(s) => vec![s],
        None => table_selectors(spec.family).to_vec(),
    };
    let report = monte_carlo(
        &spec,
        n,
        config.replications,
        &selectors,
        config.seed,
        &monte_carlo_options(config),
    )?;
    let failure = report
        .high_failure_rate
        .then(|| format!("{} replications failed", report.failures.len()));
    Ok(Artifact {
        contents: to_json(&report)?,
        failure,
    })
}

fn run_table2(config: &RunConfig) -> Result<Artifact> {
    let models = if config.models.is_empty() {
        ModelId::ALL.to_vec()
    } else {
        config.models.clone()
    };
    let ns = if config.n.is_empty() { vec![100, 250, 500] } else { config.n.clone() };
    let rows = table2(&models, &ns, config.replications, config.seed, &monte_carlo_options(config))?;
    Ok(Artifact {
        contents: table2_csv(&rows),
        failure: None,
    })
}

#[derive(Serialize)]
struct PlmOutput<'a> {
    family: Family,
    p: usize,
    n: usize,
    #[serde(flatten)]
    fit: &'a PartialLinearFit,
}

fn run_plm(config: &RunConfig) -> Result<Artifact> {
    let kernel = Kernel::von_mises();
    let table = config.input_table()?;
    let n = table.len();
    let data = PartialLinearData::new(table.y, table.linear, table.circular, table.theta)?;
    let selector = match config.kappa {
        Some(k) => KappaSelector::Fixed(k),
        None => KappaSelector::select(config.selector_or_default()),
    };
    let mut fit = backfit(&data, config.family, config.p, &kernel, &selector)?;
    let mut names = vec!["intercept".to_string()];
    names.extend(table.linear_names.iter().cloned());
    for phi in &table.circular_names {
        names.push(format!("sin_{phi}"));
        names.push(format!("cos_{phi}"));
    }
    fit.coefficient_names = names;
    let failure = (!fit.converged).then(|| format!("backfitting stopped after {} iterations", fit.iterations));
    let output = PlmOutput {
        family: config.family,
        p: config.p,
        n,
        fit: &fit,
    };
    Ok(Artifact {
        contents: to_json(&output)?,
        failure,
    })
}

/// Runs one command and returns its artifact without writing it.
pub fn execute(config: &RunConfig) -> Result<Artifact> {
    config.check()?;
    let work = || match config.command {
        Command::Fit => run_fit(config),
        Command::Bands => run_bands(config),
        Command::Select => run_select(config),
        Command::Simulate => run_simulate(config),
        Command::Table2 => run_table2(config),
        Command::Plm => run_plm(config),
    };
    match config.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CircError::InvalidArgument(format!("cannot start {threads} threads: {e}")))?
            .install(work),
        None => work(),
    }
}

fn describe(error: &CircError) -> String {
    match error {
        CircError::InvalidResponse { row, reason } => format!(
            "invalid input at data row {} (line {}): {reason}",
            row + 1,
            row + 2
        ),
        other => other.to_string(),
    }
}

/// Parses arguments, runs the command and writes its output. Returns the
/// process exit status: 0 on success, 1 for a computational failure, 2 for
/// invalid input.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let artifact = match execute(&config) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            return if e.is_input_error() { 2 } else { 1 };
        }
    };
    let written = match &config.out {
        Some(path) => write_atomic(path, artifact.contents.as_bytes()),
        None => {
            print!("{}", artifact.contents);
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {}", describe(&e));
        return 2;
    }
    match artifact.failure {
        Some(reason) => {
            eprintln!("error: {reason}");
            1
        }
        None => 0,
    }
}
