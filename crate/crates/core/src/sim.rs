//! Simulation models, the relative integrated squared error and the Monte
//! Carlo study comparing concentration selectors.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CircError, Result};
use crate::family::{logistic, Family};
use crate::kernel::Kernel;
use crate::local_fit::fit_curve;
use crate::quadrature::{circular_grid, periodic_simpson};
use crate::sample::CircularSample;
use crate::selection::{
    cv_kappa, refined_with_pilot, residual_kappa, KappaGrid, SelectionOptions, Selector,
};

/// Nodes of the Simpson rule used for the integrated squared error.
pub const ISE_NODES: usize = 256;
/// Angles at which each replication is fitted.
pub const FIT_ANGLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ModelId {
    N1,
    N2,
    B1,
    B2,
    P1,
    P2,
    G1,
    G2,
}

impl ModelId {
    pub const ALL: [ModelId; 8] = [
        ModelId::N1,
        ModelId::N2,
        ModelId::B1,
        ModelId::B2,
        ModelId::P1,
        ModelId::P2,
        ModelId::G1,
        ModelId::G2,
    ];

    pub fn family(self) -> Family {
        match self {
            ModelId::N1 | ModelId::N2 => Family::Normal,
            ModelId::B1 | ModelId::B2 => Family::Bernoulli,
            ModelId::P1 | ModelId::P2 => Family::Poisson,
            ModelId::G1 | ModelId::G2 => Family::Gamma,
        }
    }

    /// Whether this is the first model of its family.
    pub fn is_first(self) -> bool {
        matches!(self, ModelId::N1 | ModelId::B1 | ModelId::P1 | ModelId::G1)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("{self:?}"))
    }
}

impl FromStr for ModelId {
    type Err = CircError;
    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| CircError::InvalidArgument(format!("unknown model '{s}'")))
    }
}

/// A simulation model: target `g`, family and nuisance parameter, with the
/// covariate uniform on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelSpec {
    pub id: ModelId,
    pub family: Family,
    /// Normal standard deviation or gamma shape; unused otherwise.
    pub nuisance: Option<f64>,
}

impl ModelSpec {
    pub fn new(id: ModelId) -> Self {
        let nuisance = match id {
            ModelId::N1 => Some(0.35),
            ModelId::N2 => Some(0.5),
            ModelId::G1 => Some(1.0),
            ModelId::G2 => Some(2.0),
            _ => None,
        };
        ModelSpec {
            id,
            family: id.family(),
            nuisance,
        }
    }

    /// The same model with another normal standard deviation or gamma shape.
    pub fn with_nuisance(mut self, value: f64) -> Result<Self> {
        if !matches!(self.family, Family::Normal | Family::Gamma) {
            return Err(CircError::ModelSpec(format!(
                "{} has no nuisance parameter",
                self.id
            )));
        }
        if !(value > 0.0 && value.is_finite()) {
            return Err(CircError::ModelSpec(format!(
                "nuisance parameter must be positive, got {value}"
            )));
        }
        self.nuisance = Some(value);
        Ok(self)
    }

    /// Mean of `Y` given `Θ = θ` for the Poisson and gamma models.
    fn mu(&self, t: f64) -> Option<f64> {
        match self.id {
            ModelId::P1 => Some(5.0 + (1.5 * (2.0 * t - 3.0).sin()).exp()),
            ModelId::P2 => Some(40.0 + 20.0 * (2.0 * t).sin()),
            ModelId::G1 => Some(4.0 + 4.0 * (2.0 * t).sin() * t.cos()),
            ModelId::G2 => Some(5.0 + 2.0 * (3.0 + 1.5 * t.sin()).cos()),
            _ => None,
        }
    }

    /// The target function on the link scale.
    pub fn g_true(&self, t: f64) -> f64 {
        match self.id {
            ModelId::N1 => (2.0 * t).sin() * t.cos(),
            ModelId::N2 => 1.75 * (t - PI).cos() * t.sin() + t.cos(),
            ModelId::B1 => 2.0 * t.sin() * (2.0 * t).cos(),
            ModelId::B2 => (1.6 + 1.5 * t.sin() + 0.1 * t.cos().exp()).ln(),
            _ => self.mu(t).expect("mean model").ln(),
        }
    }

    /// `E[Y | Θ = θ]`.
    pub fn mean(&self, t: f64) -> f64 {
        match self.family {
            Family::Normal => self.g_true(t),
            Family::Bernoulli => logistic(self.g_true(t)),
            _ => self.mu(t).expect("mean model"),
        }
    }

    /// `Var[Y | Θ = θ]`.
    pub fn variance(&self, t: f64) -> f64 {
        let m = self.mean(t);
        match self.family {
            Family::Normal => self.nuisance.unwrap_or(1.0).powi(2),
            Family::Bernoulli => m * (1.0 - m),
            Family::Poisson => m,
            Family::Gamma => m * m / self.nuisance.unwrap_or(1.0),
        }
    }

    fn check(&self) -> Result<()> {
        if matches!(self.family, Family::Poisson | Family::Gamma) {
            let low = circular_grid(4096)
                .into_iter()
                .map(|t| self.mean(t))
                .fold(f64::INFINITY, f64::min);
            if !(low > 0.0) {
                return Err(CircError::ModelSpec(format!(
                    "{} mean is not positive (minimum {low})",
                    self.id
                )));
            }
        }
        if matches!(self.family, Family::Normal | Family::Gamma) && self.nuisance.is_none() {
            return Err(CircError::ModelSpec(format!("{} needs a nuisance parameter", self.id)));
        }
        Ok(())
    }

    /// Draws `Y` given `Θ = θ`.
    pub fn draw<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        match self.family {
            Family::Normal => {
                let sd = self.nuisance.expect("normal sd");
                Normal::new(self.g_true(t), sd).expect("valid normal").sample(rng)
            }
            Family::Bernoulli => f64::from(u8::from(rng.random::<f64>() < self.mean(t))),
            Family::Poisson => Poisson::new(self.mean(t)).expect("valid poisson").sample(rng),
            Family::Gamma => {
                // shape α and rate α/μ, so the mean is exactly μ
                let alpha = self.nuisance.expect("gamma shape");
                Gamma::new(alpha, self.mean(t) / alpha).expect("valid gamma").sample(rng)
            }
        }
    }
}

/// Scale on which the integrated squared error compares curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IseScale {
    /// The target `g` itself.
    Link,
    /// The conditional mean `T⁻¹(g)`.
    Mean,
}

impl ModelSpec {
    /// Bernoulli models are compared on the probability scale, the others on
    /// the link scale.
    pub fn ise_scale(&self) -> IseScale {
        match self.family {
            Family::Bernoulli => IseScale::Mean,
            _ => IseScale::Link,
        }
    }

    /// Relative ISE of link-scale values on the [`FIT_ANGLES`] grid.
    pub fn ise(&self, values: &[f64], scale: IseScale) -> Result<f64> {
        match scale {
            IseScale::Link => ise_from_grid(values, |t| self.g_true(t)),
            IseScale::Mean => {
                let mean: Vec<f64> = values.iter().map(|&v| self.family.inverse_link(v)).collect();
                ise_from_grid(&mean, |t| self.mean(t))
            }
        }
    }
}

impl From<ModelId> for ModelSpec {
    fn from(id: ModelId) -> Self {
        ModelSpec::new(id)
    }
}

/// Random stream purposes within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Data = 0,
    Auxiliary = 1,
}

/// The generator for `(seed, replication, purpose)`: ChaCha20 keyed by the
/// seed, with a distinct stream per replication and purpose.
pub fn stream_rng(seed: u64, replication: u64, purpose: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replication.wrapping_mul(2).wrapping_add(purpose as u64));
    rng
}

/// Draws `n` observations from the model.
pub fn simulate_with<R: Rng + ?Sized>(spec: &ModelSpec, n: usize, rng: &mut R) -> Result<CircularSample> {
    if n == 0 {
        return Err(CircError::InvalidArgument("n must be at least 1".into()));
    }
    spec.check()?;
    let mut angles = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.random::<f64>() * TAU;
        angles.push(t);
        ys.push(spec.draw(t, rng));
    }
    CircularSample::for_family(angles, ys, spec.family)
}

/// Draws `n` observations deterministically from `seed`.
pub fn simulate_model(spec: &ModelSpec, n: usize, seed: u64) -> Result<CircularSample> {
    simulate_with(spec, n, &mut stream_rng(seed, 0, Stream::Data))
}

/// `∫(ĝ − g)² / ∫g²` over the circle by Simpson's rule on 256 nodes.
pub fn approx_ise(ghat: impl Fn(f64) -> f64, gtrue: impl Fn(f64) -> f64) -> Result<f64> {
    let grid = circular_grid(ISE_NODES);
    let num: Vec<f64> = grid.iter().map(|&t| (ghat(t) - gtrue(t)).powi(2)).collect();
    let den: Vec<f64> = grid.iter().map(|&t| gtrue(t).powi(2)).collect();
    let den = periodic_simpson(&den);
    if !(den > 0.0) {
        return Err(CircError::DegenerateTarget("target integrates to zero".into()));
    }
    Ok(periodic_simpson(&num) / den)
}

/// Periodic cubic spline through values on an equispaced circular grid.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    values: Vec<f64>,
    second: Vec<f64>,
    h: f64,
}

impl PeriodicSpline {
    pub fn new(values: &[f64]) -> Result<Self> {
        let m = values.len();
        if m < 3 {
            return Err(CircError::InvalidArgument("spline needs at least 3 nodes".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CircError::InvalidArgument("spline values must be finite".into()));
        }
        let h = TAU / m as f64;
        let rhs: Vec<f64> = (0..m)
            .map(|i| {
                6.0 * (values[(i + m - 1) % m] - 2.0 * values[i] + values[(i + 1) % m]) / (h * h)
            })
            .collect();
        let second = solve_cyclic(1.0, 4.0, 1.0, &rhs);
        Ok(PeriodicSpline {
            values: values.to_vec(),
            second,
            h,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let m = self.values.len();
        let x = t.rem_euclid(TAU) / self.h;
        let i = (x.floor() as usize).min(m - 1);
        let u = x - i as f64;
        let j = (i + 1) % m;
        let (a, b) = (1.0 - u, u);
        let h2 = self.h * self.h / 6.0;
        a * self.values[i]
            + b * self.values[j]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[j]) * h2
    }
}

/// Solves the cyclic tridiagonal system with constant bands `(lo, diag, hi)`
/// by the Sherman-Morrison correction of a plain tridiagonal solve.
fn solve_cyclic(lo: f64, diag: f64, hi: f64, rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let gamma = -diag;
    let mut main = vec![diag; m];
    main[0] = diag - gamma;
    main[m - 1] = diag - hi * lo / gamma;
    let tridiagonal = |d: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; m];
        let mut x = vec![0.0; m];
        c[0] = hi / main[0];
        x[0] = d[0] / main[0];
        for i in 1..m {
            let denom = main[i] - lo * c[i - 1];
            c[i] = hi / denom;
            x[i] = (d[i] - lo * x[i - 1]) / denom;
        }
        for i in (0..m - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    };
    let y = tridiagonal(rhs);
    let mut u = vec![0.0; m];
    u[0] = gamma;
    u[m - 1] = hi;
    let z = tridiagonal(&u);
    let factor = (y[0] + lo * y[m - 1] / gamma) / (1.0 + z[0] + lo * z[m - 1] / gamma);
    y.iter().zip(&z).map(|(a, b)| a - factor * b).collect()
}

/// Relative ISE of a fit given on [`FIT_ANGLES`] equispaced angles,
/// interpolated to the Simpson nodes by a periodic cubic spline.
pub fn ise_from_grid(values: &[f64], gtrue: impl Fn(f64) -> f64) -> Result<f64> {
    let spline = PeriodicSpline::new(values)?;
    approx_ise(|t| spline.eval(t), gtrue)
}

/// Settings shared by every replication.
#[derive(Debug, Clone)]
pub struct MonteCarloOptions {
    pub grid: KappaGrid,
    pub kernel: Kernel,
    pub selection: SelectionOptions,
    pub p: usize,
    /// Overrides [`ModelSpec::ise_scale`].
    pub ise_scale: Option<IseScale>,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            grid: KappaGrid::default(),
            kernel: Kernel::von_mises(),
            selection: SelectionOptions::default(),
            p: 1,
            ise_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectorSummary {
    pub mean_ise: f64,
    pub ises: Vec<f64>,
    pub kappas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationFailure {
    pub replication: u64,
    pub selector: Selector,
    pub cause: String,
}

/// Results over `replications` completed replications. A replication counts
/// as completed when every selector succeeded on it; failed ones are listed
/// and replaced by further replication indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub model: ModelId,
    pub n: usize,
    #[serde(rename = "B")]
    pub replications: usize,
    pub seed: u64,
    pub selectors: BTreeMap<Selector, SelectorSummary>,
    /// Replication indices used, in order.
    pub used: Vec<u64>,
    pub failures: Vec<ReplicationFailure>,
    /// More than 5% of attempted replications failed.
    pub high_failure_rate: bool,
}

impl MonteCarloReport {
    pub fn mean_ise(&self, selector: Selector) -> Option<f64> {
        self.selectors.get(&selector).map(|s| s.mean_ise)
    }
}

/// Per-selector `(ise, kappa)`, or the selector that failed and why.
pub type ReplicationOutcome = std::result::Result<Vec<(f64, f64)>, (Selector, String)>;

/// Simulates one replication and evaluates every selector on it.
pub fn run_replication(
    spec: &ModelSpec,
    n: usize,
    selectors: &[Selector],
    seed: u64,
    replication: u64,
    options: &MonteCarloOptions,
) -> Result<ReplicationOutcome> {
    let sample = simulate_with(spec, n, &mut stream_rng(seed, replication, Stream::Data))?;
    Ok(evaluate_selectors(spec, &sample, selectors, options))
}

fn evaluate_selectors(
    spec: &ModelSpec,
    sample: &CircularSample,
    selectors: &[Selector],
    o: &MonteCarloOptions,
) -> ReplicationOutcome {
    let family = spec.family;
    let fit_grid = circular_grid(FIT_ANGLES);
    let mut residual_cache: Option<(Selector, f64)> = None;
    let mut out = Vec::with_capacity(selectors.len());
    for &sel in selectors {
        let fail = |e: CircError| (sel, e.to_string());
        let kappa = match sel {
            Selector::Crsc | Selector::Ecrsc => {
                let r = residual_kappa(sample, family, sel, o.p, 0, &o.kernel, &o.grid, &o.selection)
                    .map_err(fail)?;
                residual_cache = Some((sel, r.kappa_hat));
                r.kappa_hat
            }
            Selector::Refined => {
                let pilot_sel = Selector::residual_for(family);
                let pilot = match residual_cache {
                    Some((s, k)) if s == pilot_sel => k,
                    _ => residual_kappa(sample, family, pilot_sel, o.p, 0, &o.kernel, &o.grid, &o.selection)
                        .map_err(fail)?
                        .kappa_hat,
                };
                refined_with_pilot(sample, family, o.p, 0, &o.kernel, &o.grid, &o.selection, pilot)
                    .map_err(fail)?
                    .kappa_hat
            }
            Selector::Cv => cv_kappa(sample, family, o.p, &o.kernel, &o.grid).map_err(fail)?.kappa_hat,
        };
        let curve = fit_curve(sample, family, &fit_grid, o.p, 0, kappa, &o.kernel).map_err(fail)?;
        if !curve.is_usable() {
            let reason = curve
                .failures
                .iter()
                .flatten()
                .next()
                .cloned()
                .unwrap_or_else(|| "rank deficient design".into());
            return Err((sel, format!("final fit infeasible at kappa = {kappa}: {reason}")));
        }
        let scale = o.ise_scale.unwrap_or_else(|| spec.ise_scale());
        let ise = spec.ise(&curve.values, scale).map_err(fail)?;
        out.push((ise, kappa));
    }
    Ok(out)
}

/// Monte Carlo comparison of selectors on `replications` samples of size `n`.
pub fn monte_carlo(
    spec: &ModelSpec,
    n: usize,
    replications: usize,
    selectors: &[Selector],
    seed: u64,
    options: &MonteCarloOptions,
) -> Result<MonteCarloReport> {
    if replications == 0 {
        return Err(CircError::InvalidArgument("B must be at least 1".into()));
    }
    if selectors.is_empty() {
        return Err(CircError::InvalidArgument("no selectors requested".into()));
    }
    if n < 2 {
        return Err(CircError::InvalidArgument("n must be at least 2".into()));
    }
    spec.check()?;
    let max_attempts = (2 * replications).max(replications + 20) as u64;
    let mut completed: Vec<(u64, Vec<(f64, f64)>)> = Vec::with_capacity(replications);
    let mut failures = Vec::new();
    let mut next = 0u64;
    while completed.len() < replications && next < max_attempts {
        let batch = ((replications - completed.len()) as u64).min(max_attempts - next);
        let outcomes: Vec<(u64, ReplicationOutcome)> = (next..next + batch)
            .into_par_iter()
            .map(|r| {
                let out = run_replication(spec, n, selectors, seed, r, options)
                    .unwrap_or_else(|e| Err((selectors[0], e.to_string())));
                (r, out)
            })
            .collect();
        next += batch;
        for (r, out) in outcomes {
            match out {
                Ok(v) => completed.push((r, v)),
                Err((selector, cause)) => failures.push(ReplicationFailure {
                    replication: r,
                    selector,
                    cause,
                }),
            }
        }
    }
    if completed.len() < replications {
        return Err(CircError::SelectionFailure {
            selector: format!(
                "monte carlo: only {} of {replications} replications completed",
                completed.len()
            ),
        });
    }
    let mut summaries = BTreeMap::new();
    for (k, &sel) in selectors.iter().enumerate() {
        let ises: Vec<f64> = completed.iter().map(|(_, v)| v[k].0).collect();
        let kappas: Vec<f64> = completed.iter().map(|(_, v)| v[k].1).collect();
        let mean_ise = ises.iter().sum::<f64>() / ises.len() as f64;
        summaries.insert(sel, SelectorSummary { mean_ise, ises, kappas });
    }
    Ok(MonteCarloReport {
        model: spec.id,
        n,
        replications,
        seed,
        selectors: summaries,
        used: completed.iter().map(|(r, _)| *r).collect(),
        high_failure_rate: failures.len() as f64 > 0.05 * next as f64,
        failures,
    })
}

/// One row of the mean-ISE table: a family at one sample size, with the
/// residual, refined and cross-validation columns for both models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub family: Family,
    pub n: usize,
    pub model1: [f64; 3],
    pub model2: [f64; 3],
}

/// Selector order of the table columns for `family`.
pub fn table_selectors(family: Family) -> [Selector; 3] {
    [Selector::residual_for(family), Selector::Refined, Selector::Cv]
}

/// Mean ISE table for the requested models and sample sizes. Rows are
/// grouped by family; a model that was not requested leaves its cells NaN.
pub fn table2(
    models: &[ModelId],
    ns: &[usize],
    replications: usize,
    seed: u64,
    options: &MonteCarloOptions,
) -> Result<Vec<Table2Row>> {
    let mut rows = Vec::new();
    for family in [Family::Normal, Family::Bernoulli, Family::Poisson, Family::Gamma] {
        if !models.iter().any(|m| m.family() == family) {
            continue;
        }
        let selectors = table_selectors(family);
        for &n in ns {
            let mut cols = [[f64::NAN; 3]; 2];
            for id in ModelId::ALL.into_iter().filter(|m| m.family() == family) {
                if !models.contains(&id) {
                    continue;
                }
                let slot = if id.is_first() { 0 } else { 1 };
                let report = monte_carlo(&ModelSpec::new(id), n, replications, &selectors, seed, options)?;
                for (c, sel) in selectors.iter().enumerate() {
                    cols[slot][c] = report.mean_ise(*sel).unwrap_or(f64::NAN);
                }
            }
            rows.push(Table2Row {
                family,
                n,
                model1: cols[0],
                model2: cols[1],
            });
        }
    }
    Ok(rows)
}

/// Table rows as CSV text with a header line.
pub fn table2_csv(rows: &[Table2Row]) -> String {
    let mut out = String::from(
        "family,n,model1_crsc,model1_refined,model1_cv,model2_crsc,model2_refined,model2_cv\n",
    );
    for r in rows {
        let letter = &r.family.name()[..1].to_ascii_uppercase();
        out.push_str(&format!("{letter},{}", r.n));
        for v in r.model1.iter().chain(&r.model2) {
            out.push_str(&format!(",{v:.6e}"));
        }
        out.push('\n');
    }
    out
}
