//! Concentration selectors: residual-squares criteria (CRSC and its
//! likelihood extension ECRSC), the refined integrated-MSE rule and
//! leave-one-out cross-validation, plus the asymptotic optimal κ.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::bias_variance::{bias_variance_at, pilot_from_frame, PilotFit, DEFAULT_PILOT_EXTRA};
use crate::error::{CircError, Result};
use crate::family::Family;
use crate::kernel::{xi_factor, Kernel, KernelMoments, ScaledKernel};
use crate::linalg::{SmallMatrix, SymFactor};
use crate::local_fit::{fit_weighted, LocalFit, LocalFrame, MAX_CONDITION, MAX_DEGREE};
use crate::quadrature::{circular_grid, integrate, periodic_simpson_weights};
use crate::sample::CircularSample;

/// Default number of equispaced angles for integrated criteria.
pub const DEFAULT_ANGLES: usize = 64;

const TIE_TOLERANCE: f64 = 1e-12;

/// Candidate concentrations, strictly increasing and positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaGrid {
    values: Vec<f64>,
    log_spaced: bool,
}

impl KappaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 10 {
            return Err(CircError::InvalidArgument(format!(
                "a concentration grid needs at least 10 values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(CircError::InvalidArgument(
                "concentration grid values must be finite and positive".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CircError::InvalidArgument(
                "concentration grid must be strictly increasing".into(),
            ));
        }
        Ok(KappaGrid {
            values,
            log_spaced: false,
        })
    }

    /// `count` log-spaced values from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) {
            return Err(CircError::InvalidArgument(format!(
                "log-spaced grid needs 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        if count < 2 {
            return Err(CircError::InvalidArgument("grid needs at least two points".into()));
        }
        let (a, b) = (lo.ln(), hi.ln());
        let step = (b - a) / (count - 1) as f64;
        let mut values: Vec<f64> = (0..count).map(|i| (a + step * i as f64).exp()).collect();
        values[0] = lo;
        values[count - 1] = hi;
        let mut grid = Self::new(values)?;
        grid.log_spaced = true;
        Ok(grid)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_log_spaced(&self) -> bool {
        self.log_spaced
    }
}

impl Default for KappaGrid {
    /// 40 log-spaced values on `[0.5, 2000]`.
    fn default() -> Self {
        Self::log_spaced(0.5, 2000.0, 40).expect("valid default grid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    /// Integrated residual squares criterion; for non-normal families the
    /// fitted values are `T⁻¹(x_iᵀβ̂)`.
    Crsc,
    /// Integrated residual squares criterion on Fisher-scoring working
    /// responses.
    Ecrsc,
    /// Integrated estimated MSE with a pilot-based bias and variance.
    Refined,
    /// Leave-one-out cross-validation.
    Cv,
}

impl Selector {
    pub const ALL: [Selector; 4] = [Selector::Crsc, Selector::Ecrsc, Selector::Refined, Selector::Cv];

    /// CRSC for the normal family, ECRSC otherwise.
    pub fn residual_for(family: Family) -> Selector {
        if family == Family::Normal {
            Selector::Crsc
        } else {
            Selector::Ecrsc
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Selector::Crsc => "crsc",
            Selector::Ecrsc => "ecrsc",
            Selector::Refined => "refined",
            Selector::Cv => "cv",
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Selector {
    type Err = CircError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "crsc" => Ok(Selector::Crsc),
            "ecrsc" => Ok(Selector::Ecrsc),
            "refined" => Ok(Selector::Refined),
            "cv" => Ok(Selector::Cv),
            other => Err(CircError::InvalidArgument(format!("unknown selector '{other}'"))),
        }
    }
}

/// Outcome of a concentration search over a [`KappaGrid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub kappa_hat: f64,
    pub selector: Selector,
    pub grid: Vec<f64>,
    /// Objective per candidate (minimised; NaN where masked). Likelihood
    /// cross-validation scores are stored negated.
    pub objective: Vec<f64>,
    pub feasible: Vec<bool>,
    /// Pilot concentration used by the refined rule.
    pub pilot_kappa: Option<f64>,
    /// Grid minimiser before any `ξ` rescaling.
    pub grid_minimizer: f64,
    pub p: usize,
    pub nu: usize,
}

/// Tuning for the selectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOptions {
    /// Angles used for integrated criteria (even).
    pub angles: usize,
    /// Extra pilot degrees `a` for the refined rule.
    pub pilot_extra: usize,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            angles: DEFAULT_ANGLES,
            pilot_extra: DEFAULT_PILOT_EXTRA,
        }
    }
}

fn check_p_nu(p: usize, nu: usize) -> Result<()> {
    if p > MAX_DEGREE {
        return Err(CircError::InvalidArgument(format!(
            "degree {p} exceeds supported maximum {MAX_DEGREE}"
        )));
    }
    if nu > p {
        return Err(CircError::InvalidArgument(format!(
            "derivative order {nu} exceeds degree {p}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// residual squares criteria

/// `σ̂²(1 + (p+1) N⁻¹)` given residuals of a degree-`p` local fit.
fn crsc_from_residuals(
    frame: &LocalFrame,
    weights: &[f64],
    dim: usize,
    kappa: f64,
    residuals: impl Fn(usize) -> f64,
) -> Result<f64> {
    let mut s_mom = vec![0.0; 2 * dim - 1];
    let mut g_mom = vec![0.0; 2 * dim - 1];
    let (mut trace_w, mut rss) = (0.0, 0.0);
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let r = residuals(i);
        trace_w += w;
        rss += r * r * w;
        let s = frame.sin[i];
        let (mut a, mut b) = (w, w * w);
        for k in 0..s_mom.len() {
            s_mom[k] += a;
            g_mom[k] += b;
            a *= s;
            b *= s;
        }
    }
    let s_mat = SmallMatrix::hankel(dim, &s_mom);
    let gamma = SmallMatrix::hankel(dim, &g_mom);
    let s_inv = SymFactor::new(&s_mat, 1.0, MAX_CONDITION)
        .map_err(|e| CircError::infeasible(kappa, format!("local design singular: {e:?}")))?
        .inverse();
    let s_inv_gamma = s_inv.matmul(&gamma);
    let denominator = trace_w - s_inv_gamma.trace();
    if !(denominator > 0.0) || !denominator.is_finite() {
        return Err(CircError::infeasible(
            kappa,
            format!("residual degrees of freedom {denominator:.3e} not positive"),
        ));
    }
    let n_inv = s_inv_gamma.matmul(&s_inv)[(0, 0)];
    let sigma2 = rss / denominator;
    let value = sigma2 * (1.0 + dim as f64 * n_inv);
    if !value.is_finite() {
        return Err(CircError::infeasible(kappa, "criterion is not finite"));
    }
    Ok(value)
}

/// Weighted least-squares coefficients of `targets` on the local design.
fn wls_coefficients(
    frame: &LocalFrame,
    weights: &[f64],
    dim: usize,
    kappa: f64,
    targets: &[f64],
) -> Result<Vec<f64>> {
    let mut m = vec![0.0; 2 * dim - 1];
    let mut r = vec![0.0; dim];
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let s = frame.sin[i];
        let mut v = w;
        for k in 0..m.len() {
            m[k] += v;
            if k < dim {
                r[k] += v * targets[i];
            }
            v *= s;
        }
    }
    let f = SymFactor::new(&SmallMatrix::hankel(dim, &m), 1.0, MAX_CONDITION)
        .map_err(|e| CircError::infeasible(kappa, format!("local design singular: {e:?}")))?;
    Ok(f.solve(&r))
}

#[inline]
fn poly(beta: &[f64], s: f64) -> f64 {
    beta.iter().rev().fold(0.0, |acc, b| acc * s + b)
}

fn usable(fit: LocalFit) -> Result<LocalFit> {
    if fit.is_usable() {
        Ok(fit)
    } else {
        Err(CircError::infeasible(
            fit.kappa,
            if fit.undetermined {
                "local design is rank deficient"
            } else {
                "local fit did not converge"
            },
        ))
    }
}

/// Kernel-weighted mean of the offset, the offset value attributed to θ0.
fn local_offset(sample: &CircularSample, weights: &[f64]) -> f64 {
    if sample.offset().is_none() {
        return 0.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &w) in weights.iter().enumerate() {
        num += w * sample.offset_at(i);
        den += w;
    }
    num / den
}

/// Which residuals enter the criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Residuals {
    /// `Y − x β̂` from least squares.
    LeastSquares,
    /// `Y − T⁻¹(x β̂)` from the likelihood fit.
    Transformed(Family),
    /// Working responses `Z` regressed on the design.
    Working(Family),
}

impl Residuals {
    fn for_selector(selector: Selector, family: Family) -> Self {
        match (selector, family) {
            (Selector::Crsc, Family::Normal) => Residuals::LeastSquares,
            (Selector::Crsc, f) => Residuals::Transformed(f),
            (_, f) => Residuals::Working(f),
        }
    }
}

/// Criterion at one angle; returns the likelihood fit for warm starts.
fn criterion_at(
    sample: &CircularSample,
    frame: &LocalFrame,
    weights: &[f64],
    kind: Residuals,
    p: usize,
    kappa: f64,
    init: Option<&[f64]>,
) -> Result<(f64, Option<Vec<f64>>)> {
    let dim = p + 1;
    let y = sample.responses();
    match kind {
        Residuals::LeastSquares => {
            let targets: Vec<f64> = (0..y.len()).map(|i| y[i] - sample.offset_at(i)).collect();
            let beta = wls_coefficients(frame, weights, dim, kappa, &targets)?;
            let value = crsc_from_residuals(frame, weights, dim, kappa, |i| {
                targets[i] - poly(&beta, frame.sin[i])
            })?;
            Ok((value, None))
        }
        Residuals::Transformed(family) => {
            let fit = usable(fit_weighted(sample, frame, weights, family, p, kappa, init)?)?;
            let value = crsc_from_residuals(frame, weights, dim, kappa, |i| {
                let eta = poly(&fit.beta, frame.sin[i]) + sample.offset_at(i);
                y[i] - family.inverse_link(eta)
            })?;
            Ok((value, Some(fit.beta)))
        }
        Residuals::Working(family) => {
            let fit = usable(fit_weighted(sample, frame, weights, family, p, kappa, init)?)?;
            let g0 = fit.beta[0] + local_offset(sample, weights);
            let c0 = family.expected_curvature(g0);
            if !(c0 < 0.0) {
                return Err(CircError::infeasible(kappa, "expected curvature vanishes"));
            }
            let z: Vec<f64> = (0..y.len())
                .map(|i| {
                    let lin = poly(&fit.beta, frame.sin[i]);
                    lin - family.score(lin + sample.offset_at(i), y[i]) / c0
                })
                .collect();
            let beta_z = wls_coefficients(frame, weights, dim, kappa, &z)?;
            let value = crsc_from_residuals(frame, weights, dim, kappa, |i| {
                z[i] - poly(&beta_z, frame.sin[i])
            })?;
            Ok((value, Some(fit.beta)))
        }
    }
}

fn one_angle(
    sample: &CircularSample,
    theta0: f64,
    kappa: f64,
    kernel: &Kernel,
) -> Result<(LocalFrame, Vec<f64>)> {
    let frame = LocalFrame::new(sample, theta0);
    let weights = frame.weights(&kernel.at(kappa)?);
    Ok((frame, weights))
}

/// CRSC at `theta0` for a degree-`p` least-squares fit.
pub fn crsc(
    sample: &CircularSample,
    theta0: f64,
    p: usize,
    kappa: f64,
    kernel: &Kernel,
) -> Result<f64> {
    let (frame, weights) = one_angle(sample, theta0, kappa, kernel)?;
    criterion_at(sample, &frame, &weights, Residuals::LeastSquares, p, kappa, None).map(|v| v.0)
}

/// CRSC with fitted values `T⁻¹(x_iᵀβ̂)` from the local likelihood fit.
pub fn crsc_transformed(
    sample: &CircularSample,
    family: Family,
    theta0: f64,
    p: usize,
    kappa: f64,
    kernel: &Kernel,
) -> Result<f64> {
    let (frame, weights) = one_angle(sample, theta0, kappa, kernel)?;
    let kind = Residuals::for_selector(Selector::Crsc, family);
    criterion_at(sample, &frame, &weights, kind, p, kappa, None).map(|v| v.0)
}

/// ECRSC at `theta0`: the CRSC of the working responses
/// `Z_i = x_iᵀβ̂ − l'(η̂_i, Y_i) / E[l''(ĝ(θ0), Y)]`.
pub fn ecrsc(
    sample: &CircularSample,
    family: Family,
    theta0: f64,
    p: usize,
    kappa: f64,
    kernel: &Kernel,
) -> Result<f64> {
    let (frame, weights) = one_angle(sample, theta0, kappa, kernel)?;
    criterion_at(sample, &frame, &weights, Residuals::Working(family), p, kappa, None)
        .map(|v| v.0)
}

// ---------------------------------------------------------------------------
// grid scans

/// Shared per-sample state for integrated criteria.
struct AngleScan {
    frames: Vec<LocalFrame>,
    simpson: Vec<f64>,
}

impl AngleScan {
    fn new(sample: &CircularSample, angles: usize) -> Result<Self> {
        if angles < 2 || angles % 2 != 0 {
            return Err(CircError::InvalidArgument(format!(
                "integration needs an even number of angles, got {angles}"
            )));
        }
        let frames = circular_grid(angles)
            .into_iter()
            .map(|a| LocalFrame::new(sample, a))
            .collect();
        Ok(AngleScan {
            frames,
            simpson: periodic_simpson_weights(angles),
        })
    }

    /// Integrates per-(angle, κ) values; a κ is masked if any angle failed.
    fn integrate(&self, table: &[Vec<Option<f64>>], count: usize) -> Vec<Option<f64>> {
        (0..count)
            .map(|k| {
                let mut total = 0.0;
                for (row, w) in table.iter().zip(&self.simpson) {
                    total += w * row[k]?;
                }
                total.is_finite().then_some(total)
            })
            .collect()
    }
}

fn scaled_kernels(kernel: &Kernel, grid: &KappaGrid) -> Result<Vec<ScaledKernel>> {
    grid.values().iter().map(|&k| kernel.at(k)).collect()
}

/// Smallest objective with ties (relative `1e-12`) broken toward small κ.
fn argmin(objective: &[Option<f64>]) -> Option<usize> {
    let best = objective
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let slack = TIE_TOLERANCE * best.abs();
    objective
        .iter()
        .position(|v| v.is_some_and(|v| v <= best + slack))
}

fn finish(
    selector: Selector,
    grid: &KappaGrid,
    objective: Vec<Option<f64>>,
    scale: f64,
    pilot_kappa: Option<f64>,
    p: usize,
    nu: usize,
) -> Result<SelectionResult> {
    let idx = argmin(&objective).ok_or_else(|| CircError::SelectionFailure {
        selector: selector.name().to_string(),
    })?;
    let minimizer = grid.values()[idx];
    Ok(SelectionResult {
        kappa_hat: scale * minimizer,
        selector,
        grid: grid.values().to_vec(),
        feasible: objective.iter().map(Option::is_some).collect(),
        objective: objective.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
        pilot_kappa,
        grid_minimizer: minimizer,
        p,
        nu,
    })
}

/// Integrated residual criterion over the κ grid.
fn residual_objective(
    sample: &CircularSample,
    kind: Residuals,
    p: usize,
    kernel: &Kernel,
    grid: &KappaGrid,
    scan: &AngleScan,
) -> Result<Vec<Option<f64>>> {
    let kernels = scaled_kernels(kernel, grid)?;
    let table: Vec<Vec<Option<f64>>> = scan
        .frames
        .par_iter()
        .map(|frame| {
            let mut warm: Option<Vec<f64>> = None;
            kernels
                .iter()
                .map(|sk| {
                    let weights = frame.weights(sk);
                    match criterion_at(sample, frame, &weights, kind, p, sk.kappa(), warm.as_deref())
                    {
                        Ok((v, beta)) => {
                            warm = beta;
                            Some(v)
                        }
                        Err(_) => {
                            warm = None;
                            None
                        }
                    }
                })
                .collect()
        })
        .collect();
    Ok(scan.integrate(&table, grid.len()))
}

/// Integrated CRSC (normal) or ECRSC (other families) minimiser, rescaled by
/// `ξ_{p,ν}(K)`.
pub fn pilot_kappa(
    sample: &CircularSample,
    family: Family,
    p: usize,
    nu: usize,
    kernel: &Kernel,
    grid: &KappaGrid,
) -> Result<SelectionResult> {
    residual_kappa(
        sample,
        family,
        Selector::residual_for(family),
        p,
        nu,
        kernel,
        grid,
        &SelectionOptions::default(),
    )
}

/// Residual-criterion selector with an explicit criterion choice.
#[allow(clippy::too_many_arguments)]
pub fn residual_kappa(
    sample: &CircularSample,
    family: Family,
    selector: Selector,
    p: usize,
    nu: usize,
    kernel: &Kernel,
    grid: &KappaGrid,
    options: &SelectionOptions,
) -> Result<SelectionResult> {
    check_p_nu(p, nu)?;
    if !matches!(selector, Selector::Crsc | Selector::Ecrsc) {
        return Err(CircError::InvalidArgument(format!(
            "{selector} is not a residual criterion"
        )));
    }
    let xi = xi_factor(p, nu, kernel)?;
    let scan = AngleScan::new(sample, options.angles)?;
    let kind = Residuals::for_selector(selector, family);
    let objective = residual_objective(sample, kind, p, kernel, grid, &scan)?;
    finish(selector, grid, objective, xi, None, p, nu)
}

/// The refined rule: minimises the integrated `B̂² + V̂` over the grid, with
/// the pilot concentration chosen by [`pilot_kappa`].
pub fn refined_kappa(
    sample: &CircularSample,
    family: Family,
    p: usize,
    nu: usize,
    kernel: &Kernel,
    grid: &KappaGrid,
) -> Result<SelectionResult> {
    refined_kappa_with(sample, family, p, nu, kernel, grid, &SelectionOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn refined_kappa_with(
    sample: &CircularSample,
    family: Family,
    p: usize,
    nu: usize,
    kernel: &Kernel,
    grid: &KappaGrid,
    options: &SelectionOptions,
) -> Result<SelectionResult> {
    let pilot = residual_kappa(
        sample,
        family,
        Selector::residual_for(family),
        p,
        nu,
        kernel,
        grid,
        options,
    )?;
    refined_with_pilot(sample, family, p, nu, kernel, grid, options, pilot.kappa_hat)
}

/// Pilot fits at every frame, at `kappa_star` or, failing that, at the
/// largest smaller grid value where all of them are feasible.
#[allow(clippy::too_many_arguments)]
pub(crate) fn stepped_pilots(
    sample: &CircularSample,
    frames: &[LocalFrame],
    family: Family,
    p: usize,
    extra: usize,
    kappa_star: f64,
    grid: &KappaGrid,
    kernel: &Kernel,
) -> Result<(f64, Vec<PilotFit>)> {
    let mut candidates = vec![kappa_star];
    candidates.extend(grid.values().iter().rev().copied().filter(|&k| k < kappa_star));
    let mut last = None;
    for &k_star in &candidates {
        let sk = kernel.at(k_star)?;
        let fits: Result<Vec<_>> = frames
            .par_iter()
            .map(|frame| {
                let w = frame.weights(&sk);
                pilot_from_frame(sample, frame, &w, family, p, extra, k_star, None)
            })
            .collect();
        match fits {
            Ok(f) => return Ok((k_star, f)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| CircError::infeasible(kappa_star, "no pilot candidate")))
}

/// The refined rule for a given pilot concentration. When the pilot fit is
/// infeasible at some angle the pilot steps down through smaller grid values.
#[allow(clippy::too_many_arguments)]
pub fn refined_with_pilot(
    sample: &CircularSample,
    family: Family,
    p: usize,
    nu: usize,
    kernel: &Kernel,
    grid: &KappaGrid,
    options: &SelectionOptions,
    kappa_star: f64,
) -> Result<SelectionResult> {
    check_p_nu(p, nu)?;
    let scan = AngleScan::new(sample, options.angles)?;
    let (k_star, pilots) = stepped_pilots(
        sample,
        &scan.frames,
        family,
        p,
        options.pilot_extra,
        kappa_star,
        grid,
        kernel,
    )
    .map_err(|_| CircError::SelectionFailure {
        selector: Selector::Refined.name().to_string(),
    })?;
    let kernels = scaled_kernels(kernel, grid)?;
    let table: Vec<Vec<Option<f64>>> = scan
        .frames
        .par_iter()
        .zip(pilots.par_iter())
        .map(|(frame, pilot)| {
            let mut warm: Option<Vec<f64>> = None;
            kernels
                .iter()
                .map(|sk| {
                    let weights = frame.weights(sk);
                    let out = fit_weighted(sample, frame, &weights, family, p, sk.kappa(), warm.as_deref())
                        .and_then(|fit| {
                            let bv = bias_variance_at(sample, frame, &weights, family, &fit, pilot, nu)?;
                            Ok((bv.mse, fit.beta))
                        });
                    match out {
                        Ok((mse, beta)) => {
                            warm = Some(beta);
                            mse.is_finite().then_some(mse)
                        }
                        Err(_) => {
                            warm = None;
                            None
                        }
                    }
                })
                .collect()
        })
        .collect();
    let objective = scan.integrate(&table, grid.len());
    finish(Selector::Refined, grid, objective, 1.0, Some(k_star), p, nu)
}

/// Leave-one-out cross-validation contribution of observation `i`; smaller
/// is better.
fn cv_loss(family: Family, g: f64, y: f64) -> f64 {
    match family {
        Family::Normal => (y - g) * (y - g),
        Family::Bernoulli | Family::Poisson => -family.loglik(g, y),
        Family::Gamma => {
            let r = y - g.exp();
            r * r
        }
    }
}

/// Leave-one-out cross-validation over the grid. Normal and gamma minimise
/// squared prediction error on the mean scale; Bernoulli and Poisson
/// maximise the predictive log-likelihood (stored negated).
pub fn cv_kappa(
    sample: &CircularSample,
    family: Family,
    p: usize,
    kernel: &Kernel,
    grid: &KappaGrid,
) -> Result<SelectionResult> {
    check_p_nu(p, 0)?;
    let n = sample.len();
    if n < 2 {
        return Err(CircError::InvalidArgument(
            "cross-validation needs at least two observations".into(),
        ));
    }
    let kernels = scaled_kernels(kernel, grid)?;
    let y = sample.responses();
    // one column per observation, one entry per κ
    let table: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let frame = LocalFrame::new(sample, sample.angles()[i]);
            let mut warm: Option<Vec<f64>> = None;
            kernels
                .iter()
                .map(|sk| {
                    let mut weights = frame.weights(sk);
                    weights[i] = 0.0;
                    match fit_weighted(sample, &frame, &weights, family, p, sk.kappa(), warm.as_deref()) {
                        Ok(fit) if fit.is_usable() => {
                            let g = fit.beta[0] + sample.offset_at(i);
                            warm = Some(fit.beta);
                            let loss = cv_loss(family, g, y[i]);
                            loss.is_finite().then_some(loss)
                        }
                        _ => {
                            warm = None;
                            None
                        }
                    }
                })
                .collect()
        })
        .collect();
    let objective = (0..grid.len())
        .map(|k| {
            let mut total = 0.0;
            for row in &table {
                total += row[k]?;
            }
            Some(total)
        })
        .collect();
    finish(Selector::Cv, grid, objective, 1.0, None, p, 0)
}

/// Runs the requested selector.
#[allow(clippy::too_many_arguments)]
pub fn select_kappa(
    selector: Selector,
    sample: &CircularSample,
    family: Family,
    p: usize,
    nu: usize,
    kernel: &Kernel,
    grid: &KappaGrid,
    options: &SelectionOptions,
) -> Result<SelectionResult> {
    match selector {
        Selector::Crsc | Selector::Ecrsc => {
            residual_kappa(sample, family, selector, p, nu, kernel, grid, options)
        }
        Selector::Refined => refined_kappa_with(sample, family, p, nu, kernel, grid, options),
        Selector::Cv => {
            let mut r = cv_kappa(sample, family, p, kernel, grid)?;
            r.nu = nu;
            Ok(r)
        }
    }
}

/// Integral over `[0, 2π)` of the criterion at a fixed κ; used for
/// quadrature-stability checks.
pub fn integrated_criterion(
    sample: &CircularSample,
    family: Family,
    selector: Selector,
    p: usize,
    kappa: f64,
    kernel: &Kernel,
    angles: usize,
) -> Result<f64> {
    let scan = AngleScan::new(sample, angles)?;
    let sk = kernel.at(kappa)?;
    let kind = Residuals::for_selector(selector, family);
    let mut total = 0.0;
    for (frame, w) in scan.frames.iter().zip(&scan.simpson) {
        let weights = frame.weights(&sk);
        total += w * criterion_at(sample, frame, &weights, kind, p, kappa, None)?.0;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// asymptotic optimum

/// Asymptotically optimal concentrations at one angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalKappa {
    /// Minimiser of the asymptotic MSE of `ĝ^{(ν)}(θ0)`.
    pub kappa_opt: f64,
    /// Minimiser of the expected CRSC.
    pub kappa0: f64,
    pub xi: f64,
}

fn kappa0_from(m: &KernelMoments, signal: f64) -> f64 {
    let p = m.p;
    let base = 2f64.powf((2 * p + 5) as f64 / 2.0) * m.c_const * signal / m.a0();
    base.powf(2.0 / (2 * p + 3) as f64)
}

fn kappa_opt_from(m: &KernelMoments, nu: usize, signal: f64) -> f64 {
    let p = m.p;
    let lead = m.b_inv_c[nu];
    let num = (p + 1 - nu) as f64 * signal * lead * lead * 2f64.powf((2 * p + 5) as f64 / 2.0);
    let den = (1 + 2 * nu) as f64 * m.a[nu];
    (num / den).powf(2.0 / (2 * p + 3) as f64)
}

/// `κ_0(θ0)`, the minimiser of the expected CRSC.
pub fn kappa0(
    f_theta0: f64,
    beta_p1: f64,
    sigma2: f64,
    n: usize,
    p: usize,
    kernel: &Kernel,
) -> Result<f64> {
    let m = KernelMoments::new(p, kernel)?;
    let signal = beta_p1 * beta_p1 * n as f64 * f_theta0 / sigma2;
    if !(signal > 0.0) || !signal.is_finite() {
        return Err(CircError::DegenerateConstant(format!(
            "β²nf/σ² = {signal} must be positive"
        )));
    }
    Ok(kappa0_from(&m, signal))
}

/// Asymptotic MSE-optimal κ at `theta0` from the true design density,
/// coefficient `β_{p+1}(θ)` and conditional variance.
#[allow(clippy::too_many_arguments)]
pub fn optimal_kappa_reference(
    true_f: impl Fn(f64) -> f64,
    true_beta_p1: impl Fn(f64) -> f64,
    true_sigma2: impl Fn(f64) -> f64,
    n: usize,
    p: usize,
    nu: usize,
    kernel: &Kernel,
    theta0: f64,
) -> Result<OptimalKappa> {
    let signal = true_beta_p1(theta0).powi(2) * n as f64 * true_f(theta0) / true_sigma2(theta0);
    optimal_from_signal(signal, p, nu, kernel)
}

/// Minimiser of the integrated asymptotic MSE over `[0, 2π)`: the pointwise
/// formula with `β²nf/σ²` replaced by `n ∫β² / ∫(σ²/f)`.
pub fn optimal_kappa_global(
    true_f: impl Fn(f64) -> f64,
    true_beta_p1: impl Fn(f64) -> f64,
    true_sigma2: impl Fn(f64) -> f64,
    n: usize,
    p: usize,
    nu: usize,
    kernel: &Kernel,
) -> Result<OptimalKappa> {
    let tau = std::f64::consts::TAU;
    let (bias_part, _) = integrate(|t| true_beta_p1(t).powi(2), 0.0, tau, 1e-12);
    let (var_part, _) = integrate(|t| true_sigma2(t) / true_f(t), 0.0, tau, 1e-12);
    optimal_from_signal(n as f64 * bias_part / var_part, p, nu, kernel)
}

fn optimal_from_signal(signal: f64, p: usize, nu: usize, kernel: &Kernel) -> Result<OptimalKappa> {
    let xi = xi_factor(p, nu, kernel)?;
    if !(signal > 0.0) || !signal.is_finite() {
        return Err(CircError::DegenerateConstant(format!(
            "β²nf/σ² = {signal} must be positive"
        )));
    }
    let m = KernelMoments::new(p, kernel)?;
    let kappa0 = kappa0_from(&m, signal);
    let kappa_opt = kappa_opt_from(&m, nu, signal);
    debug_assert!((kappa_opt - xi * kappa0).abs() <= 1e-9 * kappa_opt);
    Ok(OptimalKappa {
        kappa_opt,
        kappa0,
        xi,
    })
}
