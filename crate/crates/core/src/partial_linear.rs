//! Partially linear models `g = α₀ + Σ α_k x_k + Σ (γ_j1 sin φ_j + γ_j2 cos φ_j) + ρ(Θ)`
//! fitted by backfitting: a global likelihood step for the parametric part
//! with `ρ` as offset, then a local likelihood fit of `ρ` with the parametric
//! part as offset.

use serde::Serialize;

use crate::error::{CircError, Result};
use crate::family::Family;
use crate::kernel::Kernel;
use crate::linalg::{SmallMatrix, SymFactor};
use crate::local_fit::fit_curve;
use crate::quadrature::{circular_grid, periodic_simpson};
use crate::sample::CircularSample;
use crate::selection::{select_kappa, KappaGrid, SelectionOptions, Selector};

const MAX_OUTER: usize = 25;
const OUTER_TOLERANCE: f64 = 1e-6;
const MAX_GLM_ITERATIONS: usize = 100;
const GLM_TOLERANCE: f64 = 1e-10;
/// Angles on which `ρ` is reported and centred.
pub const RHO_GRID: usize = 64;

/// Responses with a parametric block and one smooth circular covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialLinearData {
    responses: Vec<f64>,
    /// `n × k` real covariates.
    linear: Vec<Vec<f64>>,
    /// `n × j` angles entering through `sin` and `cos`.
    circular_linear: Vec<Vec<f64>>,
    smooth: Vec<f64>,
}

impl PartialLinearData {
    pub fn new(
        responses: Vec<f64>,
        linear: Vec<Vec<f64>>,
        circular_linear: Vec<Vec<f64>>,
        smooth: Vec<f64>,
    ) -> Result<Self> {
        let n = responses.len();
        if n == 0 {
            return Err(CircError::InvalidArgument("no observations".into()));
        }
        if smooth.len() != n {
            return Err(CircError::InvalidArgument(format!(
                "{} smooth angles for {n} responses",
                smooth.len()
            )));
        }
        for (name, block) in [("linear", &linear), ("circular", &circular_linear)] {
            if !block.is_empty() && block.len() != n {
                return Err(CircError::InvalidArgument(format!(
                    "{name} covariates have {} rows for {n} responses",
                    block.len()
                )));
            }
            if let Some(width) = block.first().map(Vec::len) {
                for (row, r) in block.iter().enumerate() {
                    if r.len() != width {
                        return Err(CircError::InvalidResponse {
                            row,
                            reason: format!("expected {width} {name} covariates, found {}", r.len()),
                        });
                    }
                    if r.iter().any(|v| !v.is_finite()) {
                        return Err(CircError::InvalidResponse {
                            row,
                            reason: format!("{name} covariate is not finite"),
                        });
                    }
                }
            }
        }
        if let Some(row) = smooth.iter().position(|a| !a.is_finite()) {
            return Err(CircError::InvalidResponse {
                row,
                reason: "angle is not finite".into(),
            });
        }
        Ok(PartialLinearData {
            responses,
            linear,
            circular_linear,
            smooth,
        })
    }

    /// Only real covariates besides the smooth angle.
    pub fn with_linear(responses: Vec<f64>, linear: Vec<Vec<f64>>, smooth: Vec<f64>) -> Result<Self> {
        Self::new(responses, linear, Vec::new(), smooth)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn smooth_angles(&self) -> &[f64] {
        &self.smooth
    }

    fn linear_width(&self) -> usize {
        self.linear.first().map_or(0, Vec::len)
    }

    fn circular_width(&self) -> usize {
        self.circular_linear.first().map_or(0, Vec::len)
    }

    /// Names of the parametric coefficients in order.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names = vec!["intercept".to_string()];
        names.extend((1..=self.linear_width()).map(|k| format!("x{k}")));
        for j in 1..=self.circular_width() {
            names.push(format!("sin_phi{j}"));
            names.push(format!("cos_phi{j}"));
        }
        names
    }

    /// Rows `[1, x.., sin φ, cos φ, ..]` of the parametric design.
    pub fn design(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| {
                let mut row = vec![1.0];
                if let Some(x) = self.linear.get(i) {
                    row.extend_from_slice(x);
                }
                if let Some(phis) = self.circular_linear.get(i) {
                    for &phi in phis {
                        row.push(phi.sin());
                        row.push(phi.cos());
                    }
                }
                row
            })
            .collect()
    }

    /// The data with rows reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let pick = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let pick_rows =
            |v: &[Vec<f64>]| if v.is_empty() { Vec::new() } else { order.iter().map(|&i| v[i].clone()).collect() };
        Self::new(
            pick(&self.responses),
            pick_rows(&self.linear),
            pick_rows(&self.circular_linear),
            pick(&self.smooth),
        )
    }
}

/// How the concentration of the smooth component is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum KappaSelector {
    Fixed(f64),
    /// Re-selected once per outer iteration.
    Select {
        selector: Selector,
        grid: KappaGrid,
        options: SelectionOptions,
    },
}

impl KappaSelector {
    pub fn select(selector: Selector) -> Self {
        KappaSelector::Select {
            selector,
            grid: KappaGrid::default(),
            options: SelectionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialLinearFit {
    pub coefficient_names: Vec<String>,
    pub alpha: Vec<f64>,
    /// Model-based standard errors of `alpha` with `ρ` held fixed.
    pub alpha_se: Vec<f64>,
    pub rho_grid: Vec<f64>,
    /// `ρ̂` on [`RHO_GRID`] angles, with zero mean over the circle.
    pub rho: Vec<f64>,
    /// `ρ̂(Θ_i)` at the observations, centred like `rho`.
    pub rho_at_data: Vec<f64>,
    pub kappa: f64,
    /// Concentration used in each outer iteration.
    pub kappa_trace: Vec<f64>,
    /// Full-data log-likelihood after each outer iteration.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PartialLinearFit {
    /// Fitted predictor `x_iᵀα̂ + ρ̂(Θ_i)` at the observations.
    pub fn linear_predictor(&self, data: &PartialLinearData) -> Vec<f64> {
        data.design()
            .iter()
            .zip(&self.rho_at_data)
            .map(|(row, r)| dot(row, &self.alpha) + r)
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Global GLM fit of `y` on `design` with a fixed offset, by Newton steps
/// (Fisher scoring where the observed curvature is not negative) with step
/// halving. Returns the coefficients and `(−H)⁻¹`.
pub(crate) fn glm_fit(
    design: &[Vec<f64>],
    y: &[f64],
    offset: &[f64],
    family: Family,
    init: Option<&[f64]>,
) -> Result<(Vec<f64>, SmallMatrix)> {
    let q = design[0].len();
    let n = y.len();
    let objective = |beta: &[f64]| -> f64 {
        (0..n)
            .map(|i| family.loglik(dot(&design[i], beta) + offset[i], y[i]))
            .sum()
    };
    let mut beta = match init {
        Some(b) if b.len() == q => b.to_vec(),
        _ => {
            let ybar = y.iter().sum::<f64>() / n as f64;
            let obar = offset.iter().sum::<f64>() / n as f64;
            let mut b = vec![0.0; q];
            b[0] = family.link_clamped(ybar) - obar;
            b
        }
    };
    let mut current = objective(&beta);
    for _ in 0..MAX_GLM_ITERATIONS {
        let mut info = SmallMatrix::zeros(q);
        let mut grad = vec![0.0; q];
        for i in 0..n {
            let eta = dot(&design[i], &beta) + offset[i];
            let (d1, d2) = family.score_curvature(eta, y[i]);
            let c = if d2 < 0.0 { d2 } else { family.expected_curvature(eta) };
            for a in 0..q {
                grad[a] += d1 * design[i][a];
                for b in 0..=a {
                    info[(a, b)] -= c * design[i][a] * design[i][b];
                }
            }
        }
        for a in 0..q {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        let factor = SymFactor::new(&info, 1.0, 1e14).map_err(|e| {
            CircError::InvalidDesign(format!("parametric information is singular: {e:?}"))
        })?;
        let step = factor.solve(&grad);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let value = objective(&trial);
            if value.is_finite() && value >= current - 1e-12 * current.abs().max(1.0) {
                let change = step.iter().fold(0.0f64, |a, s| a.max((t * s).abs()));
                let size = trial.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                beta = trial;
                current = value;
                accepted = true;
                if change <= GLM_TOLERANCE * size.max(1.0) {
                    return Ok((beta, factor.inverse()));
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no ascent possible: at the maximum up to rounding
            return Ok((beta, factor.inverse()));
        }
    }
    Err(CircError::infeasible(f64::NAN, "parametric step did not converge"))
}

fn check_rank(design: &[Vec<f64>]) -> Result<()> {
    let q = design[0].len();
    let mut gram = SmallMatrix::zeros(q);
    for row in design {
        for a in 0..q {
            for b in 0..q {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    // scale to unit diagonal so the condition number reflects collinearity
    let d: Vec<f64> = (0..q).map(|a| gram[(a, a)].sqrt()).collect();
    if d.iter().any(|v| !(*v > 0.0)) {
        return Err(CircError::InvalidDesign("a parametric column is identically zero".into()));
    }
    for a in 0..q {
        for b in 0..q {
            gram[(a, b)] /= d[a] * d[b];
        }
    }
    SymFactor::new(&gram, 1.0, 1e12)
        .map(|_| ())
        .map_err(|_| CircError::InvalidDesign("parametric design is not of full column rank".into()))
}

/// Fits the model by backfitting. Stops when the sup-norm change of
/// `(alpha, rho)` drops below 1e-6 or after 25 outer iterations.
pub fn backfit(
    data: &PartialLinearData,
    family: Family,
    p: usize,
    kernel: &Kernel,
    kappa_selector: &KappaSelector,
) -> Result<PartialLinearFit> {
    for (row, &y) in data.responses.iter().enumerate() {
        family
            .check_response(y)
            .map_err(|reason| CircError::InvalidResponse { row, reason })?;
    }
    let design = data.design();
    check_rank(&design)?;
    let n = data.len();
    let y = &data.responses;
    let grid = circular_grid(RHO_GRID);
    let base = CircularSample::new(data.smooth.clone(), y.clone())?;
    // the smooth fits are evaluated at the grid and at every observation
    let mut eval: Vec<f64> = grid.clone();
    eval.extend_from_slice(base.angles());

    let mut rho_data = vec![0.0; n];
    let mut rho_grid = vec![0.0; RHO_GRID];
    let mut alpha: Option<Vec<f64>> = None;
    let mut covariance = SmallMatrix::zeros(design[0].len());
    let mut kappa = f64::NAN;
    let mut kappa_trace = Vec::new();
    let mut loglik_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..MAX_OUTER {
        iterations += 1;
        let (new_alpha, cov) = glm_fit(&design, y, &rho_data, family, alpha.as_deref())?;
        covariance = cov;
        let parametric: Vec<f64> = design.iter().map(|r| dot(r, &new_alpha)).collect();
        let sample = base.clone().with_offset(parametric)?;
        kappa = match kappa_selector {
            KappaSelector::Fixed(k) => *k,
            KappaSelector::Select {
                selector,
                grid,
                options,
            } => select_kappa(*selector, &sample, family, p, 0, kernel, grid, options)?.kappa_hat,
        };
        kappa_trace.push(kappa);
        let curve = fit_curve(&sample, family, &eval, p, 0, kappa, kernel)?;
        if let Some(i) = curve.values.iter().position(|v| !v.is_finite()) {
            let why = curve.failures[i].clone().unwrap_or_else(|| "rank deficient design".into());
            return Err(CircError::infeasible(kappa, format!("smooth fit failed: {why}")));
        }
        let mean = periodic_simpson(&curve.values[..RHO_GRID]) / std::f64::consts::TAU;
        let new_grid: Vec<f64> = curve.values[..RHO_GRID].iter().map(|v| v - mean).collect();
        let new_data: Vec<f64> = curve.values[RHO_GRID..].iter().map(|v| v - mean).collect();
        let mut new_alpha = new_alpha;
        new_alpha[0] += mean;

        let change = match &alpha {
            Some(old) => old
                .iter()
                .zip(&new_alpha)
                .chain(rho_grid.iter().zip(&new_grid))
                .fold(0.0f64, |a, (u, v)| a.max((u - v).abs())),
            None => f64::INFINITY,
        };
        alpha = Some(new_alpha);
        rho_grid = new_grid;
        rho_data = new_data;
        let a = alpha.as_ref().expect("set above");
        loglik_trace.push(
            (0..n)
                .map(|i| family.loglik(dot(&design[i], a) + rho_data[i], y[i]))
                .sum(),
        );
        if change < OUTER_TOLERANCE {
            converged = true;
            break;
        }
    }

    let alpha = alpha.expect("at least one iteration");
    let dispersion = match family {
        Family::Normal | Family::Gamma => {
            let q = alpha.len();
            let pearson: f64 = (0..n)
                .map(|i| {
                    let eta = dot(&design[i], &alpha) + rho_data[i];
                    let mu = family.inverse_link(eta);
                    let v = if family == Family::Normal { 1.0 } else { mu * mu };
                    (y[i] - mu).powi(2) / v
                })
                .sum();
            pearson / (n.saturating_sub(q)).max(1) as f64
        }
        _ => 1.0,
    };
    let alpha_se = covariance
        .diagonal()
        .iter()
        .map(|v| (v * dispersion).max(0.0).sqrt())
        .collect();
    Ok(PartialLinearFit {
        coefficient_names: data.coefficient_names(),
        alpha,
        alpha_se,
        rho_grid: grid,
        rho: rho_grid,
        rho_at_data: rho_data,
        kappa,
        kappa_trace,
        loglik_trace,
        iterations,
        converged,
    })
}
