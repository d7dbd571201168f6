//! Local sine-polynomial fits: design construction, weighted moment sums,
//! closed-form weighted least squares and Fisher scoring.

use std::f64::consts::TAU;

use crate::error::{CircError, Result};
use crate::family::Family;
use crate::kernel::{Kernel, ScaledKernel};
use crate::linalg::{SmallMatrix, SolveFailure, SymFactor};
use crate::sample::CircularSample;

/// Largest degree accepted by the fitting machinery (pilot fits use `p + a`).
pub const MAX_FIT_DEGREE: usize = 5;
/// Largest degree accepted for a user-facing estimate.
pub const MAX_DEGREE: usize = 3;
/// Normal matrices with a larger equilibrated condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

const MAX_ITERATIONS: usize = 50;
const STEP_TOLERANCE: f64 = 1e-8;
const GRADIENT_TOLERANCE: f64 = 1e-10;
const DIVERGENCE_BOUND: f64 = 1e8;
const INFORMATION_FLOOR: f64 = 1e-12;
const MAX_HALVINGS: usize = 30;
const SATURATION_WEIGHT: f64 = 1e-8;
const OBJECTIVE_SLACK: f64 = 1e-12;

/// Local design at an evaluation angle: rows `(1, s, …, s^p)` with
/// `s = sin(Θ_i − θ0)` and kernel weights `K_κ(Θ_i − θ0)`.
#[derive(Debug, Clone)]
pub struct LocalDesign {
    pub theta0: f64,
    pub p: usize,
    pub rows: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Result of a local fit at one evaluation angle.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub theta0: f64,
    pub p: usize,
    pub kappa: f64,
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Observed Hessian of the local log-likelihood is negative definite.
    pub neg_curvature_ok: bool,
    /// The degree-`p` design was numerically rank deficient; only `beta[0]`
    /// is estimated (local constant) and the rest are set to zero.
    pub undetermined: bool,
}

impl LocalFit {
    /// `ĝ^{(ν)}(θ0) = ν! β̂_ν`.
    pub fn derivative(&self, nu: usize) -> f64 {
        factorial(nu) * self.beta[nu]
    }

    /// Converged with every coefficient determined.
    pub fn is_usable(&self) -> bool {
        self.converged && !self.undetermined
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Per-angle quantities that do not depend on κ.
#[derive(Debug, Clone)]
pub(crate) struct LocalFrame {
    pub theta0: f64,
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
}

impl LocalFrame {
    pub fn new(sample: &CircularSample, theta0: f64) -> Self {
        let (sin, cos) = sample
            .angles()
            .iter()
            .map(|&a| (a - theta0).sin_cos())
            .unzip();
        LocalFrame { theta0, sin, cos }
    }

    pub fn weights(&self, kernel: &ScaledKernel) -> Vec<f64> {
        self.cos.iter().map(|&c| kernel.from_cos(c)).collect()
    }
}

fn check_degree(p: usize, max: usize) -> Result<()> {
    if p > max {
        return Err(CircError::InvalidArgument(format!(
            "degree {p} exceeds supported maximum {max}"
        )));
    }
    Ok(())
}

pub fn build_design(
    sample: &CircularSample,
    theta0: f64,
    p: usize,
    kappa: f64,
    kernel: &Kernel,
) -> Result<LocalDesign> {
    check_degree(p, MAX_FIT_DEGREE)?;
    if sample.is_empty() {
        return Err(CircError::InvalidArgument("sample is empty".into()));
    }
    let scaled = kernel.at(kappa)?;
    let frame = LocalFrame::new(sample, theta0);
    let rows = frame
        .sin
        .iter()
        .map(|&s| powers(s, p))
        .collect();
    Ok(LocalDesign {
        theta0,
        p,
        rows,
        weights: frame.weights(&scaled),
    })
}

#[inline]
pub(crate) fn powers(s: f64, p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(p + 1);
    let mut v = 1.0;
    for _ in 0..=p {
        out.push(v);
        v *= s;
    }
    out
}

/// `Σ_i e_i sin^j(Θ_i − θ0) K_κ^power(Θ_i − θ0)` with optional extra weights
/// `e_i` (all ones when absent).
pub fn weighted_moments(
    sample: &CircularSample,
    theta0: f64,
    kappa: f64,
    j: u32,
    power: u32,
    kernel: &Kernel,
    extra: Option<&[f64]>,
) -> Result<f64> {
    if power != 1 && power != 2 {
        return Err(CircError::InvalidArgument(format!(
            "kernel power must be 1 or 2, got {power}"
        )));
    }
    if let Some(e) = extra {
        if e.len() != sample.len() {
            return Err(CircError::InvalidArgument(
                "extra weights must match the sample length".into(),
            ));
        }
    }
    let scaled = kernel.at(kappa)?;
    let mut total = 0.0;
    for (i, &a) in sample.angles().iter().enumerate() {
        let (s, c) = (a - theta0).sin_cos();
        let k = scaled.from_cos(c);
        let e = extra.map_or(1.0, |e| e[i]);
        total += e * s.powi(j as i32) * k.powi(power as i32);
    }
    Ok(total)
}

/// Closed-form local weighted least squares (normal family semantics).
pub fn wls_fit(
    sample: &CircularSample,
    theta0: f64,
    p: usize,
    kappa: f64,
    kernel: &Kernel,
) -> Result<LocalFit> {
    check_degree(p, MAX_FIT_DEGREE)?;
    let scaled = kernel.at(kappa)?;
    let frame = LocalFrame::new(sample, theta0);
    let weights = frame.weights(&scaled);
    let dim = p + 1;
    let mut m = vec![0.0; 2 * p + 1];
    let mut r = vec![0.0; dim];
    for i in 0..sample.len() {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let z = sample.responses()[i] - sample.offset_at(i);
        accumulate(&mut m, &mut r, frame.sin[i], w, z);
    }
    let s = SmallMatrix::hankel(dim, &m);
    let factor = SymFactor::new(&s, 1.0, MAX_CONDITION)
        .map_err(|e| solve_error(kappa, "normal equations", e))?;
    let beta = factor.solve(&r);
    Ok(LocalFit {
        theta0,
        p,
        kappa,
        beta,
        converged: true,
        iterations: 0,
        neg_curvature_ok: true,
        undetermined: false,
    })
}

fn solve_error(kappa: f64, what: &str, e: SolveFailure) -> CircError {
    match e {
        SolveFailure::NotDefinite => CircError::infeasible(kappa, format!("{what} singular")),
        SolveFailure::IllConditioned(c) => {
            CircError::infeasible(kappa, format!("{what} ill-conditioned (condition {c:.3e})"))
        }
    }
}

// m[k] += w s^k for k <= 2p, r[j] += w z s^j for j <= p
#[inline]
fn accumulate(m: &mut [f64], r: &mut [f64], s: f64, w: f64, z: f64) {
    let dim = r.len();
    let mut v = w;
    for (k, mk) in m.iter_mut().enumerate() {
        *mk += v;
        if k < dim {
            r[k] += v * z;
        }
        v *= s;
    }
}

#[inline]
fn horner(beta: &[f64], s: f64) -> f64 {
    beta.iter().rev().fold(0.0, |acc, b| acc * s + b)
}

/// Local likelihood fit by Fisher scoring (iteratively reweighted least
/// squares with per-observation expected curvature).
#[allow(clippy::too_many_arguments)]
pub fn fisher_scoring_fit(
    sample: &CircularSample,
    family: Family,
    theta0: f64,
    p: usize,
    kappa: f64,
    kernel: &Kernel,
    init: Option<&[f64]>,
) -> Result<LocalFit> {
    check_degree(p, MAX_FIT_DEGREE)?;
    let scaled = kernel.at(kappa)?;
    let frame = LocalFrame::new(sample, theta0);
    let weights = frame.weights(&scaled);
    fit_weighted(sample, &frame, &weights, family, p, kappa, init)
}

/// Scoring fit with precomputed frame and kernel weights. Zero weights drop
/// observations, which is how leave-one-out fits are formed.
pub(crate) fn fit_weighted(
    sample: &CircularSample,
    frame: &LocalFrame,
    weights: &[f64],
    family: Family,
    p: usize,
    kappa: f64,
    init: Option<&[f64]>,
) -> Result<LocalFit> {
    let dim = p + 1;
    let y = sample.responses();
    let mass: f64 = weights.iter().sum();
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(CircError::infeasible(kappa, "kernel weights vanish"));
    }

    // rank check on the kernel-weighted design
    if p > 0 {
        let mut m = vec![0.0; 2 * p + 1];
        let mut r = vec![0.0; dim];
        for i in 0..y.len() {
            if weights[i] != 0.0 {
                accumulate(&mut m, &mut r, frame.sin[i], weights[i], 0.0);
            }
        }
        if SymFactor::new(&SmallMatrix::hankel(dim, &m), 1.0, MAX_CONDITION).is_err() {
            let init0 = init.map(|b| &b[..1]);
            let mut fit = fit_weighted(sample, frame, weights, family, 0, kappa, init0)?;
            fit.p = p;
            fit.beta.resize(dim, 0.0);
            fit.undetermined = true;
            return Ok(fit);
        }
    }

    let mut beta = match init {
        Some(b) if b.len() == dim && b.iter().all(|v| v.is_finite()) => b.to_vec(),
        _ => {
            let mut ybar = 0.0;
            let mut obar = 0.0;
            for i in 0..y.len() {
                ybar += weights[i] * y[i];
                obar += weights[i] * sample.offset_at(i);
            }
            let mut b = vec![0.0; dim];
            b[0] = family.link_clamped(ybar / mass) - obar / mass;
            b
        }
    };

    let mut converged = false;
    let mut iterations = 0;
    let mut halvings = 0;
    let mut accepted: Option<(Vec<f64>, f64)> = None;
    let mut m = vec![0.0; 2 * p + 1];
    let mut r = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    while iterations < MAX_ITERATIONS {
        m.iter_mut().for_each(|v| *v = 0.0);
        r.iter_mut().for_each(|v| *v = 0.0);
        grad.iter_mut().for_each(|v| *v = 0.0);
        let mut information = 0.0;
        let mut objective = 0.0;
        let mut saturated = false;
        for i in 0..y.len() {
            let k = weights[i];
            if k == 0.0 {
                continue;
            }
            let s = frame.sin[i];
            let lin = horner(&beta, s);
            let eta = lin + sample.offset_at(i);
            objective += k * family.loglik(eta, y[i]);
            if k > SATURATION_WEIGHT * mass && saturates(family, eta) {
                saturated = true;
            }
            let (d1, d2) = family.score_curvature(eta, y[i]);
            // Newton weights where the observed curvature is negative
            let c = if d2 < 0.0 { d2 } else { family.expected_curvature(eta) };
            let w = -k * c;
            information += w;
            let z = if c != 0.0 { lin - d1 / c } else { lin };
            accumulate(&mut m, &mut r, s, w, z);
            let mut v = k * d1;
            for g in grad.iter_mut() {
                *g += v;
                v *= s;
            }
        }
        if let Some((previous, best)) = &accepted {
            let worse = !(objective >= best - OBJECTIVE_SLACK * best.abs().max(1.0));
            if worse && best.is_finite() && halvings < MAX_HALVINGS {
                // overshoot: retreat halfway toward the last accepted iterate
                beta = beta.iter().zip(previous).map(|(b, q)| 0.5 * (b + q)).collect();
                halvings += 1;
                continue;
            }
        }
        halvings = 0;
        iterations += 1;
        if saturated && iterations > 2 {
            return Err(CircError::infeasible(kappa, "fitted means saturate"));
        }
        accepted = Some((beta.clone(), objective));
        if !information.is_finite() || information / mass < INFORMATION_FLOOR {
            return Err(CircError::infeasible(kappa, "local information vanishes"));
        }
        // gradient measured relative to the local information, so a score
        // that vanishes only because the fit saturates does not count
        if grad.iter().all(|g| g.abs() < GRADIENT_TOLERANCE * information) {
            converged = true;
            break;
        }
        let factor = SymFactor::new(&SmallMatrix::hankel(dim, &m), 1.0, MAX_CONDITION)
            .map_err(|e| solve_error(kappa, "scoring system", e))?;
        let next = factor.solve(&r);
        let size = next.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !size.is_finite() || size > DIVERGENCE_BOUND {
            return Err(CircError::infeasible(kappa, "scoring iterates diverge"));
        }
        let change = next
            .iter()
            .zip(&beta)
            .fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        beta = next;
        if change <= STEP_TOLERANCE * size.max(1.0) {
            converged = true;
            break;
        }
    }

    let neg_curvature_ok = observed_hessian(sample, frame, weights, family, &beta)
        .map(|h| SymFactor::new(&h, -1.0, f64::INFINITY).is_ok())
        .unwrap_or(false);
    Ok(LocalFit {
        theta0: frame.theta0,
        p,
        kappa,
        beta,
        converged,
        iterations,
        neg_curvature_ok,
        undetermined: false,
    })
}

/// Whether the likelihood is numerically flat at `eta`: a Bernoulli
/// probability or Poisson mean indistinguishable from its boundary.
fn saturates(family: Family, eta: f64) -> bool {
    match family {
        Family::Bernoulli => eta.abs() > 30.0,
        Family::Poisson => eta < -30.0,
        _ => false,
    }
}

/// `Σ K_i l''(η_i + shift_i, Y_i) x_i x_iᵀ` at `beta`.
pub(crate) fn observed_hessian(
    sample: &CircularSample,
    frame: &LocalFrame,
    weights: &[f64],
    family: Family,
    beta: &[f64],
) -> Option<SmallMatrix> {
    let (h, _) = hessian_and_gradient(sample, frame, weights, family, beta, None);
    h.diagonal().iter().all(|d| d.is_finite()).then_some(h)
}

/// Hessian and gradient of `Σ K_i l(x_iᵀβ + o_i + shift_i, Y_i)`.
pub(crate) fn hessian_and_gradient(
    sample: &CircularSample,
    frame: &LocalFrame,
    weights: &[f64],
    family: Family,
    beta: &[f64],
    shift: Option<&[f64]>,
) -> (SmallMatrix, Vec<f64>) {
    let dim = beta.len();
    let mut m = vec![0.0; 2 * dim - 1];
    let mut g = vec![0.0; dim];
    let y = sample.responses();
    for i in 0..y.len() {
        let k = weights[i];
        if k == 0.0 {
            continue;
        }
        let s = frame.sin[i];
        let eta = horner(beta, s) + sample.offset_at(i) + shift.map_or(0.0, |e| e[i]);
        let (d1, d2) = family.score_curvature(eta, y[i]);
        let mut v = k * d1;
        for gj in g.iter_mut() {
            *gj += v;
            v *= s;
        }
        let mut v = k * d2;
        for mk in m.iter_mut() {
            *mk += v;
            v *= s;
        }
    }
    (SmallMatrix::hankel(dim, &m), g)
}

/// A fitted curve on a grid of evaluation angles.
#[derive(Debug, Clone)]
pub struct CurveFit {
    pub grid: Vec<f64>,
    pub nu: usize,
    /// `ĝ^{(ν)}` at each grid angle, NaN where the fit is infeasible.
    pub values: Vec<f64>,
    pub fits: Vec<Option<LocalFit>>,
    /// Failure reason for each infeasible grid point.
    pub failures: Vec<Option<String>>,
}

impl CurveFit {
    /// True when every grid point has a converged fit.
    pub fn is_feasible(&self) -> bool {
        self.fits
            .iter()
            .all(|f| f.as_ref().is_some_and(|f| f.converged))
    }

    /// True when every grid point has a converged, fully determined fit.
    pub fn is_usable(&self) -> bool {
        self.fits
            .iter()
            .all(|f| f.as_ref().is_some_and(LocalFit::is_usable))
    }

    pub fn feasible_mask(&self) -> Vec<bool> {
        self.fits
            .iter()
            .map(|f| f.as_ref().is_some_and(|f| f.converged))
            .collect()
    }
}

/// Fits the local estimator at each grid angle and returns `ĝ^{(ν)}`.
///
/// Adjacent grid angles closer than `2π/64` reuse the previous coefficients
/// as the starting point.
#[allow(clippy::too_many_arguments)]
pub fn fit_curve(
    sample: &CircularSample,
    family: Family,
    grid: &[f64],
    p: usize,
    nu: usize,
    kappa: f64,
    kernel: &Kernel,
) -> Result<CurveFit> {
    check_degree(p, MAX_FIT_DEGREE)?;
    if nu > p {
        return Err(CircError::InvalidArgument(format!(
            "derivative order {nu} exceeds degree {p}"
        )));
    }
    let scaled = kernel.at(kappa)?;
    Ok(fit_curve_scaled(sample, family, grid, p, nu, &scaled))
}

pub(crate) fn fit_curve_scaled(
    sample: &CircularSample,
    family: Family,
    grid: &[f64],
    p: usize,
    nu: usize,
    scaled: &ScaledKernel,
) -> CurveFit {
    let kappa = scaled.kappa();
    let mut values = Vec::with_capacity(grid.len());
    let mut fits = Vec::with_capacity(grid.len());
    let mut failures = Vec::with_capacity(grid.len());
    let mut previous: Option<(f64, Vec<f64>)> = None;
    for &theta0 in grid {
        let frame = LocalFrame::new(sample, theta0);
        let weights = frame.weights(scaled);
        let init = previous.as_ref().and_then(|(t, b)| {
            let gap = angular_distance(*t, theta0);
            (gap <= TAU / 64.0 + 1e-12).then_some(b.as_slice())
        });
        match fit_weighted(sample, &frame, &weights, family, p, kappa, init) {
            Ok(fit) => {
                values.push(if fit.converged { fit.derivative(nu) } else { f64::NAN });
                previous = (fit.converged && !fit.undetermined).then(|| (theta0, fit.beta.clone()));
                failures.push((!fit.converged).then(|| "iteration cap reached".to_string()));
                fits.push(Some(fit));
            }
            Err(e) => {
                values.push(f64::NAN);
                fits.push(None);
                failures.push(Some(e.to_string()));
                previous = None;
            }
        }
    }
    CurveFit {
        grid: grid.to_vec(),
        nu,
        values,
        fits,
        failures,
    }
}

pub(crate) fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn vm() -> Kernel {
        Kernel::von_mises()
    }

    fn normal_sample(angles: &[f64], ys: &[f64]) -> CircularSample {
        CircularSample::new(angles.to_vec(), ys.to_vec()).unwrap()
    }

    #[test]
    fn design_examples() {
        let s = normal_sample(&[0.7], &[1.0]);
        let d = build_design(&s, 0.7, 1, 3.0, &vm()).unwrap();
        assert_eq!(d.rows, vec![vec![1.0, 0.0]]);
        let s = normal_sample(&[0.7 + FRAC_PI_2], &[1.0]);
        let d = build_design(&s, 0.7, 2, 3.0, &vm()).unwrap();
        for (u, v) in d.rows[0].iter().zip([1.0, 1.0, 1.0]) {
            assert!((u - v).abs() < 1e-15);
        }
        let s = normal_sample(&[0.1, 2.0, 5.0], &[1.0, 2.0, 3.0]);
        let d = build_design(&s, 1.0, 1, 0.0, &vm()).unwrap();
        for w in d.weights {
            assert!((w - 1.0 / TAU).abs() < 1e-15);
        }
    }

    #[test]
    fn moments_examples() {
        let s = normal_sample(&[1.3], &[0.0]);
        let k0 = weighted_moments(&s, 1.3, 2.0, 0, 1, &vm(), None).unwrap();
        assert!((k0 - vm().eval(0.0, 2.0).unwrap()).abs() < 1e-15);
        for j in 1..4 {
            for power in [1, 2] {
                assert_eq!(weighted_moments(&s, 1.3, 2.0, j, power, &vm(), None).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn wls_constant_and_exact_line() {
        let angles = [0.1, 0.9, 2.0, 3.3, 4.4, 5.9];
        let s = normal_sample(&angles, &[2.5; 6]);
        let f = wls_fit(&s, 1.0, 2, 1.5, &vm()).unwrap();
        assert!((f.beta[0] - 2.5).abs() < 1e-12);
        assert!(f.beta[1].abs() < 1e-12 && f.beta[2].abs() < 1e-12);

        let (a, b, t0) = (0.4, -1.7, 2.2);
        let ys: Vec<f64> = angles.iter().map(|t| a + b * (t - t0).sin()).collect();
        let f = wls_fit(&normal_sample(&angles, &ys), t0, 1, 4.0, &vm()).unwrap();
        assert!((f.beta[0] - a).abs() < 1e-12 && (f.beta[1] - b).abs() < 1e-12);
        assert!(f.converged && f.iterations == 0);
    }

    #[test]
    fn wls_matches_explicit_two_by_two_inverse() {
        let angles = [0.3, 1.1, 2.9, 4.0, 5.5];
        let ys = [1.0, -0.4, 2.2, 0.7, -1.3];
        let s = normal_sample(&angles, &ys);
        let f = wls_fit(&s, 0.0, 1, 1.0, &vm()).unwrap();
        let i0 = 1.266_065_877_752_008_4; // I_0(1)
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&a, &y) in angles.iter().zip(&ys) {
            let w = (a.cos()).exp() / (TAU * i0);
            let x = a.sin();
            s0 += w;
            s1 += w * x;
            s2 += w * x * x;
            t0 += w * y;
            t1 += w * x * y;
        }
        let det = s0 * s2 - s1 * s1;
        let b0 = (s2 * t0 - s1 * t1) / det;
        let b1 = (s0 * t1 - s1 * t0) / det;
        assert!((f.beta[0] - b0).abs() < 1e-10 && (f.beta[1] - b1).abs() < 1e-10);
    }

    #[test]
    fn poisson_constant_response() {
        let angles: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let s = normal_sample(&angles, &[5.0; 12]);
        let f = fisher_scoring_fit(&s, Family::Poisson, 1.0, 1, 2.0, &vm(), None).unwrap();
        assert!((f.beta[0] - 5f64.ln()).abs() < 1e-10);
        assert!(f.beta[1].abs() < 1e-10);
        assert!(f.converged && f.neg_curvature_ok);
    }

    #[test]
    fn bernoulli_all_ones_is_infeasible() {
        let angles: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let s = normal_sample(&angles, &[1.0; 12]);
        let err = fisher_scoring_fit(&s, Family::Bernoulli, 1.0, 1, 2.0, &vm(), None).unwrap_err();
        assert!(matches!(err, CircError::InfeasibleKappa { .. }));
    }

    #[test]
    fn scoring_equals_wls_for_normal() {
        let angles = [0.2, 0.8, 1.9, 2.4, 3.6, 4.1, 5.0, 6.0];
        let ys = [0.3, 1.2, -0.5, 0.1, 2.0, -1.1, 0.6, 0.9];
        let s = normal_sample(&angles, &ys);
        for p in 0..=3 {
            let a = wls_fit(&s, 2.0, p, 2.5, &vm()).unwrap();
            let b = fisher_scoring_fit(&s, Family::Normal, 2.0, p, 2.5, &vm(), None).unwrap();
            for (u, v) in a.beta.iter().zip(&b.beta) {
                assert!((u - v).abs() <= 1e-8 * u.abs().max(1.0));
            }
        }
    }

    #[test]
    fn identical_angles_give_undetermined_local_constant() {
        let s = normal_sample(&[1.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let f = fisher_scoring_fit(&s, Family::Normal, 1.0, 1, 3.0, &vm(), None).unwrap();
        assert!(f.undetermined);
        assert!((f.beta[0] - 3.0).abs() < 1e-12);
        assert!(wls_fit(&s, 1.0, 1, 3.0, &vm()).is_err());
    }

    #[test]
    fn interpolation_limit() {
        let angles: Vec<f64> = (0..10).map(|i| 0.3 + i as f64 * 0.6).collect();
        let ys: Vec<f64> = angles.iter().map(|a| (3.0 * a).sin() + a).collect();
        let s = normal_sample(&angles, &ys);
        let c = fit_curve(&s, Family::Normal, &angles, 1, 0, 1e5, &vm()).unwrap();
        for (g, y) in c.values.iter().zip(&ys) {
            assert!((g - y).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_curve_and_zero_derivative() {
        let angles: Vec<f64> = (0..30).map(|i| i as f64 * 0.21).collect();
        let s = normal_sample(&angles, &[3.0; 30]);
        let grid: Vec<f64> = (0..16).map(|i| i as f64 * PI / 8.0).collect();
        let c = fit_curve(&s, Family::Poisson, &grid, 1, 0, 4.0, &vm()).unwrap();
        assert!(c.values.iter().all(|v| (v - 3f64.ln()).abs() < 1e-9));
        let d = fit_curve(&s, Family::Poisson, &grid, 1, 1, 4.0, &vm()).unwrap();
        assert!(d.values.iter().all(|v| v.abs() < 1e-9));
        let single = fit_curve(&s, Family::Normal, &[0.4], 1, 0, 4.0, &vm()).unwrap();
        let direct = wls_fit(&s, 0.4, 1, 4.0, &vm()).unwrap();
        assert!((single.values[0] - direct.beta[0]).abs() < 1e-12);
    }

    #[test]
    fn hessian_matches_finite_difference_of_gradient() {
        let angles = [0.2, 0.8, 1.9, 2.4, 3.6, 4.1, 5.0, 6.0];
        let ys = [0.0, 1.0, 3.0, 2.0, 0.0, 5.0, 1.0, 2.0];
        let s = normal_sample(&angles, &ys);
        let frame = LocalFrame::new(&s, 1.0);
        let w = frame.weights(&vm().at(1.5).unwrap());
        let beta = [0.3, -0.2, 0.1];
        let (h, g) = hessian_and_gradient(&s, &frame, &w, Family::Poisson, &beta, None);
        for j in 0..3 {
            let mut bp = beta;
            bp[j] += 1e-6;
            let (_, gp) = hessian_and_gradient(&s, &frame, &w, Family::Poisson, &bp, None);
            for i in 0..3 {
                let fd = (gp[i] - g[i]) / 1e-6;
                assert!((fd - h[(i, j)]).abs() < 1e-4, "{i},{j}: {fd} vs {}", h[(i, j)]);
            }
        }
    }
}
