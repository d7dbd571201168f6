//! Pointwise confidence bands from the normal approximation, with the raw
//! bias and variance estimates smoothed by the kernel before use.

use rayon::prelude::*;
use serde::Serialize;

use crate::bias_variance::{bias_variance_at, DEFAULT_PILOT_EXTRA};
use crate::error::{CircError, Result};
use crate::family::Family;
use crate::kernel::Kernel;
use crate::local_fit::{fit_weighted, LocalFrame};
use crate::quadrature::periodic_simpson_weights;
use crate::sample::CircularSample;
use crate::selection::{residual_kappa, stepped_pilots, KappaGrid, SelectionOptions, Selector};
use crate::special::normal_quantile;

/// A pointwise band on an equispaced grid. Grid points where the fit or the
/// bias/variance estimate failed carry NaN and `feasible[i] == false`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceBand {
    pub grid: Vec<f64>,
    pub estimate: Vec<f64>,
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub smoothed_bias: Vec<f64>,
    pub smoothed_variance: Vec<f64>,
    pub feasible: Vec<bool>,
    pub level: f64,
    pub z: f64,
    pub kappa: f64,
    pub pilot_kappa: f64,
    pub p: usize,
    pub nu: usize,
}

impl ConfidenceBand {
    pub fn width(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }

    /// Whether `value` lies in the band at grid index `i`.
    pub fn covers(&self, i: usize, value: f64) -> bool {
        self.feasible[i] && self.lower[i] <= value && value <= self.upper[i]
    }
}

/// Options for [`confidence_band_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandOptions {
    /// Pilot concentration; chosen by the residual criterion when `None`.
    pub pilot_kappa: Option<f64>,
    pub pilot_extra: usize,
    /// Grid used to choose the pilot and to step it down when infeasible.
    pub kappa_grid: KappaGrid,
    pub selection: SelectionOptions,
}

impl Default for BandOptions {
    fn default() -> Self {
        BandOptions {
            pilot_kappa: None,
            pilot_extra: DEFAULT_PILOT_EXTRA,
            kappa_grid: KappaGrid::default(),
            selection: SelectionOptions::default(),
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    let m = grid.len();
    if m < 2 || m % 2 != 0 {
        return Err(CircError::InvalidArgument(format!(
            "band grid needs an even number of points, got {m}"
        )));
    }
    let h = std::f64::consts::TAU / m as f64;
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(CircError::InvalidArgument(
                "band grid must be equispaced around the circle".into(),
            ));
        }
    }
    Ok(())
}

/// Periodic kernel convolution of values on an equispaced grid of the circle:
/// `∫ f(θ) K_κ(θ − θ0) dθ` by Simpson's rule. NaN entries are skipped and the
/// remaining weights renormalised so that constants are reproduced exactly.
pub fn kernel_smooth(values: &[f64], kappa: f64, kernel: &Kernel) -> Result<Vec<f64>> {
    let m = values.len();
    if m < 2 || m % 2 != 0 {
        return Err(CircError::InvalidArgument(format!(
            "smoothing needs an even number of grid values, got {m}"
        )));
    }
    let sk = kernel.at(kappa)?;
    let simpson = periodic_simpson_weights(m);
    let h = std::f64::consts::TAU / m as f64;
    // the kernel only depends on the index lag
    let lag: Vec<f64> = (0..m).map(|d| sk.eval(d as f64 * h)).collect();
    Ok((0..m)
        .map(|j| {
            let (mut num, mut den) = (0.0, 0.0);
            for (i, &v) in values.iter().enumerate() {
                if v.is_nan() {
                    continue;
                }
                let w = simpson[i] * lag[(i + m - j) % m];
                num += w * v;
                den += w;
            }
            if den > 0.0 {
                num / den
            } else {
                f64::NAN
            }
        })
        .collect())
}

/// Kernel-weighted averages `(B̂ᵏ, V̂ᵏ)` of raw bias and variance sampled on an
/// equispaced grid.
pub fn smoothed_bias_variance(
    raw_bias: &[f64],
    raw_var: &[f64],
    kappa: f64,
    kernel: &Kernel,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if raw_bias.len() != raw_var.len() {
        return Err(CircError::InvalidArgument(
            "bias and variance must share a grid".into(),
        ));
    }
    let bias = kernel_smooth(raw_bias, kappa, kernel)?;
    let var = kernel_smooth(raw_var, kappa, kernel)?
        .into_iter()
        .map(|v| if v.is_nan() { v } else { v.max(0.0) })
        .collect();
    Ok((bias, var))
}

/// Band at level `1 − α` with the pilot chosen by the residual criterion.
#[allow(clippy::too_many_arguments)]
pub fn confidence_band(
    sample: &CircularSample,
    family: Family,
    grid: &[f64],
    p: usize,
    nu: usize,
    kappa: f64,
    level: f64,
    kernel: &Kernel,
) -> Result<ConfidenceBand> {
    confidence_band_with(sample, family, grid, p, nu, kappa, level, kernel, &BandOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn confidence_band_with(
    sample: &CircularSample,
    family: Family,
    grid: &[f64],
    p: usize,
    nu: usize,
    kappa: f64,
    level: f64,
    kernel: &Kernel,
    options: &BandOptions,
) -> Result<ConfidenceBand> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CircError::InvalidArgument(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    if nu > p {
        return Err(CircError::InvalidArgument(format!(
            "derivative order {nu} exceeds degree {p}"
        )));
    }
    check_grid(grid)?;
    let sk = kernel.at(kappa)?;
    let pilot_request = match options.pilot_kappa {
        Some(k) => k,
        None => {
            residual_kappa(
                sample,
                family,
                Selector::residual_for(family),
                p,
                nu,
                kernel,
                &options.kappa_grid,
                &options.selection,
            )?
            .kappa_hat
        }
    };
    let frames: Vec<LocalFrame> = grid.iter().map(|&t| LocalFrame::new(sample, t)).collect();
    let (pilot_kappa, pilots) = stepped_pilots(
        sample,
        &frames,
        family,
        p,
        options.pilot_extra,
        pilot_request,
        &options.kappa_grid,
        kernel,
    )?;

    let raw: Vec<(f64, f64, f64)> = frames
        .par_iter()
        .zip(pilots.par_iter())
        .map(|(frame, pilot)| {
            let weights = frame.weights(&sk);
            let nan = (f64::NAN, f64::NAN, f64::NAN);
            let Ok(fit) = fit_weighted(sample, frame, &weights, family, p, kappa, None) else {
                return nan;
            };
            if !fit.is_usable() {
                return nan;
            }
            match bias_variance_at(sample, frame, &weights, family, &fit, pilot, nu) {
                Ok(bv) => (fit.derivative(nu), bv.bias, bv.variance),
                Err(_) => nan,
            }
        })
        .collect();
    let estimate: Vec<f64> = raw.iter().map(|r| r.0).collect();
    let raw_bias: Vec<f64> = raw.iter().map(|r| r.1).collect();
    let raw_var: Vec<f64> = raw.iter().map(|r| r.2).collect();
    let (smoothed_bias, smoothed_variance) = smoothed_bias_variance(&raw_bias, &raw_var, kappa, kernel)?;

    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    let m = grid.len();
    let (mut center, mut lower, mut upper, mut feasible) =
        (vec![f64::NAN; m], vec![f64::NAN; m], vec![f64::NAN; m], vec![false; m]);
    for i in 0..m {
        let c = estimate[i] - smoothed_bias[i];
        let half = z * smoothed_variance[i].sqrt();
        if c.is_finite() && half.is_finite() {
            center[i] = c;
            lower[i] = c - half;
            upper[i] = c + half;
            feasible[i] = true;
        }
    }
    if !feasible.iter().any(|&f| f) {
        return Err(CircError::infeasible(kappa, "no grid point admits a band"));
    }
    Ok(ConfidenceBand {
        grid: grid.to_vec(),
        estimate,
        center,
        lower,
        upper,
        smoothed_bias,
        smoothed_variance,
        feasible,
        level,
        z,
        kappa,
        pilot_kappa,
        p,
        nu,
    })
}
