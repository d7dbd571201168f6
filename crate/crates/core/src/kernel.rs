//! Circular kernels of the form `K_κ(θ) = c_κ(K) · K(κ(1 − cos θ))` and the
//! kernel moment constants that enter the asymptotic MSE expressions.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::error::{CircError, Result};
use crate::linalg::{SmallMatrix, SymFactor};
use crate::quadrature;
use crate::special::ln_bessel_i0;

/// Largest local polynomial degree for which moment constants are packed.
pub const MAX_MOMENT_DEGREE: usize = 3;

const MOMENT_ABS_TOL: f64 = 1e-12;

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum ProfileKind {
    VonMises,
    Custom(Profile),
}

/// A circular kernel determined by its radial profile `K: [0, ∞) → [0, ∞)`.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    kind: ProfileKind,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("has_closed_moments", &self.has_closed_moments())
            .finish()
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::von_mises()
    }
}

impl Kernel {
    /// The von Mises kernel, profile `K(r) = exp(−r)`.
    pub fn von_mises() -> Self {
        Kernel {
            name: "von_mises".to_string(),
            kind: ProfileKind::VonMises,
        }
    }

    /// A kernel from an arbitrary nonnegative profile. The normalising
    /// integral `∫ r^{-1/2} K(r) dr` must be finite; higher moments are
    /// checked when a [`KernelMoments`] pack is requested.
    pub fn custom<F>(name: impl Into<String>, profile: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let kernel = Kernel {
            name: name.into(),
            kind: ProfileKind::Custom(Arc::new(profile)),
        };
        for r in [0.0, 1e-3, 0.5, 1.0, 3.0, 10.0] {
            let v = kernel.profile(r);
            if !(v >= 0.0) || !v.is_finite() {
                return Err(CircError::DegenerateKernel(format!(
                    "profile must be finite and nonnegative, got {v} at r = {r}"
                )));
            }
        }
        if kernel.profile(0.0) <= 0.0 {
            return Err(CircError::DegenerateKernel("profile vanishes at 0".into()));
        }
        profile_integral(&kernel, 0, 1)?;
        Ok(kernel)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_closed_moments(&self) -> bool {
        matches!(self.kind, ProfileKind::VonMises)
    }

    /// The radial profile `K(r)`.
    pub fn profile(&self, r: f64) -> f64 {
        match &self.kind {
            ProfileKind::VonMises => (-r).exp(),
            ProfileKind::Custom(f) => f(r),
        }
    }

    /// The kernel normalised at concentration `kappa`.
    pub fn at(&self, kappa: f64) -> Result<ScaledKernel> {
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(CircError::InvalidArgument(format!(
                "concentration must be finite and nonnegative, got {kappa}"
            )));
        }
        let log_norm = match &self.kind {
            ProfileKind::VonMises => -(2.0 * PI).ln() - ln_bessel_i0(kappa),
            ProfileKind::Custom(f) => {
                if kappa == 0.0 {
                    -(2.0 * PI * f(0.0)).ln()
                } else {
                    let (half, _) = quadrature::integrate(
                        |t: f64| f(kappa * (1.0 - t.cos())),
                        0.0,
                        PI,
                        1e-14,
                    );
                    if !(half > 0.0) {
                        return Err(CircError::DegenerateKernel(format!(
                            "zero normalising mass at kappa = {kappa}"
                        )));
                    }
                    -(2.0 * half).ln()
                }
            }
        };
        Ok(ScaledKernel {
            kappa,
            log_norm,
            kind: self.kind.clone(),
        })
    }

    /// `K_κ(angle)`; the angle is reduced modulo 2π.
    pub fn eval(&self, angle: f64, kappa: f64) -> Result<f64> {
        if !angle.is_finite() {
            return Err(CircError::InvalidArgument(format!(
                "angle must be finite, got {angle}"
            )));
        }
        Ok(self.at(kappa)?.eval(angle))
    }
}

/// Kernel with its normalising constant resolved for a fixed concentration.
#[derive(Clone)]
pub struct ScaledKernel {
    kappa: f64,
    log_norm: f64,
    kind: ProfileKind,
}

impl ScaledKernel {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Kernel value from `cos(angle)`, the hot path for local fits.
    #[inline]
    pub fn from_cos(&self, cos_delta: f64) -> f64 {
        match &self.kind {
            ProfileKind::VonMises => (self.kappa * cos_delta + self.log_norm).exp(),
            ProfileKind::Custom(f) => {
                self.log_norm.exp() * f(self.kappa * (1.0 - cos_delta))
            }
        }
    }

    /// `K_κ(angle)`. The angle is folded into `[0, π]` first, so the value
    /// is bitwise even and 2π-periodic whenever the shift itself is exact.
    pub fn eval(&self, angle: f64) -> f64 {
        let mut r = angle.abs() % TAU;
        if r > PI {
            r = TAU - r;
        }
        self.from_cos(r.cos())
    }
}

fn log_profile(kernel: &Kernel, r: f64) -> f64 {
    match &kernel.kind {
        ProfileKind::VonMises => -r,
        ProfileKind::Custom(f) => f(r).ln(),
    }
}

/// `∫_0^∞ r^{(j-1)/2} K(r)^power dr` through the substitution `r = e^t`.
fn profile_integral(kernel: &Kernel, j: usize, power: u32) -> Result<f64> {
    let a = (j as f64 + 1.0) / 2.0;
    let l = power as f64;
    let integrand = |t: f64| {
        let lk = log_profile(kernel, t.exp());
        if lk == f64::NEG_INFINITY {
            0.0
        } else {
            (a * t + l * lk).exp()
        }
    };
    // e^{a t} < 1e-17 below this point
    let t_lo = -40.0 / a;
    // walk right until the integrand is negligible relative to its peak
    let mut peak: f64 = 0.0;
    let mut t = t_lo;
    while t < 0.0 {
        peak = peak.max(integrand(t));
        t += 0.5;
    }
    let mut t_hi = 0.0;
    let mut t_peak = t_lo;
    loop {
        let v = integrand(t_hi);
        if !v.is_finite() {
            return Err(CircError::MomentDivergence { j });
        }
        if v > peak {
            peak = v;
            t_peak = t_hi;
        }
        if v <= 1e-17 * peak.max(f64::MIN_POSITIVE) && t_hi > 1.0 {
            // a profile that underflows only after the integrand has grown
            // out to r = e^40 is treated as divergent
            if t_peak > 40.0 {
                return Err(CircError::MomentDivergence { j });
            }
            break;
        }
        t_hi += 1.0;
        if t_hi > 700.0 {
            return Err(CircError::MomentDivergence { j });
        }
    }
    let (value, err) = quadrature::integrate(integrand, t_lo, t_hi, MOMENT_ABS_TOL);
    if !value.is_finite() || err > 1e-6 * value.abs().max(1.0) {
        return Err(CircError::MomentDivergence { j });
    }
    Ok(value)
}

/// `b_j*(K)`: zero for odd `j`, otherwise a ratio of profile integrals.
pub fn moment_b(j: usize, kernel: &Kernel) -> Result<f64> {
    if j % 2 == 1 {
        return Ok(0.0);
    }
    if kernel.has_closed_moments() {
        return Ok(gamma((j as f64 + 1.0) / 2.0) / gamma(0.5));
    }
    moment_b_quadrature(j, kernel)
}

/// `b_j*(K)` by quadrature regardless of any closed form.
pub fn moment_b_quadrature(j: usize, kernel: &Kernel) -> Result<f64> {
    if j % 2 == 1 {
        return Ok(0.0);
    }
    Ok(profile_integral(kernel, j, 1)? / profile_integral(kernel, 0, 1)?)
}

/// `d_j*(K)`: zero for odd `j`, otherwise `∫ r^{(j-1)/2} K² / (∫ r^{-1/2} K)²`.
pub fn moment_d(j: usize, kernel: &Kernel) -> Result<f64> {
    if j % 2 == 1 {
        return Ok(0.0);
    }
    if kernel.has_closed_moments() {
        let h = (j as f64 + 1.0) / 2.0;
        return Ok(gamma(h) * 2f64.powf(-h) / PI);
    }
    moment_d_quadrature(j, kernel)
}

/// `d_j*(K)` by quadrature regardless of any closed form.
pub fn moment_d_quadrature(j: usize, kernel: &Kernel) -> Result<f64> {
    if j % 2 == 1 {
        return Ok(0.0);
    }
    let norm = profile_integral(kernel, 0, 1)?;
    Ok(profile_integral(kernel, j, 2)? / (norm * norm))
}

/// Moment constants for a local polynomial of degree `p`.
#[derive(Debug, Clone)]
pub struct KernelMoments {
    pub p: usize,
    /// `b_j*` for `j = 0..=2p+2`.
    pub b_star: Vec<f64>,
    /// `d_j*` for `j = 0..=2p`.
    pub d_star: Vec<f64>,
    pub b: SmallMatrix,
    pub d: SmallMatrix,
    /// `(b_{p+1}*, …, b_{2p+1}*)`.
    pub c_p: Vec<f64>,
    /// `b_{2p+2}* − c_pᵀ B c_p`.
    pub c_const: f64,
    /// `b_{2p+2}* − c_pᵀ B⁻¹ c_p`, reported alongside for comparison.
    pub c_const_inverse_form: f64,
    /// Diagonal of `B⁻¹ D B⁻¹`.
    pub a: Vec<f64>,
    /// `B⁻¹ c_p`.
    pub b_inv_c: Vec<f64>,
}

impl KernelMoments {
    pub fn new(p: usize, kernel: &Kernel) -> Result<Self> {
        if p > MAX_MOMENT_DEGREE {
            return Err(CircError::InvalidArgument(format!(
                "degree {p} exceeds supported maximum {MAX_MOMENT_DEGREE}"
            )));
        }
        let b_star = (0..=2 * p + 2)
            .map(|j| moment_b(j, kernel))
            .collect::<Result<Vec<_>>>()?;
        let d_star = (0..=2 * p)
            .map(|j| moment_d(j, kernel))
            .collect::<Result<Vec<_>>>()?;
        let dim = p + 1;
        let b = SmallMatrix::hankel(dim, &b_star);
        let d = SmallMatrix::hankel(dim, &d_star);
        let factor = SymFactor::new(&b, 1.0, 1e14)
            .map_err(|e| CircError::DegenerateKernel(format!("moment matrix B singular: {e:?}")))?;
        let b_inv = factor.inverse();
        let c_p: Vec<f64> = b_star[p + 1..=2 * p + 1].to_vec();
        let bc = b.matvec(&c_p);
        let b_inv_c = factor.solve(&c_p);
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        let c_const = b_star[2 * p + 2] - dot(&c_p, &bc);
        let c_const_inverse_form = b_star[2 * p + 2] - dot(&c_p, &b_inv_c);
        let sandwich = b_inv.matmul(&d).matmul(&b_inv);
        Ok(KernelMoments {
            p,
            b_star,
            d_star,
            b,
            d,
            c_p,
            c_const,
            c_const_inverse_form,
            a: sandwich.diagonal(),
            b_inv_c,
        })
    }

    /// `a_0`, the leading diagonal element of `B⁻¹ D B⁻¹`.
    pub fn a0(&self) -> f64 {
        self.a[0]
    }
}

/// Builds the moment pack for degree `p`.
pub fn moment_pack(p: usize, kernel: &Kernel) -> Result<KernelMoments> {
    KernelMoments::new(p, kernel)
}

/// The constant `ξ_{p,ν}(K)` relating the CRSC-optimal concentration to the
/// MSE-optimal one. Defined for odd `p − ν`.
pub fn xi_factor(p: usize, nu: usize, kernel: &Kernel) -> Result<f64> {
    if nu > p || (p - nu) % 2 == 0 {
        return Err(CircError::UnsupportedParity { p, nu });
    }
    let m = KernelMoments::new(p, kernel)?;
    let lead = m.b_inv_c[nu];
    let numerator = (p + 1 - nu) as f64 * m.a0() * lead * lead;
    let denominator = (1 + 2 * nu) as f64 * m.a[nu] * m.c_const;
    if numerator == 0.0 || denominator <= 0.0 {
        return Err(CircError::DegenerateConstant(format!(
            "xi numerator {numerator}, denominator {denominator}"
        )));
    }
    Ok((numerator / denominator).powf(2.0 / (2 * p + 3) as f64))
}
