//! Plug-in bias from a higher-degree pilot fit and sandwich variance.

use serde::Serialize;

use crate::error::{CircError, Result};
use crate::family::{Family, ScoreVariance};
use crate::kernel::Kernel;
use crate::linalg::{SmallMatrix, SymFactor};
use crate::local_fit::{
    angular_distance, factorial, fit_weighted, hessian_and_gradient, LocalFit, LocalFrame,
    MAX_FIT_DEGREE,
};
use crate::sample::CircularSample;

/// Default number of extra pilot degrees.
pub const DEFAULT_PILOT_EXTRA: usize = 2;

/// Observations whose pilot weight falls below this fraction of the largest
/// weight are left out of the score-variance average. Under a log link the
/// pilot polynomial, extrapolated far from θ0, can push `l'²` up faster than
/// the kernel decays.
pub const SCORE_SUPPORT: f64 = 1e-2;

/// Degree `p + a` fit at the pilot concentration and the implied tail
/// `ε̂_i = Σ_{k=p+1}^{p+a} β̂_k sin^k(Θ_i − θ0)`.
#[derive(Debug, Clone)]
pub struct PilotFit {
    pub theta0: f64,
    pub p: usize,
    pub degree: usize,
    pub kappa_star: f64,
    pub beta_pilot: Vec<f64>,
    pub epsilon_hat: Vec<f64>,
    /// `Σ l'(x̃_iᵀβ̂, Y_i)² K_{κ*,i} / Σ K_{κ*,i}`, the pilot estimate of the
    /// score variance used when no variance function is known.
    pub score_variance: f64,
}

/// Which estimate of `Var[l'(g(θ0), Y)]` entered the sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VarianceCase {
    /// Known variance function at the fitted value.
    A,
    /// Pilot-weighted mean of squared scores.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasVariance {
    pub theta0: f64,
    pub kappa: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub var_case_used: VarianceCase,
}

#[allow(clippy::too_many_arguments)]
pub fn pilot_fit(
    sample: &CircularSample,
    family: Family,
    theta0: f64,
    p: usize,
    a: usize,
    kappa_star: f64,
    kernel: &Kernel,
) -> Result<PilotFit> {
    let frame = LocalFrame::new(sample, theta0);
    let weights = frame.weights(&kernel.at(kappa_star)?);
    pilot_from_frame(sample, &frame, &weights, family, p, a, kappa_star, None)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn pilot_from_frame(
    sample: &CircularSample,
    frame: &LocalFrame,
    weights: &[f64],
    family: Family,
    p: usize,
    a: usize,
    kappa_star: f64,
    init: Option<&[f64]>,
) -> Result<PilotFit> {
    if a == 0 {
        return Err(CircError::InvalidArgument("pilot needs a >= 1 extra degrees".into()));
    }
    let degree = p + a;
    if degree > MAX_FIT_DEGREE {
        return Err(CircError::InvalidArgument(format!(
            "pilot degree {degree} exceeds {MAX_FIT_DEGREE}"
        )));
    }
    let fit = fit_weighted(sample, frame, weights, family, degree, kappa_star, init)?;
    if !fit.is_usable() {
        return Err(CircError::infeasible(
            kappa_star,
            if fit.undetermined {
                "pilot design is rank deficient"
            } else {
                "pilot fit did not converge"
            },
        ));
    }
    let beta = fit.beta;
    let y = sample.responses();
    let mut epsilon_hat = Vec::with_capacity(y.len());
    let (mut num, mut den) = (0.0, 0.0);
    let cutoff = SCORE_SUPPORT * weights.iter().copied().fold(0.0, f64::max);
    for (i, &s) in frame.sin.iter().enumerate() {
        let mut pw = 1.0;
        let mut lin = 0.0;
        let mut tail = 0.0;
        for (k, b) in beta.iter().enumerate() {
            lin += b * pw;
            if k > p {
                tail += b * pw;
            }
            pw *= s;
        }
        epsilon_hat.push(tail);
        let w = weights[i];
        if w > 0.0 && w >= cutoff {
            let score = family.score(lin + sample.offset_at(i), y[i]);
            num += score * score * w;
            den += w;
        }
    }
    if !(den > 0.0) {
        return Err(CircError::infeasible(kappa_star, "pilot weights vanish"));
    }
    Ok(PilotFit {
        theta0: frame.theta0,
        p,
        degree,
        kappa_star,
        beta_pilot: beta,
        epsilon_hat,
        score_variance: num / den,
    })
}

fn check_pilot(pilot: &PilotFit, theta0: f64, p: usize, n: usize) -> Result<()> {
    if angular_distance(pilot.theta0, theta0) > 1e-12 || pilot.p != p || pilot.epsilon_hat.len() != n
    {
        return Err(CircError::InvalidArgument(
            "pilot fit does not match the evaluation angle, degree or sample".into(),
        ));
    }
    Ok(())
}

fn check_nu(p: usize, nu: usize) -> Result<()> {
    if nu > p {
        return Err(CircError::InvalidArgument(format!(
            "derivative order {nu} exceeds degree {p}"
        )));
    }
    Ok(())
}

struct Prepared {
    frame: LocalFrame,
    weights: Vec<f64>,
    fit: LocalFit,
}

#[allow(clippy::too_many_arguments)]
fn prepare(
    sample: &CircularSample,
    family: Family,
    theta0: f64,
    p: usize,
    nu: usize,
    kappa: f64,
    pilot: &PilotFit,
    kernel: &Kernel,
) -> Result<Prepared> {
    check_nu(p, nu)?;
    check_pilot(pilot, theta0, p, sample.len())?;
    let frame = LocalFrame::new(sample, theta0);
    let weights = frame.weights(&kernel.at(kappa)?);
    let fit = fit_weighted(sample, &frame, &weights, family, p, kappa, None)?;
    Ok(Prepared {
        frame,
        weights,
        fit,
    })
}

/// `ν! e_{ν+1}ᵀ [L*''(β̂)]⁻¹ L*'(β̂)` with the pilot tail plugged in.
#[allow(clippy::too_many_arguments)]
pub fn estimate_bias(
    sample: &CircularSample,
    family: Family,
    theta0: f64,
    p: usize,
    nu: usize,
    kappa: f64,
    pilot: &PilotFit,
    kernel: &Kernel,
) -> Result<f64> {
    let pr = prepare(sample, family, theta0, p, nu, kappa, pilot, kernel)?;
    bias_at(sample, &pr.frame, &pr.weights, family, &pr.fit, pilot, nu)
}

/// `ν!² e_{ν+1}ᵀ Ξ_p e_{ν+1}` with `Ξ_p = v [L''(β̂)]⁻¹ Γ_n [L''(β̂)]⁻¹`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_variance(
    sample: &CircularSample,
    family: Family,
    theta0: f64,
    p: usize,
    nu: usize,
    kappa: f64,
    pilot: &PilotFit,
    kernel: &Kernel,
) -> Result<f64> {
    let pr = prepare(sample, family, theta0, p, nu, kappa, pilot, kernel)?;
    variance_at(sample, &pr.frame, &pr.weights, family, &pr.fit, pilot, nu).map(|(v, _)| v)
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_mse(
    sample: &CircularSample,
    family: Family,
    theta0: f64,
    p: usize,
    nu: usize,
    kappa: f64,
    pilot: &PilotFit,
    kernel: &Kernel,
) -> Result<BiasVariance> {
    let pr = prepare(sample, family, theta0, p, nu, kappa, pilot, kernel)?;
    bias_variance_at(sample, &pr.frame, &pr.weights, family, &pr.fit, pilot, nu)
}

fn require_usable(fit: &LocalFit) -> Result<()> {
    if fit.is_usable() {
        Ok(())
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

fn negative_factor(h: &SmallMatrix, kappa: f64) -> Result<SymFactor> {
    SymFactor::new(h, -1.0, crate::local_fit::MAX_CONDITION)
        .map_err(|e| CircError::infeasible(kappa, format!("local Hessian not invertible: {e:?}")))
}

pub(crate) fn bias_at(
    sample: &CircularSample,
    frame: &LocalFrame,
    weights: &[f64],
    family: Family,
    fit: &LocalFit,
    pilot: &PilotFit,
    nu: usize,
) -> Result<f64> {
    require_usable(fit)?;
    if pilot.epsilon_hat.iter().all(|e| *e == 0.0) {
        return Ok(0.0);
    }
    let (h, g) = hessian_and_gradient(
        sample,
        frame,
        weights,
        family,
        &fit.beta,
        Some(&pilot.epsilon_hat),
    );
    let b = negative_factor(&h, fit.kappa)?.solve(&g);
    Ok(factorial(nu) * b[nu])
}

pub(crate) fn variance_at(
    sample: &CircularSample,
    frame: &LocalFrame,
    weights: &[f64],
    family: Family,
    fit: &LocalFit,
    pilot: &PilotFit,
    nu: usize,
) -> Result<(f64, VarianceCase)> {
    require_usable(fit)?;
    let dim = fit.beta.len();
    let (h, _) = hessian_and_gradient(sample, frame, weights, family, &fit.beta, None);
    let h_inv = negative_factor(&h, fit.kappa)?.inverse();
    let mut gm = vec![0.0; 2 * dim - 1];
    let (mut mass, mut off) = (0.0, 0.0);
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        mass += w;
        off += w * sample.offset_at(i);
        let mut v = w * w;
        for m in gm.iter_mut() {
            *m += v;
            v *= frame.sin[i];
        }
    }
    let gamma = SmallMatrix::hankel(dim, &gm);
    let g_hat = fit.beta[0] + off / mass;
    let (factor, case) = match family.variance_function(g_hat) {
        ScoreVariance::Known(v) => (v, VarianceCase::A),
        ScoreVariance::Pilot => (pilot.score_variance, VarianceCase::B),
    };
    let sandwich = h_inv.matmul(&gamma).matmul(&h_inv);
    let f = factorial(nu);
    let variance = (f * f * factor * sandwich[(nu, nu)]).max(0.0);
    if !variance.is_finite() {
        return Err(CircError::infeasible(fit.kappa, "variance is not finite"));
    }
    Ok((variance, case))
}

pub(crate) fn bias_variance_at(
    sample: &CircularSample,
    frame: &LocalFrame,
    weights: &[f64],
    family: Family,
    fit: &LocalFit,
    pilot: &PilotFit,
    nu: usize,
) -> Result<BiasVariance> {
    let bias = bias_at(sample, frame, weights, family, fit, pilot, nu)?;
    let (variance, var_case_used) = variance_at(sample, frame, weights, family, fit, pilot, nu)?;
    Ok(BiasVariance {
        theta0: frame.theta0,
        kappa: fit.kappa,
        bias,
        variance,
        mse: bias * bias + variance,
        var_case_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SmallMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sample(n: usize, seed: u64, g: impl Fn(f64) -> f64, noise: f64) -> CircularSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        let ys = angles
            .iter()
            .map(|&a| g(a) + noise * (rng.random::<f64>() - 0.5))
            .collect();
        CircularSample::new(angles, ys).unwrap()
    }

    #[test]
    fn pilot_on_exact_low_degree_data_has_zero_tail() {
        let theta0 = 0.8;
        let s = random_sample(40, 1, |a| 1.0 + 0.5 * (a - theta0).sin(), 0.0);
        let pilot = pilot_fit(&s, Family::Normal, theta0, 1, 2, 3.0, &Kernel::von_mises()).unwrap();
        assert_eq!(pilot.degree, 3);
        assert!(pilot.epsilon_hat.iter().all(|e| e.abs() < 1e-10));
        let b = estimate_bias(&s, Family::Normal, theta0, 1, 0, 5.0, &pilot, &Kernel::von_mises())
            .unwrap();
        assert!(b.abs() < 1e-9);
    }

    #[test]
    fn pilot_matches_dense_cubic_solve() {
        let theta0 = 2.0;
        let s = random_sample(30, 2, |a| a.sin() + (2.0 * a).cos(), 1.0);
        let kernel = Kernel::von_mises();
        let pilot = pilot_fit(&s, Family::Normal, theta0, 1, 2, 2.0, &kernel).unwrap();
        let scaled = kernel.at(2.0).unwrap();
        let mut xtwx = SmallMatrix::zeros(4);
        let mut xtwy = [0.0; 4];
        for (&a, &y) in s.angles().iter().zip(s.responses()) {
            let w = scaled.eval(a - theta0);
            let x: Vec<f64> = (0..4).map(|k| (a - theta0).sin().powi(k)).collect();
            for i in 0..4 {
                xtwy[i] += w * x[i] * y;
                for j in 0..4 {
                    xtwx[(i, j)] += w * x[i] * x[j];
                }
            }
        }
        let want = SymFactor::new(&xtwx, 1.0, 1e14).unwrap().solve(&xtwy);
        for (u, v) in pilot.beta_pilot.iter().zip(&want) {
            assert!((u - v).abs() < 1e-9 * v.abs().max(1.0));
        }
        for (i, &a) in s.angles().iter().enumerate() {
            let sn = (a - theta0).sin();
            let tail = want[2] * sn * sn + want[3] * sn.powi(3);
            assert!((pilot.epsilon_hat[i] - tail).abs() < 1e-9);
        }
    }

    #[test]
    fn normal_bias_matches_matrix_identity() {
        let kernel = Kernel::von_mises();
        let theta0 = 1.1;
        let s = random_sample(60, 3, |a| (2.0 * a).sin() * a.cos(), 0.8);
        let pilot = pilot_fit(&s, Family::Normal, theta0, 1, 2, 4.0, &kernel).unwrap();
        let kappa = 6.0;
        let scaled = kernel.at(kappa).unwrap();
        let mut xtwx = SmallMatrix::zeros(2);
        let mut xtwe = [0.0; 2];
        for (i, &a) in s.angles().iter().enumerate() {
            let w = scaled.eval(a - theta0);
            let x = [1.0, (a - theta0).sin()];
            for r in 0..2 {
                xtwe[r] += w * x[r] * pilot.epsilon_hat[i];
                for c in 0..2 {
                    xtwx[(r, c)] += w * x[r] * x[c];
                }
            }
        }
        let want = SymFactor::new(&xtwx, 1.0, 1e14).unwrap().solve(&xtwe);
        for nu in 0..2 {
            let got = estimate_bias(&s, Family::Normal, theta0, 1, nu, kappa, &pilot, &kernel)
                .unwrap();
            assert!((got - want[nu]).abs() < 1e-9 * want[nu].abs().max(1.0), "{got} vs {}", want[nu]);
        }
    }

    #[test]
    fn poisson_case_a_and_mse_composition() {
        let kernel = Kernel::von_mises();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let angles: Vec<f64> = (0..200).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        let ys: Vec<f64> = angles.iter().map(|_| f64::from(rng.random_range(0..3u8))).collect();
        let s = CircularSample::for_family(angles, ys, Family::Poisson).unwrap();
        let pilot = pilot_fit(&s, Family::Poisson, 0.5, 1, 2, 2.0, &kernel).unwrap();
        let bv = estimate_mse(&s, Family::Poisson, 0.5, 1, 0, 4.0, &pilot, &kernel).unwrap();
        assert_eq!(bv.var_case_used, VarianceCase::A);
        assert_eq!(bv.mse, bv.bias * bv.bias + bv.variance);
        assert!(bv.variance > 0.0 && bv.mse >= bv.variance);
    }

    #[test]
    fn single_observation_is_infeasible() {
        let kernel = Kernel::von_mises();
        let s = CircularSample::new(vec![1.0], vec![2.0]).unwrap();
        let pilot = PilotFit {
            theta0: 1.0,
            p: 1,
            degree: 3,
            kappa_star: 1.0,
            beta_pilot: vec![2.0, 0.0, 0.0, 0.0],
            epsilon_hat: vec![0.0],
            score_variance: 1.0,
        };
        assert!(estimate_variance(&s, Family::Normal, 1.0, 1, 0, 2.0, &pilot, &kernel).is_err());
    }
}
