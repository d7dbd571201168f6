//! Response families: per-observation log-likelihood in the target `g`,
//! its derivatives, link functions and the score-variance classification.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CircError, Result};

/// Response family. The target `g` is the link of the conditional mean:
/// identity (normal), logit (Bernoulli), log (Poisson, gamma).
///
/// Constants that do not depend on `g` are dropped from the log-likelihood:
/// the normal family uses `−(y − g)²/2` (σ² is profiled out), Poisson drops
/// `log y!`, and gamma uses the quasi-likelihood `−y e^{−g} − g`, whose score
/// root in `g` coincides with the full likelihood for any shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Bernoulli,
    Poisson,
    Gamma,
}

/// How `Var[l'(g(θ0), Y) | Θ = θ0]` is obtained for sandwich variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreVariance {
    /// Known function of `g` evaluated at the fitted value.
    Known(f64),
    /// No closed form; estimate from a pilot fit.
    Pilot,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Normal,
        Family::Bernoulli,
        Family::Poisson,
        Family::Gamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Bernoulli => "bernoulli",
            Family::Poisson => "poisson",
            Family::Gamma => "gamma",
        }
    }

    /// Checks that `y` lies in the support of the family.
    pub fn check_response(self, y: f64) -> std::result::Result<(), String> {
        if !y.is_finite() {
            return Err(format!("response {y} is not finite"));
        }
        match self {
            Family::Normal => Ok(()),
            Family::Bernoulli if y == 0.0 || y == 1.0 => Ok(()),
            Family::Bernoulli => Err(format!("bernoulli response must be 0 or 1, got {y}")),
            Family::Poisson if y >= 0.0 && y.fract() == 0.0 => Ok(()),
            Family::Poisson => Err(format!(
                "poisson response must be a nonnegative integer, got {y}"
            )),
            Family::Gamma if y > 0.0 => Ok(()),
            Family::Gamma => Err(format!("gamma response must be positive, got {y}")),
        }
    }

    pub fn loglik(self, g: f64, y: f64) -> f64 {
        match self {
            Family::Normal => -0.5 * (y - g) * (y - g),
            Family::Bernoulli => y * g - softplus(g),
            Family::Poisson => y * g - g.exp(),
            Family::Gamma => -y * (-g).exp() - g,
        }
    }

    /// Checked variant of [`Family::loglik`].
    pub fn try_loglik(self, g: f64, y: f64) -> Result<f64> {
        self.check_response(y)
            .map_err(|reason| CircError::InvalidResponse { row: 0, reason })?;
        Ok(self.loglik(g, y))
    }

    /// `(l'(g, y), l''(g, y))`.
    #[inline]
    pub fn score_curvature(self, g: f64, y: f64) -> (f64, f64) {
        match self {
            Family::Normal => (y - g, -1.0),
            Family::Bernoulli => {
                let p = logistic(g);
                (y - p, -p * (1.0 - p))
            }
            Family::Poisson => {
                let m = g.exp();
                (y - m, -m)
            }
            Family::Gamma => {
                let r = y * (-g).exp();
                (r - 1.0, -r)
            }
        }
    }

    #[inline]
    pub fn score(self, g: f64, y: f64) -> f64 {
        self.score_curvature(g, y).0
    }

    /// `E[l''(g, Y)]` when `g` is the true target value.
    #[inline]
    pub fn expected_curvature(self, g: f64) -> f64 {
        match self {
            Family::Normal | Family::Gamma => -1.0,
            Family::Bernoulli => {
                let p = logistic(g);
                -p * (1.0 - p)
            }
            Family::Poisson => -g.exp(),
        }
    }

    /// `T(μ)`.
    pub fn link(self, mean: f64) -> f64 {
        match self {
            Family::Normal => mean,
            Family::Bernoulli => (mean / (1.0 - mean)).ln(),
            Family::Poisson | Family::Gamma => mean.ln(),
        }
    }

    /// `T⁻¹(g)`.
    pub fn inverse_link(self, g: f64) -> f64 {
        match self {
            Family::Normal => g,
            Family::Bernoulli => logistic(g),
            Family::Poisson | Family::Gamma => g.exp(),
        }
    }

    /// `T'(μ)`.
    pub fn link_derivative(self, mean: f64) -> f64 {
        match self {
            Family::Normal => 1.0,
            Family::Bernoulli => 1.0 / (mean * (1.0 - mean)),
            Family::Poisson | Family::Gamma => 1.0 / mean,
        }
    }

    /// Link of a (weighted) mean response, clamped to keep the start finite.
    pub(crate) fn link_clamped(self, mean: f64) -> f64 {
        match self {
            Family::Normal => mean,
            Family::Bernoulli => self.link(mean.clamp(1e-3, 1.0 - 1e-3)),
            Family::Poisson | Family::Gamma => self.link(mean.max(1e-3)),
        }
    }

    /// `Var[l'(g, Y)]` for families where it is a known function of `g`.
    pub fn variance_function(self, g: f64) -> ScoreVariance {
        match self {
            Family::Bernoulli => {
                let p = logistic(g);
                ScoreVariance::Known(p * (1.0 - p))
            }
            Family::Poisson => ScoreVariance::Known(g.exp()),
            Family::Normal | Family::Gamma => ScoreVariance::Pilot,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Family {
    type Err = CircError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(Family::Normal),
            "bernoulli" | "binomial" | "logistic" => Ok(Family::Bernoulli),
            "poisson" => Ok(Family::Poisson),
            "gamma" => Ok(Family::Gamma),
            other => Err(CircError::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}

#[inline]
pub(crate) fn logistic(g: f64) -> f64 {
    if g >= 0.0 {
        1.0 / (1.0 + (-g).exp())
    } else {
        let e = g.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(g: f64) -> f64 {
    if g > 0.0 {
        g + (-g).exp().ln_1p()
    } else {
        g.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma as GammaDist, Normal, Poisson};

    #[test]
    fn loglik_examples() {
        assert!((Family::Bernoulli.loglik(0.0, 1.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(Family::Poisson.loglik(0.0, 0.0), -1.0);
        let y = 1.3;
        let best = Family::Normal.loglik(y, y);
        for d in [-0.5, -1e-3, 1e-3, 0.5] {
            assert!(Family::Normal.loglik(y + d, y) < best);
        }
        assert!(Family::Gamma.try_loglik(0.0, -1.0).is_err());
    }

    #[test]
    fn score_curvature_examples() {
        assert_eq!(Family::Poisson.score_curvature(0.0, 3.0), (2.0, -1.0));
        assert_eq!(Family::Bernoulli.score_curvature(0.0, 0.0), (-0.5, -0.25));
        assert_eq!(Family::Normal.score_curvature(1.5, 2.0), (0.5, -1.0));
    }

    #[test]
    fn variance_function_examples() {
        assert_eq!(Family::Poisson.variance_function(0.0), ScoreVariance::Known(1.0));
        assert_eq!(Family::Bernoulli.variance_function(0.0), ScoreVariance::Known(0.25));
        assert_eq!(Family::Gamma.variance_function(1.7), ScoreVariance::Pilot);
        assert_eq!(Family::Normal.variance_function(0.0), ScoreVariance::Pilot);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let grid_g = [-2.0, -0.3, 0.0, 0.8, 2.5];
        for fam in Family::ALL {
            let ys: &[f64] = match fam {
                Family::Normal => &[-1.0, 0.0, 2.2],
                Family::Bernoulli => &[0.0, 1.0],
                Family::Poisson => &[0.0, 1.0, 7.0],
                Family::Gamma => &[0.2, 1.0, 5.0],
            };
            for &g in &grid_g {
                for &y in ys {
                    let h = 1e-5;
                    let fd1 = (fam.loglik(g + h, y) - fam.loglik(g - h, y)) / (2.0 * h);
                    let fd2 = (fam.loglik(g + h, y) - 2.0 * fam.loglik(g, y)
                        + fam.loglik(g - h, y))
                        / (h * h);
                    let (d1, d2) = fam.score_curvature(g, y);
                    assert!((d1 - fd1).abs() <= 1e-6 * d1.abs().max(1.0), "{fam} l' at {g},{y}");
                    assert!((d2 - fd2).abs() <= 1e-4 * d2.abs().max(1.0), "{fam} l'' at {g},{y}");
                    assert!(d2 < 0.0);
                }
            }
        }
    }

    #[test]
    fn unweighted_argmax_is_link_of_mean() {
        let samples: [(Family, Vec<f64>); 4] = [
            (Family::Normal, vec![0.3, -1.2, 2.0, 0.7]),
            (Family::Bernoulli, vec![0.0, 1.0, 1.0, 0.0, 1.0]),
            (Family::Poisson, vec![0.0, 3.0, 2.0, 5.0]),
            (Family::Gamma, vec![0.5, 1.5, 2.25, 4.0]),
        ];
        for (fam, ys) in samples {
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            // golden-section search maximising -|Σ l'(g, y_i)|, whose optimum
            // value 0 keeps full relative precision near the root
            let objective = |g: f64| -ys.iter().map(|&y| fam.score(g, y)).sum::<f64>().abs();
            let (mut a, mut b) = (-10.0, 10.0);
            let phi = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let c = b - phi * (b - a);
                let d = a + phi * (b - a);
                if objective(c) > objective(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let g_star = 0.5 * (a + b);
            assert!((g_star - fam.link(mean)).abs() < 1e-8, "{fam}: {g_star}");
        }
    }

    #[test]
    fn score_has_zero_mean_under_the_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        for fam in Family::ALL {
            let g: f64 = 0.4;
            let mu = fam.inverse_link(g);
            let scores: Vec<f64> = (0..draws)
                .map(|_| {
                    let y = match fam {
                        Family::Normal => Normal::new(mu, 0.7).unwrap().sample(&mut rng),
                        Family::Bernoulli => f64::from(u8::from(rng.random::<f64>() < mu)),
                        Family::Poisson => Poisson::new(mu).unwrap().sample(&mut rng),
                        Family::Gamma => GammaDist::new(2.0, mu / 2.0).unwrap().sample(&mut rng),
                    };
                    fam.score(g, y)
                })
                .collect();
            let m = scores.iter().sum::<f64>() / draws as f64;
            let var = scores.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
            let se = (var / draws as f64).sqrt();
            assert!(m.abs() < 4.0 * se, "{fam}: mean score {m}, se {se}");
            if let ScoreVariance::Known(v) = fam.variance_function(g) {
                // sample variance of the score within 3 standard errors of v
                let fourth = scores.iter().map(|s| (s - m).powi(4)).sum::<f64>() / draws as f64;
                let se_var = ((fourth - var * var) / draws as f64).sqrt();
                assert!((var - v).abs() < 3.0 * se_var, "{fam}: var {var} vs {v}");
            }
        }
    }
}
