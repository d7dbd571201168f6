//! Special functions: modified Bessel functions of the first kind and the
//! standard normal quantile.

use statrs::distribution::{ContinuousCDF, Normal};

const SERIES_ASYMPTOTIC_SPLIT: f64 = 15.0;

/// Natural log of the modified Bessel function `I_0(x)` for `x >= 0`.
///
/// Power series below 15, large-argument asymptotic expansion above.
pub fn ln_bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_ASYMPTOTIC_SPLIT {
        bessel_series(0, x).ln()
    } else {
        x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + asymptotic_sum(0.0, x).ln()
    }
}

/// Natural log of `I_1(x)` for `x > 0`.
pub fn ln_bessel_i1(x: f64) -> f64 {
    if x < SERIES_ASYMPTOTIC_SPLIT {
        bessel_series(1, x).ln()
    } else {
        x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + asymptotic_sum(4.0, x).ln()
    }
}

/// `I_1(x) / I_0(x)`, the mean resultant length of a von Mises law.
pub fn bessel_ratio_i1_i0(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    (ln_bessel_i1(x) - ln_bessel_i0(x)).exp()
}

// sum_k (x/2)^(2k+order) / (k! (k+order)!)
fn bessel_series(order: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = (0.5 * x).powi(order as i32);
    for k in 1..=order {
        term /= k as f64;
    }
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + order as f64));
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

// 1 - (mu-1)/(8x) + (mu-1)(mu-9)/(2!(8x)^2) - ... with mu = 4 order^2,
// truncated at the smallest term.
fn asymptotic_sum(mu: f64, x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term: f64 = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (mu - odd * odd) / (kf * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Standard normal quantile `Phi^{-1}(prob)` for `0 < prob < 1`.
pub fn normal_quantile(prob: f64) -> f64 {
    Normal::standard().inverse_cdf(prob)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i0_reference(x: f64) -> f64 {
        // plain power series, valid for moderate x
        let mut s = 0.0;
        let mut t = 1.0;
        for k in 0..200 {
            if k > 0 {
                t *= (x / 2.0).powi(2) / ((k * k) as f64);
            }
            s += t;
        }
        s
    }

    #[test]
    fn i0_matches_series_across_split() {
        for &x in &[0.0, 0.1, 1.0, 2.0, 7.5, 14.9, 15.0, 15.1, 20.0, 40.0, 80.0] {
            let got = ln_bessel_i0(x);
            let want = i0_reference(x).ln();
            assert!(
                (got - want).abs() < 1e-12 * want.abs().max(1.0),
                "x = {x}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn i0_large_argument_is_finite() {
        let v = ln_bessel_i0(5000.0);
        assert!(v.is_finite());
        assert!((v - (5000.0 - 0.5 * (2.0 * std::f64::consts::PI * 5000.0).ln())).abs() < 1e-4);
    }

    #[test]
    fn bessel_ratio_known_values() {
        // I1(1)/I0(1) = 0.4463899658...
        assert!((bessel_ratio_i1_i0(1.0) - 0.446_389_965_896_534_7).abs() < 1e-12);
        let series = {
            let mut i1 = 0.0;
            let mut t = 10.0;
            for k in 0..200 {
                if k > 0 {
                    t *= 100.0 / ((k * (k + 1)) as f64);
                }
                i1 += t;
            }
            i1 / i0_reference(20.0)
        };
        assert!((bessel_ratio_i1_i0(20.0) - series).abs() < 1e-12);
    }

    #[test]
    fn normal_quantile_95() {
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((normal_quantile(0.5)).abs() < 1e-12);
    }
}
