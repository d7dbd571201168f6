//! Acceptance suite. Prints one PASS/FAIL line per criterion. Failures are
//! reported, not fatal, unless `ACCEPTANCE_STRICT=1` is set.
//!
//! `cargo test --test acceptance -- 3 4` runs a subset.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, TAU};
use std::io::Write;
use std::time::Instant;

use circfit::kernel::{moment_b, moment_b_quadrature, moment_d, moment_d_quadrature};
use circfit::quadrature::{circular_grid, periodic_simpson};
use circfit::sample::wrap_angle;
use circfit::sim::table_selectors;
use circfit::{
    backfit, confidence_band, crsc, ecrsc, estimate_mse, fisher_scoring_fit, moment_pack, monte_carlo,
    optimal_kappa_global, optimal_kappa_reference, pilot_fit, select_kappa, simulate_model,
    weighted_moments, wls_fit, xi_factor, CircularSample, Family, KappaGrid, KappaSelector, Kernel,
    ModelId, ModelSpec, MonteCarloOptions, PartialLinearData, SelectionOptions, Selector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;

type Check = Result<String, String>;

const SEED: u64 = 2024;
const REPLICATIONS: usize = 100;

/// Published mean ISE (B = 500) by model and sample size, in the column
/// order residual criterion, refined rule, cross-validation.
fn reference_ise(model: ModelId, n: usize) -> [f64; 3] {
    use ModelId::*;
    match (model, n) {
        (N1, 100) => [7.58e-2, 6.98e-2, 7.06e-2],
        (N1, 250) => [3.18e-2, 3.13e-2, 3.16e-2],
        (N1, 500) => [1.76e-2, 1.73e-2, 1.77e-2],
        (N2, 100) => [3.94e-2, 2.96e-2, 3.34e-2],
        (N2, 250) => [1.44e-2, 1.34e-2, 1.44e-2],
        (N2, 500) => [8.06e-3, 7.54e-3, 8.18e-3],
        (B1, 100) => [8.78e-2, 7.31e-2, 6.95e-2],
        (B1, 250) => [3.18e-2, 2.97e-2, 2.91e-2],
        (B1, 500) => [1.77e-2, 1.69e-2, 1.66e-2],
        (B2, 100) => [4.49e-2, 3.50e-2, 3.25e-2],
        (B2, 250) => [1.58e-2, 1.32e-2, 1.50e-2],
        (B2, 500) => [8.08e-3, 7.32e-3, 8.28e-3],
        (P1, 100) => [4.04e-3, 3.46e-3, 4.09e-3],
        (P1, 250) => [1.78e-3, 1.67e-3, 1.87e-3],
        (P1, 500) => [9.76e-4, 9.32e-4, 1.02e-3],
        (P2, 100) => [4.69e-4, 4.66e-4, 4.81e-4],
        (P2, 250) => [2.02e-4, 2.00e-4, 2.05e-4],
        (P2, 500) => [1.10e-4, 1.09e-4, 1.11e-4],
        (G1, 100) => [7.35e-2, 6.13e-2, 8.19e-2],
        (G1, 250) => [3.54e-2, 2.75e-2, 3.67e-2],
        (G1, 500) => [2.01e-2, 1.53e-2, 1.95e-2],
        (G2, 100) => [1.99e-2, 1.50e-2, 1.79e-2],
        (G2, 250) => [9.22e-3, 6.53e-3, 7.88e-3],
        (G2, 500) => [5.01e-3, 3.72e-3, 4.38e-3],
        _ => [f64::NAN; 3],
    }
}

fn vm() -> Kernel {
    Kernel::von_mises()
}

/// `β₂(θ) = g''(θ) / 2`, the sin² coefficient, by central differences.
fn beta2(g: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = 1e-3;
    (g(t + h) - 2.0 * g(t) + g(t - h)) / (2.0 * h * h)
}

/// Writes past the test harness so the lines show without `--nocapture`.
fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

// ---------------------------------------------------------------------------
// mean ISE table

type Table = BTreeMap<(ModelId, usize), [f64; 3]>;

fn ise_table(ns: &[usize], extra: &[(ModelId, usize)]) -> Result<Table, String> {
    let options = MonteCarloOptions::default();
    let mut cells: Vec<(ModelId, usize)> = Vec::new();
    for &n in ns {
        cells.extend(ModelId::ALL.iter().map(|&m| (m, n)));
    }
    cells.extend(extra.iter().filter(|c| !cells.contains(c)).copied().collect::<Vec<_>>());
    let mut table = Table::new();
    for (model, n) in cells {
        let spec = ModelSpec::new(model);
        let selectors = table_selectors(spec.family);
        let start = Instant::now();
        let report = monte_carlo(&spec, n, REPLICATIONS, &selectors, SEED, &options)
            .map_err(|e| format!("{model} n={n}: {e}"))?;
        let means = selectors.map(|s| report.mean_ise(s).unwrap_or(f64::NAN));
        say(&format!(
            "    {model} n={n:<3}  {:.3e} {:.3e} {:.3e}   ({} failed replications, {:.0?})",
            means[0],
            means[1],
            means[2],
            report.failures.len(),
            start.elapsed()
        ));
        table.insert((model, n), means);
    }
    Ok(table)
}

fn criterion_1(table: &Table) -> Check {
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    for ((model, n), got) in table {
        if *n == 500 && *model != ModelId::P2 {
            continue;
        }
        let want = reference_ise(*model, *n);
        let columns: Vec<usize> = if *n == 500 { vec![1] } else { vec![0, 1, 2] };
        for c in columns {
            let rel = got[c] / want[c] - 1.0;
            cells += 1;
            worst = worst.max(rel.abs());
            if !(rel.abs() <= 0.30) {
                let sel = table_selectors(model.family())[c];
                bad.push(format!("{model}/n={n}/{sel} {:.3e} vs {:.3e} ({:+.0}%)", got[c], want[c], 100.0 * rel));
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("{cells} cells within 30%, worst {:.0}%", 100.0 * worst))
    } else {
        Err(format!("{} of {cells} cells outside 30%: {}", bad.len(), bad.join("; ")))
    }
}

fn criterion_2(table: &Table) -> Check {
    let mut bad = Vec::new();
    for model in ModelId::ALL {
        let sels = table_selectors(model.family());
        for (c, sel) in sels.iter().enumerate() {
            let v: Vec<f64> = [100, 250, 500].iter().map(|&n| table[&(model, n)][c]).collect();
            if !(v[0] > v[1] && v[1] > v[2]) {
                bad.push(format!("{model}/{sel} not decreasing: {:.3e} {:.3e} {:.3e}", v[0], v[1], v[2]));
            }
        }
        if model.family() == Family::Gamma {
            for n in [100, 250, 500] {
                let row = table[&(model, n)];
                if !(row[1] <= row[0]) {
                    bad.push(format!("{model}/n={n}: refined {:.3e} > ecrsc {:.3e}", row[1], row[0]));
                }
            }
        }
    }
    if bad.is_empty() {
        Ok("24 decreasing sequences, refined <= ecrsc in 6 gamma cells".into())
    } else {
        Err(bad.join("; "))
    }
}

// ---------------------------------------------------------------------------
// residual criterion expectation

fn criterion_3() -> Check {
    let (n, p, sigma, amplitude) = (10_000usize, 1usize, 0.1, 3.0);
    let theta0 = 0.0;
    // g = A cos θ has sin² coefficient −A/2 at θ0 = 0
    let beta = -amplitude / 2.0;
    let m = moment_pack(p, &vm()).map_err(|e| e.to_string())?;
    let f = 1.0 / TAU;
    let mut notes = Vec::new();
    let mut ok = true;
    for kappa in [50.0, 100.0, 200.0] {
        let values: Vec<f64> = (0..50u64)
            .into_par_iter()
            .map(|seed| {
                let mut rng = ChaCha20Rng::seed_from_u64(7_000 + seed);
                let noise = Normal::new(0.0, sigma).unwrap();
                let angles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
                let ys = angles.iter().map(|t| amplitude * t.cos() + noise.sample(&mut rng)).collect();
                let s = CircularSample::new(angles, ys).unwrap();
                crsc(&s, theta0, p, kappa, &vm()).unwrap()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let q = (p + 1) as f64;
        let expected = sigma * sigma
            + m.c_const * beta * beta * 2f64.powf(q) * kappa.powf(-q)
            + q * sigma * sigma * m.a0() * kappa.sqrt() / (2f64.sqrt() * n as f64 * f);
        let rel = mean / expected - 1.0;
        ok &= rel.abs() < 0.10;
        notes.push(format!("kappa {kappa}: {mean:.5e} vs {expected:.5e} ({:+.1}%)", 100.0 * rel));
    }
    if ok {
        Ok(notes.join("; "))
    } else {
        Err(notes.join("; "))
    }
}

// ---------------------------------------------------------------------------
// weighted moment asymptotics

fn criterion_4() -> Check {
    let (n, kappa, theta0) = (100_000usize, 400.0, 1.0);
    let f = 1.0 / TAU;
    let sums: Vec<[f64; 6]> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha20Rng::seed_from_u64(9_000 + seed);
            let angles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
            let s = CircularSample::new(angles, vec![0.0; n]).unwrap();
            let mut out = [0.0; 6];
            for (k, j) in [0u32, 2, 4].into_iter().enumerate() {
                let jf = j as f64;
                let sn = weighted_moments(&s, theta0, kappa, j, 1, &vm(), None).unwrap();
                let gn = weighted_moments(&s, theta0, kappa, j, 2, &vm(), None).unwrap();
                out[k] = sn / (n as f64 * f * 2f64.powf(jf / 2.0) * kappa.powf(-jf / 2.0));
                out[3 + k] = gn / (n as f64 * f * 2f64.powf((jf - 1.0) / 2.0) * kappa.powf(-(jf - 1.0) / 2.0));
            }
            out
        })
        .collect();
    let mut notes = Vec::new();
    let mut ok = true;
    for (k, j) in [0usize, 2, 4].into_iter().enumerate() {
        let s_ratio = sums.iter().map(|r| r[k]).sum::<f64>() / sums.len() as f64;
        let g_ratio = sums.iter().map(|r| r[3 + k]).sum::<f64>() / sums.len() as f64;
        let (b, d) = (moment_b(j, &vm()).unwrap(), moment_d(j, &vm()).unwrap());
        let (eb, ed) = (s_ratio / b - 1.0, g_ratio / d - 1.0);
        ok &= eb.abs() < 0.05 && ed.abs() < 0.05;
        notes.push(format!("j={j}: s {:+.2}% gamma {:+.2}%", 100.0 * eb, 100.0 * ed));
    }
    if ok {
        Ok(notes.join("; "))
    } else {
        Err(notes.join("; "))
    }
}

// ---------------------------------------------------------------------------
// asymptotic optimum against brute force

fn criterion_5() -> Check {
    let spec = ModelSpec::new(ModelId::N1).with_nuisance(0.5).map_err(|e| e.to_string())?;
    let (n, theta0) = (500usize, FRAC_PI_4);
    let g = |t: f64| spec.g_true(t);
    let reference = optimal_kappa_reference(
        |_| 1.0 / TAU,
        |t| beta2(g, t),
        |t| spec.variance(t),
        n,
        1,
        0,
        &vm(),
        theta0,
    )
    .map_err(|e| e.to_string())?
    .kappa_opt;
    let grid = KappaGrid::default();
    let errors: Vec<Vec<f64>> = (0..200u64)
        .into_par_iter()
        .map(|r| {
            let s = circfit::sim::simulate_with(&spec, n, &mut ChaCha20Rng::seed_from_u64(50_000 + r)).unwrap();
            grid.values()
                .iter()
                .map(|&k| match wls_fit(&s, theta0, 1, k, &vm()) {
                    Ok(fit) => (fit.beta[0] - g(theta0)).powi(2),
                    Err(_) => f64::INFINITY,
                })
                .collect()
        })
        .collect();
    let mse: Vec<f64> = (0..grid.len())
        .map(|k| errors.iter().map(|e| e[k]).sum::<f64>() / errors.len() as f64)
        .collect();
    let best = (0..mse.len()).min_by(|&a, &b| mse[a].total_cmp(&mse[b])).unwrap();
    let brute = grid.values()[best];
    let ratio = reference / brute;
    let note = format!("reference {reference:.2}, brute force {brute:.2} (ratio {ratio:.3})");
    if (0.5..=2.0).contains(&ratio) {
        Ok(note)
    } else {
        Err(note)
    }
}

// ---------------------------------------------------------------------------
// exact constants

fn criterion_6() -> Check {
    let k = vm();
    let xi = xi_factor(1, 0, &k).map_err(|e| e.to_string())?;
    let mut worst_moment: f64 = 0.0;
    for j in 0..=8 {
        worst_moment = worst_moment
            .max((moment_b(j, &k).unwrap() - moment_b_quadrature(j, &k).unwrap()).abs())
            .max((moment_d(j, &k).unwrap() - moment_d_quadrature(j, &k).unwrap()).abs());
    }
    let nodes = circular_grid(4096);
    let mut worst_norm: f64 = 0.0;
    for kappa in [0.5, 1.0, 5.0, 50.0, 500.0] {
        let sk = k.at(kappa).unwrap();
        let values: Vec<f64> = nodes.iter().map(|&t| sk.eval(t)).collect();
        worst_norm = worst_norm.max((periodic_simpson(&values) - 1.0).abs());
    }
    let note = format!(
        "|xi - 1| = {:.1e}, moments {worst_moment:.1e}, normalisation {worst_norm:.1e}",
        (xi - 1.0).abs()
    );
    if (xi - 1.0).abs() < 1e-12 && worst_moment < 1e-9 && worst_norm < 1e-8 {
        Ok(note)
    } else {
        Err(note)
    }
}

// ---------------------------------------------------------------------------
// structural invariants

fn random_sample(seed: u64, n: usize, family: Family) -> CircularSample {
    let spec = ModelSpec::new(match family {
        Family::Normal => ModelId::N2,
        Family::Bernoulli => ModelId::B2,
        Family::Poisson => ModelId::P1,
        Family::Gamma => ModelId::G2,
    });
    simulate_model(&spec, n, seed).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(1.0))
}

fn criterion_7() -> Check {
    let families = [Family::Normal, Family::Bernoulli, Family::Poisson, Family::Gamma];
    let mut failures = Vec::new();
    let mut checks = 0;
    for seed in 0..10u64 {
        let theta0 = 0.6 * seed as f64;
        let delta = 1.0 + 0.37 * seed as f64;
        for family in families {
            let s = random_sample(seed, 120, family);
            let rotated = CircularSample::new(
                s.angles().iter().map(|a| wrap_angle(a + delta)).collect(),
                s.responses().to_vec(),
            )
            .unwrap();
            let a = fisher_scoring_fit(&s, family, theta0, 1, 3.0, &vm(), None).unwrap();
            let b = fisher_scoring_fit(&rotated, family, theta0 + delta, 1, 3.0, &vm(), None).unwrap();
            checks += 1;
            if !close(&a.beta, &b.beta, 1e-10) {
                failures.push(format!("rotation {family} seed {seed}"));
            }
        }
        let s = random_sample(seed, 120, Family::Normal);
        let reflected = CircularSample::new(
            s.angles().iter().map(|a| wrap_angle(2.0 * theta0 - a)).collect(),
            s.responses().to_vec(),
        )
        .unwrap();
        let a = wls_fit(&s, theta0, 3, 5.0, &vm()).unwrap();
        let b = wls_fit(&reflected, theta0, 3, 5.0, &vm()).unwrap();
        let flipped: Vec<f64> = b.beta.iter().enumerate().map(|(j, v)| if j % 2 == 1 { -v } else { *v }).collect();
        checks += 1;
        if !close(&a.beta, &flipped, 1e-10) {
            failures.push(format!("reflection seed {seed}"));
        }
        for p in 0..=3 {
            let w = wls_fit(&s, theta0, p, 8.0, &vm()).unwrap();
            let f = fisher_scoring_fit(&s, Family::Normal, theta0, p, 8.0, &vm(), None).unwrap();
            checks += 1;
            if !close(&w.beta, &f.beta, 1e-8) {
                failures.push(format!("wls/scoring p={p} seed {seed}"));
            }
        }
        for kappa in [1.0, 10.0, 100.0] {
            let c = crsc(&s, theta0, 1, kappa, &vm()).unwrap();
            let e = ecrsc(&s, Family::Normal, theta0, 1, kappa, &vm()).unwrap();
            checks += 1;
            if (c - e).abs() > 1e-10 * c.abs().max(1.0) {
                failures.push(format!("ecrsc/crsc kappa {kappa} seed {seed}"));
            }
        }
        for family in families {
            let s = random_sample(100 + seed, 150, family);
            let Ok(mut pilot) = pilot_fit(&s, family, theta0, 1, 2, 4.0, &vm()) else {
                continue;
            };
            let Ok(bv) = estimate_mse(&s, family, theta0, 1, 0, 6.0, &pilot, &vm()) else {
                continue;
            };
            checks += 2;
            if bv.mse != bv.bias * bv.bias + bv.variance {
                failures.push(format!("mse composition {family} seed {seed}"));
            }
            pilot.beta_pilot.iter_mut().skip(2).for_each(|b| *b = 0.0);
            pilot.epsilon_hat.iter_mut().for_each(|e| *e = 0.0);
            let zero = estimate_mse(&s, family, theta0, 1, 0, 6.0, &pilot, &vm()).unwrap();
            if zero.bias != 0.0 {
                failures.push(format!("zero-tail bias {family} seed {seed}: {}", zero.bias));
            }
        }
    }
    // determinism under different thread counts
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let s = random_sample(3, 150, Family::Poisson);
                let sel: Vec<Vec<u64>> = Selector::ALL
                    .iter()
                    .map(|&k| {
                        let r = select_kappa(k, &s, Family::Poisson, 1, 0, &vm(), &KappaGrid::default(), &SelectionOptions::default())
                            .unwrap();
                        r.objective.iter().map(|v| v.to_bits()).chain([r.kappa_hat.to_bits()]).collect()
                    })
                    .collect();
                let report = monte_carlo(
                    &ModelSpec::new(ModelId::G2),
                    80,
                    6,
                    &table_selectors(Family::Gamma),
                    5,
                    &MonteCarloOptions::default(),
                )
                .unwrap();
                (sel, circfit::to_json(&report).unwrap())
            })
    };
    let reference = run(1);
    for threads in [2, 4] {
        checks += 1;
        if run(threads) != reference {
            failures.push(format!("results differ with {threads} threads"));
        }
    }
    if failures.is_empty() {
        Ok(format!("{checks} checks"))
    } else {
        Err(format!("{} of {checks} failed: {}", failures.len(), failures.join("; ")))
    }
}

// ---------------------------------------------------------------------------
// band coverage

fn criterion_8() -> Check {
    let spec = ModelSpec::new(ModelId::N2);
    let n = 250;
    let g = |t: f64| spec.g_true(t);
    let kappa = optimal_kappa_global(|_| 1.0 / TAU, |t| beta2(g, t), |t| spec.variance(t), n, 1, 0, &vm())
        .map_err(|e| e.to_string())?
        .kappa_opt;
    let grid = circular_grid(64);
    let angles: Vec<usize> = (0..8).map(|k| 8 * k).collect();
    let hits: Vec<Vec<bool>> = (0..200u64)
        .into_par_iter()
        .map(|r| {
            let s = circfit::sim::simulate_with(&spec, n, &mut ChaCha20Rng::seed_from_u64(80_000 + r)).unwrap();
            let band = confidence_band(&s, spec.family, &grid, 1, 0, kappa, 0.95, &vm()).unwrap();
            angles.iter().map(|&i| band.covers(i, g(grid[i]))).collect()
        })
        .collect();
    let coverage: Vec<f64> = (0..angles.len())
        .map(|k| hits.iter().filter(|h| h[k]).count() as f64 / hits.len() as f64)
        .collect();
    let note = format!(
        "kappa {kappa:.2}; coverage {}",
        coverage.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>().join(" ")
    );
    if coverage.iter().all(|c| (0.88..=0.99).contains(c)) {
        Ok(note)
    } else {
        Err(note)
    }
}

// ---------------------------------------------------------------------------
// partially linear recovery

fn criterion_9() -> Check {
    let n = 1000;
    let fits: Vec<(f64, f64, f64)> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha20Rng::seed_from_u64(90_000 + seed);
            let (mut ys, mut xs, mut thetas) = (Vec::new(), Vec::new(), Vec::new());
            for _ in 0..n {
                let theta = rng.random::<f64>() * TAU;
                let x = rng.random::<f64>() * 20.0;
                let mu = (1.0 + 0.05 * x + theta.sin()).exp();
                ys.push(Gamma::new(2.0, mu / 2.0).unwrap().sample(&mut rng));
                xs.push(vec![x]);
                thetas.push(theta);
            }
            let data = PartialLinearData::with_linear(ys, xs, thetas).unwrap();
            let fit = backfit(&data, Family::Gamma, 1, &vm(), &KappaSelector::select(Selector::Refined)).unwrap();
            let truth: Vec<f64> = fit.rho_grid.iter().map(|t| t.sin()).collect();
            (fit.alpha[1], correlation(&fit.rho, &truth), fit.kappa)
        })
        .collect();
    let alphas: Vec<f64> = fits.iter().map(|f| f.0).collect();
    let mean = alphas.iter().sum::<f64>() / alphas.len() as f64;
    let sd = (alphas.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (alphas.len() - 1) as f64).sqrt();
    let se = sd / (alphas.len() as f64).sqrt();
    let min_corr = fits.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    let kappas: Vec<String> = fits.iter().map(|f| format!("{:.1}", f.2)).collect();
    let note = format!(
        "alpha1 {mean:.5} (MC se {se:.5}), min correlation {min_corr:.4}, kappa {}",
        kappas.join(" ")
    );
    if (mean - 0.05).abs() <= 3.0 * se && min_corr > 0.95 {
        Ok(note)
    } else {
        Err(note)
    }
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

// ---------------------------------------------------------------------------

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let mut outcomes: Vec<(usize, &str, Check, f64)> = Vec::new();

    if run(1) || run(2) {
        let start = Instant::now();
        say("building mean ISE table (B = 100)");
        let ns: &[usize] = if run(2) { &[100, 250, 500] } else { &[100, 250] };
        let table = ise_table(ns, &[(ModelId::P2, 500)]);
        let secs = start.elapsed().as_secs_f64();
        if run(1) {
            let check = table.as_ref().map_err(Clone::clone).and_then(criterion_1);
            outcomes.push((1, "mean ISE within 30% of reference", check, secs));
        }
        if run(2) {
            let check = table.as_ref().map_err(Clone::clone).and_then(criterion_2);
            outcomes.push((2, "mean ISE trends", check, 0.0));
        }
    }
    let rest: [(usize, &str, fn() -> Check); 7] = [
        (3, "expected residual criterion", criterion_3),
        (4, "weighted moment asymptotics", criterion_4),
        (5, "optimal concentration vs brute force", criterion_5),
        (6, "exact kernel constants", criterion_6),
        (7, "structural invariants", criterion_7),
        (8, "band coverage", criterion_8),
        (9, "partially linear recovery", criterion_9),
    ];
    for (k, name, f) in rest {
        if run(k) {
            let start = Instant::now();
            let check = f();
            outcomes.push((k, name, check, start.elapsed().as_secs_f64()));
        }
    }

    outcomes.sort_by_key(|o| o.0);
    let mut failed = 0;
    for (k, name, check, secs) in &outcomes {
        let (status, detail) = match check {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        say(&format!("criterion {k} [{status}] {name} ({secs:.1}s): {detail}"));
    }
    if failed > 0 {
        say(&format!("{failed} of {} criteria failed", outcomes.len()));
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
