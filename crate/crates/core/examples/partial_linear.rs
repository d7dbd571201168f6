//! Gamma partially linear model `log E[Y] = 1 + 0.05 x + sin(theta)`.

use circfit::{backfit, Family, KappaSelector, Kernel, PartialLinearData, Selector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};

fn main() -> circfit::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let n = 1000;
    let mut ys = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    let mut thetas = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        let x = rng.random::<f64>() * 20.0;
        let mu = (1.0 + 0.05 * x + theta.sin()).exp();
        ys.push(Gamma::new(2.0, mu / 2.0).expect("valid shape").sample(&mut rng));
        xs.push(vec![x]);
        thetas.push(theta);
    }
    let data = PartialLinearData::with_linear(ys, xs, thetas)?;
    let fit = backfit(&data, Family::Gamma, 1, &Kernel::von_mises(), &KappaSelector::select(Selector::Refined))?;
    for ((name, a), se) in fit.coefficient_names.iter().zip(&fit.alpha).zip(&fit.alpha_se) {
        println!("{name:<10} {a:8.4}  (se {se:.4})");
    }
    println!("kappa {:.2}, {} iterations, converged: {}", fit.kappa, fit.iterations, fit.converged);
    for (t, r) in fit.rho_grid.iter().zip(&fit.rho).step_by(8) {
        println!("  rho({t:.3}) = {r:7.4}   sin = {:7.4}", t.sin());
    }
    Ok(())
}
