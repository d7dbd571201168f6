//! Asymptotically optimal concentration for model N1 at one angle and
//! integrated over the circle.

use std::f64::consts::{FRAC_PI_4, TAU};

use circfit::{optimal_kappa_global, optimal_kappa_reference, Kernel, ModelId, ModelSpec};

fn main() -> circfit::Result<()> {
    let spec = ModelSpec::new(ModelId::N1).with_nuisance(0.5)?;
    let kernel = Kernel::von_mises();
    let density = |_: f64| 1.0 / TAU;
    // g = (sin 3t + sin t) / 2, and the sin² coefficient is g''/2
    let beta2 = |t: f64| 0.25 * (-9.0 * (3.0 * t).sin() - t.sin());
    let sigma2 = |t: f64| spec.variance(t);
    for n in [100, 250, 500, 1000] {
        let local = optimal_kappa_reference(density, beta2, sigma2, n, 1, 0, &kernel, FRAC_PI_4)?;
        let global = optimal_kappa_global(density, beta2, sigma2, n, 1, 0, &kernel)?;
        println!("n = {n:5}: kappa_opt(pi/4) = {:8.2}, global = {:8.2}", local.kappa_opt, global.kappa_opt);
    }
    Ok(())
}
