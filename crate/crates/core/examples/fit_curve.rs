//! Local linear fit of a Poisson regression curve at a fixed concentration.

use circfit::quadrature::circular_grid;
use circfit::{fit_curve, simulate_model, Family, Kernel, ModelId, ModelSpec};

fn main() -> circfit::Result<()> {
    let spec = ModelSpec::new(ModelId::P1);
    let sample = simulate_model(&spec, 250, 11)?;
    let grid = circular_grid(16);
    let curve = fit_curve(&sample, Family::Poisson, &grid, 1, 0, 20.0, &Kernel::von_mises())?;
    println!("{:>8} {:>10} {:>10}", "theta", "ghat", "g");
    for (t, g) in grid.iter().zip(&curve.values) {
        println!("{t:8.4} {g:10.4} {:10.4}", spec.g_true(*t));
    }
    Ok(())
}
