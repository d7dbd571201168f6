//! Bias-corrected 95% pointwise band for a normal regression curve.

use circfit::quadrature::circular_grid;
use circfit::{confidence_band, simulate_model, Kernel, ModelId, ModelSpec};

fn main() -> circfit::Result<()> {
    let spec = ModelSpec::new(ModelId::N2);
    let sample = simulate_model(&spec, 250, 3)?;
    let grid = circular_grid(16);
    let band = confidence_band(&sample, spec.family, &grid, 1, 0, 8.0, 0.95, &Kernel::von_mises())?;
    println!("pilot kappa {:.2}, z = {:.4}", band.pilot_kappa, band.z);
    let mut covered = 0;
    for (i, t) in grid.iter().enumerate() {
        let truth = spec.g_true(*t);
        covered += usize::from(band.covers(i, truth));
        println!(
            "{t:7.3}  [{:8.4}, {:8.4}]  g = {truth:8.4}",
            band.lower[i], band.upper[i]
        );
    }
    println!("{covered} of {} angles covered", grid.len());
    Ok(())
}
