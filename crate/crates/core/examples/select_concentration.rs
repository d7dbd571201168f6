//! Runs every concentration selector on one simulated sample.

use circfit::{select_kappa, simulate_model, KappaGrid, Kernel, ModelId, ModelSpec, SelectionOptions, Selector};

fn main() -> circfit::Result<()> {
    let spec = ModelSpec::new(ModelId::N2);
    let sample = simulate_model(&spec, 250, 5)?;
    let grid = KappaGrid::default();
    for selector in Selector::ALL {
        let r = select_kappa(
            selector,
            &sample,
            spec.family,
            1,
            0,
            &Kernel::von_mises(),
            &grid,
            &SelectionOptions::default(),
        )?;
        let pilot = r.pilot_kappa.map(|k| format!(" (pilot {k:.2})")).unwrap_or_default();
        println!("{selector:<8} kappa = {:8.3}{pilot}", r.kappa_hat);
    }
    Ok(())
}
