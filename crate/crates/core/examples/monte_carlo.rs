//! Small Monte Carlo comparison of the three selectors on one model.
//!
//! `cargo run --release --example monte_carlo -- [MODEL] [N] [B]`

use circfit::sim::table_selectors;
use circfit::{monte_carlo, ModelId, ModelSpec, MonteCarloOptions};

fn main() -> circfit::Result<()> {
    let mut args = std::env::args().skip(1);
    let model: ModelId = args.next().as_deref().unwrap_or("N1").parse()?;
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let b: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);

    let spec = ModelSpec::new(model);
    let selectors = table_selectors(spec.family);
    let start = std::time::Instant::now();
    let report = monte_carlo(&spec, n, b, &selectors, 2024, &MonteCarloOptions::default())?;
    println!("model {model}, n = {n}, B = {b} ({:.1?})", start.elapsed());
    for (sel, summary) in &report.selectors {
        let mut kappas = summary.kappas.clone();
        kappas.sort_by(f64::total_cmp);
        println!(
            "  {sel:<8} mean ISE {:.3e}   median kappa {:.2}",
            summary.mean_ise,
            kappas[kappas.len() / 2]
        );
    }
    if !report.failures.is_empty() {
        println!("  {} failed replications", report.failures.len());
    }
    Ok(())
}
