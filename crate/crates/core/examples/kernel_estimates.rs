//! Sweep the Dirichlet heat kernel bounds and print the rate-scaled
//! constants for each inequality.

use stefan_spde::heat_kernel::{verify_all, EstimateConfig, HeatKernel};

fn main() -> stefan_spde::Result<()> {
    let kernel = HeatKernel::default();
    for t in [1e-3, 1e-2, 1e-1, 1.0] {
        println!("G({t:e}, 0.3, 0.5) = {:.6e}", kernel.g(t, 0.3, 0.5)?);
    }
    let reports = verify_all(&EstimateConfig::default())?;
    println!("{:<18} {:>14} {:>10} {:>8} {:>7}", "inequality", "worst const", "spread", "growth", "passed");
    for r in &reports {
        println!(
            "{:<18} {:>14.4e} {:>10.3} {:>8} {:>7}",
            r.id.as_str(),
            r.worst_constant,
            r.spread,
            r.growth_detected,
            r.passed
        );
    }
    Ok(())
}
