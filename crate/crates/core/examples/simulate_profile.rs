//! Simulate the two-phase reflected problem with the sigma_a volatility and
//! print the interface path and the final profile near the interface.
//!
//! cargo run --release --example simulate_profile -- [seed]

use stefan_spde::diagnostics::{boundary_derivative_probe, linearity_metric, Window};
use stefan_spde::scheme::{run, SchemeOptions};
use stefan_spde::{CoefficientSet, NoiseField, Preset, Side, SpaceTimeGrid};

fn main() -> stefan_spde::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let grid = SpaceTimeGrid::with_default_steps(128, 0.1)?;
    let coeffs = CoefficientSet::preset(Preset::SigmaA);
    let nf = NoiseField::new(seed, 0, grid.n(), grid.m());
    let result = run(&coeffs, &grid, &nf, &SchemeOptions::default())?;

    println!("N = {}, M = {}, seed = {seed}", grid.n(), grid.m());
    for j in (0..=grid.m()).step_by(grid.m() / 10) {
        println!("t = {:.4}  p = {:+.5}  p' = {:+.4}", grid.t(j), result.p[j], result.boundary_speed[j]);
    }
    let last = result.v1.last().expect("non-empty");
    println!("v1(T) on [0, 0.1]:");
    for i in 0..=13 {
        println!("  x = {:.4}  v1 = {:.5}", grid.x(i), last[i]);
    }
    let probe = boundary_derivative_probe(&result, Side::One, grid.m())?;
    println!("slopes v1[k]/x_k, k = 1, 2, 4, 8: {:.3?} (spread {:.3})", probe.slopes, probe.spread);
    let m = linearity_metric(&result, Side::One, Window::default())?;
    println!("time-averaged linearity metric on [0, 0.04]: {:.5}", m.time_average);
    println!("min value {:.3e}", result.min_value());
    Ok(())
}
