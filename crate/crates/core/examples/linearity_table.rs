//! Seeded ensembles of the three volatility presets and the median
//! time-averaged linearity metric near the interface.
//!
//! cargo run --release --example linearity_table -- [n_seeds]

use rayon::prelude::*;
use stefan_spde::diagnostics::{aggregate_results, linearity_metric, Window};
use stefan_spde::scheme::{run, SchemeOptions};
use stefan_spde::{CoefficientSet, NoiseField, Preset, Side, SpaceTimeGrid};

fn main() -> stefan_spde::Result<()> {
    let n_seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let grid = SpaceTimeGrid::with_default_steps(128, 0.1)?;
    let opts = SchemeOptions {
        allow_outside_theory: true,
        ..Default::default()
    };
    println!("{:<8} {:>9} {:>9} {:>9}", "preset", "median", "p10", "p90");
    for preset in Preset::TABLE {
        let coeffs = CoefficientSet::preset(preset);
        let runs = (0..n_seeds)
            .into_par_iter()
            .map(|s| run(&coeffs, &grid, &NoiseField::new(0, s, grid.n(), grid.m()), &opts))
            .collect::<stefan_spde::Result<Vec<_>>>()?;
        let s = aggregate_results(&runs, preset.name(), |r| {
            Ok(linearity_metric(r, Side::One, Window::default())?.time_average)
        })?;
        println!("{:<8} {:>9.5} {:>9.5} {:>9.5}", preset.name(), s.median, s.p10, s.p90);
    }
    Ok(())
}
