//! Picard iteration of the truncated problem in mild form, compared with the
//! finite-difference scheme on the same deterministic data.

use stefan_spde::coefficients::{Drift, InitialCondition, Volatility};
use stefan_spde::picard::{cross_validate, picard_solve};
use stefan_spde::{CoefficientSet, NoiseField, SpaceTimeGrid};

fn main() -> stefan_spde::Result<()> {
    let grid = SpaceTimeGrid::with_default_steps(32, 0.05)?;
    let nf = NoiseField::new(0, 0, grid.n(), grid.m());
    let coeffs = CoefficientSet::symmetric(Drift::Linear(0.5), Volatility::Zero, 0.0, InitialCondition::Tent)
        .with_truncation(1e6);
    let state = picard_solve(&coeffs, &grid, &nf, 15, 1e-6)?;
    println!("n   d_n");
    for (n, d) in state.diffs.iter().enumerate() {
        println!("{:<3} {d:.3e}", n + 1);
    }
    println!("converged: {}, min value {:.2e}", state.converged, state.min_value());

    let source = CoefficientSet::symmetric(Drift::Constant(1.0), Volatility::Zero, 0.0, InitialCondition::Tent)
        .with_truncation(1e6);
    for n in [16, 32] {
        let grid = SpaceTimeGrid::with_default_steps(n, 0.02)?;
        let nf = NoiseField::new(0, 0, n, grid.m());
        let (_, _, d) = cross_validate(&source, &grid, &nf)?;
        println!("N = {n}: max_t H-distance between mild fixed point and scheme = {d:.3e}");
    }
    Ok(())
}
