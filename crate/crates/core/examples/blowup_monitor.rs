//! Force a blow-up by inflating the drift and compare when the profile norm
//! and the interface speed first cross each level.

use stefan_spde::scheme::{monitor_blowup, run, SchemeOptions};
use stefan_spde::{CoefficientSet, NoiseField, Preset, SpaceTimeGrid};

fn main() -> stefan_spde::Result<()> {
    let grid = SpaceTimeGrid::with_default_steps(128, 0.1)?;
    let mut coeffs = CoefficientSet::preset(Preset::SigmaA);
    coeffs.f1 = coeffs.f1.scaled(1e4);
    let gamma = coeffs.boundary.gamma().unwrap_or(1.0);
    let result = run(&coeffs, &grid, &NoiseField::new(3, 0, grid.n(), grid.m()), &SchemeOptions::default())?;
    if let Some(ev) = &result.blowup {
        println!("halted at j = {} (t = {:.5}) on side {:?}: {:?}", ev.index, grid.t(ev.index), ev.side, ev.reason);
    }
    println!("{:>8} {:>10} {:>10} {:>10}", "level", "norm j", "speed j", "gap");
    for row in monitor_blowup(&result, &[10.0, 50.0, 250.0, 1e3], gamma) {
        let show = |j: Option<usize>| j.map_or("-".to_string(), |j| j.to_string());
        let gap = match (row.norm_index, row.speed_index) {
            (Some(a), Some(b)) => a.abs_diff(b).to_string(),
            _ => "-".into(),
        };
        println!("{:>8} {:>10} {:>10} {:>10}", row.level, show(row.norm_index), show(row.speed_index), gap);
    }
    Ok(())
}
