//! Solve the deterministic obstacle problem for a contact-forming obstacle,
//! first along a penalty schedule and then with the exact constrained step.

use stefan_spde::obstacle::{
    complementarity_tolerance, obstacle_tolerance, solve_obstacle, solve_obstacle_exact,
    ObstaclePath, PenaltySchedule,
};
use stefan_spde::SpaceTimeGrid;

fn main() -> stefan_spde::Result<()> {
    let grid = SpaceTimeGrid::new(64, 256, 0.1)?;
    let z = ObstaclePath::from_fn(&grid, |t, x| {
        let s = (std::f64::consts::PI * x).sin();
        (t / 0.01).min(1.0) * s * (s - 0.9)
    })?;

    let penalized = solve_obstacle(&z, &grid, PenaltySchedule::default())?;
    println!("eps          max (z - w)^+");
    for (eps, v) in penalized.epsilon_schedule.iter().zip(&penalized.violations) {
        println!("{eps:<12.3e} {v:.3e}");
    }
    println!(
        "final violation {:.3e} (tolerance {:.3e}), complementarity {:.3e} (tolerance {:.3e})",
        penalized.residual,
        obstacle_tolerance(&z, penalized.final_eps()),
        penalized.complementarity(&z),
        complementarity_tolerance(&z)
    );

    let exact = solve_obstacle_exact(&z, &grid)?;
    let gap = exact
        .w
        .iter()
        .zip(&penalized.w)
        .flat_map(|(e, p)| e.values().iter().zip(p.values()).map(|(a, b)| a - b))
        .fold(0.0, f64::max);
    println!(
        "exact step: violation {:.1e}, total reflection mass {:.4}, penalized solution below it by at most {gap:.3e}",
        exact.residual,
        exact.total_eta()
    );
    Ok(())
}
