//! The heat equation with an obstacle, `dw/dt = w'' + eta`, `w >= z`,
//! `int (w - z) d eta = 0`, solved by penalization:
//!
//! ```text
//! dw/dt = w'' + g_eps(w - z),    g_eps(x) = arctan(min(x, 0)^2) / eps,
//! ```
//!
//! over a decreasing sequence of `eps`. Each time step is fully implicit and
//! solved by Newton's method; the Jacobian is a tridiagonal M-matrix, so the
//! discrete solution inherits the comparison principle (monotone in `eps`,
//! H-norm contraction in the obstacle).

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::linalg::{solve_symmetric_tridiagonal, solve_tridiagonal};
use crate::profile::{path_distance, Profile};

/// `g_eps(x) = arctan(min(x, 0)^2) / eps`.
#[inline]
pub fn penalty(x: f64, eps: f64) -> f64 {
    if x >= 0.0 {
        0.0
    } else {
        (x * x).atan() / eps
    }
}

#[inline]
fn penalty_slope(x: f64, eps: f64) -> f64 {
    if x >= 0.0 {
        0.0
    } else {
        let x2 = x * x;
        2.0 * x / (1.0 + x2 * x2) / eps
    }
}

/// Time-indexed obstacle `z(t_j, .)`, `j = 0..=M`, with `z(0, .) <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstaclePath {
    rows: Vec<Profile>,
}

impl ObstaclePath {
    pub fn new(rows: Vec<Profile>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidProfile("obstacle path is empty".into()))?;
        let n = first.n();
        if rows.iter().any(|r| r.n() != n) {
            return Err(Error::InvalidProfile("obstacle rows differ in length".into()));
        }
        if let Some(i) = first.values().iter().position(|&v| v > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "initial obstacle must be <= 0, got {} at node {i}",
                first[i]
            )));
        }
        Ok(Self { rows })
    }

    pub fn from_fn(grid: &SpaceTimeGrid, z: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let rows = (0..=grid.m())
            .map(|j| {
                let t = grid.t(j);
                Profile::from_fn(grid.n(), |x| z(t, x))
            })
            .collect();
        Self::new(rows)
    }

    pub fn rows(&self) -> &[Profile] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows[0].n()
    }

    /// `max_{j,i} |z|`.
    pub fn sup_norm(&self) -> f64 {
        self.rows.iter().map(Profile::max_abs).fold(0.0, f64::max)
    }

    fn check_grid(&self, grid: &SpaceTimeGrid) -> Result<()> {
        if self.rows.len() != grid.m() + 1 || self.n() != grid.n() {
            return Err(Error::Mismatch(format!(
                "obstacle path is {}x{} but grid is {}x{}",
                self.rows.len(),
                self.n() + 1,
                grid.m() + 1,
                grid.n() + 1
            )));
        }
        Ok(())
    }
}

/// Geometric schedule `eps_k = start * factor^k`, ending exactly at `min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySchedule {
    pub start: f64,
    pub min: f64,
    pub factor: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            start: 1e-1,
            min: 1e-4,
            factor: 0.5,
        }
    }
}

impl PenaltySchedule {
    pub fn single(eps: f64) -> Self {
        Self {
            start: eps,
            min: eps,
            factor: 0.5,
        }
    }

    pub fn down_to(min: f64) -> Self {
        Self {
            min,
            ..Self::default()
        }
    }

    pub fn epsilons(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0 && self.start >= self.min && self.factor > 0.0 && self.factor < 1.0) {
            return Err(Error::Config(format!("invalid penalty schedule {self:?}")));
        }
        let mut out = Vec::new();
        let mut eps = self.start;
        while eps > self.min * (1.0 + 1e-12) {
            out.push(eps);
            eps *= self.factor;
        }
        out.push(self.min);
        Ok(out)
    }
}

/// Newton stopping rule for one implicit step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-13,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub w: Profile,
    pub iterations: usize,
}

/// One implicit step of `dw/dt = w'' + g_eps(w - z)` from `w_prev` to the
/// time at which `z_row` is sampled.
pub fn penalized_step(
    w_prev: &Profile,
    z_row: &Profile,
    eps: f64,
    dt: f64,
) -> Result<StepOutcome> {
    penalized_step_with(w_prev, z_row, eps, dt, NewtonOptions::default(), &mut Workspace::default())
}

#[derive(Default)]
struct Workspace {
    diag: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
    trial: Vec<f64>,
}

fn residual(w: &[f64], prev: &[f64], z: &[f64], r: f64, eps: f64, dt: f64, out: &mut [f64]) -> f64 {
    let n = w.len() - 1;
    let mut worst: f64 = 0.0;
    for i in 1..n {
        let lap = w[i - 1] + w[i + 1] - 2.0 * w[i];
        let f = w[i] - r * lap - dt * penalty(w[i] - z[i], eps) - prev[i];
        out[i - 1] = f;
        worst = worst.max(f.abs());
    }
    worst
}

fn penalized_step_with(
    w_prev: &Profile,
    z_row: &Profile,
    eps: f64,
    dt: f64,
    opts: NewtonOptions,
    ws: &mut Workspace,
) -> Result<StepOutcome> {
    let n = w_prev.n();
    assert_eq!(z_row.n(), n, "obstacle row and profile grids differ");
    let m = n - 1;
    let r = dt * (n * n) as f64;
    let prev = w_prev.values();
    let z = z_row.values();

    // Start from the unpenalized heat step: a subsolution, since g_eps >= 0.
    let mut w = vec![0.0; n + 1];
    ws.diag.clear();
    ws.diag.resize(m, 1.0 + 2.0 * r);
    ws.rhs.clear();
    ws.rhs.extend_from_slice(&prev[1..n]);
    solve_symmetric_tridiagonal(-r, &ws.diag, &mut ws.rhs, &mut ws.scratch);
    w[1..n].copy_from_slice(&ws.rhs);

    let mut f = vec![0.0; m];
    let scale = 1.0 + w_prev.max_abs() + z_row.max_abs();
    let mut norm = residual(&w, prev, z, r, eps, dt, &mut f);
    let mut iterations = 0;
    while norm > opts.tolerance * scale {
        if iterations == opts.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        for i in 1..n {
            ws.diag[i - 1] = 1.0 + 2.0 * r - dt * penalty_slope(w[i] - z[i], eps);
            ws.rhs[i - 1] = -f[i - 1];
        }
        solve_symmetric_tridiagonal(-r, &ws.diag, &mut ws.rhs, &mut ws.scratch);

        // Damped update: halve the step until the residual decreases.
        let mut lambda = 1.0;
        loop {
            ws.trial.clear();
            ws.trial.extend_from_slice(&w);
            for i in 1..n {
                ws.trial[i] += lambda * ws.rhs[i - 1];
            }
            let trial_norm = residual(&ws.trial, prev, z, r, eps, dt, &mut f);
            if trial_norm < norm || lambda < 1e-6 {
                std::mem::swap(&mut w, &mut ws.trial);
                norm = trial_norm;
                break;
            }
            lambda *= 0.5;
        }
    }
    Ok(StepOutcome {
        w: Profile::from_interior(w),
        iterations,
    })
}

/// Full time integration at one penalty level.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedRun {
    pub eps: f64,
    pub w: Vec<Profile>,
    /// `g_eps(w - z) dt dx` per cell; row 0 is zero.
    pub eta: Vec<Vec<f64>>,
    pub newton_iterations: usize,
}

impl PenalizedRun {
    /// `max_{j,i} (z - w)^+`.
    pub fn max_violation(&self, z: &ObstaclePath) -> f64 {
        self.w
            .iter()
            .zip(z.rows())
            .flat_map(|(w, z)| w.values().iter().zip(z.values()).map(|(a, b)| b - a))
            .fold(0.0, f64::max)
    }
}

pub fn solve_penalized(z: &ObstaclePath, grid: &SpaceTimeGrid, eps: f64) -> Result<PenalizedRun> {
    z.check_grid(grid)?;
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    let dt = grid.dt();
    let cell = dt * grid.dx();
    let n = grid.n();
    let mut ws = Workspace::default();
    let mut w = Vec::with_capacity(grid.m() + 1);
    let mut eta = Vec::with_capacity(grid.m() + 1);
    w.push(Profile::zeros(n));
    eta.push(vec![0.0; n + 1]);
    let mut newton_iterations = 0;
    for j in 0..grid.m() {
        let zr = &z.rows()[j + 1];
        let step = penalized_step_with(&w[j], zr, eps, dt, NewtonOptions::default(), &mut ws)?;
        newton_iterations += step.iterations;
        let row: Vec<f64> = (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    0.0
                } else {
                    penalty(step.w[i] - zr[i], eps) * cell
                }
            })
            .collect();
        w.push(step.w);
        eta.push(row);
    }
    Ok(PenalizedRun {
        eps,
        w,
        eta,
        newton_iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSolution {
    pub w: Vec<Profile>,
    pub eta: Vec<Vec<f64>>,
    pub epsilon_schedule: Vec<f64>,
    /// `max (z - w)^+` after each penalty level.
    pub violations: Vec<f64>,
    /// Final `max (z - w)^+`.
    pub residual: f64,
    pub newton_iterations: usize,
}

impl ObstacleSolution {
    /// `sum (w - z) eta` over all cells.
    pub fn complementarity(&self, z: &ObstaclePath) -> f64 {
        self.pairs(z).map(|(gap, e)| gap * e).sum()
    }

    /// `sum |w - z| eta`; vanishes only in the `eps -> 0` limit.
    pub fn complementarity_abs(&self, z: &ObstaclePath) -> f64 {
        self.pairs(z).map(|(gap, e)| gap.abs() * e).sum()
    }

    fn pairs<'a>(&'a self, z: &'a ObstaclePath) -> impl Iterator<Item = (f64, f64)> + 'a {
        self.w.iter().zip(&self.eta).zip(z.rows()).flat_map(|((w, eta), z)| {
            w.values()
                .iter()
                .zip(z.values())
                .zip(eta)
                .map(|((a, b), e)| (a - b, *e))
        })
    }

    pub fn total_eta(&self) -> f64 {
        self.eta.iter().flatten().sum()
    }

    pub fn final_eps(&self) -> f64 {
        *self.epsilon_schedule.last().expect("non-empty schedule")
    }
}

/// Complementarity tolerance `1e-4 (1 + |z|^2)`, with `|z|` the sup norm.
pub fn complementarity_tolerance(z: &ObstaclePath) -> f64 {
    let s = z.sup_norm();
    1e-4 * (1.0 + s * s)
}

/// Obstacle tolerance for a penalized solution at level `eps`.
///
/// Where the constraint is active the penalty must balance the forcing, so
/// `arctan(gap^2) ~ eps * forcing` and the gap scales like `sqrt(eps)`.
pub fn obstacle_tolerance(z: &ObstaclePath, eps: f64) -> f64 {
    1e-6 * (1.0 + z.sup_norm()) + 5.0 * (eps * (1.0 + z.sup_norm())).sqrt()
}

pub fn solve_obstacle(
    z: &ObstaclePath,
    grid: &SpaceTimeGrid,
    schedule: PenaltySchedule,
) -> Result<ObstacleSolution> {
    let epsilons = schedule.epsilons()?;
    let mut violations = Vec::with_capacity(epsilons.len());
    let mut newton_iterations = 0;
    let mut last = None;
    for &eps in &epsilons {
        let run = solve_penalized(z, grid, eps)?;
        let violation = run.max_violation(z);
        if let Some(&prev) = violations.last() {
            if violation > prev + 1e-12 * (1.0 + z.sup_norm()) {
                return Err(Error::NonConvergence {
                    iterations: violations.len(),
                    residual: violation,
                });
            }
        }
        violations.push(violation);
        newton_iterations += run.newton_iterations;
        last = Some(run);
    }
    let run = last.expect("schedule has at least one level");
    Ok(ObstacleSolution {
        w: run.w,
        eta: run.eta,
        residual: *violations.last().expect("non-empty"),
        epsilon_schedule: epsilons,
        violations,
        newton_iterations,
    })
}

/// One implicit step of the constrained problem itself, the `eps -> 0` limit
/// of [`penalized_step`]: find `w >= z` with `lambda = A w - w_prev >= 0` and
/// `lambda (w - z) = 0`, where `A = I - dt D2`. Solved by a primal-dual
/// active-set iteration, which terminates for M-matrices. Returns `w`,
/// `lambda` (indexed by node, zero at the endpoints) and the iteration count.
pub fn constrained_step(w_prev: &Profile, z_row: &Profile, dt: f64) -> Result<(Profile, Vec<f64>, usize)> {
    let n = w_prev.n();
    assert_eq!(z_row.n(), n, "obstacle row and profile grids differ");
    let m = n - 1;
    let r = dt * (n * n) as f64;
    let prev = w_prev.values();
    let z = z_row.values();
    let mut scratch = Vec::new();

    let mut w = vec![0.0; n + 1];
    let mut rhs = prev[1..n].to_vec();
    solve_symmetric_tridiagonal(-r, &vec![1.0 + 2.0 * r; m], &mut rhs, &mut scratch);
    w[1..n].copy_from_slice(&rhs);
    let mut active: Vec<bool> = (1..n).map(|i| z[i] > w[i]).collect();
    let mut lambda = vec![0.0; n + 1];
    let (mut lower, mut diag, mut upper) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);

    for iteration in 1..=m + 2 {
        for k in 0..m {
            if active[k] {
                (lower[k], diag[k], upper[k]) = (0.0, 1.0, 0.0);
                rhs[k] = z[k + 1];
            } else {
                (lower[k], diag[k], upper[k]) = (-r, 1.0 + 2.0 * r, -r);
                rhs[k] = prev[k + 1];
            }
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs, &mut scratch);
        w[1..n].copy_from_slice(&rhs);
        for (k, &is_active) in active.iter().enumerate() {
            let i = k + 1;
            if is_active {
                w[i] = z[i];
            }
        }
        let mut changed = false;
        for i in 1..n {
            let lap = w[i - 1] + w[i + 1] - 2.0 * w[i];
            lambda[i] = if active[i - 1] { w[i] - r * lap - prev[i] } else { 0.0 };
            let next = lambda[i] + (z[i] - w[i]) > 0.0;
            changed |= next != active[i - 1];
            active[i - 1] = next;
        }
        if !changed {
            for l in &mut lambda {
                *l = l.max(0.0);
            }
            return Ok((Profile::from_interior(w), lambda, iteration));
        }
    }
    Err(Error::NonConvergence {
        iterations: m + 2,
        residual: f64::NAN,
    })
}

/// The constrained problem solved directly with [`constrained_step`]; the
/// schedule records a single level `eps = 0`.
pub fn solve_obstacle_exact(z: &ObstaclePath, grid: &SpaceTimeGrid) -> Result<ObstacleSolution> {
    z.check_grid(grid)?;
    let n = grid.n();
    let dx = grid.dx();
    let mut w = Vec::with_capacity(grid.m() + 1);
    let mut eta = Vec::with_capacity(grid.m() + 1);
    w.push(Profile::zeros(n));
    eta.push(vec![0.0; n + 1]);
    let mut iterations = 0;
    for j in 0..grid.m() {
        let (next, lambda, its) = constrained_step(&w[j], &z.rows()[j + 1], grid.dt())?;
        iterations += its;
        w.push(next);
        eta.push(lambda.iter().map(|l| l * dx).collect());
    }
    let residual = w
        .iter()
        .zip(z.rows())
        .flat_map(|(w, z)| w.values().iter().zip(z.values()).map(|(a, b)| b - a))
        .fold(0.0, f64::max);
    Ok(ObstacleSolution {
        w,
        eta,
        epsilon_schedule: vec![0.0],
        violations: vec![residual],
        residual,
        newton_iterations: iterations,
    })
}

/// `(sup_t |w1 - w2|_H, sup_t |z1 - z2|_H)` for the two obstacle problems.
pub fn contraction_check(
    z1: &ObstaclePath,
    z2: &ObstaclePath,
    grid: &SpaceTimeGrid,
    schedule: PenaltySchedule,
) -> Result<(f64, f64)> {
    let s1 = solve_obstacle(z1, grid, schedule)?;
    let s2 = solve_obstacle(z2, grid, schedule)?;
    Ok((path_distance(&s1.w, &s2.w), path_distance(z1.rows(), z2.rows())))
}

/// Defect of the discrete weak form at the final time for a test function
/// `phi` vanishing at the endpoints:
/// `int w(T) phi - int int w phi'' - int int phi d eta`.
pub fn weak_form_residual(
    solution: &ObstacleSolution,
    grid: &SpaceTimeGrid,
    phi: impl Fn(f64) -> f64,
    phi_xx: impl Fn(f64) -> f64,
) -> f64 {
    let n = grid.n();
    let dx = grid.dx();
    let dt = grid.dt();
    let phis: Vec<f64> = grid.nodes().map(&phi).collect();
    let phis_xx: Vec<f64> = grid.nodes().map(&phi_xx).collect();
    let last = solution.w.last().expect("non-empty trajectory");
    let lhs: f64 = (1..n).map(|i| last[i] * phis[i] * dx).sum();
    let diffusion: f64 = solution.w[1..]
        .iter()
        .map(|w| (1..n).map(|i| w[i] * phis_xx[i]).sum::<f64>() * dx * dt)
        .sum();
    let forcing: f64 = solution
        .eta
        .iter()
        .map(|e| (1..n).map(|i| phis[i] * e[i]).sum::<f64>())
        .sum();
    lhs - diffusion - forcing
}
