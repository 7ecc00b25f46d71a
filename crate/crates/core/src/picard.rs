//! Picard iteration for the truncated problem against a frozen noise path.
//!
//! Each iterate is built in two stages. The mild solution
//!
//! ```text
//! z(t, x) = int G(t, x, y) u0(y) dy
//!         -/+ int int dG/dy(t - s, x, y) h_M(s) F_M v(s, y) dy ds
//!         + int int G(t - s, x, y) f(s, y, F_M v) dy ds
//!         + int int G(t - s, x, y) sigma(s, y, F_M v) W(ds, dy)
//! ```
//!
//! is evaluated with the previous iterate frozen inside every coefficient,
//! then the reflection is restored by solving the obstacle problem with
//! obstacle `-z`, so `v = z + w >= 0`.
//!
//! Time integrals use the left endpoint of each step, which pairs a source at
//! `t_k` with the kernel at `t_j - t_k >= dt`; the singular diagonal never
//! appears. Space integrals of the sources are nodal sums with the same `dx`
//! weights and the same noise rows as the finite-difference scheme.

use std::time::Instant;

use rayon::prelude::*;

use crate::coefficients::{CoefficientSet, InitialCondition};
use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::heat_kernel::HeatKernel;
use crate::noise::NoiseField;
use crate::obstacle::{solve_obstacle, solve_obstacle_exact, ObstaclePath, PenaltySchedule};
use crate::profile::{Profile, TruncationMap};
use crate::quadrature::simpson;
use crate::scheme::{self, SchemeOptions, SimulationResult};
use crate::Side;

/// How the reflection step solves the obstacle problem.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Reflection {
    /// Exact implicit obstacle step; iterates are nonnegative.
    #[default]
    Exact,
    /// Penalized solve down to the given `eps`. Where the obstacle is driven
    /// by noise the penetration is of order `sqrt(eps / sqrt(dt dx))`.
    Penalized { eps_min: f64 },
}

/// `G(l dt, x_i, y_k) dx` and `dG/dy(l dt, x_i, y_k) dx` for interior nodes
/// and lags `l = 1..=M`.
#[derive(Debug, Clone)]
pub struct MildOperator {
    grid: SpaceTimeGrid,
    kernel: HeatKernel,
    g: Vec<f64>,
    dy: Vec<f64>,
}

/// Simpson points for the initial-data integral, which sees the kinks of
/// `u0` rather than the nodal values.
const INITIAL_QUADRATURE_POINTS: usize = 1024;

impl MildOperator {
    pub fn new(grid: &SpaceTimeGrid) -> Self {
        Self::with_kernel(grid, &HeatKernel::default())
    }

    /// Lags shorter than the kernel's time floor are evaluated at the floor.
    pub fn with_kernel(grid: &SpaceTimeGrid, kernel: &HeatKernel) -> Self {
        let inner = grid.n() - 1;
        let block = inner * inner;
        let dx = grid.dx();
        let mut g = vec![0.0; grid.m() * block];
        let mut dy = vec![0.0; grid.m() * block];
        g.par_chunks_mut(block)
            .zip(dy.par_chunks_mut(block))
            .enumerate()
            .for_each(|(l, (gb, db))| {
                let t = (((l + 1) as f64) * grid.dt()).max(kernel.t_floor());
                for i in 0..inner {
                    let x = grid.x(i + 1);
                    for k in 0..inner {
                        let terms = kernel.terms_unchecked(t, x, grid.x(k + 1));
                        gb[i * inner + k] = terms.g * dx;
                        db[i * inner + k] = terms.dy * dx;
                    }
                }
            });
        Self {
            grid: *grid,
            kernel: *kernel,
            g,
            dy,
        }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    /// Sources for one side: `(G-weighted, dG/dy-weighted)` per time row.
    fn sources(
        &self,
        v: &[Profile],
        speeds: &[f64],
        side: Side,
        nf: &NoiseField,
        coeffs: &CoefficientSet,
        truncation: &TruncationMap,
    ) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let grid = &self.grid;
        let n = grid.n();
        let dt = grid.dt();
        let noise_scale = (dt / grid.dx()).sqrt();
        let drift = coeffs.drift(side);
        let sigma = coeffs.sigma(side);
        // Transport enters with the sign opposite to the scheme's `-h v'`
        // after integrating by parts in y.
        let sign = -side.transport_sign();
        let mut z = vec![0.0; n + 1];
        let mut src = Vec::with_capacity(grid.m());
        let mut transport = Vec::with_capacity(grid.m());
        for (l, v) in v.iter().enumerate().take(grid.m()) {
            let t = grid.t(l);
            let a = truncation.apply(v);
            let noisy = !sigma.is_zero();
            if noisy {
                nf.fill(l, side, &mut z)?;
            }
            let row: Vec<f64> = (1..n)
                .map(|k| {
                    let y = grid.x(k);
                    let mut s = drift.eval(y, t, a[k]) * dt;
                    if noisy {
                        s += sigma.eval(y, t, a[k]) * noise_scale * z[k];
                    }
                    s
                })
                .collect();
            let tr: Vec<f64> = (1..n).map(|k| sign * speeds[l] * a[k] * dt).collect();
            src.push(row);
            transport.push(tr);
        }
        Ok((src, transport))
    }

    /// `int G(t_j, x_i, y) u0(y) dy` at every time row; row 0 is `u0` itself.
    fn initial_term(&self, u0: &InitialCondition) -> Vec<Profile> {
        let n = self.grid.n();
        (0..=self.grid.m())
            .into_par_iter()
            .map(|j| {
                if j == 0 || matches!(u0, InitialCondition::Zero) {
                    return u0.profile(n);
                }
                let t = self.grid.t(j).max(self.kernel.t_floor());
                let mut values = vec![0.0; n + 1];
                for (i, v) in values.iter_mut().enumerate().take(n).skip(1) {
                    let x = self.grid.x(i);
                    *v = simpson(
                        |y| self.kernel.g_unchecked(t, x, y) * u0.eval(y),
                        0.0,
                        1.0,
                        INITIAL_QUADRATURE_POINTS,
                    );
                }
                Profile::from_interior(values)
            })
            .collect()
    }

    fn assemble(&self, initial: &[Profile], src: &[Vec<f64>], transport: &[Vec<f64>]) -> Vec<Profile> {
        let n = self.grid.n();
        let inner = n - 1;
        let block = inner * inner;
        (0..=self.grid.m())
            .into_par_iter()
            .map(|j| {
                if j == 0 {
                    return initial[0].clone();
                }
                let mut acc = initial[j].values()[1..n].to_vec();
                let lag_block = |l: usize| (l - 1) * block..l * block;
                for l in 0..j {
                    let g = &self.g[lag_block(j - l)];
                    let d = &self.dy[lag_block(j - l)];
                    let (s, tr) = (&src[l], &transport[l]);
                    for (i, a) in acc.iter_mut().enumerate() {
                        let gr = &g[i * inner..(i + 1) * inner];
                        let dr = &d[i * inner..(i + 1) * inner];
                        let mut sum = 0.0;
                        for k in 0..inner {
                            sum += gr[k] * s[k] + dr[k] * tr[k];
                        }
                        *a += sum;
                    }
                }
                let mut values = vec![0.0; n + 1];
                values[1..n].copy_from_slice(&acc);
                Profile::from_interior(values)
            })
            .collect()
    }

    /// Mild solutions `(z1, z2)` driven by the frozen iterate `(v1, v2)`.
    pub fn apply(
        &self,
        v1: &[Profile],
        v2: &[Profile],
        nf: &NoiseField,
        coeffs: &CoefficientSet,
    ) -> Result<(Vec<Profile>, Vec<Profile>)> {
        let initial = Side::BOTH.map(|side| self.initial_term(coeffs.initial(side)));
        self.apply_with_initial(v1, v2, nf, coeffs, &initial)
    }

    fn apply_with_initial(
        &self,
        v1: &[Profile],
        v2: &[Profile],
        nf: &NoiseField,
        coeffs: &CoefficientSet,
        initial: &[Vec<Profile>; 2],
    ) -> Result<(Vec<Profile>, Vec<Profile>)> {
        let grid = &self.grid;
        let rows = grid.m() + 1;
        if v1.len() != rows || v2.len() != rows {
            return Err(Error::Mismatch(format!(
                "iterate has {} and {} time rows, grid has {rows}",
                v1.len(),
                v2.len()
            )));
        }
        if v1.iter().chain(v2).any(|p| p.n() != grid.n()) {
            return Err(Error::Mismatch("iterate profiles do not match the grid".into()));
        }
        if nf.n() != grid.n() || nf.m() != grid.m() {
            return Err(Error::Mismatch("noise field does not match the grid".into()));
        }
        let truncation = required_truncation(coeffs)?;
        let speeds: Vec<f64> = v1
            .iter()
            .zip(v2)
            .map(|(a, b)| scheme::speed(&coeffs.boundary, &truncation.apply(a), &truncation.apply(b)))
            .collect();
        let mut out = Vec::with_capacity(2);
        for side in Side::BOTH {
            let v = if side == Side::One { v1 } else { v2 };
            let (src, tr) = self.sources(v, &speeds, side, nf, coeffs, &truncation)?;
            out.push(self.assemble(&initial[side.index()], &src, &tr));
        }
        let z2 = out.pop().expect("two sides");
        let z1 = out.pop().expect("two sides");
        Ok((z1, z2))
    }
}

fn required_truncation(coeffs: &CoefficientSet) -> Result<TruncationMap> {
    coeffs
        .truncation_map()?
        .ok_or_else(|| Error::Config("the Picard iteration needs a truncation level".into()))
}

/// One mild step on a fresh operator. Prefer [`MildOperator`] when iterating.
pub fn mild_step(
    v1: &[Profile],
    v2: &[Profile],
    nf: &NoiseField,
    coeffs: &CoefficientSet,
    grid: &SpaceTimeGrid,
) -> Result<(Vec<Profile>, Vec<Profile>)> {
    MildOperator::new(grid).apply(v1, v2, nf, coeffs)
}

/// `v = z + w` where `w` solves the obstacle problem with obstacle `-z`.
pub fn reflect(z: &[Profile], grid: &SpaceTimeGrid, method: Reflection) -> Result<Vec<Profile>> {
    let obstacle = ObstaclePath::new(z.iter().map(|p| p.scaled(-1.0)).collect())?;
    let solution = match method {
        Reflection::Exact => solve_obstacle_exact(&obstacle, grid)?,
        Reflection::Penalized { eps_min } => {
            solve_obstacle(&obstacle, grid, PenaltySchedule::down_to(eps_min))?
        }
    };
    Ok(z.iter().zip(&solution.w).map(|(z, w)| z.add(w)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardState {
    /// Number of completed iterations.
    pub iteration: usize,
    pub v1: Vec<Profile>,
    pub v2: Vec<Profile>,
    pub z1: Vec<Profile>,
    pub z2: Vec<Profile>,
    /// `diffs[n - 1] = d_n = max_t (|v1_n - v1_{n-1}|_H + |v2_n - v2_{n-1}|_H)`.
    pub diffs: Vec<f64>,
    pub wall_time_ms: Vec<f64>,
    pub converged: bool,
}

impl PicardState {
    pub fn last_diff(&self) -> Option<f64> {
        self.diffs.last().copied()
    }

    /// `d_{n+1} / d_n` for consecutive iterations, indexed from `n = 1`.
    pub fn ratios(&self) -> Vec<f64> {
        self.diffs.windows(2).map(|w| w[1] / w[0]).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.v1
            .iter()
            .chain(&self.v2)
            .map(Profile::min)
            .fold(f64::INFINITY, f64::min)
    }
}

/// `max_t (|a1 - b1|_H + |a2 - b2|_H)`.
pub fn pair_distance(a1: &[Profile], a2: &[Profile], b1: &[Profile], b2: &[Profile]) -> f64 {
    a1.iter()
        .zip(a2)
        .zip(b1.iter().zip(b2))
        .map(|((a1, a2), (b1, b2))| a1.distance(b1) + a2.distance(b2))
        .fold(0.0, f64::max)
}

/// Iterates from `v_0(t) = u0` until `d_n < d_tol` or `n_max` iterations.
/// A run that exhausts `n_max` is returned with `converged == false`.
pub fn picard_solve(
    coeffs: &CoefficientSet,
    grid: &SpaceTimeGrid,
    nf: &NoiseField,
    n_max: usize,
    d_tol: f64,
) -> Result<PicardState> {
    picard_solve_with(&MildOperator::new(grid), coeffs, nf, n_max, d_tol, Reflection::Exact)
}

pub fn picard_solve_with(
    op: &MildOperator,
    coeffs: &CoefficientSet,
    nf: &NoiseField,
    n_max: usize,
    d_tol: f64,
    reflection: Reflection,
) -> Result<PicardState> {
    required_truncation(coeffs)?;
    let grid = op.grid();
    let rows = grid.m() + 1;
    let init = |side| vec![coeffs.initial(side).profile(grid.n()); rows];
    let mut state = PicardState {
        iteration: 0,
        v1: init(Side::One),
        v2: init(Side::Two),
        z1: Vec::new(),
        z2: Vec::new(),
        diffs: Vec::new(),
        wall_time_ms: Vec::new(),
        converged: false,
    };
    if state.v1[0].min() < 0.0 || state.v2[0].min() < 0.0 {
        return Err(Error::InvalidProfile("initial data must be nonnegative".into()));
    }
    let initial = Side::BOTH.map(|side| op.initial_term(coeffs.initial(side)));
    while state.iteration < n_max {
        let start = Instant::now();
        let (z1, z2) = op.apply_with_initial(&state.v1, &state.v2, nf, coeffs, &initial)?;
        let v1 = reflect(&z1, grid, reflection)?;
        let v2 = reflect(&z2, grid, reflection)?;
        let d = pair_distance(&v1, &v2, &state.v1, &state.v2);
        if !d.is_finite() {
            return Err(Error::NonConvergence {
                iterations: state.iteration + 1,
                residual: d,
            });
        }
        state.v1 = v1;
        state.v2 = v2;
        state.z1 = z1;
        state.z2 = z2;
        state.iteration += 1;
        state.diffs.push(d);
        state.wall_time_ms.push(start.elapsed().as_secs_f64() * 1e3);
        if d < d_tol {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

pub const CROSS_VALIDATE_MAX_ITERATIONS: usize = 40;
pub const CROSS_VALIDATE_TOLERANCE: f64 = 1e-10;

/// Runs both solution constructions on the same grid and noise and returns
/// `max_t (|v1 - u1|_H + |v2 - u2|_H)` between them.
pub fn cross_validate(
    coeffs: &CoefficientSet,
    grid: &SpaceTimeGrid,
    nf: &NoiseField,
) -> Result<(PicardState, SimulationResult, f64)> {
    let picard = picard_solve(
        coeffs,
        grid,
        nf,
        CROSS_VALIDATE_MAX_ITERATIONS,
        CROSS_VALIDATE_TOLERANCE,
    )?;
    let opts = SchemeOptions {
        allow_outside_theory: true,
        ..Default::default()
    };
    let sim = scheme::run(coeffs, grid, nf, &opts)?;
    if !sim.is_complete() {
        return Err(Error::Mismatch("scheme run stopped early".into()));
    }
    let d = pair_distance(&picard.v1, &picard.v2, &sim.v1, &sim.v2);
    Ok((picard, sim, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{BoundarySpeed, Drift, Preset, Volatility};
    use crate::reference;

    fn deterministic(drift: Drift, u0: InitialCondition) -> CoefficientSet {
        CoefficientSet::symmetric(drift, Volatility::Zero, 0.0, u0).with_truncation(1e6)
    }

    fn frozen(coeffs: &CoefficientSet, grid: &SpaceTimeGrid) -> Vec<Profile> {
        vec![coeffs.u0_1.profile(grid.n()); grid.m() + 1]
    }

    #[test]
    fn needs_truncation() {
        let grid = SpaceTimeGrid::new(8, 10, 0.01).unwrap();
        let nf = NoiseField::new(0, 0, 8, 10);
        let coeffs = CoefficientSet::preset(Preset::Heat);
        assert!(matches!(picard_solve(&coeffs, &grid, &nf, 3, 1e-8), Err(Error::Config(_))));
    }

    #[test]
    fn zero_data_gives_zero() {
        let grid = SpaceTimeGrid::new(16, 40, 0.02).unwrap();
        let nf = NoiseField::new(0, 0, 16, 40);
        let coeffs = deterministic(Drift::Zero, InitialCondition::Zero);
        let v = frozen(&coeffs, &grid);
        let (z1, z2) = mild_step(&v, &v, &nf, &coeffs, &grid).unwrap();
        assert!(z1.iter().chain(&z2).all(|p| p.max_abs() == 0.0));
    }

    #[test]
    fn free_evolution_is_the_heat_propagator() {
        let grid = SpaceTimeGrid::new(32, 205, 0.05).unwrap();
        let nf = NoiseField::new(0, 0, 32, 205);
        let coeffs = deterministic(Drift::Zero, InitialCondition::Tent);
        let v = frozen(&coeffs, &grid);
        let (z1, _) = mild_step(&v, &v, &nf, &coeffs, &grid).unwrap();
        let kernel = HeatKernel::default();
        for j in [grid.m() / 2, grid.m()] {
            let t = grid.t(j);
            for i in 1..grid.n() {
                let x = grid.x(i);
                let fourier = reference::heat_tent(t, x, 400);
                let quad = kernel.propagate(t, x, crate::coefficients::tent, 4096).unwrap();
                assert!((z1[j][i] - fourier).abs() < 1e-6, "t={t} x={x} err={}", z1[j][i] - fourier);
                assert!((quad - fourier).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn unit_source_matches_fourier_and_refinement() {
        let coeffs = deterministic(Drift::Constant(1.0), InitialCondition::Zero);
        let value_at = |n: usize, m: usize| {
            let grid = SpaceTimeGrid::new(n, m, 0.05).unwrap();
            let nf = NoiseField::new(0, 0, n, m);
            let v = frozen(&coeffs, &grid);
            let (z1, _) = mild_step(&v, &v, &nf, &coeffs, &grid).unwrap();
            z1[m][n / 2]
        };
        let coarse = value_at(16, 52);
        let fine = value_at(32, 208);
        let exact = reference::unit_source(0.05, 0.5, 2001);
        assert!((coarse - fine).abs() < 1e-3, "{coarse} {fine}");
        assert!((fine - exact).abs() < 1e-3, "{fine} {exact}");
    }

    #[test]
    fn noise_term_is_centred() {
        let grid = SpaceTimeGrid::new(8, 16, 0.02).unwrap();
        let mut coeffs = deterministic(Drift::Zero, InitialCondition::Zero);
        coeffs.sigma1 = Volatility::Constant(1.0);
        let op = MildOperator::new(&grid);
        let v = frozen(&coeffs, &grid);
        let samples: Vec<f64> = (0..1000)
            .map(|seed| {
                let nf = NoiseField::new(seed, 0, 8, 16);
                op.apply(&v, &v, &nf, &coeffs).unwrap().0[16][4]
            })
            .collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(var > 0.0);
        assert!(mean.abs() < 3.0 * (var / n).sqrt(), "mean {mean} se {}", (var / n).sqrt());
    }

    #[test]
    fn deterministic_contraction() {
        let grid = SpaceTimeGrid::new(32, 205, 0.05).unwrap();
        let nf = NoiseField::new(0, 0, 32, 205);
        let coeffs = deterministic(Drift::Linear(0.5), InitialCondition::Tent);
        let state = picard_solve(&coeffs, &grid, &nf, 15, 1e-6).unwrap();
        assert!(state.converged, "{:?}", state.diffs);
        assert!(state.ratios().iter().skip(1).all(|&r| r <= 0.6), "{:?}", state.diffs);
        assert!(state.min_value() >= 0.0);
    }

    #[test]
    fn converged_iterate_is_a_fixed_point() {
        let grid = SpaceTimeGrid::new(16, 52, 0.05).unwrap();
        let nf = NoiseField::new(0, 0, 16, 52);
        let coeffs = deterministic(Drift::Linear(0.5), InitialCondition::Tent);
        let state = picard_solve(&coeffs, &grid, &nf, 30, 1e-9).unwrap();
        assert!(state.converged);
        let (z1, z2) = mild_step(&state.v1, &state.v2, &nf, &coeffs, &grid).unwrap();
        let v1 = reflect(&z1, &grid, Reflection::Exact).unwrap();
        let v2 = reflect(&z2, &grid, Reflection::Exact).unwrap();
        assert!(pair_distance(&v1, &v2, &state.v1, &state.v2) < 1e-9);
    }

    #[test]
    fn truncation_levels_agree_below_the_level() {
        let grid = SpaceTimeGrid::new(16, 26, 0.025).unwrap();
        let nf = NoiseField::new(4, 1, 16, 26);
        let coeffs = CoefficientSet::preset(Preset::SigmaA).with_truncation(50.0);
        let a = picard_solve(&coeffs, &grid, &nf, 4, 0.0).unwrap();
        let peak = a
            .v1
            .iter()
            .chain(&a.v2)
            .map(Profile::h_norm)
            .fold(0.0, f64::max);
        assert!(peak < 50.0, "{peak}");
        let b = picard_solve(&coeffs.clone().with_truncation(100.0), &grid, &nf, 4, 0.0).unwrap();
        assert_eq!(a.v1, b.v1);
        assert_eq!(a.diffs, b.diffs);
    }

    #[test]
    fn transport_signs_are_opposite() {
        let grid = SpaceTimeGrid::new(16, 26, 0.025).unwrap();
        let nf = NoiseField::new(0, 0, 16, 26);
        let mut coeffs = deterministic(Drift::Zero, InitialCondition::Tent);
        coeffs.boundary = BoundarySpeed::Classical { gamma: 1.0 };
        coeffs.u0_2 = InitialCondition::Zero;
        let v1 = frozen(&coeffs, &grid);
        let v2 = vec![Profile::zeros(16); grid.m() + 1];
        let (z1, z2) = mild_step(&v1, &v2, &nf, &coeffs, &grid).unwrap();
        // Side two sees only the transport of a zero profile.
        assert!(z2.iter().all(|p| p.max_abs() == 0.0));
        // Positive speed moves side one's mass away from the interface.
        let free = mild_step(&v1, &v2, &nf, &deterministic(Drift::Zero, InitialCondition::Tent), &grid)
            .unwrap()
            .0;
        assert!(z1[26][2] < free[26][2]);
    }
}
