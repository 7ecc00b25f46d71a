//! Explicit finite-difference integrator for the coupled reflected system in
//! the relative frame.
//!
//! With `D = dt N^2`, `h = gamma N (v1[1] - v2[1])` and `Z ~ N(0, 1)`:
//!
//! ```text
//! v1[j+1][i] = | v1 + D (v1[i+1] + v1[i-1] - 2 v1[i])
//!                - dt h N (v1[i+1] - v1[i])
//!                + dt f(x_i, v1[i]) + sqrt(dt N) sigma(x_i, v1[i]) Z1[j][i] |
//! ```
//!
//! and the same for side two with `+ dt h N (...)` and independent noise. The
//! absolute value is the reflection at zero; the jump it applies is recorded
//! as the reflection increment. The interface is rebuilt from
//! `p[j] = p0 + sum_{k=1..j} dt h_k`.

use serde::{Deserialize, Serialize};

use crate::coefficients::{BoundarySpeed, CoefficientSet};
use crate::error::{Error, Result};
use crate::grid::{SpaceTimeGrid, STABILITY_LIMIT};
use crate::noise::NoiseField;
use crate::profile::{maybe_truncate, Profile, TruncationMap};
use crate::Side;

/// Difference used for the transport term `h v'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportStencil {
    /// `v[i+1] - v[i]` on both sides, regardless of the direction of motion.
    #[default]
    Forward,
    /// One-sided difference taken against the local advection velocity.
    Upwind,
}

/// Coefficient of the discrete Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianScaling {
    /// `dt N^2 = T N^2 / M`, consistent with the drift and noise terms.
    #[default]
    TimeScaled,
    /// `N^2 / M`, i.e. diffusion integrated over unit time whatever `T` is.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SchemeOptions {
    pub transport: TransportStencil,
    pub laplacian: LaplacianScaling,
    /// Stop once `|v1|_H + |v2|_H` reaches this level.
    pub halt_at_norm: Option<f64>,
    pub allow_outside_theory: bool,
}

impl SchemeOptions {
    pub fn diffusion_number(&self, grid: &SpaceTimeGrid) -> f64 {
        let n2 = (grid.n() * grid.n()) as f64;
        match self.laplacian {
            LaplacianScaling::TimeScaled => grid.dt() * n2,
            LaplacianScaling::AsPrinted => n2 / grid.m() as f64,
        }
    }

    pub fn check_stability(&self, grid: &SpaceTimeGrid) -> Result<()> {
        let ratio = self.diffusion_number(grid);
        if ratio > STABILITY_LIMIT {
            return Err(Error::Stability {
                ratio,
                n: grid.n(),
                m: grid.m(),
                t_final: grid.t_final(),
            });
        }
        Ok(())
    }
}

/// Result of one time step, including the values before reflection.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub v1: Profile,
    pub v2: Profile,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub pre1: Vec<f64>,
    pub pre2: Vec<f64>,
    /// Interface speed used for the transport term of this step.
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupReason {
    NonFinite,
    NormLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEvent {
    /// Time index of the step that tripped the monitor.
    pub index: usize,
    pub side: Side,
    /// H-norm of the offending profile (non-finite for `NonFinite`).
    pub h_norm: f64,
    pub reason: BlowupReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub grid: SpaceTimeGrid,
    pub seed: u64,
    pub stream_id: u64,
    pub v1: Vec<Profile>,
    pub v2: Vec<Profile>,
    /// Reflection increments `2 |pre| dx` per cell; row 0 is zero.
    pub eta1: Vec<Vec<f64>>,
    pub eta2: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub boundary_speed: Vec<f64>,
    pub blowup: Option<BlowupEvent>,
}

impl SimulationResult {
    /// Number of stored time levels (`M + 1` for a complete run).
    pub fn len(&self) -> usize {
        self.v1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v1.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.len() == self.grid.m() + 1
    }

    pub fn profiles(&self, side: Side) -> &[Profile] {
        match side {
            Side::One => &self.v1,
            Side::Two => &self.v2,
        }
    }

    pub fn eta(&self, side: Side) -> &[Vec<f64>] {
        match side {
            Side::One => &self.eta1,
            Side::Two => &self.eta2,
        }
    }

    pub fn min_value(&self) -> f64 {
        self.v1
            .iter()
            .chain(&self.v2)
            .map(Profile::min)
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn speed(boundary: &BoundarySpeed, a1: &Profile, a2: &Profile) -> f64 {
    match boundary {
        BoundarySpeed::Classical { gamma } => {
            BoundarySpeed::classical(*gamma, a1.n(), a1[1], a2[1])
        }
        other => other.eval(a1, a2),
    }
}

#[allow(clippy::too_many_arguments)]
fn advance_side(
    v: &Profile,
    arg: &Profile,
    side: Side,
    h: f64,
    t: f64,
    noise: Option<&[f64]>,
    coeffs: &CoefficientSet,
    grid: &SpaceTimeGrid,
    opts: &SchemeOptions,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = grid.n();
    let nf = n as f64;
    let dt = grid.dt();
    let dx = grid.dx();
    let diff = opts.diffusion_number(grid);
    let noise_scale = (dt * nf).sqrt();
    let drift = coeffs.drift(side);
    let sigma = coeffs.sigma(side);
    // Advection velocity of this side: +h ahead of the interface, -h behind.
    let velocity = -side.transport_sign() * h;

    let mut pre = vec![0.0; n + 1];
    let mut post = vec![0.0; n + 1];
    let mut eta = vec![0.0; n + 1];
    for i in 1..n {
        let x = grid.x(i);
        let lap = v[i + 1] + v[i - 1] - 2.0 * v[i];
        let grad = match opts.transport {
            TransportStencil::Forward => arg[i + 1] - arg[i],
            TransportStencil::Upwind if velocity > 0.0 => arg[i] - arg[i - 1],
            TransportStencil::Upwind => arg[i + 1] - arg[i],
        };
        let mut value = v[i] + diff * lap - dt * velocity * nf * grad + dt * drift.eval(x, t, arg[i]);
        if let Some(z) = noise {
            value += noise_scale * sigma.eval(x, t, arg[i]) * z[i];
        }
        pre[i] = value;
        post[i] = value.abs();
        if value < 0.0 {
            eta[i] = 2.0 * value.abs() * dx;
        }
    }
    (post, eta, pre)
}

/// Advances `(v1, v2)` from time index `j` to `j + 1`.
pub fn step(
    v1: &Profile,
    v2: &Profile,
    nf: &NoiseField,
    j: usize,
    coeffs: &CoefficientSet,
    grid: &SpaceTimeGrid,
    opts: &SchemeOptions,
) -> Result<StepOutput> {
    opts.check_stability(grid)?;
    let truncation = coeffs.truncation_map()?;
    step_inner(v1, v2, nf, j, coeffs, grid, opts, truncation.as_ref(), &mut NoiseRows::new(grid.n()))
}

struct NoiseRows {
    one: Vec<f64>,
    two: Vec<f64>,
}

impl NoiseRows {
    fn new(n: usize) -> Self {
        Self {
            one: vec![0.0; n + 1],
            two: vec![0.0; n + 1],
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn step_inner(
    v1: &Profile,
    v2: &Profile,
    nf: &NoiseField,
    j: usize,
    coeffs: &CoefficientSet,
    grid: &SpaceTimeGrid,
    opts: &SchemeOptions,
    truncation: Option<&TruncationMap>,
    rows: &mut NoiseRows,
) -> Result<StepOutput> {
    let t = grid.t(j);
    let a1 = maybe_truncate(truncation, v1);
    let a2 = maybe_truncate(truncation, v2);
    let h = speed(&coeffs.boundary, &a1, &a2);

    let noise1 = if coeffs.sigma1.is_zero() {
        None
    } else {
        nf.fill(j, Side::One, &mut rows.one)?;
        Some(rows.one.as_slice())
    };
    let (post1, eta1, pre1) = advance_side(v1, &a1, Side::One, h, t, noise1, coeffs, grid, opts);
    let noise2 = if coeffs.sigma2.is_zero() {
        None
    } else {
        nf.fill(j, Side::Two, &mut rows.two)?;
        Some(rows.two.as_slice())
    };
    let (post2, eta2, pre2) = advance_side(v2, &a2, Side::Two, h, t, noise2, coeffs, grid, opts);
    Ok(StepOutput {
        v1: Profile::from_interior(post1),
        v2: Profile::from_interior(post2),
        eta1,
        eta2,
        pre1,
        pre2,
        speed: h,
    })
}

pub fn run(
    coeffs: &CoefficientSet,
    grid: &SpaceTimeGrid,
    nf: &NoiseField,
    opts: &SchemeOptions,
) -> Result<SimulationResult> {
    run_observed(coeffs, grid, nf, opts, |_, _| {})
}

/// Like [`run`], calling `observer(j, &output)` after each step from `j`.
pub fn run_observed(
    coeffs: &CoefficientSet,
    grid: &SpaceTimeGrid,
    nf: &NoiseField,
    opts: &SchemeOptions,
    mut observer: impl FnMut(usize, &StepOutput),
) -> Result<SimulationResult> {
    coeffs.validate(opts.allow_outside_theory)?;
    opts.check_stability(grid)?;
    if nf.n() != grid.n() || nf.m() != grid.m() {
        return Err(Error::Mismatch(format!(
            "noise field is {}x{} but grid is {}x{}",
            nf.n(),
            nf.m(),
            grid.n(),
            grid.m()
        )));
    }
    let truncation = coeffs.truncation_map()?;
    let n = grid.n();
    let dt = grid.dt();

    let v1_0 = coeffs.u0_1.profile(n);
    let v2_0 = coeffs.u0_2.profile(n);
    let speed_0 = {
        let a1 = maybe_truncate(truncation.as_ref(), &v1_0);
        let a2 = maybe_truncate(truncation.as_ref(), &v2_0);
        speed(&coeffs.boundary, &a1, &a2)
    };

    let capacity = grid.m() + 1;
    let mut result = SimulationResult {
        grid: *grid,
        seed: nf.seed(),
        stream_id: nf.stream_id(),
        v1: Vec::with_capacity(capacity),
        v2: Vec::with_capacity(capacity),
        eta1: Vec::with_capacity(capacity),
        eta2: Vec::with_capacity(capacity),
        p: Vec::with_capacity(capacity),
        boundary_speed: Vec::with_capacity(capacity),
        blowup: None,
    };
    result.v1.push(v1_0);
    result.v2.push(v2_0);
    result.eta1.push(vec![0.0; n + 1]);
    result.eta2.push(vec![0.0; n + 1]);
    result.p.push(coeffs.p0);
    result.boundary_speed.push(speed_0);

    let mut rows = NoiseRows::new(n);
    for j in 0..grid.m() {
        let out = step_inner(
            &result.v1[j],
            &result.v2[j],
            nf,
            j,
            coeffs,
            grid,
            opts,
            truncation.as_ref(),
            &mut rows,
        )?;
        observer(j, &out);

        let non_finite = [(Side::One, &out.v1), (Side::Two, &out.v2)]
            .into_iter()
            .find(|(_, v)| !v.is_finite());
        if let Some((side, v)) = non_finite {
            result.blowup = Some(BlowupEvent {
                index: j + 1,
                side,
                h_norm: v.h_norm(),
                reason: BlowupReason::NonFinite,
            });
            break;
        }

        let a1 = maybe_truncate(truncation.as_ref(), &out.v1);
        let a2 = maybe_truncate(truncation.as_ref(), &out.v2);
        let h_next = speed(&coeffs.boundary, &a1, &a2);
        if !h_next.is_finite() {
            result.blowup = Some(BlowupEvent {
                index: j + 1,
                side: Side::One,
                h_norm: f64::INFINITY,
                reason: BlowupReason::NonFinite,
            });
            break;
        }
        let norms = (out.v1.h_norm(), out.v2.h_norm());
        let p_next = result.p[j] + dt * h_next;
        result.v1.push(out.v1);
        result.v2.push(out.v2);
        result.eta1.push(out.eta1);
        result.eta2.push(out.eta2);
        result.p.push(p_next);
        result.boundary_speed.push(h_next);

        if let Some(level) = opts.halt_at_norm {
            if norms.0 + norms.1 >= level {
                let (side, h_norm) = if norms.0 >= norms.1 {
                    (Side::One, norms.0)
                } else {
                    (Side::Two, norms.1)
                };
                result.blowup = Some(BlowupEvent {
                    index: j + 1,
                    side,
                    h_norm,
                    reason: BlowupReason::NormLevel,
                });
                break;
            }
        }
    }
    Ok(result)
}

/// First passage of the combined norm and of the interface speed above a level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exceedance {
    pub level: f64,
    pub speed_level: f64,
    /// First `j` with `|v1(t_j)|_H + |v2(t_j)|_H >= level`.
    pub norm_index: Option<usize>,
    /// First `j` with `|p'(t_j)| >= speed_level`.
    pub speed_index: Option<usize>,
}

/// First-exceedance table. The speed threshold for level `M` is
/// `speed_scale * M`; for the classical speed `gamma (v1'(0) - v2'(0))` the
/// natural choice is `speed_scale = gamma`, since `|h| <= gamma (|v1|_H + |v2|_H)`.
pub fn monitor_blowup(result: &SimulationResult, levels: &[f64], speed_scale: f64) -> Vec<Exceedance> {
    let norms: Vec<f64> = result
        .v1
        .iter()
        .zip(&result.v2)
        .map(|(a, b)| a.h_norm() + b.h_norm())
        .collect();
    levels
        .iter()
        .map(|&level| {
            let speed_level = speed_scale * level;
            Exceedance {
                level,
                speed_level,
                norm_index: norms.iter().position(|&v| v >= level),
                speed_index: result
                    .boundary_speed
                    .iter()
                    .position(|&s| s.abs() >= speed_level),
            }
        })
        .collect()
}
