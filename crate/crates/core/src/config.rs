//! Run configuration as a TOML document. Every table is optional; missing
//! keys take the defaults below and unknown keys are rejected.
//!
//! ```toml
//! mode = "simulate"          # simulate | ensemble | obstacle | picard | verify-kernel | diagnose
//! preset = "sigma_a"         # sigma_a | sigma_b | sigma_c | heat
//! seed = 1
//! n_seeds = 20
//! output_dir = "out"
//!
//! [grid]
//! n = 128
//! t = 0.1
//! # m defaults to ceil(4 t n^2)
//!
//! [flags]
//! upwind = false
//! truncation = 10.0
//! allow_outside_theory = false
//! ```
//!
//! The tables `[coefficients]`, `[monitor]`, `[output]`,
//! `[obstacle]`, `[picard]`, `[kernel]` and `[diagnose]` are described on
//! their types.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::coefficients::{
    BoundarySpeed, CoefficientSet, Drift, InitialCondition, Preset, Volatility,
};
use crate::diagnostics::Window;
use crate::error::{Error, Result};
use crate::grid::{default_time_steps, SpaceTimeGrid};
use crate::obstacle::PenaltySchedule;
use crate::scheme::{LaplacianScaling, SchemeOptions, TransportStencil};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Simulate,
    Ensemble,
    Obstacle,
    Picard,
    VerifyKernel,
    Diagnose,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Ensemble => "ensemble",
            Mode::Obstacle => "obstacle",
            Mode::Picard => "picard",
            Mode::VerifyKernel => "verify-kernel",
            Mode::Diagnose => "diagnose",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            Mode::Simulate,
            Mode::Ensemble,
            Mode::Obstacle,
            Mode::Picard,
            Mode::VerifyKernel,
            Mode::Diagnose,
        ]
        .into_iter()
        .find(|m| m.as_str() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub t: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 128,
            m: None,
            t: 0.1,
        }
    }
}

impl GridSpec {
    pub fn steps(&self) -> usize {
        self.m.unwrap_or_else(|| default_time_steps(self.n, self.t))
    }

    pub fn build(&self) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::new(self.n, self.steps(), self.t)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    #[serde(default)]
    pub upwind: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    #[serde(default)]
    pub allow_outside_theory: bool,
    #[serde(default)]
    pub laplacian: LaplacianScaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    Constant { value: f64 },
    Linear { slope: f64 },
}

impl DriftSpec {
    fn build(&self) -> Drift {
        match *self {
            DriftSpec::Zero => Drift::Zero,
            DriftSpec::Constant { value } => Drift::Constant(value),
            DriftSpec::Linear { slope } => Drift::Linear(slope),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolatilitySpec {
    Zero,
    Constant { value: f64 },
    Tent,
    Multiplicative { scale: f64 },
    SqrtX,
}

impl VolatilitySpec {
    fn build(&self) -> Volatility {
        match *self {
            VolatilitySpec::Zero => Volatility::Zero,
            VolatilitySpec::Constant { value } => Volatility::Constant(value),
            VolatilitySpec::Tent => Volatility::Tent,
            VolatilitySpec::Multiplicative { scale } => Volatility::Multiplicative(scale),
            VolatilitySpec::SqrtX => Volatility::SqrtX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Zero,
    Tent,
    Sine { amplitude: f64 },
}

impl InitialSpec {
    fn build(&self) -> InitialCondition {
        match *self {
            InitialSpec::Zero => InitialCondition::Zero,
            InitialSpec::Tent => InitialCondition::Tent,
            InitialSpec::Sine { amplitude } => InitialCondition::Sine { amplitude },
        }
    }
}

/// `[coefficients]`: overrides applied on top of the preset. Each of
/// `f1`, `f2`, `sigma1`, `sigma2`, `u0_1`, `u0_2` is an inline table with a
/// `kind` key, e.g. `f1 = { kind = "constant", value = 2.0 }`.
/// `f1_scale` multiplies side one's drift after the override.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<DriftSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f2: Option<DriftSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<VolatilitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<VolatilitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0_1: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0_2: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_scale: Option<f64>,
}

/// `[monitor]`: first-exceedance table and optional early stop.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSpec {
    #[serde(default)]
    pub levels: Vec<f64>,
    /// Speed threshold per unit level; defaults to `gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halt_at_norm: Option<f64>,
}

/// `[output]`: trajectory files keep every `stride`-th time row (the final
/// row is always kept). Ensemble members write trajectories only when
/// `ensemble_trajectories` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub ensemble_trajectories: bool,
}

fn default_stride() -> usize {
    1
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            stride: 1,
            ensemble_trajectories: false,
        }
    }
}

/// `[obstacle]`: the contact obstacle
/// `z(t, x) = min(1, t / ramp) * s * (s - level)`, `s = sin(pi x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObstacleSpec {
    pub ramp: f64,
    pub level: f64,
    pub eps_start: f64,
    pub eps_min: f64,
    pub eps_factor: f64,
    /// Solve the constrained step directly instead of penalizing.
    #[serde(default)]
    pub exact: bool,
}

impl Default for ObstacleSpec {
    fn default() -> Self {
        let s = PenaltySchedule::default();
        Self {
            ramp: 0.01,
            level: 0.9,
            eps_start: s.start,
            eps_min: s.min,
            eps_factor: s.factor,
            exact: false,
        }
    }
}

impl ObstacleSpec {
    pub fn schedule(&self) -> PenaltySchedule {
        PenaltySchedule {
            start: self.eps_start,
            min: self.eps_min,
            factor: self.eps_factor,
        }
    }

    pub fn obstacle(&self) -> impl Fn(f64, f64) -> f64 + '_ {
        move |t, x| {
            let s = (std::f64::consts::PI * x).sin();
            (t / self.ramp).min(1.0) * s * (s - self.level)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSpec {
    pub n_max: usize,
    pub d_tol: f64,
    /// Penalized reflection down to this level instead of the exact step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_eps_min: Option<f64>,
}

impl Default for PicardSpec {
    fn default() -> Self {
        Self {
            n_max: 15,
            d_tol: 1e-6,
            penalty_eps_min: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub image_terms: usize,
    pub t_floor: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            image_terms: 9,
            t_floor: 1e-6,
        }
    }
}

/// `[diagnose]`: post-process a trajectory written by `simulate`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub window: Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub coefficients: CoefficientOverrides,
    #[serde(default)]
    pub monitor: MonitorSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub obstacle: ObstacleSpec,
    #[serde(default)]
    pub picard: PicardSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub diagnose: DiagnoseSpec,
}

fn default_preset() -> String {
    Preset::SigmaA.name().to_string()
}

fn default_n_seeds() -> u64 {
    20
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::default(),
            preset: default_preset(),
            seed: 0,
            n_seeds: default_n_seeds(),
            output_dir: default_output_dir(),
            grid: GridSpec::default(),
            flags: Flags::default(),
            coefficients: CoefficientOverrides::default(),
            monitor: MonitorSpec::default(),
            output: OutputSpec::default(),
            obstacle: ObstacleSpec::default(),
            picard: PicardSpec::default(),
            kernel: KernelSpec::default(),
            diagnose: DiagnoseSpec::default(),
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config = RunConfig::from_toml(text)?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Parses without validating, for callers that apply overrides first.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn preset(&self) -> Result<Preset> {
        Preset::from_name(&self.preset)
            .ok_or_else(|| Error::Config(format!("preset: unknown name {:?}", self.preset)))
    }

    pub fn coefficient_set(&self) -> Result<CoefficientSet> {
        let mut c = CoefficientSet::preset(self.preset()?);
        let o = &self.coefficients;
        if let Some(d) = &o.f1 {
            c.f1 = d.build();
        }
        if let Some(d) = &o.f2 {
            c.f2 = d.build();
        }
        if let Some(s) = &o.sigma1 {
            c.sigma1 = s.build();
        }
        if let Some(s) = &o.sigma2 {
            c.sigma2 = s.build();
        }
        if let Some(u) = &o.u0_1 {
            c.u0_1 = u.build();
        }
        if let Some(u) = &o.u0_2 {
            c.u0_2 = u.build();
        }
        if let Some(gamma) = o.gamma {
            c.boundary = BoundarySpeed::Classical { gamma };
        }
        if let Some(p0) = o.p0 {
            c.p0 = p0;
        }
        if let Some(scale) = o.f1_scale {
            c.f1 = c.f1.scaled(scale);
        }
        c.truncation = self.flags.truncation;
        Ok(c)
    }

    pub fn scheme_options(&self) -> SchemeOptions {
        SchemeOptions {
            transport: if self.flags.upwind {
                TransportStencil::Upwind
            } else {
                TransportStencil::Forward
            },
            laplacian: self.flags.laplacian,
            halt_at_norm: self.monitor.halt_at_norm,
            allow_outside_theory: self.flags.allow_outside_theory,
        }
    }

    /// Checks every constraint that does not need the output directory.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        let needs_grid_gate = matches!(self.mode, Mode::Simulate | Mode::Ensemble);
        if needs_grid_gate || self.mode == Mode::Picard {
            self.scheme_options().check_stability(&grid)?;
        }
        let coeffs = self.coefficient_set()?;
        coeffs.validate(self.flags.allow_outside_theory)?;
        if self.mode == Mode::Ensemble && self.n_seeds < 2 {
            return Err(Error::Config(format!("n_seeds: ensemble needs at least 2, got {}", self.n_seeds)));
        }
        if self.output.stride == 0 {
            return Err(Error::Config("output.stride: must be positive".into()));
        }
        if self.mode == Mode::Picard && self.flags.truncation.is_none() {
            return Err(Error::Config("flags.truncation: required in picard mode".into()));
        }
        if self.mode == Mode::Obstacle {
            self.obstacle.schedule().epsilons()?;
            if !(self.obstacle.ramp > 0.0) {
                return Err(Error::Config("obstacle.ramp: must be positive".into()));
            }
        }
        if self.mode == Mode::Diagnose && self.diagnose.input.is_none() {
            return Err(Error::Config("diagnose.input: required in diagnose mode".into()));
        }
        if let Some(level) = self.monitor.halt_at_norm {
            if !(level > 0.0) {
                return Err(Error::Config("monitor.halt_at_norm: must be positive".into()));
            }
        }
        Window::new(self.diagnose.window.lo, self.diagnose.window.hi)?;
        crate::heat_kernel::HeatKernel::new(self.kernel.image_terms, self.kernel.t_floor)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config("mode = \"simulate\"\npreset = \"sigma_a\"\nseed = 1\n").unwrap();
        assert_eq!(c.grid.n, 128);
        assert_eq!(c.grid.t, 0.1);
        assert_eq!(c.grid.steps(), 6554);
        assert_eq!(c.seed, 1);
        let coeffs = c.coefficient_set().unwrap();
        assert_eq!(coeffs.boundary.gamma(), Some(10.0));
        assert!(matches!(coeffs.f1, Drift::Constant(v) if v == 1.0));
        assert!(matches!(coeffs.u0_1, InitialCondition::Tent));
    }

    #[test]
    fn stability_gate_rejects_coarse_time_grid() {
        let err = parse_config("[grid]\nn = 128\nm = 100\nt = 0.1\n").unwrap_err();
        match err {
            Error::Stability { ratio, .. } => assert!((ratio - 16.384).abs() < 1e-9),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn sigma_c_needs_the_flag() {
        let err = parse_config("preset = \"sigma_c\"\n").unwrap_err();
        assert!(err.to_string().contains("linear-decay"), "{err}");
        parse_config("preset = \"sigma_c\"\n[flags]\nallow_outside_theory = true\n").unwrap();
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config("mode = \"simulate\"\nsede = 3\n").unwrap_err();
        assert!(err.to_string().contains("sede"), "{err}");
        let err = parse_config("[grid]\nn = 16\nt = 0.1\nstep = 4\n").unwrap_err();
        assert!(err.to_string().contains("step"), "{err}");
    }

    #[test]
    fn parse_errors_report_position() {
        let err = parse_config("mode = \"simulate\"\nseed = = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut c = RunConfig::default();
        c.mode = Mode::Ensemble;
        c.preset = "sigma_b".into();
        c.seed = 42;
        c.grid = GridSpec {
            n: 64,
            m: Some(2000),
            t: 0.05,
        };
        c.flags.truncation = Some(10.0);
        c.flags.upwind = true;
        c.coefficients.f1 = Some(DriftSpec::Constant { value: 0.1 + 0.2 });
        c.coefficients.sigma2 = Some(VolatilitySpec::Multiplicative { scale: 0.5 });
        c.coefficients.u0_2 = Some(InitialSpec::Sine { amplitude: 0.25 });
        c.monitor.levels = vec![10.0, 50.0];
        c.diagnose.window = Window::new(0.0, 0.08).unwrap();
        let text = c.to_toml();
        assert_eq!(parse_config(&text).unwrap(), c);
        assert_eq!(parse_config(&RunConfig::default().to_toml()).unwrap(), RunConfig::default());
    }

    #[test]
    fn mode_specific_requirements() {
        assert!(parse_config("mode = \"picard\"\n[grid]\nn = 32\nt = 0.025\n").is_err());
        parse_config("mode = \"picard\"\n[grid]\nn = 32\nt = 0.025\n[flags]\ntruncation = 10.0\n").unwrap();
        assert!(parse_config("mode = \"diagnose\"\n").is_err());
        assert!(parse_config("mode = \"ensemble\"\nn_seeds = 1\n").is_err());
        assert!(parse_config("preset = \"sigma_z\"\n").is_err());
    }

    #[test]
    fn overrides_apply() {
        let c = parse_config(
            "[coefficients]\nf1 = { kind = \"linear\", slope = 0.5 }\nf1_scale = 4.0\ngamma = 0.0\n",
        )
        .unwrap();
        let coeffs = c.coefficient_set().unwrap();
        assert_eq!(coeffs.f1.eval(0.3, 0.0, 2.0), 4.0);
        assert_eq!(coeffs.f2.eval(0.3, 0.0, 2.0), 1.0);
        assert_eq!(coeffs.boundary.gamma(), Some(0.0));
    }
}
