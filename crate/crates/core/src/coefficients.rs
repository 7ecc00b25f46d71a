//! Problem data: drifts, volatilities, the boundary-speed functional, initial
//! profiles and the optional truncation level, plus the built-in presets.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::profile::{Profile, TruncationMap};
use crate::Side;

pub type PointFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type SpeedFn = Arc<dyn Fn(&Profile, &Profile) -> f64 + Send + Sync>;
pub type ShapeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Drift `f(x, t, u)` evaluated at the local value `u = v(t, x)`.
#[derive(Clone)]
pub enum Drift {
    Zero,
    Constant(f64),
    /// `f = slope * u`.
    Linear(f64),
    Custom(PointFn),
}

impl Drift {
    #[inline]
    pub fn eval(&self, x: f64, t: f64, u: f64) -> f64 {
        match self {
            Drift::Zero => 0.0,
            Drift::Constant(c) => *c,
            Drift::Linear(a) => a * u,
            Drift::Custom(f) => f(x, t, u),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Drift::Zero => Drift::Zero,
            Drift::Constant(c) => Drift::Constant(c * factor),
            Drift::Linear(a) => Drift::Linear(a * factor),
            Drift::Custom(f) => {
                let f = f.clone();
                Drift::Custom(Arc::new(move |x, t, u| factor * f(x, t, u)))
            }
        }
    }
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::Zero => write!(f, "Zero"),
            Drift::Constant(c) => write!(f, "Constant({c})"),
            Drift::Linear(a) => write!(f, "Linear({a})"),
            Drift::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Volatility `sigma(x, t, u)`.
#[derive(Clone)]
pub enum Volatility {
    Zero,
    Constant(f64),
    /// Piecewise linear through `(0, 0)`, `(0.5, 1)`, `(1, 1)`.
    Tent,
    /// `sigma = scale * u`.
    Multiplicative(f64),
    /// `sigma = sqrt(x)`; decays too slowly at the interface for the
    /// existence theory.
    SqrtX,
    Custom(PointFn),
}

impl Volatility {
    #[inline]
    pub fn eval(&self, x: f64, t: f64, u: f64) -> f64 {
        match self {
            Volatility::Zero => 0.0,
            Volatility::Constant(c) => *c,
            Volatility::Tent => (2.0 * x).min(1.0),
            Volatility::Multiplicative(s) => s * u,
            Volatility::SqrtX => x.sqrt(),
            Volatility::Custom(f) => f(x, t, u),
        }
    }

    /// Whether `|sigma(x, t, 0)| <= C x` near the interface. Custom
    /// volatilities are taken on trust.
    pub fn has_linear_decay(&self) -> bool {
        match self {
            Volatility::Constant(c) => *c == 0.0,
            Volatility::SqrtX => false,
            _ => true,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Volatility::Zero) || matches!(self, Volatility::Constant(c) if *c == 0.0)
    }
}

impl fmt::Debug for Volatility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Volatility::Zero => write!(f, "Zero"),
            Volatility::Constant(c) => write!(f, "Constant({c})"),
            Volatility::Tent => write!(f, "Tent"),
            Volatility::Multiplicative(s) => write!(f, "Multiplicative({s})"),
            Volatility::SqrtX => write!(f, "SqrtX"),
            Volatility::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Interface speed `p'(t) = h(v1, v2)`.
#[derive(Clone)]
pub enum BoundarySpeed {
    /// `gamma * (v1'(0) - v2'(0))` with `v'(0) ~ N v[1]`.
    Classical { gamma: f64 },
    Custom(SpeedFn),
}

impl BoundarySpeed {
    pub fn eval(&self, v1: &Profile, v2: &Profile) -> f64 {
        match self {
            BoundarySpeed::Classical { gamma } => {
                let n = v1.n() as f64;
                gamma * n * (v1[1] - v2[1])
            }
            BoundarySpeed::Custom(h) => h(v1, v2),
        }
    }

    /// Pointwise classical form on the first interior values.
    #[inline]
    pub(crate) fn classical(gamma: f64, n: usize, v1_first: f64, v2_first: f64) -> f64 {
        gamma * n as f64 * (v1_first - v2_first)
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            BoundarySpeed::Classical { gamma } => Some(*gamma),
            BoundarySpeed::Custom(_) => None,
        }
    }
}

impl fmt::Debug for BoundarySpeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundarySpeed::Classical { gamma } => write!(f, "Classical {{ gamma: {gamma} }}"),
            BoundarySpeed::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Clone)]
pub enum InitialCondition {
    Zero,
    /// `u0(0) = u0(1) = 0`, `u0(0.5) = 1`, linear in between.
    Tent,
    Sine { amplitude: f64 },
    Custom(ShapeFn),
}

impl InitialCondition {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialCondition::Zero => 0.0,
            InitialCondition::Tent => tent(x),
            InitialCondition::Sine { amplitude } => amplitude * (std::f64::consts::PI * x).sin(),
            InitialCondition::Custom(f) => f(x),
        }
    }

    pub fn profile(&self, n: usize) -> Profile {
        Profile::from_fn(n, |x| self.eval(x))
    }
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Zero => write!(f, "Zero"),
            InitialCondition::Tent => write!(f, "Tent"),
            InitialCondition::Sine { amplitude } => write!(f, "Sine {{ amplitude: {amplitude} }}"),
            InitialCondition::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

pub fn tent(x: f64) -> f64 {
    if (0.0..=0.5).contains(&x) {
        2.0 * x
    } else if (0.5..=1.0).contains(&x) {
        2.0 * (1.0 - x)
    } else {
        0.0
    }
}

/// The three volatility choices of the numerical study, plus a noiseless
/// heat-flow configuration used by the oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    SigmaA,
    SigmaB,
    SigmaC,
    Heat,
}

impl Preset {
    pub const TABLE: [Preset; 3] = [Preset::SigmaA, Preset::SigmaB, Preset::SigmaC];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::SigmaA => "sigma_a",
            Preset::SigmaB => "sigma_b",
            Preset::SigmaC => "sigma_c",
            Preset::Heat => "heat",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sigma_a" => Some(Preset::SigmaA),
            "sigma_b" => Some(Preset::SigmaB),
            "sigma_c" => Some(Preset::SigmaC),
            "heat" => Some(Preset::Heat),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub f1: Drift,
    pub f2: Drift,
    pub sigma1: Volatility,
    pub sigma2: Volatility,
    pub boundary: BoundarySpeed,
    pub u0_1: InitialCondition,
    pub u0_2: InitialCondition,
    pub truncation: Option<f64>,
    pub p0: f64,
}

/// Outcome of [`CoefficientSet::validate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Validation {
    pub outside_theory: bool,
    pub warnings: Vec<String>,
}

impl CoefficientSet {
    pub fn preset(preset: Preset) -> Self {
        let sigma = match preset {
            Preset::SigmaA => Volatility::Tent,
            Preset::SigmaB => Volatility::Multiplicative(1.0),
            Preset::SigmaC => Volatility::SqrtX,
            Preset::Heat => Volatility::Zero,
        };
        let (drift, gamma) = match preset {
            Preset::Heat => (Drift::Zero, 0.0),
            _ => (Drift::Constant(1.0), 10.0),
        };
        Self {
            f1: drift.clone(),
            f2: drift,
            sigma1: sigma.clone(),
            sigma2: sigma,
            boundary: BoundarySpeed::Classical { gamma },
            u0_1: InitialCondition::Tent,
            u0_2: InitialCondition::Tent,
            truncation: None,
            p0: 0.0,
        }
    }

    /// Same drift, volatility and initial data on both sides.
    pub fn symmetric(drift: Drift, sigma: Volatility, gamma: f64, u0: InitialCondition) -> Self {
        Self {
            f1: drift.clone(),
            f2: drift,
            sigma1: sigma.clone(),
            sigma2: sigma,
            boundary: BoundarySpeed::Classical { gamma },
            u0_1: u0.clone(),
            u0_2: u0,
            truncation: None,
            p0: 0.0,
        }
    }

    pub fn with_truncation(mut self, level: f64) -> Self {
        self.truncation = Some(level);
        self
    }

    pub fn drift(&self, side: Side) -> &Drift {
        match side {
            Side::One => &self.f1,
            Side::Two => &self.f2,
        }
    }

    pub fn sigma(&self, side: Side) -> &Volatility {
        match side {
            Side::One => &self.sigma1,
            Side::Two => &self.sigma2,
        }
    }

    pub fn initial(&self, side: Side) -> &InitialCondition {
        match side {
            Side::One => &self.u0_1,
            Side::Two => &self.u0_2,
        }
    }

    pub fn truncation_map(&self) -> Result<Option<TruncationMap>> {
        self.truncation.map(TruncationMap::new).transpose()
    }

    pub fn validate(&self, allow_outside_theory: bool) -> Result<Validation> {
        let mut out = Validation::default();
        if let BoundarySpeed::Classical { gamma } = self.boundary {
            if !(gamma >= 0.0 && gamma.is_finite()) {
                return Err(Error::Coefficients(format!(
                    "gamma must be a non-negative finite number, got {gamma}"
                )));
            }
        }
        if let Some(level) = self.truncation {
            if !(level > 0.0) {
                return Err(Error::Coefficients(format!(
                    "truncation level must be positive, got {level}"
                )));
            }
        }
        if !self.p0.is_finite() {
            return Err(Error::Coefficients("initial boundary position must be finite".into()));
        }
        for (side, sigma) in [(1, &self.sigma1), (2, &self.sigma2)] {
            if !sigma.has_linear_decay() {
                let msg = format!(
                    "sigma{side} = {sigma:?} violates the linear-decay condition \
                     |sigma(x,t,0)| <= C_T x at the interface"
                );
                if !allow_outside_theory {
                    return Err(Error::Coefficients(format!(
                        "{msg}; set allow_outside_theory to simulate it anyway"
                    )));
                }
                out.outside_theory = true;
                out.warnings.push(msg);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_shapes() {
        let c = CoefficientSet::preset(Preset::SigmaA);
        assert_eq!(c.f1.eval(0.3, 0.0, 5.0), 1.0);
        assert_eq!(c.boundary.gamma(), Some(10.0));
        assert_eq!(c.u0_1.eval(0.5), 1.0);
        assert_eq!(c.u0_1.eval(0.25), 0.5);
        assert_eq!(c.u0_1.eval(0.0), 0.0);
        assert_eq!(c.u0_1.eval(1.0), 0.0);
        assert_eq!(c.sigma1.eval(0.0, 0.0, 1.0), 0.0);
        assert_eq!(c.sigma1.eval(0.25, 0.0, 1.0), 0.5);
        assert_eq!(c.sigma1.eval(0.5, 0.0, 1.0), 1.0);
        assert_eq!(c.sigma1.eval(0.9, 0.0, 1.0), 1.0);

        let b = CoefficientSet::preset(Preset::SigmaB);
        assert_eq!(b.sigma1.eval(0.3, 0.0, 0.7), 0.7);
        let s = CoefficientSet::preset(Preset::SigmaC);
        assert_eq!(s.sigma2.eval(0.25, 0.0, 0.0), 0.5);
    }

    #[test]
    fn sqrt_volatility_needs_explicit_opt_in() {
        let c = CoefficientSet::preset(Preset::SigmaC);
        let err = c.validate(false).unwrap_err().to_string();
        assert!(err.contains("linear-decay"), "{err}");
        let v = c.validate(true).unwrap();
        assert!(v.outside_theory);
        assert_eq!(v.warnings.len(), 2);

        for p in [Preset::SigmaA, Preset::SigmaB, Preset::Heat] {
            let v = CoefficientSet::preset(p).validate(false).unwrap();
            assert!(!v.outside_theory);
        }
    }

    #[test]
    fn rejects_bad_truncation_and_gamma() {
        let c = CoefficientSet::preset(Preset::SigmaA).with_truncation(0.0);
        assert!(c.validate(false).is_err());
        let mut c = CoefficientSet::preset(Preset::SigmaA);
        c.boundary = BoundarySpeed::Classical { gamma: -1.0 };
        assert!(c.validate(false).is_err());
    }

    #[test]
    fn classical_speed_uses_first_interior_node() {
        let v1 = Profile::from_fn(10, |x| 2.0 * x * (1.0 - x));
        let v2 = Profile::zeros(10);
        let h = BoundarySpeed::Classical { gamma: 10.0 };
        assert!((h.eval(&v1, &v2) - 10.0 * 10.0 * v1[1]).abs() < 1e-12);
    }
}
