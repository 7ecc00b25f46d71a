//! The Dirichlet heat kernel on `[0, 1]` by the method of images,
//!
//! ```text
//! G(t,x,y) = (4 pi t)^{-1/2} sum_n [ exp(-(x-y+2n)^2/4t) - exp(-(x+y+2n)^2/4t) ],
//! ```
//!
//! its analytic derivatives, and the weighted kernels
//! `Gtilde = (y/x) G` and `Htilde = (y/x) dG/dy` with their `x = 0` limits.

mod estimates;

pub use estimates::{
    verify_all, verify_estimate, EstimateConfig, EstimateId, EstimateReport, RateCurve, SweepPoint,
};

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Kernel value together with its first and mixed derivatives at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KernelTerms {
    pub g: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxdy: f64,
}

/// Truncation parameters for the image series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatKernel {
    image_terms: usize,
    t_floor: f64,
}

impl Default for HeatKernel {
    fn default() -> Self {
        Self {
            image_terms: 9,
            t_floor: 1e-6,
        }
    }
}

impl HeatKernel {
    /// `image_terms` is the (odd) number of shifts `n` kept at small `t`.
    pub fn new(image_terms: usize, t_floor: f64) -> Result<Self> {
        if image_terms % 2 == 0 || image_terms == 0 {
            return Err(Error::Config(format!(
                "image_terms must be a positive odd integer, got {image_terms}"
            )));
        }
        if !(t_floor > 0.0) {
            return Err(Error::Config(format!("t_floor must be positive, got {t_floor}")));
        }
        Ok(Self {
            image_terms,
            t_floor,
        })
    }

    pub fn image_terms(&self) -> usize {
        self.image_terms
    }

    pub fn t_floor(&self) -> f64 {
        self.t_floor
    }

    /// Half-width of the shift range actually summed at time `t`.
    ///
    /// The configured count is widened for large `t` so that the first
    /// omitted Gaussian is below `exp(-37) < 1e-16`.
    pub fn half_width(&self, t: f64) -> i64 {
        let configured = ((self.image_terms - 1) / 2) as i64;
        let needed = (37.0 * t).sqrt().ceil() as i64 + 1;
        configured.max(needed)
    }

    /// Upper bound on the magnitude of the first omitted image term at `t`.
    pub fn omitted_bound(&self, t: f64) -> f64 {
        let h = self.half_width(t) as f64;
        (-(2.0 * h) * (2.0 * h) / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
    }

    fn check(&self, t: f64) -> Result<()> {
        if t < self.t_floor || !t.is_finite() {
            return Err(Error::BelowTimeFloor {
                t,
                floor: self.t_floor,
            });
        }
        Ok(())
    }

    /// All kernel terms at `(t, x, y)`, without the floor check.
    pub(crate) fn terms_unchecked(&self, t: f64, x: f64, y: f64) -> KernelTerms {
        let h = self.half_width(t);
        let inv4t = 1.0 / (4.0 * t);
        let inv2t = 2.0 * inv4t;
        let mut out = KernelTerms::default();
        for n in -h..=h {
            let shift = 2.0 * n as f64;
            let a = x - y + shift;
            let b = x + y + shift;
            let ea = (-a * a * inv4t).exp();
            let eb = (-b * b * inv4t).exp();
            out.g += ea - eb;
            out.dx += -a * inv2t * ea + b * inv2t * eb;
            out.dy += a * inv2t * ea + b * inv2t * eb;
            out.dxdy += ea * (inv2t - a * a * inv2t * inv2t) + eb * (inv2t - b * b * inv2t * inv2t);
        }
        let norm = 1.0 / (4.0 * PI * t).sqrt();
        out.g *= norm;
        out.dx *= norm;
        out.dy *= norm;
        out.dxdy *= norm;
        // The image sum cancels exactly on the Dirichlet boundary.
        if x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0 {
            out.g = 0.0;
        }
        if x == 0.0 || x == 1.0 {
            out.dy = 0.0;
        }
        if y == 0.0 || y == 1.0 {
            out.dx = 0.0;
        }
        out
    }

    #[inline]
    pub(crate) fn g_unchecked(&self, t: f64, x: f64, y: f64) -> f64 {
        if x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0 {
            return 0.0;
        }
        let h = self.half_width(t);
        let inv4t = 1.0 / (4.0 * t);
        let mut acc = 0.0;
        for n in -h..=h {
            let shift = 2.0 * n as f64;
            let a = x - y + shift;
            let b = x + y + shift;
            acc += (-a * a * inv4t).exp() - (-b * b * inv4t).exp();
        }
        acc / (4.0 * PI * t).sqrt()
    }

    #[inline]
    pub(crate) fn g_tilde_unchecked(&self, t: f64, x: f64, y: f64) -> f64 {
        if x == 0.0 {
            y * self.terms_unchecked(t, 0.0, y).dx
        } else {
            y / x * self.g_unchecked(t, x, y)
        }
    }

    #[inline]
    pub(crate) fn h_tilde_unchecked(&self, t: f64, x: f64, y: f64) -> f64 {
        if x == 0.0 {
            y * self.terms_unchecked(t, 0.0, y).dxdy
        } else {
            y / x * self.terms_unchecked(t, x, y).dy
        }
    }

    pub fn terms(&self, t: f64, x: f64, y: f64) -> Result<KernelTerms> {
        self.check(t)?;
        Ok(self.terms_unchecked(t, x, y))
    }

    pub fn g(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.g_unchecked(t, x, y))
    }

    pub fn dg_dx(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        Ok(self.terms(t, x, y)?.dx)
    }

    pub fn dg_dy(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        Ok(self.terms(t, x, y)?.dy)
    }

    pub fn d2g_dxdy(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        Ok(self.terms(t, x, y)?.dxdy)
    }

    /// `(y/x) G`, and `y dG/dx(t, 0, y)` at `x = 0`.
    pub fn g_tilde(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.g_tilde_unchecked(t, x, y))
    }

    /// `(y/x) dG/dy`, and `y d2G/dydx(t, 0, y)` at `x = 0`.
    pub fn h_tilde(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.h_tilde_unchecked(t, x, y))
    }

    /// `int_0^1 G(t, x, y) u0(y) dy` by composite Simpson with `n` panels.
    pub fn propagate(&self, t: f64, x: f64, u0: impl Fn(f64) -> f64, n: usize) -> Result<f64> {
        self.check(t)?;
        let v = crate::quadrature::simpson(|y| self.g_unchecked(t, x, y) * u0(y), 0.0, 1.0, n);
        if !v.is_finite() {
            return Err(Error::Quadrature(format!("propagate at t={t}, x={x}")));
        }
        Ok(v)
    }
}
