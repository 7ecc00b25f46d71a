//! Numerical sweeps of the five kernel bounds the existence theory uses.
//!
//! Each sweep computes the bounded quantity by quadrature, divides it by the
//! claimed rate and reports the resulting "constant" across the sweep. A bound
//! is accepted when the rate-scaled values stay within a fixed spread and show
//! no growth towards the singular end of the parameter range.

use rayon::prelude::*;
use serde::Serialize;

use super::HeatKernel;
use crate::error::{Error, Result};
use crate::quadrature::{simpson, simpson_windows};

/// Gaussian windows extend this many `sqrt(t)` either side of their centre.
const WINDOW_SIGMAS: f64 = 12.0;

/// Relative slack below which consecutive values count as equal when
/// looking for growth.
const GROWTH_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EstimateId {
    /// `sqrt(t) sup_x int |G(t,x,y)/x| dy`
    KernelOverX,
    /// `sqrt(t) sup_x int Gtilde(t,x,y)^2 dy`
    GtildeSquared,
    /// `int_0^T [int (Gtilde(s,x,.) - Gtilde(s,y,.))^2]^q ds / |x-y|^((2-q)/3)`
    SpaceIncrement,
    /// `sup_x int_0^s [int (Gtilde(t-r,x,.) - Gtilde(s-r,x,.))^2]^q dr / |t-s|^((2-q)/2)`
    TimeIncrement,
    /// `sqrt(t) sup_x int |Htilde(t,x,y)| dy`
    HtildeAbs,
}

impl EstimateId {
    pub const ALL: [EstimateId; 5] = [
        EstimateId::KernelOverX,
        EstimateId::GtildeSquared,
        EstimateId::SpaceIncrement,
        EstimateId::TimeIncrement,
        EstimateId::HtildeAbs,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateId::KernelOverX => "kernel-over-x",
            EstimateId::GtildeSquared => "gtilde-l2",
            EstimateId::SpaceIncrement => "gtilde-space-increment",
            EstimateId::TimeIncrement => "gtilde-time-increment",
            EstimateId::HtildeAbs => "htilde-l1",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.as_str() == name)
    }

    fn is_increment(&self) -> bool {
        matches!(self, EstimateId::SpaceIncrement | EstimateId::TimeIncrement)
    }
}

#[derive(Debug, Clone)]
pub struct EstimateConfig {
    pub kernel: HeatKernel,
    /// Simpson panels per quadrature window (at least 256).
    pub quadrature_n: usize,
    /// Simpson panels of the logarithmic time grid used by the increment bounds.
    pub time_panels: usize,
    pub t_values: Vec<f64>,
    /// Number of `x` points in the sup for the `sqrt(t)` bounds.
    pub x_points: usize,
    /// Spatial offsets `|x - y|` and time offsets `|t - s|`.
    pub increments: Vec<f64>,
    pub q_values: Vec<f64>,
    /// Time horizon `T` of the increment bounds.
    pub horizon: f64,
    /// Left points `x` of the spatial-increment pairs `(x, x + h)`.
    pub space_base_points: Vec<f64>,
    /// Points `x` in the sup of the time-increment bound.
    pub time_x_points: Vec<f64>,
    /// Largest admissible max/min ratio of rate-scaled values.
    pub ratio_ceiling: f64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            kernel: HeatKernel::new(9, 1e-14).expect("valid kernel"),
            quadrature_n: 256,
            time_panels: 400,
            t_values: vec![1e-3, 1e-2, 1e-1, 1.0],
            x_points: 200,
            increments: (3..=9).map(|k| 2f64.powi(-k)).collect(),
            q_values: vec![1.2, 1.5, 1.8],
            horizon: 1.0,
            space_base_points: vec![0.0, 0.1, 0.25, 0.5],
            time_x_points: vec![0.0, 0.05, 0.25, 0.5],
            ratio_ceiling: 10.0,
        }
    }
}

impl EstimateConfig {
    fn validate(&self) -> Result<()> {
        if self.quadrature_n < 256 {
            return Err(Error::Config(format!(
                "quadrature_n must be at least 256, got {}",
                self.quadrature_n
            )));
        }
        if let Some(&t) = self
            .t_values
            .iter()
            .find(|&&t| t < self.kernel.t_floor() || t > self.horizon)
        {
            return Err(Error::BelowTimeFloor {
                t,
                floor: self.kernel.t_floor(),
            });
        }
        if self.q_values.iter().any(|&q| !(q > 1.0 && q < 2.0)) {
            return Err(Error::Config("q must lie in (1, 2)".into()));
        }
        if self.increments.iter().any(|&h| !(h > 0.0 && h < self.horizon)) {
            return Err(Error::Config("increments must lie in (0, T)".into()));
        }
        Ok(())
    }
}

/// One evaluated sweep point. Unused parameter fields are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub t: Option<f64>,
    pub x: Option<f64>,
    pub h: Option<f64>,
    pub q: Option<f64>,
    pub raw: f64,
    pub scaled: f64,
    /// For the spatial increment: `raw / h^(2-q)`, the sharper candidate rate.
    pub scaled_alt: Option<f64>,
}

/// Sup-over-`x` rate-scaled values along the swept parameter, ordered from
/// coarse (large) to fine (small) parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub q: Option<f64>,
    pub params: Vec<f64>,
    pub scaled: Vec<f64>,
    pub scaled_alt: Option<Vec<f64>>,
}

impl RateCurve {
    pub fn spread(&self) -> f64 {
        let max = self.scaled.iter().copied().fold(f64::MIN, f64::max);
        let min = self.scaled.iter().copied().fold(f64::MAX, f64::min);
        max / min
    }

    pub fn max(&self) -> f64 {
        self.scaled.iter().copied().fold(0.0, f64::max)
    }

    /// Strict increase across the three finest parameter values.
    pub fn grows_at_fine_end(&self) -> bool {
        let k = self.scaled.len();
        if k < 3 {
            return false;
        }
        let tail = &self.scaled[k - 3..];
        tail.windows(2)
            .all(|w| w[1] > w[0] * (1.0 + GROWTH_SLACK))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub id: EstimateId,
    pub sweep: Vec<SweepPoint>,
    pub curves: Vec<RateCurve>,
    /// Largest rate-scaled value observed.
    pub worst_constant: f64,
    /// Largest max/min ratio over the curves.
    pub spread: f64,
    pub growth_detected: bool,
    pub ratio_ceiling: f64,
    pub passed: bool,
}

impl EstimateReport {
    fn from_curves(
        id: EstimateId,
        sweep: Vec<SweepPoint>,
        curves: Vec<RateCurve>,
        ratio_ceiling: f64,
    ) -> Self {
        let worst_constant = curves.iter().map(RateCurve::max).fold(0.0, f64::max);
        let spread = curves.iter().map(RateCurve::spread).fold(0.0, f64::max);
        let growth_detected = curves.iter().any(RateCurve::grows_at_fine_end);
        let passed = spread.is_finite() && spread <= ratio_ceiling && !growth_detected;
        Self {
            id,
            sweep,
            curves,
            worst_constant,
            spread,
            growth_detected,
            ratio_ceiling,
            passed,
        }
    }
}

pub fn verify_all(config: &EstimateConfig) -> Result<Vec<EstimateReport>> {
    EstimateId::ALL
        .iter()
        .map(|&id| verify_estimate(id, config))
        .collect()
}

pub fn verify_estimate(id: EstimateId, config: &EstimateConfig) -> Result<EstimateReport> {
    config.validate()?;
    let report = match id {
        EstimateId::SpaceIncrement => space_increment(config)?,
        EstimateId::TimeIncrement => time_increment(config)?,
        _ => sqrt_t_bound(id, config)?,
    };
    debug_assert_eq!(report.id.is_increment(), id.is_increment());
    Ok(report)
}

fn window(t: f64) -> f64 {
    WINDOW_SIGMAS * t.sqrt()
}

fn finite(v: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Quadrature(what()))
    }
}

fn sqrt_t_bound(id: EstimateId, config: &EstimateConfig) -> Result<EstimateReport> {
    let k = config.kernel;
    let n = config.x_points;
    // The 1/x bound is a sup over (0, 1]; the weighted kernels include x = 0.
    let xs: Vec<f64> = match id {
        EstimateId::KernelOverX => (1..=n).map(|i| i as f64 / n as f64).collect(),
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    };
    let mut ts = config.t_values.clone();
    ts.sort_by(|a, b| b.total_cmp(a));

    let points: Vec<(f64, f64)> = ts
        .iter()
        .flat_map(|&t| xs.iter().map(move |&x| (t, x)))
        .collect();
    let sweep: Vec<SweepPoint> = points
        .par_iter()
        .map(|&(t, x)| {
            let w = window(t);
            let qn = config.quadrature_n;
            let raw = match id {
                EstimateId::KernelOverX => {
                    simpson_windows(|y| (k.g_unchecked(t, x, y) / x).abs(), &[x], w, qn)
                }
                EstimateId::GtildeSquared => simpson_windows(
                    |y| {
                        let g = k.g_tilde_unchecked(t, x, y);
                        g * g
                    },
                    &[x],
                    w,
                    qn,
                ),
                EstimateId::HtildeAbs => {
                    simpson_windows(|y| k.h_tilde_unchecked(t, x, y).abs(), &[x], w, qn)
                }
                _ => unreachable!("increment bounds are handled separately"),
            };
            let raw = finite(raw, || format!("{} at t={t}, x={x}", id.as_str()))?;
            Ok(SweepPoint {
                t: Some(t),
                x: Some(x),
                h: None,
                q: None,
                raw,
                scaled: raw * t.sqrt(),
                scaled_alt: None,
            })
        })
        .collect::<Result<_>>()?;

    let scaled: Vec<f64> = ts
        .iter()
        .map(|&t| {
            sweep
                .iter()
                .filter(|p| p.t == Some(t))
                .map(|p| p.scaled)
                .fold(0.0, f64::max)
        })
        .collect();
    let curve = RateCurve {
        q: None,
        params: ts,
        scaled,
        scaled_alt: None,
    };
    Ok(EstimateReport::from_curves(
        id,
        sweep,
        vec![curve],
        config.ratio_ceiling,
    ))
}

/// `int_0^upper phi(s)^q ds` for each `q`, where `phi(s) ~ c s^(-1/2)` below
/// `lower`. Uses Simpson on a logarithmic grid plus the power-law tail.
fn log_time_integrals(
    phi: impl Fn(f64) -> f64 + Sync,
    lower: f64,
    upper: f64,
    panels: usize,
    qs: &[f64],
) -> Vec<f64> {
    let panels = (panels.max(2) + 1) & !1;
    let (a, b) = (lower.ln(), upper.ln());
    let du = (b - a) / panels as f64;
    let samples: Vec<(f64, f64)> = (0..=panels)
        .into_par_iter()
        .map(|k| {
            let s = (a + k as f64 * du).exp();
            (s, phi(s))
        })
        .collect();
    qs.iter()
        .map(|&q| {
            let mut acc = 0.0;
            for (k, &(s, v)) in samples.iter().enumerate() {
                let w = if k == 0 || k == panels {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * v.powf(q) * s;
            }
            let body = acc * du / 3.0;
            let tail = samples[0].1.powf(q) * lower / (1.0 - q / 2.0);
            body + tail
        })
        .collect()
}

fn space_increment(config: &EstimateConfig) -> Result<EstimateReport> {
    let k = config.kernel;
    let qn = config.quadrature_n;
    let mut hs = config.increments.clone();
    hs.sort_by(|a, b| b.total_cmp(a));

    let mut sweep = Vec::new();
    for &h in &hs {
        for &x in &config.space_base_points {
            let y = x + h;
            if y > 1.0 {
                continue;
            }
            let lower = 1e-3 * h * h;
            if lower < k.t_floor() {
                return Err(Error::BelowTimeFloor {
                    t: lower,
                    floor: k.t_floor(),
                });
            }
            let phi = |s: f64| {
                simpson_windows(
                    |z| {
                        let d = k.g_tilde_unchecked(s, x, z) - k.g_tilde_unchecked(s, y, z);
                        d * d
                    },
                    &[x, y],
                    window(s),
                    qn,
                )
            };
            let raws = log_time_integrals(phi, lower, config.horizon, config.time_panels, &config.q_values);
            for (&q, raw) in config.q_values.iter().zip(raws) {
                let raw = finite(raw, || format!("space increment at x={x}, h={h}, q={q}"))?;
                sweep.push(SweepPoint {
                    t: None,
                    x: Some(x),
                    h: Some(h),
                    q: Some(q),
                    raw,
                    scaled: raw / h.powf((2.0 - q) / 3.0),
                    scaled_alt: Some(raw / h.powf(2.0 - q)),
                });
            }
        }
    }

    let curves = config
        .q_values
        .iter()
        .map(|&q| {
            let sup = |f: fn(&SweepPoint) -> f64, h: f64| {
                sweep
                    .iter()
                    .filter(|p| p.q == Some(q) && p.h == Some(h))
                    .map(f)
                    .fold(0.0, f64::max)
            };
            RateCurve {
                q: Some(q),
                params: hs.clone(),
                scaled: hs.iter().map(|&h| sup(|p| p.scaled, h)).collect(),
                scaled_alt: Some(
                    hs.iter()
                        .map(|&h| sup(|p| p.scaled_alt.unwrap_or(0.0), h))
                        .collect(),
                ),
            }
        })
        .collect();
    Ok(EstimateReport::from_curves(
        EstimateId::SpaceIncrement,
        sweep,
        curves,
        config.ratio_ceiling,
    ))
}

fn time_increment(config: &EstimateConfig) -> Result<EstimateReport> {
    let k = config.kernel;
    let qn = config.quadrature_n;
    let mut taus = config.increments.clone();
    taus.sort_by(|a, b| b.total_cmp(a));

    let mut sweep = Vec::new();
    for &tau in &taus {
        // Largest admissible pair: t = T, s = T - tau.
        let s_end = config.horizon - tau;
        let lower = 1e-3 * tau;
        if lower < k.t_floor() {
            return Err(Error::BelowTimeFloor {
                t: lower,
                floor: k.t_floor(),
            });
        }
        for &x in &config.time_x_points {
            let phi = |u: f64| {
                let later = u + tau;
                let integrand = |y: f64| {
                    let d = k.g_tilde_unchecked(later, x, y) - k.g_tilde_unchecked(u, x, y);
                    d * d
                };
                // Nested windows resolve both the narrow and the wide bump.
                simpson_windows(integrand, &[x], window(u), qn)
                    + outer_shell(integrand, x, window(u), window(later), qn)
            };
            let raws = log_time_integrals(phi, lower, s_end, config.time_panels, &config.q_values);
            for (&q, raw) in config.q_values.iter().zip(raws) {
                let raw = finite(raw, || format!("time increment at x={x}, tau={tau}, q={q}"))?;
                sweep.push(SweepPoint {
                    t: Some(config.horizon),
                    x: Some(x),
                    h: Some(tau),
                    q: Some(q),
                    raw,
                    scaled: raw / tau.powf((2.0 - q) / 2.0),
                    scaled_alt: None,
                });
            }
        }
    }

    let curves = config
        .q_values
        .iter()
        .map(|&q| RateCurve {
            q: Some(q),
            params: taus.clone(),
            scaled: taus
                .iter()
                .map(|&tau| {
                    sweep
                        .iter()
                        .filter(|p| p.q == Some(q) && p.h == Some(tau))
                        .map(|p| p.scaled)
                        .fold(0.0, f64::max)
                })
                .collect(),
            scaled_alt: None,
        })
        .collect();
    Ok(EstimateReport::from_curves(
        EstimateId::TimeIncrement,
        sweep,
        curves,
        config.ratio_ceiling,
    ))
}

/// Integral over `[c - outer, c - inner] u [c + inner, c + outer]` within `[0, 1]`.
fn outer_shell(f: impl Fn(f64) -> f64, c: f64, inner: f64, outer: f64, n: usize) -> f64 {
    let mut acc = 0.0;
    let left = ((c - outer).max(0.0), (c - inner).max(0.0));
    let right = ((c + inner).min(1.0), (c + outer).min(1.0));
    for (a, b) in [left, right] {
        if b > a {
            acc += simpson(&f, a, b, n);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> EstimateConfig {
        EstimateConfig {
            x_points: 40,
            increments: vec![0.125, 0.0625, 0.03125],
            space_base_points: vec![0.0, 0.25],
            time_x_points: vec![0.0, 0.25],
            time_panels: 200,
            ..EstimateConfig::default()
        }
    }

    #[test]
    fn ids_round_trip() {
        for id in EstimateId::ALL {
            assert_eq!(EstimateId::from_name(id.as_str()), Some(id));
        }
    }

    #[test]
    fn rejects_coarse_quadrature_and_bad_q() {
        let cfg = EstimateConfig {
            quadrature_n: 64,
            ..small_config()
        };
        assert!(verify_estimate(EstimateId::KernelOverX, &cfg).is_err());
        let cfg = EstimateConfig {
            q_values: vec![2.0],
            ..small_config()
        };
        assert!(verify_estimate(EstimateId::SpaceIncrement, &cfg).is_err());
    }

    #[test]
    fn small_t_kernel_over_x_approaches_free_limit() {
        // For t -> 0 the sup is attained as x -> 0 with value 1/sqrt(pi t).
        let cfg = EstimateConfig {
            t_values: vec![1e-4],
            x_points: 2000,
            ..small_config()
        };
        let r = verify_estimate(EstimateId::KernelOverX, &cfg).unwrap();
        let limit = 1.0 / std::f64::consts::PI.sqrt();
        assert!((r.curves[0].scaled[0] - limit).abs() < 2e-3 * limit, "{:?}", r.curves);
    }

    #[test]
    fn gtilde_at_right_endpoint_is_finite() {
        let cfg = EstimateConfig {
            t_values: vec![0.01],
            ..small_config()
        };
        let r = verify_estimate(EstimateId::GtildeSquared, &cfg).unwrap();
        let at_one = r.sweep.iter().find(|p| p.x == Some(1.0)).unwrap();
        assert!(at_one.raw.is_finite());
        assert!(at_one.scaled <= r.worst_constant);
    }

    #[test]
    fn growth_detector() {
        let c = RateCurve {
            q: None,
            params: vec![1.0, 0.1, 0.01, 0.001],
            scaled: vec![1.0, 3.0, 2.0, 2.0],
            scaled_alt: None,
        };
        assert!(!c.grows_at_fine_end());
        let c = RateCurve {
            scaled: vec![1.0, 1.5, 2.0, 3.0],
            ..c
        };
        assert!(c.grows_at_fine_end());
        assert_eq!(c.spread(), 3.0);
    }

    #[test]
    fn space_increment_is_positive_and_bounded() {
        let r = verify_estimate(EstimateId::SpaceIncrement, &small_config()).unwrap();
        assert!(r.sweep.iter().all(|p| p.raw > 0.0));
        assert_eq!(r.curves.len(), 3);
        assert!(r.spread.is_finite());
    }
}
