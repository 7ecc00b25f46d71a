//! Post-processing of simulation results: the near-boundary linearity metric,
//! derivative probes, norm series and ensemble summaries.

use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, Distribution, Median, OrderStatistics};

use crate::error::{Error, Result};
use crate::profile::Profile;
use crate::scheme::SimulationResult;
use crate::Side;

/// Below this `|a*|` a fit is treated as degenerate.
pub const DEGENERATE_SLOPE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Window {
    fn default() -> Self {
        Self { lo: 0.0, hi: 0.04 }
    }
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo && hi <= 1.0) {
            return Err(Error::Config(format!("invalid window [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// Node indices `i` with `x_i` in the closed window.
    pub fn nodes(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        let nf = n as f64;
        let first = (self.lo * nf - 1e-9).ceil().max(0.0) as usize;
        let last = ((self.hi * nf + 1e-9).floor() as usize).min(n);
        first..=last
    }
}

/// Least-squares fit `v ~ a x` through the origin on the window and the
/// residual sum normalized by the squared fitted height at the window end.
/// Returns `None` for a degenerate fit.
pub fn profile_linearity(v: &Profile, window: Window) -> Option<f64> {
    let n = v.n();
    let mut sxx = 0.0;
    let mut sxv = 0.0;
    for i in window.nodes(n) {
        let x = v.x(i);
        sxx += x * x;
        sxv += x * v[i];
    }
    let a = sxv / sxx;
    if !a.is_finite() || a.abs() < DEGENERATE_SLOPE {
        return None;
    }
    let rss: f64 = window
        .nodes(n)
        .map(|i| {
            let r = v[i] - a * v.x(i);
            r * r
        })
        .sum();
    let height = a * window.hi;
    Some(rss / (height * height))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearityMetric {
    pub window: Window,
    /// One entry per time index `j >= 1`; `None` marks a degenerate fit.
    pub per_time: Vec<Option<f64>>,
    pub time_average: f64,
    pub degenerate: usize,
}

/// Linearity metric for one side, averaged over all time indices after the
/// initial one. The average is NaN if every fit is degenerate.
pub fn linearity_metric(result: &SimulationResult, side: Side, window: Window) -> Result<LinearityMetric> {
    let n = result.grid.n();
    if window.nodes(n).count() < 3 {
        return Err(Error::Config(format!(
            "window [{}, {}] holds fewer than 3 nodes at N={n}",
            window.lo, window.hi
        )));
    }
    let per_time: Vec<Option<f64>> = result
        .profiles(side)
        .iter()
        .skip(1)
        .map(|v| profile_linearity(v, window))
        .collect();
    let defined: Vec<f64> = per_time.iter().flatten().copied().collect();
    let degenerate = per_time.len() - defined.len();
    let time_average = if defined.is_empty() {
        f64::NAN
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    Ok(LinearityMetric {
        window,
        per_time,
        time_average,
        degenerate,
    })
}

pub const PROBE_SCALES: [usize; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeProbe {
    /// `v[k] / x_k` for `k = 1, 2, 4, 8`.
    pub slopes: [f64; 4],
    /// `max |s_a - s_b| / max |s|` over pairs; zero when all agree.
    pub spread: f64,
}

pub fn probe_profile(v: &Profile) -> Result<DerivativeProbe> {
    if v.n() < 32 {
        return Err(Error::InvalidGrid(format!("derivative probe needs N >= 32, got {}", v.n())));
    }
    let slopes = PROBE_SCALES.map(|k| v[k] / v.x(k));
    let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = slopes.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    let spread = if scale == 0.0 { 0.0 } else { (hi - lo) / scale };
    Ok(DerivativeProbe { slopes, spread })
}

pub fn boundary_derivative_probe(result: &SimulationResult, side: Side, t_index: usize) -> Result<DerivativeProbe> {
    let profiles = result.profiles(side);
    let v = profiles.get(t_index).ok_or_else(|| {
        Error::Config(format!("time index {t_index} beyond stored {}", profiles.len()))
    })?;
    probe_profile(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub t: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub speed: Vec<f64>,
}

pub fn norm_series(result: &SimulationResult) -> NormSeries {
    NormSeries {
        t: (0..result.len()).map(|j| result.grid.t(j)).collect(),
        h1: result.v1.iter().map(Profile::h_norm).collect(),
        h2: result.v2.iter().map(Profile::h_norm).collect(),
        speed: result.boundary_speed.iter().map(|s| s.abs()).collect(),
    }
}

/// One scalar diagnostic of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub stream_id: u64,
    /// Identifies grid and coefficients; all samples must agree on it.
    pub config_key: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_key: String,
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub n: usize,
}

/// Order-independent summary of a set of samples.
pub fn ensemble_aggregate(samples: &[Sample]) -> Result<Summary> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Mismatch("no samples to aggregate".into()))?;
    if samples.len() < 2 {
        return Err(Error::Mismatch("an ensemble needs at least two runs".into()));
    }
    if let Some(other) = samples.iter().find(|s| s.config_key != first.config_key) {
        return Err(Error::Mismatch(format!(
            "mixed configurations: {:?} and {:?}",
            first.config_key, other.config_key
        )));
    }
    if samples.iter().any(|s| !s.value.is_finite()) {
        return Err(Error::Mismatch("non-finite sample value".into()));
    }
    let mut sorted: Vec<&Sample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.stream_id.cmp(&b.stream_id).then(a.value.total_cmp(&b.value)));
    let mut data = Data::new(sorted.iter().map(|s| s.value).collect::<Vec<_>>());
    Ok(Summary {
        config_key: first.config_key.clone(),
        mean: data.mean().expect("non-empty"),
        median: data.median(),
        p10: data.percentile(10),
        p90: data.percentile(90),
        n: samples.len(),
    })
}

/// Applies `metric` to each result and aggregates. Results must share a grid.
pub fn aggregate_results(
    results: &[SimulationResult],
    config_key: &str,
    metric: impl Fn(&SimulationResult) -> Result<f64>,
) -> Result<Summary> {
    if let Some(first) = results.first() {
        if results.iter().any(|r| r.grid != first.grid) {
            return Err(Error::Mismatch("results on different grids".into()));
        }
    }
    let samples = results
        .iter()
        .map(|r| {
            Ok(Sample {
                stream_id: r.stream_id,
                config_key: config_key.to_string(),
                value: metric(r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ensemble_aggregate(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientSet, Preset};
    use crate::grid::SpaceTimeGrid;
    use crate::noise::NoiseField;
    use crate::scheme::{run, SchemeOptions};
    use proptest::prelude::*;

    #[test]
    fn linear_profile_has_zero_metric() {
        let v = Profile::from_fn(100, |x| 3.0 * x * (1.0 - x).signum());
        assert!(profile_linearity(&v, Window::default()).unwrap() < 1e-28);
    }

    #[test]
    fn quadratic_profile_matches_closed_form() {
        // Nodes x_i = i h, i = 0..=40 with h = 1/1000. With S_k = sum i^k,
        // a* = h S_3 / S_2 and the residual sum is
        // h^4 (S_4 - S_3^2 / S_2).
        let n = 1000;
        let v = Profile::from_fn(n, |x| if x < 1.0 { x * x } else { 0.0 });
        let s = |k: u32| (0..=40u64).map(|i| i.pow(k) as f64).sum::<f64>();
        let h = 1.0 / n as f64;
        let a = h * s(3) / s(2);
        let rss = h.powi(4) * (s(4) - s(3) * s(3) / s(2));
        let expected = rss / (a * 0.04).powi(2);
        let got = profile_linearity(&v, Window::default()).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} {expected}");
    }

    #[test]
    fn degenerate_fits_are_flagged() {
        assert_eq!(profile_linearity(&Profile::zeros(100), Window::default()), None);
        let grid = SpaceTimeGrid::new(64, 100, 0.001).unwrap();
        let nf = NoiseField::new(0, 0, 64, 100);
        let mut coeffs = CoefficientSet::preset(Preset::Heat);
        coeffs.u0_1 = crate::coefficients::InitialCondition::Zero;
        let r = run(&coeffs, &grid, &nf, &SchemeOptions::default()).unwrap();
        let m = linearity_metric(&r, Side::One, Window::default()).unwrap();
        assert_eq!(m.degenerate, 100);
        assert!(m.time_average.is_nan());
    }

    #[test]
    fn window_needs_three_nodes() {
        let grid = SpaceTimeGrid::new(32, 10, 0.001).unwrap();
        let nf = NoiseField::new(0, 0, 32, 10);
        let r = run(&CoefficientSet::preset(Preset::Heat), &grid, &nf, &SchemeOptions::default()).unwrap();
        assert!(linearity_metric(&r, Side::One, Window::default()).is_err());
        assert!(linearity_metric(&r, Side::One, Window::new(0.0, 0.08).unwrap()).is_ok());
    }

    #[test]
    fn probe_on_closed_forms() {
        let lin = probe_profile(&Profile::from_fn(64, |x| 2.0 * x * (1.0 - x) / (1.0 - x).max(1e-300))).unwrap();
        assert!(lin.slopes.iter().all(|s| (s - 2.0).abs() < 1e-12));
        assert!(lin.spread < 1e-12);
        let root = probe_profile(&Profile::from_fn(64, |x| if x < 1.0 { x.sqrt() } else { 0.0 })).unwrap();
        assert!((root.slopes[0] / root.slopes[3] - 8f64.sqrt()).abs() < 1e-12);
        assert!(probe_profile(&Profile::zeros(16)).is_err());
    }

    #[test]
    fn norm_series_on_deterministic_runs() {
        let grid = SpaceTimeGrid::with_default_steps(32, 0.05).unwrap();
        let nf = NoiseField::new(0, 0, 32, grid.m());
        let r = run(&CoefficientSet::preset(Preset::Heat), &grid, &nf, &SchemeOptions::default()).unwrap();
        let s = norm_series(&r);
        assert_eq!(s.h1, s.h2);
        assert!(s.h1.last().unwrap() <= &s.h1[0]);
        assert_eq!(s.h1[3], r.v1[3].h_norm());

        let mut zero = CoefficientSet::preset(Preset::Heat);
        zero.u0_1 = crate::coefficients::InitialCondition::Zero;
        zero.u0_2 = crate::coefficients::InitialCondition::Zero;
        let r = run(&zero, &grid, &nf, &SchemeOptions::default()).unwrap();
        let s = norm_series(&r);
        assert!(s.h1.iter().chain(&s.h2).chain(&s.speed).all(|&v| v == 0.0));
    }

    fn sample(stream_id: u64, value: f64) -> Sample {
        Sample {
            stream_id,
            config_key: "k".into(),
            value,
        }
    }

    #[test]
    fn aggregate_small_cases() {
        let s = ensemble_aggregate(&[sample(0, 1.0), sample(1, 3.0)]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.n, 2);
        let same = ensemble_aggregate(&[sample(0, 0.5), sample(1, 0.5), sample(2, 0.5)]).unwrap();
        assert_eq!(same.p90 - same.p10, 0.0);
        assert!(ensemble_aggregate(&[sample(0, 1.0)]).is_err());
        let mut mixed = sample(1, 1.0);
        mixed.config_key = "other".into();
        assert!(matches!(
            ensemble_aggregate(&[sample(0, 1.0), mixed]),
            Err(Error::Mismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn metric_is_scale_invariant(
            vals in prop::collection::vec(0.01f64..1.0, 9),
            c in 0.1f64..10.0,
        ) {
            let mut full = vec![0.0; 101];
            full[1..10].copy_from_slice(&vals);
            let v = Profile::new(full).unwrap();
            let w = Window::new(0.0, 0.08).unwrap();
            let a = profile_linearity(&v, w).unwrap();
            let b = profile_linearity(&v.scaled(c), w).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }

        #[test]
        fn aggregate_ignores_input_order(
            vals in prop::collection::vec(-5.0f64..5.0, 2..30),
            rot in 0usize..30,
        ) {
            let samples: Vec<Sample> = vals.iter().enumerate().map(|(i, &v)| sample(i as u64, v)).collect();
            let mut permuted = samples.clone();
            permuted.reverse();
            let k = rot % permuted.len();
            permuted.rotate_left(k);
            prop_assert_eq!(ensemble_aggregate(&samples).unwrap(), ensemble_aggregate(&permuted).unwrap());
        }
    }
}
