//! Grid functions on `[0, 1]` vanishing at both endpoints, with the discrete
//! `sup |f(x)/x|` norm, and the ratio-clipping truncation map.

use std::ops::{Index, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node values `values[i] = f(i/N)`, `i = 0..=N`, with `f(0) = f(1) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    values: Vec<f64>,
}

impl Profile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidProfile(format!(
                "need at least 3 nodes, got {}",
                values.len()
            )));
        }
        let last = values.len() - 1;
        if values[0] != 0.0 || values[last] != 0.0 {
            return Err(Error::InvalidProfile(format!(
                "endpoint values must be zero, got {} and {}",
                values[0], values[last]
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n + 1],
        }
    }

    /// Samples `f` at the nodes of an `n`-interval grid; endpoints are set to zero.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        let mut values: Vec<f64> = (0..=n).map(|i| f(i as f64 / n as f64)).collect();
        values[0] = 0.0;
        values[n] = 0.0;
        Self { values }
    }

    /// Builds a profile from raw node values, zeroing the endpoints.
    pub(crate) fn from_interior(mut values: Vec<f64>) -> Self {
        let n = values.len() - 1;
        values[0] = 0.0;
        values[n] = 0.0;
        Self { values }
    }

    /// Number of spatial intervals.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.n() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Discrete H-norm: `max_{i>=1} |v_i / x_i|`.
    pub fn h_norm(&self) -> f64 {
        let n = self.n() as f64;
        self.values
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, v)| (v * n / i as f64).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &Profile) -> Self {
        assert_eq!(self.n(), other.n(), "profile grids differ");
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn distance(&self, other: &Profile) -> f64 {
        (self - other).h_norm()
    }
}

impl Index<usize> for Profile {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl Sub for &Profile {
    type Output = Profile;

    fn sub(self, rhs: &Profile) -> Profile {
        assert_eq!(self.n(), rhs.n(), "profile grids differ");
        Profile {
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Sup over time of the H-norm of the difference of two trajectories.
pub fn path_distance(a: &[Profile], b: &[Profile]) -> f64 {
    assert_eq!(a.len(), b.len(), "trajectory lengths differ");
    a.iter().zip(b).map(|(p, q)| p.distance(q)).fold(0.0, f64::max)
}

pub fn path_norm(a: &[Profile]) -> f64 {
    a.iter().map(Profile::h_norm).fold(0.0, f64::max)
}

/// Clips `f(x)/x` from above at `level`; values with a smaller ratio pass through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationMap {
    level: f64,
}

impl TruncationMap {
    pub fn new(level: f64) -> Result<Self> {
        if !(level > 0.0) {
            return Err(Error::Config(format!(
                "truncation level must be positive, got {level}"
            )));
        }
        Ok(Self { level })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// Pointwise form used inside update loops.
    #[inline]
    pub fn clip(&self, value: f64, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            x * (value / x).min(self.level)
        }
    }

    pub fn apply(&self, p: &Profile) -> Profile {
        let n = p.n();
        let values = p
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| self.clip(v, i as f64 / n as f64))
            .collect();
        Profile::from_interior(values)
    }
}

/// Applies an optional truncation, borrowing when none is set.
pub(crate) fn maybe_truncate<'a>(
    map: Option<&TruncationMap>,
    p: &'a Profile,
) -> std::borrow::Cow<'a, Profile> {
    match map {
        Some(m) => std::borrow::Cow::Owned(m.apply(p)),
        None => std::borrow::Cow::Borrowed(p),
    }
}
