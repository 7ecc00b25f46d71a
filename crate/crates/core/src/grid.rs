//! Uniform space-time grid on `[0, 1] x [0, T]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible `T*N^2/M` for the explicit diffusion stencil.
pub const STABILITY_LIMIT: f64 = 0.5;

/// `N` spatial intervals (`x_i = i/N`) and `M` time steps (`t_j = jT/M`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    n: usize,
    m: usize,
    t_final: f64,
}

impl SpaceTimeGrid {
    pub fn new(n: usize, m: usize, t_final: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("N must be >= 2, got {n}")));
        }
        if m < 1 {
            return Err(Error::InvalidGrid("M must be >= 1".into()));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidGrid(format!("T must be positive, got {t_final}")));
        }
        Ok(Self { n, m, t_final })
    }

    /// Grid with `M = ceil(4 T N^2)`, i.e. stability ratio close to 1/4.
    pub fn with_default_steps(n: usize, t_final: f64) -> Result<Self> {
        Self::new(n, default_time_steps(n, t_final), t_final)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.m as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.t_final / self.m as f64
    }

    /// `T N^2 / M`, the explicit-stencil diffusion number.
    pub fn stability_ratio(&self) -> f64 {
        self.t_final * (self.n * self.n) as f64 / self.m as f64
    }

    pub fn check_stability(&self) -> Result<()> {
        let ratio = self.stability_ratio();
        if ratio > STABILITY_LIMIT {
            return Err(Error::Stability {
                ratio,
                n: self.n,
                m: self.m,
                t_final: self.t_final,
            });
        }
        Ok(())
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(|i| self.x(i))
    }

    /// Same grid with `N` doubled and `M` quadrupled.
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * self.n,
            m: 4 * self.m,
            t_final: self.t_final,
        }
    }
}

pub fn default_time_steps(n: usize, t_final: f64) -> usize {
    ((4.0 * t_final * (n * n) as f64).ceil() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(SpaceTimeGrid::new(1, 10, 0.1).is_err());
        assert!(SpaceTimeGrid::new(4, 0, 0.1).is_err());
        assert!(SpaceTimeGrid::new(4, 10, 0.0).is_err());
        assert!(SpaceTimeGrid::new(4, 10, f64::NAN).is_err());
    }

    #[test]
    fn stability_gate_arithmetic() {
        let g = SpaceTimeGrid::new(128, 100, 0.1).unwrap();
        assert!((g.stability_ratio() - 16.384).abs() < 1e-12);
        assert!(matches!(g.check_stability(), Err(Error::Stability { .. })));

        let g = SpaceTimeGrid::with_default_steps(128, 0.1).unwrap();
        assert_eq!(g.m(), 6554);
        assert!(g.stability_ratio() <= 0.25 + 1e-12);
        g.check_stability().unwrap();
    }

    #[test]
    fn node_positions() {
        let g = SpaceTimeGrid::new(4, 8, 2.0).unwrap();
        let xs: Vec<f64> = g.nodes().collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.t(8), 2.0);
        assert_eq!(g.dt(), 0.25);
    }
}
