//! Numerical simulation and verification tools for one-dimensional reflected
//! stochastic Stefan problems driven by space-time white noise.
//!
//! The two phases live in the frame moving with the interface, each on
//! `[0, 1]` with the interface at `x = 0`:
//!
//! ```text
//! dv1/dt = v1'' - h(v1, v2) v1' + f1 + sigma1 W + eta1,
//! dv2/dt = v2'' + h(v1, v2) v2' + f2 + sigma2 W- + eta2,
//! p'(t)  = h(v1, v2),
//! ```
//!
//! with `v1, v2 >= 0` enforced by the reflection measures `eta1, eta2`.
//!
//! * [`scheme`] integrates the system with an explicit finite-difference
//!   scheme and reflection by absolute value.
//! * [`obstacle`] solves the deterministic obstacle problem by penalization.
//! * [`heat_kernel`] evaluates the Dirichlet heat kernel and sweeps the
//!   kernel bounds.
//! * [`picard`] runs the Picard iteration of the truncated problem in mild form.
//! * [`diagnostics`] post-processes trajectories (linearity near the interface,
//!   norm series, ensemble summaries).
//! * [`config`] and [`io`] drive everything from a TOML file and write CSV.

pub mod coefficients;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod heat_kernel;
pub mod io;
mod linalg;
pub mod noise;
pub mod obstacle;
pub mod picard;
pub mod profile;
pub mod quadrature;
pub mod reference;
pub mod scheme;

pub use coefficients::{CoefficientSet, Preset};
pub use error::{Error, Result};
pub use grid::SpaceTimeGrid;
pub use noise::NoiseField;
pub use profile::{Profile, TruncationMap};

use serde::{Deserialize, Serialize};

/// Which phase: side one lies ahead of the interface, side two behind it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    One,
    Two,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::One, Side::Two];

    pub fn index(&self) -> usize {
        match self {
            Side::One => 0,
            Side::Two => 1,
        }
    }

    /// Sign of the transport term `-/+ h v'` in the relative frame.
    pub fn transport_sign(&self) -> f64 {
        match self {
            Side::One => -1.0,
            Side::Two => 1.0,
        }
    }
}
