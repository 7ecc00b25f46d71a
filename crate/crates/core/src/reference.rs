//! Closed-form Fourier sine-series solutions of the Dirichlet heat equation
//! `u_t = u_xx` on `[0, 1]`. These are independent of the kernel and
//! finite-difference code paths and serve as oracles.

use std::f64::consts::PI;

/// Heat flow started from the unit tent, truncated to `modes` terms.
pub fn heat_tent(t: f64, x: f64, modes: usize) -> f64 {
    (1..=modes)
        .map(|k| {
            let k = k as f64;
            let b = 8.0 * (k * PI / 2.0).sin() / (k * k * PI * PI);
            b * (-k * k * PI * PI * t).exp() * (k * PI * x).sin()
        })
        .sum()
}

/// Heat flow started from the constant 1, i.e. `int_0^1 G(t, x, y) dy`.
pub fn heat_constant(t: f64, x: f64, modes: usize) -> f64 {
    (1..=modes)
        .step_by(2)
        .map(|k| {
            let k = k as f64;
            4.0 / (k * PI) * (-k * k * PI * PI * t).exp() * (k * PI * x).sin()
        })
        .sum()
}

/// `int_0^t int_0^1 G(t - s, x, y) dy ds`: the response to a unit source
/// from zero initial data.
pub fn unit_source(t: f64, x: f64, modes: usize) -> f64 {
    (1..=modes)
        .step_by(2)
        .map(|k| {
            let k = k as f64;
            let lambda = k * k * PI * PI;
            4.0 / (k * PI) * (1.0 - (-lambda * t).exp()) / lambda * (k * PI * x).sin()
        })
        .sum()
}

/// Eigenfunction expansion of the kernel itself,
/// `G(t, x, y) = 2 sum_k exp(-k^2 pi^2 t) sin(k pi x) sin(k pi y)`.
pub fn kernel_eigen(t: f64, x: f64, y: f64, modes: usize) -> f64 {
    2.0 * (1..=modes)
        .map(|k| {
            let k = k as f64;
            (-k * k * PI * PI * t).exp() * (k * PI * x).sin() * (k * PI * y).sin()
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tent_series_reproduces_initial_data() {
        assert!((heat_tent(0.0, 0.5, 20_000) - 1.0).abs() < 1e-4);
        assert!((heat_tent(0.0, 0.25, 20_000) - 0.5).abs() < 1e-4);
    }

    #[test]
    fn unit_source_small_time_is_linear_in_t() {
        // Away from the boundary the source accumulates at rate one.
        let v = unit_source(1e-3, 0.5, 4001);
        assert!((v - 1e-3).abs() < 1e-8, "{v}");
    }
}
