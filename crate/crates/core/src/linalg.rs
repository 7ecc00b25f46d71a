/// Solves a tridiagonal system with constant off-diagonals in place (Thomas
/// algorithm). `diag` and `rhs` have the same length; `off` multiplies both
/// neighbours. The system must be diagonally dominant.
pub(crate) fn solve_symmetric_tridiagonal(off: f64, diag: &[f64], rhs: &mut [f64], scratch: &mut Vec<f64>) {
    let m = diag.len();
    debug_assert_eq!(rhs.len(), m);
    if m == 0 {
        return;
    }
    scratch.clear();
    scratch.resize(m, 0.0);
    let mut denom = diag[0];
    scratch[0] = off / denom;
    rhs[0] /= denom;
    for i in 1..m {
        denom = diag[i] - off * scratch[i - 1];
        scratch[i] = off / denom;
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
    }
    for i in (0..m - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

/// General tridiagonal solve in place. `lower[i]` couples row `i` to
/// `i - 1` and `upper[i]` couples row `i` to `i + 1`; `lower[0]` and
/// `upper[m - 1]` are ignored.
pub(crate) fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    let m = diag.len();
    debug_assert!(lower.len() == m && upper.len() == m && rhs.len() == m);
    if m == 0 {
        return;
    }
    scratch.clear();
    scratch.resize(m, 0.0);
    let mut denom = diag[0];
    scratch[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..m {
        denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..m - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn general_solve_with_an_identity_row() {
        // [4 -1 0; 0 1 0; 0 -1 4] x = b with x = (1, 2, 3).
        let lower = [0.0, 0.0, -1.0];
        let diag = [4.0, 1.0, 4.0];
        let upper = [-1.0, 0.0, 0.0];
        let mut rhs = [2.0, 2.0, 10.0];
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs, &mut Vec::new());
        for (got, want) in rhs.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn solves_a_small_system() {
        // [4 -1 0; -1 4 -1; 0 -1 4] x = b with x = (1, 2, 3).
        let diag = [4.0, 4.0, 4.0];
        let mut rhs = [2.0, 4.0, 10.0];
        solve_symmetric_tridiagonal(-1.0, &diag, &mut rhs, &mut Vec::new());
        for (got, want) in rhs.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }
}
