//! Composite Simpson rules, including a windowed variant for integrands that
//! are negligible outside a few narrow bumps.

/// Composite Simpson on `[a, b]` with `n` sub-intervals (`n` rounded up to even).
pub fn simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Integrates over `[0, 1]` restricted to the union of `[c - half_width, c]`
/// and `[c, c + half_width]` for each centre `c`, splitting at every centre so
/// that kinks located there fall on panel boundaries.
pub fn simpson_windows(
    mut f: impl FnMut(f64) -> f64,
    centers: &[f64],
    half_width: f64,
    n_per_panel: usize,
) -> f64 {
    let mut breaks: Vec<f64> = Vec::with_capacity(3 * centers.len() + 2);
    let mut spans: Vec<(f64, f64)> = Vec::with_capacity(centers.len());
    for &c in centers {
        let lo = (c - half_width).max(0.0);
        let hi = (c + half_width).min(1.0);
        spans.push((lo, hi));
        breaks.extend([lo, c.clamp(0.0, 1.0), hi]);
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let covered = |m: f64| spans.iter().any(|&(lo, hi)| m >= lo && m <= hi);
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0] && covered(0.5 * (w[0] + w[1])))
        .map(|w| simpson(&mut f, w[0], w[1], n_per_panel))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 2);
        assert!((v - (4.0 - 4.0 + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn windows_capture_narrow_gaussians() {
        let s: f64 = 1e-8;
        let gauss = |c: f64| move |y: f64| (-(y - c) * (y - c) / (4.0 * s)).exp() / (4.0 * std::f64::consts::PI * s).sqrt();
        let g1 = gauss(0.3);
        let g2 = gauss(0.7);
        let v = simpson_windows(|y| g1(y) + g2(y), &[0.3, 0.7], 12.0 * s.sqrt(), 64);
        assert!((v - 2.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn overlapping_windows_are_not_double_counted() {
        let v = simpson_windows(|_| 1.0, &[0.4, 0.5], 0.2, 4);
        assert!((v - 0.5).abs() < 1e-14, "{v}");
        let v = simpson_windows(|_| 1.0, &[0.0], 2.0, 4);
        assert!((v - 1.0).abs() < 1e-14, "{v}");
    }
}
