//! Central finite differences, used to verify analytic gradients.

/// Perturbation used for every finite-difference check.
pub const FD_STEP: f64 = 1e-5;
/// Relative tolerance between analytic and numerical gradients.
pub const FD_RTOL: f64 = 1e-4;
/// Absolute floor for components whose true gradient is ~0, where the
/// central difference is dominated by rounding (about 1e-11 at this step).
pub const FD_ATOL: f64 = 1e-8;

/// Numerical gradient of `f` at `x` by central differences.
pub fn finite_difference<F>(x: &[f64], mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Index and values of the worst violating component, if any.
pub fn grad_mismatch(analytic: &[f64], numeric: &[f64]) -> Option<(usize, f64, f64)> {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    analytic
        .iter()
        .zip(numeric)
        .enumerate()
        .filter(|(_, (a, n))| {
            let err = (*a - *n).abs();
            err > FD_RTOL * a.abs().max(n.abs()) + FD_ATOL
        })
        .map(|(i, (a, n))| (i, *a, *n))
        .max_by(|x, y| (x.1 - x.2).abs().total_cmp(&(y.1 - y.2).abs()))
}

/// Panics with a diagnostic if the gradients disagree.
pub fn assert_grad_close(analytic: &[f64], numeric: &[f64], what: &str) {
    if let Some((i, a, n)) = grad_mismatch(analytic, numeric) {
        panic!("{what}: gradient component {i} analytic {a:e} vs numeric {n:e}");
    }
}
