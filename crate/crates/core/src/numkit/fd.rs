use alloc::format;

use super::matrix::Matrix;
use super::NumError;

/// Central finite-difference gradient of a scalar function of a matrix:
/// g[i] = (f(θ + ε·e_i) - f(θ - ε·e_i)) / (2ε).
///
/// Used as the independent oracle for every analytic gradient in the
/// workspace. Errors if any probe evaluates to a non-finite value.
pub fn fd_gradient<F>(mut f: F, theta: &Matrix, eps: f64) -> Result<Matrix, NumError>
where
    F: FnMut(&Matrix) -> f64,
{
    let mut grad = Matrix::zeros(theta.rows, theta.cols);
    let mut probe = theta.clone();
    for i in 0..theta.data.len() {
        let orig = probe.data[i];
        probe.data[i] = orig + eps;
        let fp = f(&probe);
        probe.data[i] = orig - eps;
        let fm = f(&probe);
        probe.data[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(NumError::NonFinite {
                what: format!("fd_gradient probe at flat index {i}"),
            });
        }
        grad.data[i] = (fp - fm) / (2.0 * eps);
    }
    Ok(grad)
}

/// Worst-case relative error between an analytic gradient and its oracle:
/// max over entries of |a - b| / max(1, |a|, |b|).
///
/// The unit floor keeps near-zero entries from inflating the ratio; this is
/// the pinned definition used by every gradient check in the workspace.
pub fn max_rel_err(analytic: &Matrix, oracle: &Matrix) -> f64 {
    assert_eq!(analytic.shape(), oracle.shape(), "max_rel_err shape");
    analytic
        .data
        .iter()
        .zip(oracle.data.iter())
        .map(|(&a, &b)| {
            let scale = 1.0_f64.max(libm::fabs(a)).max(libm::fabs(b));
            libm::fabs(a - b) / scale
        })
        .fold(0.0, f64::max)
}
