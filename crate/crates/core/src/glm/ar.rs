//! Yule-Walker AR estimation and stationarity checks.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const SHRINK: f64 = 0.99;
const MAX_SHRINK_STEPS: usize = 5000;

/// Biased sample autocovariances at lags `0..=max_lag` (mean not removed).
pub fn autocovariance<T: Scalar>(x: &[T], max_lag: usize) -> Vec<T> {
    let n = T::count(x.len());
    (0..=max_lag)
        .map(|lag| {
            if lag >= x.len() {
                return T::zero();
            }
            x[lag..].iter().zip(x).map(|(&a, &b)| a * b).sum::<T>() / n
        })
        .collect()
}

/// Levinson-Durbin recursion. Returns `(phi, partial autocorrelations,
/// innovation variance)` for the model `x_t = sum_j phi_j x_{t-j} + e_t`.
pub fn levinson_durbin<T: Scalar>(acov: &[T], order: usize) -> (Vec<T>, Vec<T>, T) {
    let mut phi = vec![T::zero(); order];
    let mut pacf = vec![T::zero(); order];
    let mut var = acov[0];
    if var <= T::zero() {
        return (phi, pacf, T::zero());
    }
    let mut prev = phi.clone();
    for m in 0..order {
        let mut num = acov[m + 1];
        for j in 0..m {
            num = num - prev[j] * acov[m - j];
        }
        let k = num / var;
        phi[m] = k;
        for j in 0..m {
            phi[j] = prev[j] - k * prev[m - 1 - j];
        }
        pacf[m] = k;
        var = var * (T::one() - k * k);
        if var <= T::zero() {
            var = T::zero();
            break;
        }
        prev[..=m].copy_from_slice(&phi[..=m]);
    }
    (phi, pacf, var)
}

/// Partial autocorrelations recovered from AR coefficients by the step-down
/// recursion, or `None` if some step hits a unit reflection coefficient.
pub fn partial_autocorrelations<T: Scalar>(phi: &[T]) -> Option<Vec<T>> {
    let mut a = phi.to_vec();
    let mut pacf = vec![T::zero(); phi.len()];
    for m in (0..phi.len()).rev() {
        let k = a[m];
        pacf[m] = k;
        if !(k.abs() < T::one()) {
            return None;
        }
        let denom = T::one() - k * k;
        let next: Vec<T> = (0..m).map(|j| (a[j] + k * a[m - 1 - j]) / denom).collect();
        a[..m].copy_from_slice(&next);
    }
    Some(pacf)
}

pub fn is_stationary<T: Scalar>(phi: &[T]) -> bool {
    partial_autocorrelations(phi).is_some()
}

/// Shrinks `phi_j` by `0.99^j` per step, which scales every root of the AR
/// polynomial outward by `1/0.99`, until the model is stationary.
pub fn project_stationary<T: Scalar>(phi: &[T]) -> Result<Vec<T>> {
    let mut out = phi.to_vec();
    let r = T::lit(SHRINK);
    for _ in 0..MAX_SHRINK_STEPS {
        if is_stationary(&out) {
            return Ok(out);
        }
        let mut f = T::one();
        for v in out.iter_mut() {
            f = f * r;
            *v = *v * f;
        }
    }
    Err(Error::NonStationary(phi.iter().map(|v| v.to_f64_lossy()).collect()))
}

/// Yule-Walker fit of order `p`, projected to stationarity if rounding
/// pushed it to the boundary.
pub fn yule_walker<T: Scalar>(x: &[T], p: usize) -> Result<Vec<T>> {
    if p == 0 {
        return Ok(Vec::new());
    }
    let acov = autocovariance(x, p);
    let (phi, _, _) = levinson_durbin(&acov, p);
    project_stationary(&phi)
}

/// `e_t = x_t - sum_j phi_j x_{t-j}` for `t >= phi.len()`.
pub fn ar_filter<T: Scalar>(x: &[T], phi: &[T]) -> Vec<T> {
    let p = phi.len();
    (p..x.len())
        .map(|t| {
            phi.iter()
                .enumerate()
                .fold(x[t], |acc, (j, &c)| acc - c * x[t - 1 - j])
        })
        .collect()
}
