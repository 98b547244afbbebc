//! Householder QR least squares on small dense column-major matrices.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct Qr<T> {
    rows: usize,
    cols: usize,
    /// Householder vectors below the diagonal, R on and above it.
    a: Vec<T>,
    /// Leading entries of the Householder vectors.
    head: Vec<T>,
}

impl<T: Scalar> Qr<T> {
    pub(crate) fn factor(x: &[T], rows: usize, cols: usize) -> Result<Self> {
        if rows < cols {
            return Err(Error::TooShort { len: rows, params: cols });
        }
        let mut a = x.to_vec();
        let mut head = vec![T::zero(); cols];
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tol = T::epsilon() * T::count(rows) * scale.max(T::min_positive_value()) * T::lit(16.0);
        for j in 0..cols {
            let col = j * rows;
            let norm = a[col + j..col + rows].iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm <= tol {
                return Err(Error::RankDeficient { column: j });
            }
            let alpha = if a[col + j] > T::zero() { -norm } else { norm };
            let v0 = a[col + j] - alpha;
            // v = (v0, a[j+1..]) and H = I - 2 v v' / v'v.
            let vtv = v0 * v0 + a[col + j + 1..col + rows].iter().map(|&v| v * v).sum::<T>();
            head[j] = v0;
            a[col + j] = alpha;
            for k in j + 1..cols {
                let other = k * rows;
                let dot = v0 * a[other + j]
                    + (j + 1..rows).map(|i| a[col + i] * a[other + i]).sum::<T>();
                let f = T::lit(2.0) * dot / vtv;
                a[other + j] = a[other + j] - f * v0;
                for i in j + 1..rows {
                    a[other + i] = a[other + i] - f * a[col + i];
                }
            }
        }
        Ok(Qr { rows, cols, a, head })
    }

    /// Applies `Q'` to a vector in place.
    fn apply_qt(&self, y: &mut [T]) {
        let rows = self.rows;
        for j in 0..self.cols {
            let col = j * rows;
            let v0 = self.head[j];
            let vtv = v0 * v0 + self.a[col + j + 1..col + rows].iter().map(|&v| v * v).sum::<T>();
            let dot = v0 * y[j] + (j + 1..rows).map(|i| self.a[col + i] * y[i]).sum::<T>();
            let f = T::lit(2.0) * dot / vtv;
            y[j] = y[j] - f * v0;
            for i in j + 1..rows {
                y[i] = y[i] - f * self.a[col + i];
            }
        }
    }

    fn r(&self, i: usize, j: usize) -> T {
        self.a[j * self.rows + i]
    }

    /// Least-squares coefficients and residual sum of squares.
    pub(crate) fn solve(&self, y: &[T]) -> (Vec<T>, T) {
        let mut qty = y.to_vec();
        self.apply_qt(&mut qty);
        let rss = qty[self.cols..].iter().map(|&v| v * v).sum();
        let mut beta = qty[..self.cols].to_vec();
        for i in (0..self.cols).rev() {
            let mut acc = beta[i];
            for k in i + 1..self.cols {
                acc = acc - self.r(i, k) * beta[k];
            }
            beta[i] = acc / self.r(i, i);
        }
        (beta, rss)
    }

    /// `c' (X'X)^{-1} c`, computed as `|R^{-T} c|^2`.
    pub(crate) fn inverse_quadratic(&self, c: &[T]) -> T {
        let mut z = c.to_vec();
        for i in 0..self.cols {
            let mut acc = z[i];
            for k in 0..i {
                acc = acc - self.r(k, i) * z[k];
            }
            z[i] = acc / self.r(i, i);
        }
        z.iter().map(|&v| v * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_fit_and_normal_equations() {
        // Column-major 5x2: intercept and t.
        let x = [1.0_f64, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 2.0, 3.0, 4.0];
        let qr = Qr::factor(&x, 5, 2).unwrap();
        let (b, rss) = qr.solve(&[1.0, 3.0, 5.0, 7.0, 9.0]);
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
        assert!(rss < 1e-20);
        // X'X = [[5,10],[10,30]], inverse [[0.6,-0.2],[-0.2,0.1]].
        assert!((qr.inverse_quadratic(&[0.0, 1.0]) - 0.1).abs() < 1e-12);
        assert!((qr.inverse_quadratic(&[1.0, 1.0]) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn residual_sum_of_squares() {
        let x = [1.0_f64, 1.0, 1.0, 1.0];
        let qr = Qr::factor(&x, 4, 1).unwrap();
        let (b, rss) = qr.solve(&[1.0, 2.0, 3.0, 6.0]);
        assert!((b[0] - 3.0).abs() < 1e-12);
        assert!((rss - 14.0).abs() < 1e-12);
    }

    #[test]
    fn detects_collinearity() {
        let x = [1.0_f64, 1.0, 1.0, 2.0, 2.0, 2.0];
        assert!(matches!(Qr::factor(&x, 3, 2), Err(Error::RankDeficient { column: 1 })));
    }
}
