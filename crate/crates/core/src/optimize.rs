//! Derivative-free maximisation of scalar functions on an interval.

use crate::scalar::Scalar;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`,
/// stopping once the bracket is narrower than `tol`. Returns `(x, f(x))`.
pub fn golden_section_max<T: Scalar>(mut f: impl FnMut(T) -> T, lo: T, hi: T, tol: T) -> (T, T) {
    let r = T::lit(INV_PHI);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximises `f` on `[lo, hi]` by scanning `points` equally spaced nodes and
/// refining the best node's neighbourhood by golden section. The result is
/// never worse than any scanned node, including both endpoints.
pub fn scan_then_refine<T: Scalar>(mut f: impl FnMut(T) -> T, lo: T, hi: T, points: usize, tol: T) -> (T, T) {
    let points = points.max(3);
    let step = (hi - lo) / T::count(points - 1);
    let node = |i: usize| if i == points - 1 { hi } else { lo + step * T::count(i) };
    let values: Vec<T> = (0..points).map(|i| f(node(i))).collect();
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let left = node(best.saturating_sub(1));
    let right = node((best + 1).min(points - 1));
    let (x, fx) = golden_section_max(&mut f, left, right, tol);
    if fx > values[best] {
        (x, fx)
    } else {
        (node(best), values[best])
    }
}
