//! Standard normal density, distribution and quantile functions.
//!
//! The distribution function switches between a positive-term series for
//! `erf` near the origin and a continued fraction for `erfc` in the tails, so
//! both tails are computed with small relative error. The quantile starts from
//! Acklam's rational approximation and polishes it with Halley steps against
//! the distribution function.

use crate::scalar::Scalar;

const SERIES_LIMIT: f64 = 1.2;
const MAX_TERMS: usize = 500;

/// Standard normal density.
pub fn pdf<T: Scalar>(x: T) -> T {
    let inv_sqrt_2pi = T::lit(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(x * x) * T::lit(0.5)).exp()
}

/// Complementary error function for `u >= 0`.
fn erfc_nonneg<T: Scalar>(u: T) -> T {
    let eps = T::epsilon();
    let sqrt_pi = T::PI().sqrt();
    if u < T::lit(SERIES_LIMIT) {
        // erf(u) = 2/sqrt(pi) e^{-u^2} sum_n 2^n u^{2n+1} / (2n+1)!!
        let two_u2 = T::lit(2.0) * u * u;
        let mut term = u;
        let mut sum = u;
        for n in 1..MAX_TERMS {
            term = term * two_u2 / T::count(2 * n + 1);
            sum = sum + term;
            if term <= eps * sum {
                break;
            }
        }
        let erf = T::lit(2.0) / sqrt_pi * (-(u * u)).exp() * sum;
        T::one() - erf
    } else {
        // erfc(u) = e^{-u^2}/sqrt(pi) * 1/(u + (1/2)/(u + 1/(u + (3/2)/(u + ...))))
        // evaluated by the modified Lentz method.
        let tiny = T::min_positive_value() / eps;
        let mut f = u;
        let mut c = u;
        let mut d = T::zero();
        for k in 1..MAX_TERMS {
            let a = T::count(k) * T::lit(0.5);
            d = u + a * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = u + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = d.recip();
            let delta = c * d;
            f = f * delta;
            if (delta - T::one()).abs() <= eps {
                break;
            }
        }
        (-(u * u)).exp() / (sqrt_pi * f)
    }
}

/// Upper tail probability `P(Z > x)`.
pub fn sf<T: Scalar>(x: T) -> T {
    let u = x * T::FRAC_1_SQRT_2();
    if x >= T::zero() {
        T::lit(0.5) * erfc_nonneg(u)
    } else {
        T::one() - T::lit(0.5) * erfc_nonneg(-u)
    }
}

/// Distribution function `P(Z <= x)`.
pub fn cdf<T: Scalar>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    sf(-x)
}

/// Rational approximation for the lower-tail quantile, `0 < p <= 0.5`.
fn acklam_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Lower-tail quantile for `0 < p <= 0.5`; result is `<= 0`.
fn quantile_lower<T: Scalar>(p: T) -> T {
    let pf = p.to_f64_lossy();
    let mut x = T::lit(acklam_lower(pf.max(f64::MIN_POSITIVE)));
    let sqrt_2pi = T::lit(2.506_628_274_631_000_5);
    for _ in 0..3 {
        let err = cdf(x) - p;
        let u = err * sqrt_2pi * (x * x * T::lit(0.5)).exp();
        if !u.is_finite() {
            break;
        }
        let step = u / (T::one() + x * u * T::lit(0.5));
        x = x - step;
        if step.abs() <= T::epsilon() * x.abs().max(T::one()) {
            break;
        }
    }
    x
}

/// Quantile function `Φ^{-1}(p)`. Returns `-inf`/`+inf` at 0/1 and NaN outside `[0, 1]`.
pub fn quantile<T: Scalar>(p: T) -> T {
    if p.is_nan() || p < T::zero() || p > T::one() {
        return T::nan();
    }
    if p == T::zero() {
        return T::neg_infinity();
    }
    if p == T::one() {
        return T::infinity();
    }
    let half = T::lit(0.5);
    if p == half {
        T::zero()
    } else if p < half {
        quantile_lower(p)
    } else {
        -quantile_lower(T::one() - p)
    }
}

/// Upper-tail quantile: the `x` with `P(Z > x) = q`. Accurate for tiny `q`.
pub fn isf<T: Scalar>(q: T) -> T {
    -quantile(q)
}
