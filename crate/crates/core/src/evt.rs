//! Extreme-value limits for maxima of circulant-correlated and right-truncated
//! standard normal fields, and the cutoffs derived from them.
//!
//! A field is summarised by its in-mask site count `n` and `rho`, the row sum
//! of `R^{-1/2}` for its circulant correlation `R`. With `rho = 1` every
//! result reduces to the classical i.i.d. normal case.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::normal;
use crate::scalar::Scalar;
use crate::smoothing::KernelSpectrum;

/// Whether large values only (`One`) or large absolute values (`Two`) count as extreme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sided {
    #[default]
    One,
    Two,
}

impl Sided {
    /// Per-tail level: `alpha` for one-sided, `alpha / 2` for two-sided.
    pub fn tail_level<T: Scalar>(self, alpha: T) -> T {
        match self {
            Sided::One => alpha,
            Sided::Two => alpha * T::lit(0.5),
        }
    }
}

impl std::str::FromStr for Sided {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Sided::One),
            "two" => Ok(Sided::Two),
            other => Err(domain("sided", format!("expected `one` or `two`, got `{other}`"))),
        }
    }
}

impl std::fmt::Display for Sided {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sided::One => "one",
            Sided::Two => "two",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSummary<T> {
    n: usize,
    rho: T,
}

impl<T: Scalar> CorrelationSummary<T> {
    pub fn new(n: usize, rho: T) -> Result<Self> {
        if n == 0 {
            return Err(domain("n", "at least one site is required"));
        }
        if !(rho > T::zero() && rho <= T::one()) {
            return Err(domain("rho", format!("must lie in (0, 1], got {rho}")));
        }
        Ok(Self { n, rho })
    }

    /// Independent sites.
    pub fn independent(n: usize) -> Result<Self> {
        Self::new(n, T::one())
    }

    /// Summary for `n` in-mask sites correlated as described by `spectrum`.
    pub fn from_spectrum(n: usize, spectrum: &KernelSpectrum<T>) -> Result<Self> {
        Self::new(n, spectrum.rho())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(n, self.rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GumbelConstants<T> {
    pub a_n: T,
    pub b_n: T,
}

/// Normalising constants for the right-truncated maximum. `location` is the
/// truncation point; `tau` is always one for truncated normals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevWeibullConstants<T> {
    pub a_trunc: T,
    pub location: T,
    pub tau: T,
}

fn check_level<T: Scalar>(name: &'static str, alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(domain(name, format!("must lie in (0, 1), got {alpha}")))
    }
}

/// `ln Φ(x)` without cancellation in the upper tail.
fn ln_cdf<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        (-normal::sf(x)).ln_1p()
    } else {
        normal::cdf(x).ln()
    }
}

/// Distribution of the maximum of a circulant-correlated standard normal
/// field: `[Φ(ρx)]^n`.
pub fn max_cdf_correlated<T: Scalar>(x: T, s: &CorrelationSummary<T>) -> T {
    if x == T::infinity() {
        return T::one();
    }
    (T::count(s.n) * ln_cdf(s.rho * x)).exp()
}

/// Distribution of the maximum of a circulant-correlated field truncated at
/// `eta`: `[Φ(ρx)/Φ(ρη)]^n` for `x < eta`, one above.
pub fn max_cdf_truncated<T: Scalar>(x: T, eta: T, s: &CorrelationSummary<T>) -> T {
    if x >= eta {
        return T::one();
    }
    (T::count(s.n) * (ln_cdf(s.rho * x) - ln_cdf(s.rho * eta))).exp()
}

pub fn gumbel_cdf<T: Scalar>(x: T) -> T {
    (-(-x).exp()).exp()
}

/// Reverse Weibull distribution `exp(-(-x)^τ)` on `x <= 0`.
pub fn revweibull_cdf<T: Scalar>(x: T, tau: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        (-(-x).powf(tau)).exp()
    }
}

/// Gumbel normalising constants `b_n = Φ^{-1}(1 - 1/n)/ρ` and
/// `a_n = 1/(ρ n φ(Φ^{-1}(1 - 1/n)))`.
pub fn gumbel_constants<T: Scalar>(s: &CorrelationSummary<T>) -> Result<GumbelConstants<T>> {
    if s.n < 2 {
        return Err(domain("n", "Gumbel constants need at least two sites"));
    }
    let n = T::count(s.n);
    let q = normal::isf(n.recip());
    Ok(GumbelConstants {
        a_n: (s.rho * n * normal::pdf(q)).recip(),
        b_n: q / s.rho,
    })
}

/// Upper `alpha` point of the standard Gumbel law: `-ln(-ln(1 - alpha))`.
pub fn gumbel_upper_quantile<T: Scalar>(alpha: T) -> Result<T> {
    check_level("alpha", alpha)?;
    Ok(-(-(-alpha).ln_1p()).ln())
}

/// CDF of the standard normal truncated above at `eta`.
pub fn truncnorm_cdf<T: Scalar>(x: T, eta: T) -> T {
    if x >= eta {
        T::one()
    } else {
        (ln_cdf(x) - ln_cdf(eta)).exp()
    }
}

/// Quantile of the standard normal truncated above at `eta`: `Φ^{-1}(q Φ(η))`.
pub fn truncnorm_quantile<T: Scalar>(q: T, eta: T) -> Result<T> {
    check_level("q", q)?;
    if eta.is_nan() {
        return Err(domain("eta", "must not be NaN"));
    }
    let mass = q * normal::cdf(eta);
    if mass <= T::lit(0.5) {
        Ok(normal::quantile(mass))
    } else {
        // 1 - qΦ(η) = Q(η) + (1 - q)Φ(η), free of cancellation near the endpoint.
        let upper = normal::sf(eta) + (T::one() - q) * normal::cdf(eta);
        Ok(normal::isf(upper))
    }
}

/// Upper `alpha` point of the reverse Weibull law: `-(-ln(1 - alpha))^{1/τ}`.
pub fn revweibull_upper_quantile<T: Scalar>(alpha: T, tau: T) -> Result<T> {
    check_level("alpha", alpha)?;
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(domain("tau", format!("must be positive, got {tau}")));
    }
    let e = -(-alpha).ln_1p();
    Ok(if tau == T::one() { -e } else { -e.powf(tau.recip()) })
}

/// Reverse Weibull constants for the maximum of a field truncated at `eta`:
/// `a = (ρη - Φ^{-1}((1 - 1/n) Φ(ρη)))/ρ`, located at `eta`.
pub fn revweibull_constants<T: Scalar>(
    s: &CorrelationSummary<T>,
    eta: T,
) -> Result<RevWeibullConstants<T>> {
    if s.n < 2 {
        return Err(domain("n", "reverse Weibull constants need at least two sites"));
    }
    if !eta.is_finite() {
        return Err(domain("eta", format!("must be finite, got {eta}")));
    }
    let z = s.rho * eta;
    let inv_n = T::count(s.n).recip();
    let mass = (T::one() - inv_n) * normal::cdf(z);
    let inner = if mass <= T::lit(0.5) {
        normal::quantile(mass)
    } else {
        normal::isf(normal::sf(z) + inv_n * normal::cdf(z))
    };
    Ok(RevWeibullConstants {
        a_trunc: (z - inner) / s.rho,
        location: eta,
        tau: T::one(),
    })
}

/// Cutoff for iteration `k` (1-based). The first iteration uses the Gumbel
/// limit; later ones step down from `prev_eta` by the reverse Weibull
/// quantile of the truncated maximum.
pub fn threshold<T: Scalar>(
    k: usize,
    s: &CorrelationSummary<T>,
    alpha: T,
    prev_eta: Option<T>,
    sided: Sided,
) -> Result<T> {
    if k == 0 {
        return Err(domain("k", "iterations are numbered from 1"));
    }
    let level = sided.tail_level(alpha);
    if k == 1 {
        let g = gumbel_constants(s)?;
        return Ok(g.a_n * gumbel_upper_quantile(level)? + g.b_n);
    }
    let eta = prev_eta.ok_or(Error::MissingPreviousThreshold(k))?;
    let w = revweibull_constants(s, eta)?;
    Ok(w.location + w.a_trunc * revweibull_upper_quantile(level, w.tau)?)
}
