//! Voxelwise linear models with AR(p) errors, BIC order selection and
//! t-statistic maps.

pub mod ar;
mod design;
mod lstsq;

use rayon::prelude::*;
use serde::Serialize;

pub use design::{build_design, canonical_hrf, BlockSchedule, ColumnRole, Contrast, DesignMatrix};

use crate::error::{domain, Error, Result};
use crate::grid::{Grid, Volume};
use crate::scalar::Scalar;
use lstsq::Qr;

/// Default largest AR order tried by [`select_order`].
pub const DEFAULT_MAX_ORDER: usize = 5;
/// Number of OLS/AR alternations in the feasible GLS fit.
const GLS_ITERATIONS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoxelFit<T> {
    pub beta: Vec<T>,
    pub phi: Vec<T>,
    /// Innovation variance, whitened RSS over its residual degrees of freedom.
    pub sigma2: T,
    pub p: usize,
    /// Conditional Gaussian loglikelihood on the comparison subsample.
    pub loglik: T,
    pub bic: T,
    pub tstat: T,
}

impl<T: Scalar> VoxelFit<T> {
    pub fn order(&self) -> usize {
        self.p
    }
}

/// `fit_ar_glm` with the likelihood evaluated on all points from `p` on.
pub fn fit_ar_glm<T: Scalar>(
    y: &[T],
    design: &DesignMatrix<T>,
    p: usize,
    contrast: &Contrast<T>,
) -> Result<VoxelFit<T>> {
    fit_from(y, design, p, p, contrast)
}

/// Fits `p = 0..=p_max` and keeps the smallest BIC; ties go to the smaller
/// order. All likelihoods use the points from `p_max` on.
pub fn select_order<T: Scalar>(
    y: &[T],
    design: &DesignMatrix<T>,
    p_max: usize,
    contrast: &Contrast<T>,
) -> Result<VoxelFit<T>> {
    let mut best: Option<VoxelFit<T>> = None;
    for p in 0..=p_max {
        let fit = fit_from(y, design, p, p_max, contrast)?;
        if best.as_ref().is_none_or(|b| fit.bic < b.bic) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least order 0 is fitted"))
}

fn fit_from<T: Scalar>(
    y: &[T],
    design: &DesignMatrix<T>,
    p: usize,
    start: usize,
    contrast: &Contrast<T>,
) -> Result<VoxelFit<T>> {
    let n = design.rows();
    let d = design.cols();
    if y.len() != n {
        return Err(Error::DimMismatch { expected: vec![n], found: vec![y.len()] });
    }
    if contrast.weights().len() != d {
        return Err(Error::DimMismatch { expected: vec![d], found: vec![contrast.weights().len()] });
    }
    if n <= d + start.max(p) + 2 {
        return Err(Error::TooShort { len: n, params: d + start.max(p) + 2 });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(domain("y", "non-finite observation"));
    }

    let qr = Qr::factor(design.as_slice(), n, d)?;
    let (mut beta, _) = qr.solve(y);
    let mut phi = Vec::new();
    let mut whitened_qr = qr;
    let mut whitened_rss = T::zero();
    if p == 0 {
        whitened_rss = residuals(y, design, &beta).iter().map(|&e| e * e).sum();
    }
    for _ in 0..if p == 0 { 0 } else { GLS_ITERATIONS } {
        phi = ar::yule_walker(&residuals(y, design, &beta), p)?;
        let wx: Vec<T> = (0..d).flat_map(|j| ar::ar_filter(design.column(j), &phi)).collect();
        whitened_qr = Qr::factor(&wx, n - p, d)?;
        let (b, rss) = whitened_qr.solve(&ar::ar_filter(y, &phi));
        beta = b;
        whitened_rss = rss;
    }

    let innovations = ar::ar_filter(&residuals(y, design, &beta), &phi);
    let tail = &innovations[start - p..];
    let m = T::count(tail.len());
    let two_pi = T::lit(2.0) * T::PI();
    let mle_var = tail.iter().map(|&e| e * e).sum::<T>() / m;
    let loglik = if mle_var > T::zero() {
        -m / T::lit(2.0) * ((two_pi * mle_var).ln() + T::one())
    } else {
        T::infinity()
    };
    let bic = -T::lit(2.0) * loglik + T::count(d + p + 1) * m.ln();

    let sigma2 = whitened_rss / T::count(n - p - d);
    let effect: T = contrast.weights().iter().zip(&beta).map(|(&c, &b)| c * b).sum();
    let se = (whitened_qr.inverse_quadratic(contrast.weights()) * sigma2).sqrt();
    let tstat = if se > T::zero() {
        effect / se
    } else if effect == T::zero() {
        T::zero()
    } else {
        effect.signum() * T::infinity()
    };
    Ok(VoxelFit { beta, phi, sigma2, p, loglik, bic, tstat })
}

fn residuals<T: Scalar>(y: &[T], design: &DesignMatrix<T>, beta: &[T]) -> Vec<T> {
    y.iter().zip(design.predict(beta)).map(|(&a, b)| a - b).collect()
}

/// Runs [`select_order`] on every in-mask site. `series` holds one
/// contiguous time series of length `design.rows()` per in-mask site, in
/// mask order.
pub fn fit_sites<T: Scalar>(
    series: &[T],
    design: &DesignMatrix<T>,
    p_max: usize,
    contrast: &Contrast<T>,
) -> Result<Vec<VoxelFit<T>>> {
    let n = design.rows();
    if !series.len().is_multiple_of(n) {
        return Err(domain("series", "length is not a multiple of the series length"));
    }
    series
        .par_chunks(n)
        .map(|y| select_order(y, design, p_max, contrast))
        .collect()
}

/// Map of t-statistics, one fit per in-mask site in mask order.
pub fn build_spm<T: Scalar>(fits: &[VoxelFit<T>], grid: &Grid) -> Result<Volume<T>> {
    let needed = grid.n_in_mask();
    if fits.len() < needed {
        return Err(Error::MissingFit(fits.len()));
    }
    if fits.len() > needed {
        return Err(domain("fits", "more fits than in-mask sites"));
    }
    let t: Vec<T> = fits.iter().map(|f| f.tstat).collect();
    if let Some(i) = t.iter().position(|v| !v.is_finite()) {
        return Err(domain("fits", format!("non-finite t-statistic at in-mask site {i}")));
    }
    Volume::from_in_mask(grid.clone(), &t)
}

/// Per-site selected AR orders as a volume.
pub fn order_map<T: Scalar>(fits: &[VoxelFit<T>], grid: &Grid) -> Result<Volume<T>> {
    let p: Vec<T> = fits.iter().map(|f| T::count(f.p)).collect();
    Volume::from_in_mask(grid.clone(), &p)
}
