//! Circulant Gaussian smoothing on periodic 2D/3D grids.
//!
//! A bandwidth `h` (FWHM) defines a wrapped Gaussian kernel `k` normalised to
//! unit sum. The correlation operator `S_h` is the covariance of unit white
//! noise convolved with `k` and rescaled by `1/sqrt(sum k^2)`; it is circulant
//! with unit diagonal and eigenvalues `lambda_j = khat_j^2 / sum k^2`.
//! Everything is evaluated on the full bounding grid with the exterior
//! zero-filled.

mod robust;

pub use robust::{robust_smooth, robust_smooth_with, RobustSmoothing};

use crate::error::{domain, Result};
use crate::fft::FftNd;
use crate::grid::{Grid, Volume};
use crate::optimize::scan_then_refine;
use crate::scalar::Scalar;

/// Spectral values are clamped from below to keep whitening finite.
pub const SPECTRAL_FLOOR: f64 = 1e-12;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4; // 2 sqrt(2 ln 2)
const FWHM_SCAN_POINTS: usize = 25;
const FWHM_LOG_TOL: f64 = 1e-3;

/// Bracket for bandwidth searches, in FWHM voxel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwhmBounds<T> {
    pub min: T,
    pub max: T,
}

impl<T: Scalar> FwhmBounds<T> {
    pub fn new(min: T, max: T) -> Result<Self> {
        if !(min > T::zero()) || !(max > min) || !max.is_finite() {
            return Err(domain("h_bounds", format!("need 0 < h_min < h_max, got ({min}, {max})")));
        }
        Ok(Self { min, max })
    }
}

impl<T: Scalar> Default for FwhmBounds<T> {
    fn default() -> Self {
        Self { min: T::lit(0.5), max: T::lit(20.0) }
    }
}

/// Eigenvalues of `S_h` on a grid, one per DFT frequency in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpectrum<T> {
    h: T,
    dims: Vec<usize>,
    lambda: Vec<T>,
    gain: Vec<T>,
    sum_sq: T,
}

/// Wrapped Gaussian along one periodic axis, normalised to unit sum, and its
/// (real, symmetric) DFT.
fn axis_kernel<T: Scalar>(n: usize, sigma: T) -> (Vec<T>, Vec<T>) {
    let two_s2 = T::lit(2.0) * sigma * sigma;
    let mut k: Vec<T> = (0..n)
        .map(|i| {
            let d = T::count(i.min(n - i));
            (-(d * d) / two_s2).exp()
        })
        .collect();
    let total: T = k.iter().copied().sum();
    k.iter_mut().for_each(|v| *v = *v / total);
    let tau = T::TAU();
    let hat = (0..n)
        .map(|f| {
            k.iter()
                .enumerate()
                .map(|(i, &v)| v * (tau * T::count((f * i) % n) / T::count(n)).cos())
                .sum()
        })
        .collect();
    (k, hat)
}

fn check_fwhm<T: Scalar>(h: T) -> Result<()> {
    if h > T::zero() && h.is_finite() {
        Ok(())
    } else {
        Err(domain("h", format!("FWHM must be positive and finite, got {h}")))
    }
}

/// Per-axis Gaussian standard deviations for a FWHM `h`; anisotropic voxels
/// shrink sigma along their longer axes.
fn axis_sigmas<T: Scalar>(h: T, voxel_sizes: &[f64]) -> Vec<T> {
    let sigma = h / T::lit(FWHM_PER_SIGMA);
    voxel_sizes.iter().map(|&v| sigma / T::lit(v)).collect()
}

pub fn kernel_spectrum<T: Scalar>(grid: &Grid, h: T) -> Result<KernelSpectrum<T>> {
    check_fwhm(h)?;
    let dims = grid.dims().to_vec();
    let sigmas = axis_sigmas(h, grid.voxel_sizes());
    let axes: Vec<(Vec<T>, Vec<T>)> = dims.iter().zip(&sigmas).map(|(&n, &s)| axis_kernel(n, s)).collect();
    let sum_sq: T = axes
        .iter()
        .map(|(k, _)| k.iter().map(|&v| v * v).sum::<T>())
        .fold(T::one(), |acc, s| acc * s);

    let len = grid.len();
    let mut gain = vec![T::one(); len];
    let mut stride = 1;
    for (axis, (_, hat)) in axes.iter().enumerate() {
        let n = dims[axis];
        for (j, g) in gain.iter_mut().enumerate() {
            *g = *g * hat[(j / stride) % n];
        }
        stride *= n;
    }
    let floor = T::lit(SPECTRAL_FLOOR);
    let lambda = gain.iter().map(|&g| (g * g / sum_sq).max(floor)).collect();
    Ok(KernelSpectrum { h, dims, lambda, gain, sum_sq })
}

impl<T: Scalar> KernelSpectrum<T> {
    pub fn h(&self) -> T {
        self.h
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    /// Zero-frequency eigenvalue, the row sum of `S_h`.
    pub fn lambda0(&self) -> T {
        self.lambda[0]
    }

    /// DFT of the unit-sum kernel.
    pub fn kernel_gain(&self) -> &[T] {
        &self.gain
    }

    /// `sum_j k_j^2` for the unit-sum kernel.
    pub fn kernel_sum_sq(&self) -> T {
        self.sum_sq
    }

    /// Row sum of `S_h^{-1/2}`: the constant vector is the zero-frequency
    /// eigenvector, so this is `lambda0^{-1/2}`.
    pub fn rho(&self) -> T {
        self.lambda0().sqrt().recip().min(T::one())
    }

    pub fn log_det(&self) -> T {
        self.lambda.iter().map(|l| l.ln()).sum()
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if self.dims == grid.dims() {
            Ok(())
        } else {
            Err(crate::error::Error::DimMismatch { expected: self.dims.clone(), found: grid.dims().to_vec() })
        }
    }
}

pub fn rho_of<T: Scalar>(spec: &KernelSpectrum<T>) -> T {
    spec.rho()
}

/// Smooths with the FWHM-`h` Gaussian, rescaled so unit white noise keeps
/// unit marginal variance.
pub fn smooth<T: Scalar>(vol: &Volume<T>, h: T) -> Result<Volume<T>> {
    let spec = kernel_spectrum(vol.grid(), h)?;
    let fft = FftNd::new(vol.grid().dims());
    Ok(smooth_with(&fft, vol, &spec))
}

/// [`smooth`] with a prepared transform and spectrum.
pub fn smooth_with<T: Scalar>(fft: &FftNd<T>, vol: &Volume<T>, spec: &KernelSpectrum<T>) -> Volume<T> {
    let values = smooth_values(fft, vol.zero_filled(), spec);
    vol.with_values(values)
}

/// Smooths raw full-grid values; no masking is applied to the result.
pub fn smooth_values<T: Scalar>(fft: &FftNd<T>, values: &[T], spec: &KernelSpectrum<T>) -> Vec<T> {
    let scale = spec.sum_sq.sqrt().recip();
    let gains: Vec<T> = spec.gain.iter().map(|&g| g * scale).collect();
    fft.filter_real(values, &gains)
}

/// Applies `S_h^{-1/2}` to the zero-filled field.
pub fn whiten<T: Scalar>(vol: &Volume<T>, spec: &KernelSpectrum<T>) -> Result<Volume<T>> {
    spec.check(vol.grid())?;
    let gains: Vec<T> = spec.lambda.iter().map(|l| l.sqrt().recip()).collect();
    Ok(vol.with_values(FftNd::new(spec.dims()).filter_real(vol.zero_filled(), &gains)))
}

/// Applies `S_h^{1/2}`, the inverse of [`whiten`].
pub fn color<T: Scalar>(vol: &Volume<T>, spec: &KernelSpectrum<T>) -> Result<Volume<T>> {
    spec.check(vol.grid())?;
    let gains: Vec<T> = spec.lambda.iter().map(|l| l.sqrt()).collect();
    Ok(vol.with_values(FftNd::new(spec.dims()).filter_real(vol.zero_filled(), &gains)))
}

/// Gaussian log-likelihood of a field under `N(0, S_h)`, evaluated for many
/// bandwidths from one periodogram.
pub struct ProfileLikelihood<T: Scalar> {
    grid: Grid,
    /// `|F_j|^2 / n`, so that `sum_j power_j / lambda_j = ||S^{-1/2} x||^2`.
    power: Vec<T>,
}

impl<T: Scalar> ProfileLikelihood<T> {
    pub fn new(vol: &Volume<T>) -> Self {
        let fft = FftNd::new(vol.grid().dims());
        let n = T::count(vol.grid().len());
        let power = fft.forward_real(vol.zero_filled()).iter().map(|c| c.norm_sqr() / n).collect();
        Self { grid: vol.grid().clone(), power }
    }

    pub fn eval(&self, h: T) -> Result<T> {
        let spec = kernel_spectrum(&self.grid, h)?;
        Ok(self.eval_spectrum(&spec))
    }

    pub fn eval_spectrum(&self, spec: &KernelSpectrum<T>) -> T {
        let n = T::count(self.grid.len());
        let half = T::lit(0.5);
        let (log_det, quad) = spec
            .lambda
            .iter()
            .zip(&self.power)
            .fold((T::zero(), T::zero()), |(ld, q), (&l, &p)| (ld + l.ln(), q + p / l));
        -half * n * T::TAU().ln() - half * log_det - half * quad
    }
}

pub fn profile_loglik<T: Scalar>(vol: &Volume<T>, h: T) -> Result<T> {
    ProfileLikelihood::new(vol).eval(h)
}

/// Maximum-likelihood FWHM in `[h_min, h_max]`: a log-spaced scan refined by
/// golden section on `log h`.
pub fn fit_fwhm_mle<T: Scalar>(vol: &Volume<T>, h_min: T, h_max: T) -> Result<T> {
    let bounds = FwhmBounds::new(h_min, h_max)?;
    let lik = ProfileLikelihood::new(vol);
    Ok(fit_fwhm_profile(&lik, bounds))
}

pub(crate) fn fit_fwhm_profile<T: Scalar>(lik: &ProfileLikelihood<T>, bounds: FwhmBounds<T>) -> T {
    let objective = |log_h: T| lik.eval(log_h.exp()).unwrap_or(T::neg_infinity());
    let (log_h, _) = scan_then_refine(
        objective,
        bounds.min.ln(),
        bounds.max.ln(),
        FWHM_SCAN_POINTS,
        T::lit(FWHM_LOG_TOL),
    );
    log_h.exp().max(bounds.min).min(bounds.max)
}
