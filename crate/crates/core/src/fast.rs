//! The FAST iteration: smooth the map, threshold it with an extreme-value
//! cutoff, grow the activation set, and stop when successive maps stop
//! getting more alike.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::evt::{threshold, CorrelationSummary, Sided};
use crate::fft::FftNd;
use crate::grid::{Grid, Volume};
use crate::scalar::Scalar;
use crate::smoothing::{
    fit_fwhm_profile, kernel_spectrum, robust_smooth_with, smooth_with, FwhmBounds, ProfileLikelihood,
};

/// Smoothing used inside each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Gaussian smoothing at the maximum-likelihood bandwidth.
    Am,
    /// Robust DCT smoothing, bandwidth fitted afterwards.
    Ar,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "am" => Ok(Variant::Am),
            "ar" => Ok(Variant::Ar),
            other => Err(domain("variant", format!("expected `am` or `ar`, got `{other}`"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Am => "am",
            Variant::Ar => "ar",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastConfig<T> {
    pub alpha: T,
    pub variant: Variant,
    pub sided: Sided,
    pub h_bounds: FwhmBounds<T>,
    pub max_iter: usize,
}

impl<T: Scalar> Default for FastConfig<T> {
    fn default() -> Self {
        FastConfig {
            alpha: T::lit(0.025),
            variant: Variant::Am,
            sided: Sided::One,
            h_bounds: FwhmBounds::default(),
            max_iter: 20,
        }
    }
}

impl<T: Scalar> FastConfig<T> {
    pub fn new(alpha: T, variant: Variant, sided: Sided) -> Result<Self> {
        let cfg = FastConfig { alpha, variant, sided, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha < T::lit(0.5)) {
            return Err(domain("alpha", format!("need 0 < alpha < 0.5, got {}", self.alpha)));
        }
        FwhmBounds::new(self.h_bounds.min, self.h_bounds.max)?;
        if self.max_iter < 2 {
            return Err(domain("max_iter", "need at least 2 iterations"));
        }
        Ok(())
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord<T> {
    pub k: usize,
    pub variant: Variant,
    pub h: T,
    pub rho: T,
    pub eta: T,
    /// Inactive sites the cutoff was computed for (`n_{k-1}`).
    pub n_tested: usize,
    /// Inactive sites after this iteration (`n_k`).
    pub n_inactive: usize,
    pub newly_activated: usize,
    /// Jaccard index between this iteration's map and the previous one.
    pub jaccard: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    /// The lookahead rule fired.
    Converged,
    /// Stopped at the iteration cap; the last map is returned.
    MaxIterations,
    /// Fewer than two inactive sites were left to threshold.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationState<T> {
    grid: Grid,
    /// Iteration at which each in-mask site became active.
    activated_at: Vec<Option<usize>>,
    n_inactive: usize,
    history: Vec<IterationRecord<T>>,
    /// The discarded lookahead iteration that triggered the stop, if any.
    lookahead: Option<IterationRecord<T>>,
    status: RunStatus,
}

impl<T: Scalar> ActivationState<T> {
    /// `zeta^(0)`: every site inactive.
    pub fn new(grid: &Grid) -> Self {
        ActivationState {
            grid: grid.clone(),
            activated_at: vec![None; grid.n_in_mask()],
            n_inactive: grid.n_in_mask(),
            history: Vec::new(),
            lookahead: None,
            status: RunStatus::Running,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Activation per in-mask site, in mask order.
    pub fn zeta(&self) -> Vec<bool> {
        self.activated_at.iter().map(Option::is_some).collect()
    }

    /// The map after iteration `k` (`k = 0` is all-inactive).
    pub fn map_at(&self, k: usize) -> Vec<bool> {
        self.activated_at.iter().map(|a| a.is_some_and(|i| i <= k)).collect()
    }

    pub fn n_inactive(&self) -> usize {
        self.n_inactive
    }

    pub fn n_active(&self) -> usize {
        self.activated_at.len() - self.n_inactive
    }

    /// Completed iterations.
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[IterationRecord<T>] {
        &self.history
    }

    pub fn lookahead(&self) -> Option<&IterationRecord<T>> {
        self.lookahead.as_ref()
    }

    pub fn status(&self) -> RunStatus {
        self.status
    }

    /// Last threshold applied, if any.
    pub fn last_eta(&self) -> Option<T> {
        self.history.last().map(|r| r.eta)
    }

    /// 0/1 activation volume.
    pub fn activation_volume(&self) -> Volume<T> {
        let v: Vec<T> = self
            .activated_at
            .iter()
            .map(|a| if a.is_some() { T::one() } else { T::zero() })
            .collect();
        Volume::from_in_mask(self.grid.clone(), &v).expect("one value per in-mask site")
    }
}

/// `|a ∩ b| / |a ∪ b|`, taken as 1 when both maps are empty.
pub fn jaccard(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SiteMismatch { left: a.len(), right: b.len() });
    }
    let (mut both, mut either) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        both += usize::from(x && y);
        either += usize::from(x || y);
    }
    Ok(if either == 0 { 1.0 } else { both as f64 / either as f64 })
}

/// One smoothing-and-thresholding iteration applied to `field`, the map
/// produced by iteration `k - 1` (the raw SPM for `k = 1`). Returns the
/// smoothed map and the updated state.
pub fn fast_step<T: Scalar>(
    field: &Volume<T>,
    state: &ActivationState<T>,
    k: usize,
    config: &FastConfig<T>,
) -> Result<(Volume<T>, ActivationState<T>)> {
    config.validate()?;
    if k == 0 {
        return Err(domain("k", "iterations are numbered from 1"));
    }
    if field.grid() != state.grid() {
        return Err(Error::DimMismatch {
            expected: state.grid().dims().to_vec(),
            found: field.grid().dims().to_vec(),
        });
    }
    let prev_eta = if k == 1 {
        None
    } else {
        Some(state.last_eta().ok_or(Error::MissingPreviousThreshold(k))?)
    };
    let n_tested = state.n_inactive;
    if n_tested < 2 {
        let mut done = state.clone();
        done.status = RunStatus::Exhausted;
        return Ok((field.clone(), done));
    }

    let (smoothed, h) = match config.variant {
        Variant::Am => {
            let h = fit_fwhm_profile(&ProfileLikelihood::new(field), config.h_bounds);
            let spec = kernel_spectrum(field.grid(), h)?;
            (smooth_with(&FftNd::new(field.grid().dims()), field, &spec), h)
        }
        Variant::Ar => {
            let robust = robust_smooth_with(field, config.h_bounds)?;
            let scale = robust.null_sd.recip();
            (robust.volume.map(|v| v * scale), robust.fwhm)
        }
    };
    let spec = kernel_spectrum(field.grid(), h)?;
    let summary = CorrelationSummary::from_spectrum(n_tested, &spec)?;
    let eta = threshold(k, &summary, config.alpha, prev_eta, config.sided)?;

    let mut next = state.clone();
    let values = smoothed.in_mask_values();
    let mut newly = 0;
    for (slot, &v) in next.activated_at.iter_mut().zip(&values) {
        let stat = match config.sided {
            Sided::One => v,
            Sided::Two => v.abs(),
        };
        if slot.is_none() && stat > eta {
            *slot = Some(k);
            newly += 1;
        }
    }
    next.n_inactive -= newly;
    let jac = jaccard(&next.map_at(k), &state.map_at(k - 1))?;
    next.history.push(IterationRecord {
        k,
        variant: config.variant,
        h,
        rho: summary.rho(),
        eta,
        n_tested,
        n_inactive: next.n_inactive,
        newly_activated: newly,
        jaccard: jac,
    });
    Ok((smoothed, next))
}

/// Iterates [`fast_step`] from the all-inactive map and returns `zeta^(k)`
/// for the first `k` with `J(zeta^(k), zeta^(k-1)) <= J(zeta^(k+1), zeta^(k))`.
pub fn fast_run<T: Scalar>(spm: &Volume<T>, config: &FastConfig<T>) -> Result<ActivationState<T>> {
    config.validate()?;
    let start = ActivationState::new(spm.grid());
    let (mut field, mut state) = fast_step(spm, &start, 1, config)?;
    loop {
        if state.status == RunStatus::Exhausted {
            return Ok(state);
        }
        let k = state.iterations();
        if k >= config.max_iter {
            state.status = RunStatus::MaxIterations;
            return Ok(state);
        }
        let (next_field, next) = fast_step(&field, &state, k + 1, config)?;
        if next.status == RunStatus::Exhausted {
            return Ok(next);
        }
        let current = state.history[k - 1].jaccard;
        let ahead = next.history[k].jaccard;
        if current <= ahead {
            state.lookahead = next.history.last().cloned();
            state.status = RunStatus::Converged;
            return Ok(state);
        }
        field = next_field;
        state = next;
    }
}
