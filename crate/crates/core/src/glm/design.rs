use serde::{Deserialize, Serialize};

use super::lstsq::Qr;
use crate::error::{domain, Error, Result};
use crate::evt::Sided;
use crate::scalar::Scalar;

/// Maximum of the unnormalised double-gamma response, attained near 5 s.
const HRF_PEAK: f64 = 0.175_441_201_231_944_5;
const GAMMA_5_FACTORIAL: f64 = 120.0;
const GAMMA_15_FACTORIAL: f64 = 1_307_674_368_000.0;
const UNDERSHOOT_RATIO: f64 = 1.0 / 6.0;

/// Canonical double-gamma haemodynamic response at `t` seconds, scaled to a
/// unit peak. Zero for `t <= 0`.
pub fn canonical_hrf<T: Scalar>(t: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    let t = t.to_f64_lossy();
    let positive = t.powi(5) * (-t).exp() / GAMMA_5_FACTORIAL;
    let undershoot = t.powi(15) * (-t).exp() / GAMMA_15_FACTORIAL;
    T::lit((positive - UNDERSHOOT_RATIO * undershoot) / HRF_PEAK)
}

/// On/off stimulus schedule made of equal-length blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub blocks: Vec<bool>,
    pub block_len: usize,
}

impl BlockSchedule {
    /// `n_blocks` alternating blocks, the first one off (rest).
    pub fn alternating(n_blocks: usize, block_len: usize) -> Self {
        BlockSchedule {
            blocks: (0..n_blocks).map(|b| b % 2 == 1).collect(),
            block_len,
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len() * self.block_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 0/1 indicator for `n` time points; points past the schedule are off.
    pub fn indicator<T: Scalar>(&self, n: usize) -> Vec<T> {
        (0..n)
            .map(|t| {
                let on = self.block_len > 0 && self.blocks.get(t / self.block_len).copied().unwrap_or(false);
                if on {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnRole {
    Intercept,
    Stimulus(usize),
    /// Polynomial drift of the given degree.
    Drift(usize),
}

/// Column-major `T x d` design with labelled columns, checked for full rank.
#[derive(Debug, Clone)]
pub struct DesignMatrix<T> {
    rows: usize,
    data: Vec<T>,
    roles: Vec<ColumnRole>,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn new(columns: Vec<Vec<T>>, roles: Vec<ColumnRole>) -> Result<Self> {
        if columns.is_empty() || columns.len() != roles.len() {
            return Err(domain("columns", "need one role per column and at least one column"));
        }
        let rows = columns[0].len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(domain("columns", "columns differ in length"));
        }
        if roles[0] != ColumnRole::Intercept || columns[0].iter().any(|&v| v != T::one()) {
            return Err(domain("columns", "first column must be the all-ones intercept"));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(domain("columns", "non-finite design entry"));
        }
        let design = DesignMatrix {
            rows,
            data: columns.into_iter().flatten().collect(),
            roles,
        };
        if rows < design.cols() {
            return Err(Error::TooShort { len: rows, params: design.cols() });
        }
        Qr::factor(&design.data, rows, design.cols())?;
        Ok(design)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[ColumnRole] {
        &self.roles
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Column-major storage.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `X beta` for a coefficient vector.
    pub fn predict(&self, beta: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        for (j, &b) in beta.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.column(j)) {
                *o = *o + b * x;
            }
        }
        out
    }

    /// Unit contrast on the first stimulus column.
    pub fn stimulus_contrast(&self, sided: Sided) -> Result<Contrast<T>> {
        let j = self
            .roles
            .iter()
            .position(|r| matches!(r, ColumnRole::Stimulus(_)))
            .ok_or_else(|| domain("design", "no stimulus column"))?;
        let mut w = vec![T::zero(); self.cols()];
        w[j] = T::one();
        Contrast::new(w, sided)
    }
}

/// Stimulus design: intercept, one HRF-convolved block regressor, then
/// polynomial drift terms of degree `1..=drift_order`.
pub fn build_design<T: Scalar>(
    schedule: &BlockSchedule,
    n: usize,
    tr: T,
    drift_order: usize,
) -> Result<DesignMatrix<T>> {
    if schedule.is_empty() {
        return Err(domain("schedule", "empty block schedule"));
    }
    if n < 8 {
        return Err(domain("n", "need at least 8 time points"));
    }
    if !(tr > T::zero() && tr.is_finite()) {
        return Err(domain("tr", "repetition time must be positive"));
    }
    let stimulus = schedule.indicator::<T>(n);
    let kernel: Vec<T> = (0..n).map(|lag| canonical_hrf(tr * T::count(lag))).collect();
    let convolved: Vec<T> = (0..n)
        .map(|t| (0..=t).map(|s| stimulus[s] * kernel[t - s]).sum())
        .collect();

    let mut columns = vec![vec![T::one(); n], convolved];
    let mut roles = vec![ColumnRole::Intercept, ColumnRole::Stimulus(0)];
    let last = T::count(n - 1);
    for degree in 1..=drift_order {
        let raw: Vec<T> = (0..n)
            .map(|t| (T::lit(2.0) * T::count(t) / last - T::one()).powi(degree as i32))
            .collect();
        let mean = raw.iter().copied().sum::<T>() / T::count(n);
        let centred: Vec<T> = raw.iter().map(|&v| v - mean).collect();
        let scale = centred.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        columns.push(centred.iter().map(|&v| v / scale).collect());
        roles.push(ColumnRole::Drift(degree));
    }
    DesignMatrix::new(columns, roles)
}

/// Linear contrast of GLM coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Contrast<T> {
    weights: Vec<T>,
    sided: Sided,
}

impl<T: Scalar> Contrast<T> {
    pub fn new(weights: Vec<T>, sided: Sided) -> Result<Self> {
        if weights.iter().all(|w| *w == T::zero()) || weights.iter().any(|w| !w.is_finite()) {
            return Err(domain("weights", "contrast must be finite and not all zero"));
        }
        Ok(Contrast { weights, sided })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn sided(&self) -> Sided {
        self.sided
    }

    pub fn negated(&self) -> Self {
        Contrast {
            weights: self.weights.iter().map(|&w| -w).collect(),
            sided: self.sided,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hrf_matches_reference_values() {
        // High-precision evaluation of gamma(6,1) - gamma(16,1)/6 over its peak.
        let table = [
            (1.0, 0.017474014018304231),
            (2.0, 0.20570657316791767),
            (7.0, 0.72482915667371107),
            (14.0, -0.072733199790366959),
            (21.0, -0.037378089911980714),
        ];
        for (t, want) in table {
            let got: f64 = canonical_hrf(t);
            assert!((got - want).abs() < 1e-14, "t={t}: {got}");
        }
        assert_eq!(canonical_hrf(0.0_f64), 0.0);
        assert!((canonical_hrf(4.998_510_634_579_569_f64) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phantom_design_shape() {
        let sched = BlockSchedule::alternating(16, 6);
        let x = build_design::<f64>(&sched, 96, 7.0, 1).unwrap();
        assert_eq!((x.rows(), x.cols()), (96, 3));
        assert!(x.column(1)[..6].iter().all(|&v| v == 0.0));
        assert!(x.column(1)[7] > 0.5);
        let drift = x.column(2);
        let step = drift[1] - drift[0];
        assert!(drift.windows(2).all(|w| ((w[1] - w[0]) - step).abs() < 1e-12));
        assert!((drift[0] + 1.0).abs() < 1e-12 && (drift[95] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_off_schedule_gives_zero_stimulus_and_is_rejected_as_rank_deficient() {
        let sched = BlockSchedule { blocks: vec![false; 16], block_len: 6 };
        assert!(sched.indicator::<f64>(96).iter().all(|&v| v == 0.0));
        assert!(matches!(
            build_design::<f64>(&sched, 96, 2.0, 1),
            Err(Error::RankDeficient { column: 1 })
        ));
    }

    #[test]
    fn empty_schedule_rejected() {
        let sched = BlockSchedule { blocks: vec![], block_len: 6 };
        assert!(build_design::<f64>(&sched, 96, 2.0, 1).is_err());
    }

    #[test]
    fn intercept_required() {
        let cols = vec![vec![2.0_f64; 10], (0..10).map(f64::from).collect()];
        assert!(DesignMatrix::new(cols, vec![ColumnRole::Intercept, ColumnRole::Drift(1)]).is_err());
    }

    #[test]
    fn contrast_rejects_zero() {
        assert!(Contrast::new(vec![0.0_f64, 0.0], Sided::One).is_err());
        let c = Contrast::new(vec![0.0_f64, 1.0], Sided::Two).unwrap();
        assert_eq!(c.negated().weights(), &[-0.0, -1.0]);
    }
}
