//! Regular 2D/3D grids with an inclusion mask, and scalar fields on them.
//!
//! Sites are stored with the first axis varying fastest.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MIN_EXTENT: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    voxel_sizes: Vec<f64>,
    mask: Arc<[bool]>,
    in_mask: usize,
}

impl Grid {
    pub fn new(dims: Vec<usize>, voxel_sizes: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if !(2..=3).contains(&dims.len()) {
            return Err(Error::InvalidGrid(format!("expected 2 or 3 axes, got {}", dims.len())));
        }
        if let Some(&e) = dims.iter().find(|&&e| e < MIN_EXTENT) {
            return Err(Error::InvalidGrid(format!("extent {e} below minimum {MIN_EXTENT}")));
        }
        if voxel_sizes.len() != dims.len() || voxel_sizes.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("bad voxel sizes {voxel_sizes:?}")));
        }
        let len: usize = dims.iter().product();
        if mask.len() != len {
            return Err(Error::InvalidGrid(format!("mask has {} sites, grid has {len}", mask.len())));
        }
        let in_mask = mask.iter().filter(|&&m| m).count();
        if in_mask == 0 {
            return Err(Error::InvalidGrid("mask is empty".into()));
        }
        Ok(Self { dims, voxel_sizes, mask: mask.into(), in_mask })
    }

    /// Unit-spaced grid with every site included.
    pub fn full(dims: &[usize]) -> Result<Self> {
        let len = dims.iter().product();
        Self::new(dims.to_vec(), vec![1.0; dims.len()], vec![true; len])
    }

    pub fn with_mask(dims: &[usize], mask: Vec<bool>) -> Result<Self> {
        Self::new(dims.to_vec(), vec![1.0; dims.len()], mask)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn voxel_sizes(&self) -> &[f64] {
        &self.voxel_sizes
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Number of sites in the bounding grid.
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// Number of in-mask sites.
    pub fn n_in_mask(&self) -> usize {
        self.in_mask
    }

    pub fn contains(&self, index: usize) -> bool {
        self.mask[index]
    }

    /// Indices of in-mask sites in storage order.
    pub fn mask_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i))
    }

    pub fn linear_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dims.len());
        let mut idx = 0;
        for (axis, &c) in coords.iter().enumerate().rev() {
            idx = idx * self.dims[axis] + c;
        }
        idx
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        self.dims
            .iter()
            .map(|&d| {
                let c = index % d;
                index /= d;
                c
            })
            .collect()
    }
}

/// A scalar field over a [`Grid`]. Out-of-mask sites hold zero internally and
/// read back as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    grid: Grid,
    values: Vec<T>,
}

impl<T: Scalar> Volume<T> {
    /// Builds a volume from full-grid values; out-of-mask entries are discarded.
    pub fn new(grid: Grid, mut values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimMismatch { expected: vec![grid.len()], found: vec![values.len()] });
        }
        for (v, &m) in values.iter_mut().zip(grid.mask()) {
            if !m {
                *v = T::zero();
            } else if !v.is_finite() {
                return Err(Error::Domain { name: "values", reason: "non-finite in-mask value".into() });
            }
        }
        Ok(Self { grid, values })
    }

    /// Builds a volume from one value per in-mask site, in storage order.
    pub fn from_in_mask(grid: Grid, in_mask: &[T]) -> Result<Self> {
        if in_mask.len() != grid.n_in_mask() {
            return Err(Error::DimMismatch { expected: vec![grid.n_in_mask()], found: vec![in_mask.len()] });
        }
        let mut values = vec![T::zero(); grid.len()];
        for (idx, &v) in grid.mask_indices().zip(in_mask) {
            values[idx] = v;
        }
        Self::new(grid, values)
    }

    pub fn zeros(grid: Grid) -> Self {
        let values = vec![T::zero(); grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn get(&self, index: usize) -> Option<T> {
        self.grid.contains(index).then(|| self.values[index])
    }

    /// Full-grid values with zeros outside the mask.
    pub fn zero_filled(&self) -> &[T] {
        &self.values
    }

    pub fn in_mask_values(&self) -> Vec<T> {
        self.grid.mask_indices().map(|i| self.values[i]).collect()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let values = self
            .values
            .iter()
            .zip(self.grid.mask())
            .map(|(&v, &m)| if m { f(v) } else { T::zero() })
            .collect();
        Self { grid: self.grid.clone(), values }
    }

    /// Replaces the values, zeroing out-of-mask sites. Non-finite values are
    /// not checked; used by the spectral transforms.
    pub(crate) fn with_values(&self, mut values: Vec<T>) -> Self {
        for (v, &m) in values.iter_mut().zip(self.grid.mask()) {
            if !m {
                *v = T::zero();
            }
        }
        Self { grid: self.grid.clone(), values }
    }
}
