//! Cluster-extent thresholding with a Monte-Carlo null for the largest
//! cluster size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::evt::Sided;
use crate::fft::FftNd;
use crate::grid::{Grid, Volume};
use crate::normal;
use crate::phantom::derive_seed;
use crate::smoothing::{kernel_spectrum, smooth_values};

pub const MIN_MC_ITERS: usize = 200;

/// Offsets of the second-order neighbourhood: 8 neighbours in 2D, 18 (faces
/// and edges) in 3D.
fn neighbour_offsets(n_axes: usize) -> Vec<Vec<isize>> {
    let mut out = Vec::new();
    let total = 3usize.pow(n_axes as u32);
    for code in 0..total {
        let off: Vec<isize> = (0..n_axes).map(|a| (code / 3usize.pow(a as u32) % 3) as isize - 1).collect();
        let nonzero = off.iter().filter(|&&o| o != 0).count();
        if (1..=2).contains(&nonzero) {
            out.push(off);
        }
    }
    out
}

/// Connected components of `active` (full-grid flags) under second-order
/// adjacency without wrap-around. Returns a component id per site (`None`
/// for inactive sites) and the component sizes.
pub fn label_clusters(grid: &Grid, active: &[bool]) -> (Vec<Option<usize>>, Vec<usize>) {
    let dims = grid.dims();
    let offsets = neighbour_offsets(dims.len());
    let mut labels = vec![None; active.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..active.len() {
        if !active[start] || labels[start].is_some() {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        labels[start] = Some(id);
        stack.push(start);
        while let Some(i) = stack.pop() {
            size += 1;
            let c = grid.coords(i);
            'nbr: for off in &offsets {
                let mut j = 0;
                let mut stride = 1;
                for ((&ci, &o), &d) in c.iter().zip(off).zip(dims) {
                    let v = ci as isize + o;
                    if v < 0 || v >= d as isize {
                        continue 'nbr;
                    }
                    j += v as usize * stride;
                    stride *= d;
                }
                if active[j] && labels[j].is_none() {
                    labels[j] = Some(id);
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

fn exceeds(v: f64, cutoff: f64, sided: Sided) -> bool {
    match sided {
        Sided::One => v > cutoff,
        Sided::Two => v.abs() > cutoff,
    }
}

/// Voxelwise cutoff `z_{1 - alpha_vox}` (per tail when two-sided).
pub fn voxel_cutoff(alpha_vox: f64, sided: Sided) -> Result<f64> {
    if !(alpha_vox > 0.0 && alpha_vox < 1.0) {
        return Err(domain("alpha_vox", "must lie in (0, 1)"));
    }
    Ok(normal::isf(sided.tail_level(alpha_vox)))
}

/// Smallest cluster size `k` whose null exceedance `P(max cluster >= k)` is
/// at most `fw_alpha`, from `mc_iters` smoothed white-noise fields.
pub fn cluster_size_threshold(
    grid: &Grid,
    fwhm: f64,
    cutoff: f64,
    sided: Sided,
    fw_alpha: f64,
    mc_iters: usize,
    seed: u64,
) -> Result<usize> {
    if mc_iters < MIN_MC_ITERS {
        return Err(domain("mc_iters", format!("need at least {MIN_MC_ITERS} iterations")));
    }
    if !(fw_alpha > 0.0 && fw_alpha < 1.0) {
        return Err(domain("fw_alpha", "must lie in (0, 1)"));
    }
    let spec = kernel_spectrum(grid, fwhm)?;
    let fft = FftNd::new(grid.dims());
    let mut maxima: Vec<usize> = (0..mc_iters)
        .into_par_iter()
        .map(|it| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, it as u64));
            let noise: Vec<f64> = (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let field = smooth_values(&fft, &noise, &spec);
            let active: Vec<bool> = field
                .iter()
                .zip(grid.mask())
                .map(|(&v, &m)| m && exceeds(v, cutoff, sided))
                .collect();
            label_clusters(grid, &active).1.into_iter().max().unwrap_or(0)
        })
        .collect();
    maxima.sort_unstable();
    // Keep k at or above every null maximum except the largest floor(alpha M).
    let allowed = (fw_alpha * mc_iters as f64).floor() as usize;
    Ok(maxima[mc_iters - 1 - allowed.min(mc_iters - 1)] + 1)
}

/// Settings of the cluster-extent baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    pub alpha_vox: f64,
    pub fw_alpha: f64,
    pub mc_iters: usize,
    pub sided: Sided,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { alpha_vox: 0.001, fw_alpha: 0.05, mc_iters: 1000, sided: Sided::One }
    }
}

/// Result of [`cluster_threshold`]: per in-mask site activation plus the
/// cutoffs used.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMap {
    pub active: Vec<bool>,
    pub voxel_cutoff: f64,
    pub min_cluster: usize,
}

/// Voxelwise threshold followed by removal of clusters smaller than the
/// Monte-Carlo familywise cluster size at smoothness `fwhm_est`.
pub fn cluster_threshold(
    spm: &Volume<f64>,
    alpha_vox: f64,
    fwhm_est: f64,
    fw_alpha: f64,
    mc_iters: usize,
    seed: u64,
) -> Result<ClusterMap> {
    let cfg = ClusterConfig { alpha_vox, fw_alpha, mc_iters, sided: Sided::One };
    cluster_threshold_with(spm, fwhm_est, &cfg, seed)
}

pub fn cluster_threshold_with(
    spm: &Volume<f64>,
    fwhm_est: f64,
    cfg: &ClusterConfig,
    seed: u64,
) -> Result<ClusterMap> {
    let grid = spm.grid();
    if grid.n_in_mask() < 2 {
        return Err(Error::InvalidGrid("cluster thresholding needs at least two in-mask sites".into()));
    }
    let cutoff = voxel_cutoff(cfg.alpha_vox, cfg.sided)?;
    let min_cluster = cluster_size_threshold(grid, fwhm_est, cutoff, cfg.sided, cfg.fw_alpha, cfg.mc_iters, seed)?;
    let supra: Vec<bool> = grid
        .mask()
        .iter()
        .enumerate()
        .map(|(i, &m)| m && exceeds(spm.zero_filled()[i], cutoff, cfg.sided))
        .collect();
    let (labels, sizes) = label_clusters(grid, &supra);
    let active = grid
        .mask_indices()
        .map(|i| labels[i].is_some_and(|c| sizes[c] >= min_cluster))
        .collect();
    Ok(ClusterMap { active, voxel_cutoff: cutoff, min_cluster })
}
