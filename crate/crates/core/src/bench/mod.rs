//! Simulation benchmark: phantom datasets across noise levels and AR error
//! structures, analysed by AM-FAST, AR-FAST and a cluster-extent baseline,
//! scored by Jaccard index against the phantom truth.

mod cluster;
mod summary;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use cluster::{
    cluster_size_threshold, cluster_threshold, cluster_threshold_with, label_clusters, voxel_cutoff, ClusterConfig,
    ClusterMap, MIN_MC_ITERS,
};
pub use summary::{box_stats, summarize, write_summary_csv, BoxStats, CellResult};

use crate::error::{domain, Error, Result};
use crate::evt::Sided;
use crate::fast::{fast_run, jaccard, FastConfig, RunStatus, Variant};
use crate::glm::{build_design, build_spm, fit_sites, BlockSchedule, DesignMatrix, VoxelFit};
use crate::grid::Volume;
use crate::phantom::{
    ar_table, cnr, derive_seed, load_phantom, nominal_cnr, simulate_dataset, ArShape, ArSpec, Dataset,
    PhantomSource, PhantomSpec, SimConfig,
};
use crate::smoothing::{fit_fwhm_mle, FwhmBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    AmFast,
    ArFast,
    Ct,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::AmFast => "am-fast",
            Method::ArFast => "ar-fast",
            Method::Ct => "ct",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// AR error structure of a cell, written `p0`, `p1` or `p<order>-<shape>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArCell {
    pub p: usize,
    pub shape: ArShape,
}

impl ArCell {
    pub fn spec(&self) -> Result<ArSpec> {
        if self.p == 0 {
            Ok(ArSpec::white())
        } else {
            ar_table(self.p, self.shape)
        }
    }
}

impl fmt::Display for ArCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.p {
            0 | 1 => write!(f, "p{}", self.p),
            p => write!(f, "p{p}-{}", self.shape),
        }
    }
}

impl FromStr for ArCell {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || domain("ar_cells", format!("expected `p0`, `p1` or `p<order>-<shape>`, got `{s}`"));
        let rest = s.strip_prefix('p').ok_or_else(bad)?;
        let (order, shape) = match rest.split_once('-') {
            Some((o, sh)) => (o, sh.parse::<ArShape>()?),
            None => (rest, ArShape::Equal),
        };
        let cell = ArCell { p: order.parse().map_err(|_| bad())?, shape };
        cell.spec()?;
        Ok(cell)
    }
}

impl Serialize for ArCell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ArCell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_cells() -> Vec<ArCell> {
    let mut cells = vec![ArCell { p: 0, shape: ArShape::Equal }, ArCell { p: 1, shape: ArShape::Equal }];
    for p in 2..=5 {
        for shape in ArShape::ALL {
            if ar_table(p, shape).is_ok() {
                cells.push(ArCell { p, shape });
            }
        }
    }
    cells
}

/// Flat experiment description; every key has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub replicates: usize,
    pub sigma0: Vec<f64>,
    pub ar_cells: Vec<ArCell>,
    pub methods: Vec<Method>,
    /// Significance levels for the FAST methods.
    pub alphas: Vec<f64>,
    pub sided: Sided,
    pub n_scans: usize,
    pub tr: f64,
    pub block_len: usize,
    pub drift_order: usize,
    pub p_max: usize,
    pub h_min: f64,
    pub h_max: f64,
    pub max_iter: usize,
    pub ct_alpha_vox: f64,
    pub ct_fw_alpha: f64,
    pub ct_mc_iters: usize,
    /// Label file; the bundled phantom when absent.
    pub phantom: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 0,
            replicates: 25,
            sigma0: vec![240.0, 300.0, 400.0],
            ar_cells: default_cells(),
            methods: vec![Method::AmFast, Method::ArFast, Method::Ct],
            alphas: vec![0.025],
            sided: Sided::One,
            n_scans: 96,
            tr: 7.0,
            block_len: 6,
            drift_order: 1,
            p_max: 5,
            h_min: 0.5,
            h_max: 20.0,
            max_iter: 20,
            ct_alpha_vox: 0.001,
            ct_fw_alpha: 0.05,
            ct_mc_iters: 1000,
            phantom: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(domain("replicates", "need at least one replicate"));
        }
        if self.sigma0.is_empty() || self.sigma0.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(domain("sigma0", "need one or more positive noise levels"));
        }
        if self.ar_cells.is_empty() || self.methods.is_empty() {
            return Err(domain("ar_cells", "need at least one AR cell and one method"));
        }
        if self.block_len == 0 {
            return Err(domain("block_len", "must be positive"));
        }
        let needs_alpha = self.methods.iter().any(|m| *m != Method::Ct);
        if needs_alpha && self.alphas.is_empty() {
            return Err(domain("alphas", "FAST methods need at least one alpha"));
        }
        for &alpha in &self.alphas {
            self.fast_config(alpha, Variant::Am)?;
        }
        if self.ct_mc_iters < MIN_MC_ITERS {
            return Err(domain("ct_mc_iters", format!("need at least {MIN_MC_ITERS}")));
        }
        for (name, v) in [("ct_alpha_vox", self.ct_alpha_vox), ("ct_fw_alpha", self.ct_fw_alpha)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(domain(name, "must lie in (0, 1)"));
            }
        }
        self.design()?;
        Ok(())
    }

    pub fn schedule(&self) -> BlockSchedule {
        BlockSchedule::alternating(self.n_scans.div_ceil(self.block_len.max(1)), self.block_len)
    }

    pub fn design(&self) -> Result<DesignMatrix<f64>> {
        build_design(&self.schedule(), self.n_scans, self.tr, self.drift_order)
    }

    pub fn fast_config(&self, alpha: f64, variant: Variant) -> Result<FastConfig<f64>> {
        let cfg = FastConfig {
            alpha,
            variant,
            sided: self.sided,
            h_bounds: FwhmBounds::new(self.h_min, self.h_max)?,
            max_iter: self.max_iter,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            alpha_vox: self.ct_alpha_vox,
            fw_alpha: self.ct_fw_alpha,
            mc_iters: self.ct_mc_iters,
            sided: self.sided,
        }
    }

    pub fn load_phantom(&self) -> Result<PhantomSpec> {
        match &self.phantom {
            Some(path) => load_phantom(PhantomSource::File(path), false),
            None => Ok(PhantomSpec::bundled()),
        }
    }
}

/// One `(noise level, AR structure)` combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub sigma0: f64,
    pub ar: ArCell,
}

impl Cell {
    pub fn id(&self) -> String {
        format!("s{}-{}", self.sigma0, self.ar)
    }
}

/// 64-bit FNV-1a, used to turn cell ids into seed streams.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Dataset seed for a replicate of a cell; depends only on the master seed,
/// the cell id and the replicate index.
pub fn replicate_seed(master: u64, cell: &Cell, replicate: usize) -> u64 {
    derive_seed(derive_seed(master, fnv1a(&cell.id())), replicate as u64)
}

/// Seed of the cluster-size simulation for a dataset seed.
pub fn cluster_seed(dataset_seed: u64) -> u64 {
    derive_seed(dataset_seed, 0xC1)
}

/// One score row of the long-format results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub master_seed: u64,
    pub cell: String,
    pub sigma0: f64,
    pub cnr: f64,
    pub nominal_cnr: Option<f64>,
    pub ar_p: usize,
    pub ar_shape: String,
    pub replicate: usize,
    pub seed: u64,
    pub method: Method,
    pub alpha: Option<f64>,
    pub jaccard: f64,
    pub n_active: usize,
    pub iterations: usize,
    pub fwhm: f64,
    pub status: String,
}

impl ScoreRow {
    /// Method name, qualified by alpha for FAST methods.
    pub fn method_label(&self) -> String {
        match self.alpha {
            Some(a) => format!("{}@{a}", self.method),
            None => self.method.to_string(),
        }
    }
}

/// Outcome of one detection method on one SPM.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub active: Vec<bool>,
    pub iterations: usize,
    /// Final FAST bandwidth, or the smoothness fed to the cluster simulation.
    pub fwhm: f64,
    pub status: String,
}

/// GLM fits with per-site order selection and the resulting t map.
pub fn spm_from_dataset(
    data: &Dataset,
    design: &DesignMatrix<f64>,
    p_max: usize,
    sided: Sided,
) -> Result<(Volume<f64>, Vec<VoxelFit<f64>>)> {
    let contrast = design.stimulus_contrast(sided)?;
    let fits = fit_sites(&data.series, design, p_max, &contrast)?;
    Ok((build_spm(&fits, &data.grid)?, fits))
}

pub fn detect(
    method: Method,
    alpha: f64,
    spm: &Volume<f64>,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Detection> {
    match method {
        Method::AmFast | Method::ArFast => {
            let variant = if method == Method::AmFast { Variant::Am } else { Variant::Ar };
            let state = fast_run(spm, &cfg.fast_config(alpha, variant)?)?;
            let status = match state.status() {
                RunStatus::Converged => "converged",
                RunStatus::MaxIterations => "max_iterations",
                RunStatus::Exhausted => "exhausted",
                RunStatus::Running => "running",
            };
            Ok(Detection {
                active: state.zeta(),
                iterations: state.iterations(),
                fwhm: state.history().last().map_or(f64::NAN, |r| r.h),
                status: status.into(),
            })
        }
        Method::Ct => {
            let fwhm = fit_fwhm_mle(spm, cfg.h_min, cfg.h_max)?;
            let map = cluster_threshold_with(spm, fwhm, &cfg.cluster_config(), cluster_seed(seed))?;
            Ok(Detection { active: map.active, iterations: 0, fwhm, status: format!("k_min={}", map.min_cluster) })
        }
    }
}

/// Simulates, fits and scores one replicate of one cell.
pub fn run_replicate(
    cfg: &ExperimentConfig,
    phantom: &PhantomSpec,
    design: &DesignMatrix<f64>,
    cell: &Cell,
    replicate: usize,
) -> Result<Vec<ScoreRow>> {
    let seed = replicate_seed(cfg.master_seed, cell, replicate);
    let sim = SimConfig { sigma0: cell.sigma0, n_scans: cfg.n_scans, tr: cfg.tr, seed, replicate };
    let data = simulate_dataset(phantom, design, &cell.ar.spec()?, &sim)?;
    let (spm, _) = spm_from_dataset(&data, design, cfg.p_max, cfg.sided)?;
    let truth = phantom.truth();

    let mut runs: Vec<(Method, Option<f64>)> = Vec::new();
    for &m in &cfg.methods {
        if m == Method::Ct {
            runs.push((m, None));
        } else {
            runs.extend(cfg.alphas.iter().map(|&a| (m, Some(a))));
        }
    }
    runs.iter()
        .map(|&(method, alpha)| {
            let det = detect(method, alpha.unwrap_or(f64::NAN), &spm, cfg, seed)?;
            Ok(ScoreRow {
                master_seed: cfg.master_seed,
                cell: cell.id(),
                sigma0: cell.sigma0,
                cnr: cnr(cell.sigma0),
                nominal_cnr: nominal_cnr(cell.sigma0),
                ar_p: cell.ar.p,
                ar_shape: if cell.ar.p <= 1 { "-".into() } else { cell.ar.shape.to_string() },
                replicate,
                seed,
                method,
                alpha,
                jaccard: jaccard(&det.active, &truth)?,
                n_active: det.active.iter().filter(|&&a| a).count(),
                iterations: det.iterations,
                fwhm: det.fwhm,
                status: det.status,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub rows: Vec<ScoreRow>,
    /// Failed replicates, each an [`Error::Cell`]; their rows are absent.
    pub failures: Vec<Error>,
}

/// Runs every `(cell, replicate)` job in parallel and returns the score rows
/// in a fixed order (noise level, AR cell, replicate, method, alpha).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let phantom = cfg.load_phantom()?;
    let design = cfg.design()?;
    let jobs: Vec<(Cell, usize)> = cfg
        .sigma0
        .iter()
        .flat_map(|&sigma0| cfg.ar_cells.iter().map(move |&ar| Cell { sigma0, ar }))
        .flat_map(|cell| (0..cfg.replicates).map(move |r| (cell, r)))
        .collect();
    let results: Vec<std::result::Result<Vec<ScoreRow>, Error>> = jobs
        .par_iter()
        .map(|(cell, r)| {
            run_replicate(cfg, &phantom, &design, cell, *r).map_err(|e| Error::Cell {
                cell: cell.id(),
                replicate: *r,
                source: Box::new(e),
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(mut v) => rows.append(&mut v),
            Err(e) => failures.push(e),
        }
    }
    rows.sort_by(|a, b| {
        a.sigma0
            .total_cmp(&b.sigma0)
            .then(a.ar_p.cmp(&b.ar_p))
            .then_with(|| a.ar_shape.cmp(&b.ar_shape))
            .then(a.replicate.cmp(&b.replicate))
            .then(a.method.cmp(&b.method))
            .then_with(|| a.alpha.unwrap_or(0.0).total_cmp(&b.alpha.unwrap_or(0.0)))
    });
    Ok(ExperimentOutcome { rows, failures })
}

pub const SCORE_COLUMNS: [&str; 16] = [
    "master_seed",
    "cell",
    "sigma0",
    "cnr",
    "nominal_cnr",
    "ar_p",
    "ar_shape",
    "replicate",
    "seed",
    "method",
    "alpha",
    "jaccard",
    "n_active",
    "iterations",
    "fwhm",
    "status",
];

/// Long-format CSV of score rows (header row, one row per replicate and method).
pub fn write_scores_csv<W: Write>(rows: &[ScoreRow], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(SCORE_COLUMNS)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        csv.write_record([
            r.master_seed.to_string(),
            r.cell.clone(),
            r.sigma0.to_string(),
            r.cnr.to_string(),
            opt(r.nominal_cnr),
            r.ar_p.to_string(),
            r.ar_shape.clone(),
            r.replicate.to_string(),
            r.seed.to_string(),
            r.method.to_string(),
            opt(r.alpha),
            r.jaccard.to_string(),
            r.n_active.to_string(),
            r.iterations.to_string(),
            r.fwhm.to_string(),
            r.status.clone(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
