//! Subcommand implementations. Each writes `manifest.json` into its output
//! directory before any other output.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use fast_core::bench::{
    replicate_seed, run_experiment, spm_from_dataset, summarize, write_scores_csv, write_summary_csv, Cell,
    ExperimentConfig,
};
use fast_core::evt::Sided;
use fast_core::fast::{fast_run, ActivationState, FastConfig, IterationRecord, Variant};
use fast_core::glm::order_map;
use fast_core::grid::{Grid, Volume};
use fast_core::phantom::{load_phantom, simulate_dataset, Dataset, PhantomSource, PhantomSpec, SimConfig};
use serde::Serialize;

use crate::config::{load_toml, DesignConfig, SimulateConfig};
use crate::manifest::RunManifest;
use crate::nifti::{read_volume, write_volume, VolumeFile};

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_file(dir: &Path, name: &str, vol: &VolumeFile) -> Result<()> {
    let path = dir.join(name);
    write_volume(&path, vol).with_context(|| format!("writing {}", path.display()))
}

fn load_spec(path: Option<&Path>) -> Result<PhantomSpec> {
    Ok(match path {
        Some(p) => load_phantom(PhantomSource::File(p), false)?,
        None => PhantomSpec::bundled(),
    })
}

/// Writes a full-grid image (first axis fastest) as a 2D or 3D float volume.
fn image_file(grid: &Grid, values: Vec<f32>) -> Result<VolumeFile> {
    let sizes = grid.voxel_sizes().iter().map(|&v| v as f32).collect();
    Ok(VolumeFile::new(grid.dims().to_vec(), sizes, values)?)
}

/// In-mask values scattered onto the full grid, `fill` elsewhere.
fn scatter(grid: &Grid, in_mask: impl IntoIterator<Item = f32>, fill: f32) -> Vec<f32> {
    let mut out = vec![fill; grid.len()];
    for (idx, v) in grid.mask_indices().zip(in_mask) {
        out[idx] = v;
    }
    out
}

fn mask_file(grid: &Grid) -> Result<VolumeFile> {
    image_file(grid, grid.mask().iter().map(|&m| f32::from(u8::from(m))).collect())
}

fn read_mask(path: &Path, dims: &[usize]) -> Result<Vec<bool>> {
    let vol = read_volume(path)?;
    let (spatial, t) = vol.spatial_and_time();
    ensure!(
        spatial == dims && t == 1,
        "mask {} has shape {:?}, expected {dims:?}",
        path.display(),
        vol.dims
    );
    Ok(vol.data.iter().map(|&v| v != 0.0).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct PhantomExportArgs {
    pub out: PathBuf,
    pub phantom: Option<PathBuf>,
}

/// Writes the label map as text plus the truth and brain masks as volumes.
pub fn phantom_export(args: &PhantomExportArgs) -> Result<()> {
    prepare_dir(&args.out)?;
    let spec = load_spec(args.phantom.as_deref())?;
    let outputs = vec!["phantom.txt".into(), "truth.nii".into(), "brain_mask.nii".into()];
    RunManifest::new("phantom export", args, vec![], outputs)?.write(&args.out)?;
    fs::write(args.out.join("phantom.txt"), spec.to_text())?;
    let grid = spec.grid()?;
    let truth = scatter(&grid, spec.truth().into_iter().map(|a| f32::from(u8::from(a))), 0.0);
    write_file(&args.out, "truth.nii", &image_file(&grid, truth)?)?;
    write_file(&args.out, "brain_mask.nii", &mask_file(&grid)?)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateArgs {
    pub config: PathBuf,
    pub out: PathBuf,
}

/// Simulates `replicates` phantom datasets. Replicate `r` reproduces the data
/// that `bench` generates for the same master seed, cell and replicate.
pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg: SimulateConfig = load_toml(&args.config)?;
    ensure!(cfg.replicates > 0, "replicates must be positive");
    ensure!(cfg.sigma0 > 0.0 && cfg.sigma0.is_finite(), "sigma0 must be positive");
    let exp = cfg.as_experiment();
    let design = exp.design()?;
    let phantom = exp.load_phantom()?;
    let ar = cfg.ar_cell.spec()?;
    let cell = Cell { sigma0: cfg.sigma0, ar: cfg.ar_cell };
    let seeds: Vec<u64> = (0..cfg.replicates).map(|r| replicate_seed(cfg.master_seed, &cell, r)).collect();

    prepare_dir(&args.out)?;
    let mut outputs: Vec<String> = (0..cfg.replicates).map(|r| format!("sim_r{r}.nii")).collect();
    outputs.extend(["mask.nii", "truth.nii", "design.toml"].map(String::from));
    RunManifest::new("simulate", &cfg, seeds.clone(), outputs)?.write(&args.out)?;

    let grid = phantom.grid()?;
    for (r, &seed) in seeds.iter().enumerate() {
        let sim = SimConfig { sigma0: cfg.sigma0, n_scans: cfg.n_scans, tr: cfg.tr, seed, replicate: r };
        let data = simulate_dataset(&phantom, &design, &ar, &sim)?;
        let [w, h] = phantom.dims();
        let values = data.to_image_major().into_iter().map(|v| v as f32).collect();
        let vol = VolumeFile::new(vec![w, h, 1, cfg.n_scans], vec![1.0, 1.0, 1.0, cfg.tr as f32], values)?;
        write_file(&args.out, &format!("sim_r{r}.nii"), &vol)?;
    }
    write_file(&args.out, "mask.nii", &mask_file(&grid)?)?;
    let truth = scatter(&grid, phantom.truth().into_iter().map(|a| f32::from(u8::from(a))), 0.0);
    write_file(&args.out, "truth.nii", &image_file(&grid, truth)?)?;
    fs::write(args.out.join("design.toml"), toml::to_string(&cfg.design_config())?)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct FitArgs {
    pub input: PathBuf,
    pub design: PathBuf,
    pub p_max: usize,
    pub mask: Option<PathBuf>,
    pub out: PathBuf,
}

/// Loads a 4D series as a dataset. Without a mask file, sites whose series
/// is constant are excluded.
pub fn load_dataset(input: &Path, mask: Option<&Path>) -> Result<Dataset> {
    let vol = read_volume(input)?;
    let (spatial, n_scans) = vol.spatial_and_time();
    ensure!(n_scans > 1, "{} has no time axis", input.display());
    let len: usize = spatial.iter().product();
    let mask = match mask {
        Some(p) => read_mask(p, &spatial)?,
        None => (0..len)
            .map(|i| {
                let first = vol.data[i];
                (1..n_scans).any(|t| vol.data[t * len + i] != first)
            })
            .collect(),
    };
    let sizes = vol.voxel_sizes[..spatial.len()].iter().map(|&v| f64::from(v)).collect();
    let grid = Grid::new(spatial, sizes, mask)?;
    let data: Vec<f64> = vol.data.iter().map(|&v| f64::from(v)).collect();
    Ok(Dataset::from_image_major(grid, n_scans, &data)?)
}

/// Fits the AR GLM at every site; writes the t map (`spm.nii`) and the
/// selected AR orders (`order.nii`), both NaN outside the mask.
pub fn fit(args: &FitArgs) -> Result<()> {
    let design_cfg: DesignConfig = load_toml(&args.design)?;
    let design = design_cfg.design()?;
    let data = load_dataset(&args.input, args.mask.as_deref())?;
    ensure!(
        data.n_scans == design_cfg.n_scans,
        "{} has {} scans but the design has {}",
        args.input.display(),
        data.n_scans,
        design_cfg.n_scans
    );
    prepare_dir(&args.out)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        args: &'a FitArgs,
        design: &'a DesignConfig,
    }
    let outputs = vec!["spm.nii".into(), "order.nii".into()];
    RunManifest::new("fit", &Resolved { args, design: &design_cfg }, vec![], outputs)?.write(&args.out)?;

    let (spm, fits) = spm_from_dataset(&data, &design, args.p_max, Sided::One)?;
    let grid = &data.grid;
    let t = scatter(grid, spm.in_mask_values().into_iter().map(|v| v as f32), f32::NAN);
    write_file(&args.out, "spm.nii", &image_file(grid, t)?)?;
    let orders = order_map(&fits, grid)?;
    let p = scatter(grid, orders.in_mask_values().into_iter().map(|v| v as f32), f32::NAN);
    write_file(&args.out, "order.nii", &image_file(grid, p)?)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectArgs {
    pub input: PathBuf,
    pub alpha: f64,
    pub variant: Variant,
    pub sided: Sided,
    pub mask: Option<PathBuf>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_iter: usize,
    pub out: PathBuf,
}

/// Loads a statistic map. Sites are those with finite values, restricted to
/// the mask when one is given.
pub fn load_spm(input: &Path, mask: Option<&Path>) -> Result<Volume<f64>> {
    let vol = read_volume(input)?;
    let (spatial, t) = vol.spatial_and_time();
    ensure!(t == 1, "{} is not a single volume", input.display());
    let mut keep: Vec<bool> = vol.data.iter().map(|v| v.is_finite()).collect();
    if let Some(p) = mask {
        for (k, m) in keep.iter_mut().zip(read_mask(p, &spatial)?) {
            *k &= m;
        }
    }
    if !keep.iter().any(|&k| k) {
        bail!("{} has no finite in-mask values", input.display());
    }
    let sizes = vol.voxel_sizes[..spatial.len()].iter().map(|&v| f64::from(v)).collect();
    let grid = Grid::new(spatial, sizes, keep)?;
    let values = vol.data.iter().map(|&v| if v.is_finite() { f64::from(v) } else { 0.0 }).collect();
    Ok(Volume::new(grid, values)?)
}

impl DetectArgs {
    pub fn fast_config(&self) -> Result<FastConfig<f64>> {
        let mut cfg = FastConfig::new(self.alpha, self.variant, self.sided)?;
        cfg.h_bounds = fast_core::smoothing::FwhmBounds::new(self.h_min, self.h_max)?;
        cfg.max_iter = self.max_iter;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs FAST on a statistic map; writes the binary map (`activation.nii`)
/// and the per-iteration trace (`trace.csv`).
pub fn detect(args: &DetectArgs) -> Result<ActivationState<f64>> {
    let config = args.fast_config()?;
    let spm = load_spm(&args.input, args.mask.as_deref())?;
    prepare_dir(&args.out)?;
    let outputs = vec!["activation.nii".into(), "trace.csv".into()];
    RunManifest::new("detect", args, vec![], outputs)?.write(&args.out)?;

    let state = fast_run(&spm, &config)?;
    let grid = spm.grid();
    let active = scatter(grid, state.zeta().into_iter().map(|a| f32::from(u8::from(a))), 0.0);
    write_file(&args.out, "activation.nii", &image_file(grid, active)?)?;
    write_trace(&args.out.join("trace.csv"), &state)?;
    Ok(state)
}

fn write_trace(path: &Path, state: &ActivationState<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["k", "variant", "h", "rho", "eta", "n_tested", "n_inactive", "newly_activated", "jaccard", "kept"])?;
    let row = |r: &IterationRecord<f64>, kept: bool| {
        [
            r.k.to_string(),
            r.variant.to_string(),
            r.h.to_string(),
            r.rho.to_string(),
            r.eta.to_string(),
            r.n_tested.to_string(),
            r.n_inactive.to_string(),
            r.newly_activated.to_string(),
            r.jaccard.to_string(),
            kept.to_string(),
        ]
    };
    for r in state.history() {
        w.write_record(row(r, true))?;
    }
    if let Some(r) = state.lookahead() {
        w.write_record(row(r, false))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchArgs {
    pub config: PathBuf,
    pub out: PathBuf,
}

/// Number of failed replicates; the rows of successful ones are still written.
pub fn bench(args: &BenchArgs) -> Result<usize> {
    let cfg: ExperimentConfig = load_toml(&args.config)?;
    cfg.validate()?;
    prepare_dir(&args.out)?;
    let outputs = vec!["scores.csv".into(), "summary.csv".into()];
    RunManifest::new("bench", &cfg, vec![cfg.master_seed], outputs)?.write(&args.out)?;

    let outcome = run_experiment(&cfg)?;
    for f in &outcome.failures {
        eprintln!("error: {f}");
    }
    write_scores_csv(&outcome.rows, BufWriter::new(File::create(args.out.join("scores.csv"))?))?;
    let summary = summarize(&outcome.rows);
    write_summary_csv(&summary, BufWriter::new(File::create(args.out.join("summary.csv"))?))?;
    Ok(outcome.failures.len())
}

/// Jaccard index between two binary volumes of the same shape (nonzero
/// means active). Lets maps from external methods be scored against truth.
pub fn score(map: &Path, truth: &Path) -> Result<f64> {
    let a = read_volume(map)?;
    let b = read_volume(truth)?;
    ensure!(a.dims == b.dims, "shape {:?} does not match truth shape {:?}", a.dims, b.dims);
    let active = |v: &VolumeFile| v.data.iter().map(|&x| x != 0.0 && !x.is_nan()).collect::<Vec<bool>>();
    Ok(fast_core::fast::jaccard(&active(&a), &active(&b))?)
}
