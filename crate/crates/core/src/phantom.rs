//! Ground-truth phantom, AR noise structures and simulated time-series
//! datasets for the detection benchmark.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::glm::ar::is_stationary;
use crate::glm::DesignMatrix;
use crate::grid::Grid;

pub const PHANTOM_SIDE: usize = 128;
pub const IN_BRAIN_COUNT: usize = 3465;
pub const ACTIVATED_COUNT: usize = 138;
/// Stimulus coefficient of activated pixels; the contrast in CNR.
pub const ACTIVATION_AMPLITUDE: f64 = 600.0;
const AR_SUM: f64 = 0.9;
const BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Background = 0,
    BrainA = 1,
    BrainB = 2,
    Activated = 3,
}

impl Label {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Label::Background),
            1 => Some(Label::BrainA),
            2 => Some(Label::BrainB),
            3 => Some(Label::Activated),
            _ => None,
        }
    }

    /// `(intercept, stimulus, drift)` coefficients.
    pub fn beta(self) -> [f64; 3] {
        match self {
            Label::Background => [0.0, 0.0, 0.0],
            Label::BrainA => [4500.0, 0.0, -155.32],
            Label::BrainB => [6000.0, 0.0, -155.32],
            Label::Activated => [6000.0, ACTIVATION_AMPLITUDE, -155.32],
        }
    }
}

/// Label image on a 2D grid. Storage order has the first (x) axis fastest,
/// so row-major text with one image row per line maps directly onto it.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    dims: [usize; 2],
    labels: Vec<Label>,
}

pub enum PhantomSource<'a> {
    Bundled,
    File(&'a Path),
}

impl PhantomSpec {
    pub fn new(dims: [usize; 2], labels: Vec<Label>) -> Result<Self> {
        if labels.len() != dims[0] * dims[1] {
            return Err(Error::Phantom(format!(
                "{} labels for a {}x{} image",
                labels.len(),
                dims[0],
                dims[1]
            )));
        }
        if labels.iter().all(|&l| l == Label::Background) {
            return Err(Error::Phantom("no in-brain pixels (empty mask)".into()));
        }
        Ok(PhantomSpec { dims, labels })
    }

    /// Procedural two-tissue phantom: an elliptical brain of exactly 3465
    /// pixels with a B-type cortical rim and two deep B-type nuclei, each
    /// holding one 69-pixel activated disc.
    pub fn bundled() -> Self {
        let n = PHANTOM_SIDE;
        let (cx, cy) = (63.5, 63.5);
        let semi_x = (IN_BRAIN_COUNT as f64 / (0.8 * std::f64::consts::PI)).sqrt();
        let semi_y = 0.8 * semi_x;
        let radius2 = |i: usize| {
            let (x, y) = ((i % n) as f64, (i / n) as f64);
            ((x - cx) / semi_x).powi(2) + ((y - cy) / semi_y).powi(2)
        };
        let mut order: Vec<usize> = (0..n * n).collect();
        order.sort_by(|&a, &b| radius2(a).total_cmp(&radius2(b)).then(a.cmp(&b)));

        let mut labels = vec![Label::Background; n * n];
        for &i in &order[..IN_BRAIN_COUNT] {
            labels[i] = if radius2(i) > 0.55 { Label::BrainB } else { Label::BrainA };
        }
        let nuclei = [(cx - 15.0, cy + 3.0), (cx + 14.0, cy - 5.0)];
        let dist2 = |i: usize, (px, py): (f64, f64)| {
            let (x, y) = ((i % n) as f64, (i / n) as f64);
            (x - px).powi(2) + (y - py).powi(2)
        };
        for (i, label) in labels.iter_mut().enumerate() {
            if *label == Label::BrainA && nuclei.iter().any(|&c| dist2(i, c) <= 49.0) {
                *label = Label::BrainB;
            }
        }
        let per_region = ACTIVATED_COUNT / nuclei.len();
        for &centre in &nuclei {
            let mut near: Vec<usize> = (0..n * n).filter(|&i| labels[i] == Label::BrainB).collect();
            near.sort_by(|&a, &b| dist2(a, centre).total_cmp(&dist2(b, centre)).then(a.cmp(&b)));
            for &i in &near[..per_region] {
                labels[i] = Label::Activated;
            }
        }
        PhantomSpec { dims: [n, n], labels }
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn in_brain_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != Label::Background).count()
    }

    pub fn activated_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Label::Activated).count()
    }

    /// Grid whose mask is the in-brain region.
    pub fn grid(&self) -> Result<Grid> {
        Grid::with_mask(&self.dims, self.labels.iter().map(|&l| l != Label::Background).collect())
    }

    /// True activation per in-brain pixel, in mask order.
    pub fn truth(&self) -> Vec<bool> {
        self.labels
            .iter()
            .filter(|&&l| l != Label::Background)
            .map(|&l| l == Label::Activated)
            .collect()
    }

    /// Labels of in-brain pixels, in mask order.
    pub fn in_brain_labels(&self) -> Vec<Label> {
        self.labels.iter().copied().filter(|&l| l != Label::Background).collect()
    }

    /// Checks the 3465 in-brain / 138 activated counts.
    pub fn check_counts(&self) -> Result<()> {
        let (brain, active) = (self.in_brain_count(), self.activated_count());
        if brain != IN_BRAIN_COUNT || active != ACTIVATED_COUNT {
            return Err(Error::Phantom(format!(
                "expected {IN_BRAIN_COUNT} in-brain and {ACTIVATED_COUNT} activated pixels, found {brain} and {active}"
            )));
        }
        Ok(())
    }

    /// Text form: `#` comments, a `width height` header line, then one line of
    /// label codes per image row.
    pub fn to_text(&self) -> String {
        let [w, h] = self.dims;
        let mut out = format!("# labels: 0 background, 1 brain A, 2 brain B, 3 activated\n{w} {h}\n");
        for row in 0..h {
            let line: Vec<String> = self.labels[row * w..(row + 1) * w]
                .iter()
                .map(|l| l.code().to_string())
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        let mut dim = |name: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::Phantom(format!("missing {name} in header")))?
                .parse::<usize>()
                .map_err(|e| Error::Phantom(format!("bad {name}: {e}")))
        };
        let dims = [dim("width")?, dim("height")?];
        let labels = tokens
            .map(|t| {
                t.parse::<u8>()
                    .ok()
                    .and_then(Label::from_code)
                    .ok_or_else(|| Error::Phantom(format!("bad label code `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        PhantomSpec::new(dims, labels)
    }
}

impl FromStr for PhantomSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PhantomSpec::parse(s)
    }
}

/// Loads the bundled phantom or a label file; `strict` also enforces the
/// reference pixel counts.
pub fn load_phantom(source: PhantomSource<'_>, strict: bool) -> Result<PhantomSpec> {
    let spec = match source {
        PhantomSource::Bundled => PhantomSpec::bundled(),
        PhantomSource::File(path) => PhantomSpec::parse(&std::fs::read_to_string(path)?)?,
    };
    if strict {
        spec.check_counts()?;
    }
    Ok(spec)
}

/// How AR coefficients vary with lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArShape {
    Equal,
    Decreasing,
    Increasing,
    DecInc,
    IncDec,
}

impl ArShape {
    pub const ALL: [ArShape; 5] =
        [ArShape::Equal, ArShape::Decreasing, ArShape::Increasing, ArShape::DecInc, ArShape::IncDec];

    pub fn as_str(self) -> &'static str {
        match self {
            ArShape::Equal => "equal",
            ArShape::Decreasing => "decreasing",
            ArShape::Increasing => "increasing",
            ArShape::DecInc => "dec-inc",
            ArShape::IncDec => "inc-dec",
        }
    }
}

impl fmt::Display for ArShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ArShape::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| domain("shape", format!("unknown AR shape `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArSpec {
    pub p: usize,
    pub phi: Vec<f64>,
    pub shape: ArShape,
}

impl ArSpec {
    /// Independent errors (order 0).
    pub fn white() -> Self {
        ArSpec { p: 0, phi: Vec::new(), shape: ArShape::Equal }
    }
}

/// Coefficients of the simulated AR(p) error structures; all sum to 0.9.
pub fn ar_table(p: usize, shape: ArShape) -> Result<ArSpec> {
    let unsupported = || Error::UnsupportedAr { order: p, shape: shape.to_string() };
    let phi: Vec<f64> = match (p, shape) {
        (1, _) => vec![AR_SUM],
        (2..=4, ArShape::Equal) => vec![AR_SUM / p as f64; p],
        (2, ArShape::Decreasing | ArShape::DecInc) => vec![0.6, 0.3],
        (2, ArShape::Increasing | ArShape::IncDec) => vec![0.3, 0.6],
        (3, ArShape::Decreasing) => vec![0.4, 0.3, 0.2],
        (3, ArShape::Increasing) => vec![0.2, 0.3, 0.4],
        (3, ArShape::DecInc) => vec![0.4, 0.1, 0.4],
        (3, ArShape::IncDec) => vec![0.1, 0.7, 0.1],
        (4, ArShape::Decreasing) => vec![0.3, 0.25, 0.20, 0.15],
        (4, ArShape::Increasing) => vec![0.15, 0.20, 0.25, 0.3],
        (4, ArShape::DecInc) => vec![0.4, 0.05, 0.05, 0.4],
        (4, ArShape::IncDec) => vec![0.05, 0.4, 0.4, 0.05],
        (5, ArShape::Decreasing) => vec![0.3, 0.25, 0.20, 0.10, 0.05],
        (5, ArShape::Increasing) => vec![0.05, 0.10, 0.20, 0.25, 0.30],
        (5, ArShape::DecInc) => vec![0.25, 0.15, 0.1, 0.15, 0.25],
        (5, ArShape::IncDec) => vec![0.1, 0.15, 0.4, 0.15, 0.1],
        _ => return Err(unsupported()),
    };
    Ok(ArSpec { p, phi, shape })
}

/// Mixes a base seed with a stream index (SplitMix64 finaliser), so nearby
/// indices give unrelated generator seeds.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// AR(p) series `e_t = sum_j phi_j e_{t-j} + N(0, sigma0^2)` after a burn-in
/// of 500 samples.
pub fn simulate_ar_noise(n: usize, spec: &ArSpec, sigma0: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma0 >= 0.0 && sigma0.is_finite()) {
        return Err(domain("sigma0", "innovation sd must be finite and non-negative"));
    }
    if !is_stationary(&spec.phi) {
        return Err(Error::NonStationary(spec.phi.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = spec.phi.len();
    let mut x = vec![0.0; BURN_IN + n];
    for t in 0..x.len() {
        let innovation: f64 = StandardNormal.sample(&mut rng);
        let past: f64 = spec.phi.iter().enumerate().take(t.min(p)).map(|(j, c)| c * x[t - 1 - j]).sum();
        x[t] = past + sigma0 * innovation;
    }
    Ok(x.split_off(BURN_IN))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub sigma0: f64,
    pub n_scans: usize,
    pub tr: f64,
    pub seed: u64,
    pub replicate: usize,
}

/// Contrast-to-noise ratio `600 / sigma0`.
pub fn cnr(sigma0: f64) -> f64 {
    ACTIVATION_AMPLITUDE / sigma0
}

/// The CNR label the experimental description attaches to the noise levels
/// 240, 300 and 400, which does not follow `600 / sigma0`.
pub fn nominal_cnr(sigma0: f64) -> Option<f64> {
    match sigma0 {
        240.0 => Some(1.0),
        300.0 => Some(1.5),
        400.0 => Some(2.0),
        _ => None,
    }
}

/// Simulated time series for the in-brain pixels of a phantom.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid: Grid,
    pub n_scans: usize,
    /// One contiguous series per in-mask pixel, in mask order.
    pub series: Vec<f64>,
}

impl Dataset {
    pub fn site(&self, k: usize) -> &[f64] {
        &self.series[k * self.n_scans..(k + 1) * self.n_scans]
    }

    /// Full image-major layout (x fastest, time slowest), zeros off-mask.
    pub fn to_image_major(&self) -> Vec<f64> {
        let len = self.grid.len();
        let mut out = vec![0.0; len * self.n_scans];
        for (k, idx) in self.grid.mask_indices().enumerate() {
            for (t, &v) in self.site(k).iter().enumerate() {
                out[t * len + idx] = v;
            }
        }
        out
    }

    /// Inverse of [`Dataset::to_image_major`].
    pub fn from_image_major(grid: Grid, n_scans: usize, data: &[f64]) -> Result<Self> {
        let len = grid.len();
        if data.len() != len * n_scans {
            return Err(Error::DimMismatch { expected: vec![len, n_scans], found: vec![data.len()] });
        }
        let mut series = Vec::with_capacity(grid.n_in_mask() * n_scans);
        for idx in grid.mask_indices() {
            series.extend((0..n_scans).map(|t| data[t * len + idx]));
        }
        Ok(Dataset { grid, n_scans, series })
    }
}

/// `y = X beta(label) + AR noise` for each in-brain pixel, with the noise
/// stream of pixel `i` seeded from `(cfg.seed, i)`.
pub fn simulate_dataset(
    phantom: &PhantomSpec,
    design: &DesignMatrix<f64>,
    spec: &ArSpec,
    cfg: &SimConfig,
) -> Result<Dataset> {
    if design.rows() != cfg.n_scans {
        return Err(Error::DimMismatch { expected: vec![cfg.n_scans], found: vec![design.rows()] });
    }
    if design.cols() != 3 {
        return Err(domain("design", "expected intercept, stimulus and drift columns"));
    }
    if !(cfg.sigma0 > 0.0) {
        return Err(domain("sigma0", "innovation sd must be positive"));
    }
    let grid = phantom.grid()?;
    let sites: Vec<(usize, Label)> = grid.mask_indices().map(|i| (i, phantom.labels[i])).collect();
    let per_site: Vec<Vec<f64>> = sites
        .par_iter()
        .map(|&(pixel, label)| {
            let mut y = design.predict(&label.beta());
            let noise = simulate_ar_noise(cfg.n_scans, spec, cfg.sigma0, derive_seed(cfg.seed, pixel as u64))?;
            for (v, e) in y.iter_mut().zip(noise) {
                *v += e;
            }
            Ok(y)
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        grid,
        n_scans: cfg.n_scans,
        series: per_site.concat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{build_design, BlockSchedule};

    fn design() -> DesignMatrix<f64> {
        build_design(&BlockSchedule::alternating(16, 6), 96, 7.0, 1).unwrap()
    }

    fn lag1(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        let c1: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        c1 / c0
    }

    #[test]
    fn bundled_counts_and_regions() {
        let p = PhantomSpec::bundled();
        assert_eq!(p.in_brain_count(), IN_BRAIN_COUNT);
        assert_eq!(p.activated_count(), ACTIVATED_COUNT);
        p.check_counts().unwrap();

        // Two 4-connected activated regions, each bordered only by brain tissue.
        let n = PHANTOM_SIDE;
        let mut seen = vec![false; n * n];
        let mut regions = 0;
        for start in 0..n * n {
            if p.labels[start] != Label::Activated || seen[start] {
                continue;
            }
            regions += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (x, y) = (i % n, i / n);
                let nbrs = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)];
                for (nx, ny) in nbrs {
                    if nx >= n || ny >= n {
                        continue;
                    }
                    let j = ny * n + nx;
                    assert_ne!(p.labels[j], Label::Background);
                    if p.labels[j] == Label::Activated && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        assert_eq!(regions, 2);
    }

    #[test]
    fn text_round_trip() {
        let p = PhantomSpec::bundled();
        assert_eq!(PhantomSpec::parse(&p.to_text()).unwrap(), p);
        assert!(PhantomSpec::parse("4 4\n0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0\n").is_err());
        assert!(PhantomSpec::parse("4 4\n0 0 9 0\n").is_err());
        assert!(PhantomSpec::parse("2 2\n1 1 1\n").is_err());
    }

    #[test]
    fn strict_load_rejects_other_counts() {
        let small = PhantomSpec::new([4, 4], vec![Label::BrainA; 16]).unwrap();
        assert!(small.check_counts().is_err());
    }

    #[test]
    fn ar_table_rejects_unsupported() {
        assert!(ar_table(5, ArShape::Equal).is_err());
        assert!(ar_table(0, ArShape::Decreasing).is_err());
        assert!(ar_table(6, ArShape::Increasing).is_err());
        assert_eq!(ar_table(3, ArShape::Equal).unwrap().phi, vec![0.3; 3]);
    }

    #[test]
    fn every_table_entry_is_stationary_and_sums_to_point_nine() {
        for p in 1..=5 {
            for shape in ArShape::ALL {
                if let Ok(spec) = ar_table(p, shape) {
                    assert_eq!(spec.phi.len(), p);
                    assert!((spec.phi.iter().sum::<f64>() - 0.9).abs() < 1e-12, "{p} {shape}");
                    assert!(is_stationary(&spec.phi));
                }
            }
        }
    }

    #[test]
    fn white_noise_is_uncorrelated() {
        let x = simulate_ar_noise(4096, &ArSpec::white(), 1.0, 1).unwrap();
        assert!(lag1(&x).abs() < 0.05);
    }

    #[test]
    fn ar1_autocorrelation_and_variance() {
        let spec = ar_table(1, ArShape::Equal).unwrap();
        let x = simulate_ar_noise(4096, &spec, 1.0, 2).unwrap();
        assert!((lag1(&x) - 0.9).abs() < 0.03);
        // Average many short chains for the marginal variance sigma0^2 / (1 - 0.81).
        let var: f64 = (0..50u64)
            .map(|s| {
                let x = simulate_ar_noise(4096, &spec, 1.0, 100 + s).unwrap();
                x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
            })
            .sum::<f64>()
            / 50.0;
        assert!((var / (1.0 / 0.19) - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn streams_at_distinct_pixels_are_independent() {
        let spec = ArSpec::white();
        let a = simulate_ar_noise(4096, &spec, 1.0, derive_seed(7, 10)).unwrap();
        let b = simulate_ar_noise(4096, &spec, 1.0, derive_seed(7, 11)).unwrap();
        let r: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>()
            / (a.iter().map(|x| x * x).sum::<f64>() * b.iter().map(|y| y * y).sum::<f64>()).sqrt();
        assert!(r.abs() < 0.05);
    }

    #[test]
    fn tiny_noise_reproduces_mean_signal() {
        let phantom = PhantomSpec::bundled();
        let x = design();
        let cfg = SimConfig { sigma0: 1e-9, n_scans: 96, tr: 7.0, seed: 3, replicate: 0 };
        let data = simulate_dataset(&phantom, &x, &ar_table(1, ArShape::Equal).unwrap(), &cfg).unwrap();
        let labels = phantom.in_brain_labels();
        for (k, &label) in labels.iter().enumerate().step_by(97) {
            let want = x.predict(&label.beta());
            for (a, b) in data.site(k).iter().zip(&want) {
                assert!((a - b).abs() < 1e-6);
            }
        }
        let a = labels.iter().position(|&l| l == Label::Activated).unwrap();
        let b = labels.iter().position(|&l| l == Label::BrainB).unwrap();
        for t in 0..96 {
            let diff = data.site(a)[t] - data.site(b)[t];
            assert!((diff - 600.0 * x.column(1)[t]).abs() < 1e-6);
        }
    }

    #[test]
    fn dataset_is_reproducible_and_layouts_invert() {
        let phantom = PhantomSpec::bundled();
        let x = design();
        let cfg = SimConfig { sigma0: 300.0, n_scans: 96, tr: 7.0, seed: 99, replicate: 0 };
        let spec = ar_table(2, ArShape::Decreasing).unwrap();
        let a = simulate_dataset(&phantom, &x, &spec, &cfg).unwrap();
        let b = simulate_dataset(&phantom, &x, &spec, &cfg).unwrap();
        assert_eq!(a, b);
        let back = Dataset::from_image_major(a.grid.clone(), 96, &a.to_image_major()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn cnr_conventions() {
        assert_eq!(cnr(240.0), 2.5);
        assert_eq!(cnr(400.0), 1.5);
        assert_eq!(nominal_cnr(300.0), Some(1.5));
        assert_eq!(nominal_cnr(250.0), None);
    }
}
