//! Acceptance suite. Each test checks one criterion at its stated tolerance
//! and prints a PASS/FAIL line before asserting.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::process::Command;
use std::time::Instant;

use fast_core::bench::{run_experiment, spm_from_dataset, write_scores_csv, ArCell, ExperimentConfig, Method};
use fast_core::evt::{gumbel_cdf, gumbel_constants, revweibull_cdf, revweibull_constants, CorrelationSummary, Sided};
use fast_core::fast::{fast_run, FastConfig, Variant};
use fast_core::glm::{build_design, select_order, BlockSchedule};
use fast_core::grid::{Grid, Volume};
use fast_core::phantom::{
    ar_table, derive_seed, simulate_ar_noise, simulate_dataset, ArShape, ArSpec, Label, PhantomSpec, SimConfig,
};
use fast_core::smoothing::{fit_fwhm_mle, kernel_spectrum, profile_loglik, rho_of, smooth, whiten};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Writes straight to stdout so the line survives libtest's output capture.
fn report(criterion: &str, pass: bool, detail: &str, started: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let secs = started.elapsed().as_secs_f64();
    let mut out = std::io::stdout().lock();
    writeln!(out, "acceptance {criterion}: {verdict} ({detail}; {secs:.1} s)").unwrap();
}

/// Asymptotic Kolmogorov p-value of the one-sample statistic `d` for `m`
/// observations, with Stephens' small-sample correction.
fn ks_pvalue(d: f64, m: usize) -> f64 {
    let sm = (m as f64).sqrt();
    let lambda = (sm + 0.12 + 0.11 / sm) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let m = sample.len() as f64;
    sample.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / m - f).max(f - i as f64 / m)
    })
}

const M: usize = 2000;
const N: usize = 4096;

#[test]
fn c1_evt_convergence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xE71);

    // i.i.d. standard normals.
    let iid = CorrelationSummary::independent(N).unwrap();
    let g = gumbel_constants(&iid).unwrap();
    let mut z: Vec<f64> = (0..M)
        .map(|_| {
            let max = (0..N).map(|_| StandardNormal.sample(&mut rng)).fold(f64::NEG_INFINITY, f64::max);
            (max - g.b_n) / g.a_n
        })
        .collect();
    let d_iid = ks_statistic(&mut z, gumbel_cdf);
    let p_iid = ks_pvalue(d_iid, M);

    // Unit-variance fields smoothed at FWHM 4 on a 64 x 64 torus.
    let grid = Grid::full(&[64, 64]).unwrap();
    let spec = kernel_spectrum(&grid, 4.0).unwrap();
    let corr = CorrelationSummary::from_spectrum(N, &spec).unwrap();
    let gc = gumbel_constants(&corr).unwrap();
    let mut zc: Vec<f64> = (0..M)
        .map(|_| {
            let white: Vec<f64> = (0..N).map(|_| StandardNormal.sample(&mut rng)).collect();
            let field = smooth(&Volume::new(grid.clone(), white).unwrap(), 4.0).unwrap();
            let max = field.zero_filled().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (max - gc.b_n) / gc.a_n
        })
        .collect();
    let d_corr = ks_statistic(&mut zc, gumbel_cdf);
    let p_corr = ks_pvalue(d_corr, M);

    // i.i.d. normals truncated above at 2.5, drawn by rejection.
    let eta = 2.5;
    let rw = revweibull_constants(&iid, eta).unwrap();
    let mut zt: Vec<f64> = (0..M)
        .map(|_| {
            let mut max = f64::NEG_INFINITY;
            let mut kept = 0;
            while kept < N {
                let x: f64 = StandardNormal.sample(&mut rng);
                if x <= eta {
                    max = max.max(x);
                    kept += 1;
                }
            }
            (max - rw.location) / rw.a_trunc
        })
        .collect();
    let d_trunc = ks_statistic(&mut zt, |x| revweibull_cdf(x, 1.0));
    let p_trunc = ks_pvalue(d_trunc, M);

    let pass = [p_iid, p_corr, p_trunc].iter().all(|&p| p > 0.01);
    let detail = format!(
        "iid D={d_iid:.4} p={p_iid:.3}; correlated rho={:.4} D={d_corr:.4} p={p_corr:.3}; truncated D={d_trunc:.4} p={p_trunc:.3}",
        corr.rho()
    );
    report("1 EVT convergence", pass, &detail, started);
    assert!(p_iid > 0.01, "iid Gumbel KS p = {p_iid}");
    assert!(p_trunc > 0.01, "truncated reverse Weibull KS p = {p_trunc}");
    assert!(p_corr > 0.01, "correlated Gumbel KS p = {p_corr} (D = {d_corr})");
}

/// Dense covariance of the unit-variance smoothed field on a torus, built
/// directly from minimum-image distances.
fn dense_covariance(side: usize, h: f64) -> DMatrix<f64> {
    let n = side * side;
    let sigma = h / (2.0 * (2.0 * 2.0_f64.ln()).sqrt());
    let wrap = |d: usize| d.min(side - d) as f64;
    let mut kernel = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let dx = wrap((a % side).abs_diff(b % side));
            let dy = wrap((a / side).abs_diff(b / side));
            kernel[(a, b)] = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = kernel.row(0).sum();
    kernel /= total;
    let sum_sq: f64 = kernel.row(0).iter().map(|v| v * v).sum();
    &kernel * kernel.transpose() / sum_sq
}

#[test]
fn c2_spectral_oracle() {
    let started = Instant::now();
    let (side, h) = (16, 2.0);
    let n = side * side;
    let cov = dense_covariance(side, h);
    let eig = SymmetricEigen::new(cov.clone());
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.sqrt().recip()))
        * eig.eigenvectors.transpose();

    let grid = Grid::full(&[side, side]).unwrap();
    let spec = kernel_spectrum(&grid, h).unwrap();
    let rho_dense = inv_sqrt.row(0).sum();
    let rho_err = (rho_of(&spec) - rho_dense).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(0x0AC1E);
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let field = smooth(&Volume::new(grid.clone(), x).unwrap(), h).unwrap();
    let xv = DVector::from_column_slice(field.zero_filled());

    let white_dense = &inv_sqrt * &xv;
    let white = whiten(&field, &spec).unwrap();
    let whiten_err = white
        .zero_filled()
        .iter()
        .zip(white_dense.iter())
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));

    let chol = cov.clone().cholesky().expect("covariance is positive definite");
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = xv.dot(&chol.solve(&xv));
    let ll_dense = -0.5 * n as f64 * std::f64::consts::TAU.ln() - 0.5 * log_det - 0.5 * quad;
    let ll_err = (profile_loglik(&field, h).unwrap() - ll_dense).abs();

    let pass = rho_err < 1e-6 && whiten_err < 1e-6 && ll_err < 1e-6;
    let detail = format!("rho err {rho_err:.2e}, whiten err {whiten_err:.2e}, loglik err {ll_err:.2e} (loglik {ll_dense:.4})");
    report("2 spectral oracle", pass, &detail, started);
    assert!(rho_err < 1e-6 && whiten_err < 1e-6 && ll_err < 1e-6, "{detail}");
}

#[test]
fn c3_bandwidth_recovery() {
    let started = Instant::now();
    let grid = Grid::full(&[128, 128]).unwrap();
    let estimates: Vec<f64> = (0..10)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xB4D, r));
            let white: Vec<f64> = (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let field = smooth(&Volume::new(grid.clone(), white).unwrap(), 4.0).unwrap();
            fit_fwhm_mle(&field, 0.5, 20.0).unwrap()
        })
        .collect();
    let inside = estimates.iter().filter(|h| (3.5..=4.5).contains(*h)).count();
    let pass = inside >= 9;
    report("3 bandwidth recovery", pass, &format!("{inside}/10 in [3.5, 4.5]: {estimates:.3?}"), started);
    assert!(pass, "{estimates:?}");
}

#[test]
fn c4_glm_calibration() {
    let started = Instant::now();
    let design = build_design(&BlockSchedule::alternating(16, 6), 96, 7.0, 1).unwrap();
    let contrast = design.stimulus_contrast(Sided::One).unwrap();
    let ar1 = ar_table(1, ArShape::Equal).unwrap();
    let reps = 2000;
    let mut rejections = 0;
    let mut ar_selected = 0;
    let mut white_selected = 0;
    for r in 0..reps {
        let y = simulate_ar_noise(96, &ar1, 1.0, derive_seed(0xCA1, r)).unwrap();
        let fit = select_order(&y, &design, 5, &contrast).unwrap();
        rejections += usize::from(fit.tstat.abs() > 1.96);
        ar_selected += usize::from(fit.p >= 1);
        let w = simulate_ar_noise(96, &ArSpec::white(), 1.0, derive_seed(0xCA2, r)).unwrap();
        white_selected += usize::from(select_order(&w, &design, 5, &contrast).unwrap().p == 0);
    }
    let rate = rejections as f64 / reps as f64;
    let ar_frac = ar_selected as f64 / reps as f64;
    let white_frac = white_selected as f64 / reps as f64;
    let pass = (0.03..=0.08).contains(&rate) && ar_frac >= 0.9 && white_frac >= 0.8;
    let detail = format!("null rejection {rate:.4}, AR(1) picks p>=1 {ar_frac:.3}, white picks p=0 {white_frac:.3}");
    report("4 GLM calibration", pass, &detail, started);
    assert!(pass, "{detail}");
}

#[test]
fn c5_null_familywise() {
    let started = Instant::now();
    let bundled = PhantomSpec::bundled();
    let labels = bundled
        .labels()
        .iter()
        .map(|&l| if l == Label::Activated { Label::BrainB } else { l })
        .collect();
    let phantom = PhantomSpec::new(bundled.dims(), labels).unwrap();
    assert_eq!(phantom.activated_count(), 0);
    let design = build_design(&BlockSchedule::alternating(16, 6), 96, 7.0, 1).unwrap();
    let ar = ar_table(1, ArShape::Equal).unwrap();
    let runs = 25;
    let mut any = BTreeMap::from([(Variant::Am.to_string(), 0), (Variant::Ar.to_string(), 0)]);
    for r in 0..runs {
        let sim = SimConfig { sigma0: 300.0, n_scans: 96, tr: 7.0, seed: derive_seed(0xF3E, r as u64), replicate: r };
        let data = simulate_dataset(&phantom, &design, &ar, &sim).unwrap();
        let (spm, _) = spm_from_dataset(&data, &design, 5, Sided::One).unwrap();
        for variant in [Variant::Am, Variant::Ar] {
            let state = fast_run(&spm, &FastConfig::new(0.025, variant, Sided::One).unwrap()).unwrap();
            if state.n_active() > 0 {
                *any.get_mut(&variant.to_string()).unwrap() += 1;
            }
        }
    }
    let limit = 0.15 * runs as f64;
    let pass = any.values().all(|&c| c as f64 <= limit);
    report("5 null familywise", pass, &format!("runs with any activation out of {runs}: {any:?}"), started);
    assert!(pass, "{any:?}");
}

#[test]
fn c6_benchmark_orderings() {
    let started = Instant::now();
    let cfg = ExperimentConfig {
        master_seed: 2024,
        replicates: 10,
        sigma0: vec![300.0, 400.0],
        ar_cells: ["p0", "p1", "p4-decreasing"].iter().map(|s| s.parse::<ArCell>().unwrap()).collect(),
        ..ExperimentConfig::default()
    };
    let outcome = run_experiment(&cfg).unwrap();
    assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);

    let mut sums: BTreeMap<(String, u64, Method), (f64, usize)> = BTreeMap::new();
    for r in &outcome.rows {
        let e = sums.entry((r.cell.split_once('-').unwrap().1.to_string(), r.sigma0 as u64, r.method)).or_default();
        e.0 += r.jaccard;
        e.1 += 1;
    }
    let mean = |ar: &str, s: u64, m: Method| {
        let (total, count) = sums[&(ar.to_string(), s, m)];
        assert_eq!(count, 10);
        total / count as f64
    };

    let mut lines = Vec::new();
    let (mut a_ok, mut b_ok, mut c_ok) = (true, true, true);
    for ar in ["p0", "p1", "p4-decreasing"] {
        for s in [300, 400] {
            let (am, arf, ct) = (mean(ar, s, Method::AmFast), mean(ar, s, Method::ArFast), mean(ar, s, Method::Ct));
            lines.push(format!("s{s}-{ar}: am {am:.3} ar {arf:.3} ct {ct:.3}"));
            if s == 400 && am <= ct {
                a_ok = false;
            }
            if (am - arf).abs() >= 0.1 {
                b_ok = false;
            }
        }
        if mean(ar, 300, Method::Ct) <= mean(ar, 400, Method::Ct) {
            c_ok = false;
        }
    }
    let detail = format!("(a) {a_ok} (b) {b_ok} (c) {c_ok}; {}", lines.join("; "));
    report("6 benchmark orderings", a_ok && b_ok && c_ok, &detail, started);
    assert!(a_ok, "AM-FAST does not beat CT at sigma0 = 400 in every cell: {detail}");
    assert!(b_ok, "AM-FAST and AR-FAST differ by 0.1 or more in some cell: {detail}");
    assert!(c_ok, "CT does not improve from sigma0 = 400 to 300 in every cell: {detail}");
}

#[test]
fn c7_bench_determinism() {
    let started = Instant::now();
    let toml = "master_seed = 77\nreplicates = 2\nsigma0 = [400.0]\nar_cells = [\"p0\", \"p2-dec-inc\"]\nct_mc_iters = 200\n";
    let cfg: ExperimentConfig = toml_from_str(toml);
    let csv = || {
        let mut buf = Vec::new();
        write_scores_csv(&run_experiment(&cfg).unwrap().rows, &mut buf).unwrap();
        buf
    };
    let lib_same = csv() == csv();

    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bench.toml");
    fs::write(&cfg_path, toml).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_fast"))
            .args(["bench", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        (fs::read(out.join("scores.csv")).unwrap(), fs::read(out.join("summary.csv")).unwrap())
    };
    let (a, b) = (run("a"), run("b"));
    let cli_same = a == b;
    let cli_matches_lib = a.0 == csv();
    let pass = lib_same && cli_same && cli_matches_lib;
    let detail = format!("library rerun identical {lib_same}, CLI rerun identical {cli_same}, CLI equals library {cli_matches_lib}");
    report("7 determinism", pass, &detail, started);
    assert!(pass, "{detail}");
}

fn toml_from_str(text: &str) -> ExperimentConfig {
    // Parsed through the same flat-file reader the CLI uses.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, text).unwrap();
    fast_cli::config::load_toml(&path).unwrap()
}

#[test]
fn c8_table_fidelity() {
    let started = Instant::now();
    let expected: [(usize, ArShape, &[f64]); 16] = [
        (2, ArShape::Decreasing, &[0.6, 0.3]),
        (3, ArShape::Decreasing, &[0.4, 0.3, 0.2]),
        (4, ArShape::Decreasing, &[0.3, 0.25, 0.20, 0.15]),
        (5, ArShape::Decreasing, &[0.3, 0.25, 0.20, 0.10, 0.05]),
        (2, ArShape::Increasing, &[0.3, 0.6]),
        (3, ArShape::Increasing, &[0.2, 0.3, 0.4]),
        (4, ArShape::Increasing, &[0.15, 0.20, 0.25, 0.3]),
        (5, ArShape::Increasing, &[0.05, 0.10, 0.20, 0.25, 0.30]),
        (2, ArShape::DecInc, &[0.6, 0.3]),
        (3, ArShape::DecInc, &[0.4, 0.1, 0.4]),
        (4, ArShape::DecInc, &[0.4, 0.05, 0.05, 0.4]),
        (5, ArShape::DecInc, &[0.25, 0.15, 0.1, 0.15, 0.25]),
        (2, ArShape::IncDec, &[0.3, 0.6]),
        (3, ArShape::IncDec, &[0.1, 0.7, 0.1]),
        (4, ArShape::IncDec, &[0.05, 0.4, 0.4, 0.05]),
        (5, ArShape::IncDec, &[0.1, 0.15, 0.4, 0.15, 0.1]),
    ];
    let mut mismatches = Vec::new();
    for (p, shape, phi) in expected {
        if ar_table(p, shape).unwrap().phi != phi {
            mismatches.push(format!("p{p}-{shape}"));
        }
    }
    for shape in ArShape::ALL {
        if ar_table(1, shape).unwrap().phi != [0.9] {
            mismatches.push(format!("p1-{shape}"));
        }
    }
    for p in 2..=4 {
        if ar_table(p, ArShape::Equal).unwrap().phi != vec![0.9 / p as f64; p] {
            mismatches.push(format!("p{p}-equal"));
        }
    }

    let betas = [
        (Label::BrainA, [4500.0, 0.0, -155.32]),
        (Label::BrainB, [6000.0, 0.0, -155.32]),
        (Label::Activated, [6000.0, 600.0, -155.32]),
    ];
    for (label, beta) in betas {
        if label.beta() != beta {
            mismatches.push(format!("beta {label:?}"));
        }
    }
    let phantom = PhantomSpec::bundled();
    let counts = (phantom.in_brain_count(), phantom.activated_count());
    if counts != (3465, 138) {
        mismatches.push(format!("counts {counts:?}"));
    }
    let pass = mismatches.is_empty();
    report("8 table fidelity", pass, &format!("mismatches: {mismatches:?}"), started);
    assert!(pass, "{mismatches:?}");
}
