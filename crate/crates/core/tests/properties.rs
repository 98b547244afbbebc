use fast_core::evt::{
    gumbel_cdf, gumbel_upper_quantile, max_cdf_correlated, revweibull_cdf, revweibull_upper_quantile, threshold,
    truncnorm_cdf, truncnorm_quantile, CorrelationSummary, Sided,
};
use fast_core::fast::{fast_step, jaccard, ActivationState, FastConfig, Variant};
use fast_core::glm::ar::{ar_filter, is_stationary, project_stationary};
use fast_core::grid::{Grid, Volume};
use fast_core::normal;
use fast_core::smoothing::{color, kernel_spectrum, whiten};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

proptest! {
    #[test]
    fn normal_quantile_round_trip(q in 1e-6f64..(1.0 - 1e-6)) {
        prop_assert!(rel(normal::cdf(normal::quantile(q)), q) < 1e-10);
    }

    #[test]
    fn gumbel_quantile_round_trip(q in 1e-6f64..(1.0 - 1e-6)) {
        let x = gumbel_upper_quantile(q).unwrap();
        prop_assert!(rel(1.0 - gumbel_cdf(x), q) < 1e-10);
    }

    #[test]
    fn revweibull_quantile_round_trip(q in 1e-6f64..(1.0 - 1e-6)) {
        let x = revweibull_upper_quantile(q, 1.0).unwrap();
        prop_assert!(x < 0.0);
        prop_assert!(rel(1.0 - revweibull_cdf(x, 1.0), q) < 1e-10);
    }

    #[test]
    fn truncnorm_quantile_round_trip(q in 1e-6f64..(1.0 - 1e-6), eta in -2.0f64..6.0) {
        let x = truncnorm_quantile(q, eta).unwrap();
        prop_assert!(x <= eta);
        prop_assert!(rel(truncnorm_cdf(x, eta), q) < 1e-10);
    }

    #[test]
    fn independent_max_cdf_is_power(x in -3.0f64..8.0, n in 1usize..5000) {
        let s = CorrelationSummary::<f64>::independent(n).unwrap();
        let direct = normal::cdf(x).powi(n as i32);
        prop_assume!(direct > 1e-300);
        prop_assert!(rel(max_cdf_correlated(x, &s), direct) < 1e-12);
    }

    #[test]
    fn threshold_decreases_in_alpha(
        a in 1e-4f64..0.4,
        gap in 1e-3f64..0.5,
        rho in 0.05f64..1.0,
        n in 10usize..100_000,
        k in 1usize..4,
    ) {
        let s = CorrelationSummary::<f64>::new(n, rho).unwrap();
        let prev = if k == 1 { None } else { Some(4.0) };
        let b = (a + gap).min(0.99);
        prop_assume!(b > a);
        let strict = threshold(k, &s, a, prev, Sided::One).unwrap();
        let loose = threshold(k, &s, b, prev, Sided::One).unwrap();
        prop_assert!(loose < strict);
    }

    #[test]
    fn later_threshold_below_previous(prev in -1.0f64..12.0, alpha in 1e-4f64..0.5, rho in 0.05f64..1.0, n in 2usize..50_000) {
        let s = CorrelationSummary::<f64>::new(n, rho).unwrap();
        prop_assert!(threshold(2, &s, alpha, Some(prev), Sided::Two).unwrap() < prev);
    }

    #[test]
    fn spectrum_is_real_and_even(nx in 4usize..24, ny in 4usize..24, h in 0.2f64..8.0) {
        let grid = Grid::full(&[nx, ny]).unwrap();
        let spec = kernel_spectrum::<f64>(&grid, h).unwrap();
        let lambda = spec.lambda();
        for j in 0..nx * ny {
            let (fx, fy) = (j % nx, j / nx);
            let mirror = (nx - fx) % nx + nx * ((ny - fy) % ny);
            prop_assert!((lambda[j] - lambda[mirror]).abs() <= 1e-12 * lambda[0]);
            prop_assert!(lambda[j] > 0.0 && lambda[j].is_finite());
        }
        prop_assert!((spec.rho() - spec.lambda0().sqrt().recip()).abs() < 1e-12);
        prop_assert!(spec.rho() > 0.0 && spec.rho() <= 1.0 + 1e-12);
    }

    #[test]
    fn whiten_inverts_color(seed in any::<u64>(), h in 0.3f64..4.0) {
        let grid = Grid::full(&[12, 10]).unwrap();
        let spec = kernel_spectrum(&grid, h).unwrap();
        let x = Volume::new(grid.clone(), noise(grid.len(), seed)).unwrap();
        let back = whiten(&color(&x, &spec).unwrap(), &spec).unwrap();
        for (a, b) in back.zero_filled().iter().zip(x.zero_filled()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn projection_is_stationary(phi in prop::collection::vec(-3.0f64..3.0, 1..6)) {
        let projected = project_stationary(&phi).unwrap();
        prop_assert!(is_stationary(&projected));
        if is_stationary(&phi) {
            prop_assert_eq!(projected, phi);
        }
    }

    #[test]
    fn ar_filter_is_linear(seed in any::<u64>(), phi in prop::collection::vec(-0.5f64..0.5, 1..4), c in -3.0f64..3.0) {
        let x = noise(40, seed);
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let fx: Vec<f64> = ar_filter(&x, &phi);
        for (a, b) in ar_filter(&scaled, &phi).iter().zip(&fx) {
            prop_assert!((a - c * b).abs() < 1e-12);
        }
    }

    #[test]
    fn jaccard_is_symmetric_and_bounded(a in prop::collection::vec(any::<bool>(), 1..64), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<bool> = a.iter().map(|_| rand::Rng::random(&mut rng)).collect();
        let j = jaccard(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j, jaccard(&b, &a).unwrap());
        prop_assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn activation_maps_are_monotone(seed in any::<u64>(), strength in 0.0f64..6.0, variant in prop_oneof![Just(Variant::Am), Just(Variant::Ar)]) {
        let grid = Grid::full(&[24, 24]).unwrap();
        let mut values = noise(grid.len(), seed);
        for (i, v) in values.iter_mut().enumerate() {
            let (x, y) = (i % 24, i / 24);
            if (8..14).contains(&x) && (8..14).contains(&y) {
                *v += strength;
            }
        }
        let spm = Volume::new(grid.clone(), values).unwrap();
        let config = FastConfig::new(0.05, variant, Sided::One).unwrap();
        let mut field = spm;
        let mut state = ActivationState::new(&grid);
        let mut previous = state.zeta();
        for k in 1..=4 {
            let (f, s) = fast_step(&field, &state, k, &config).unwrap();
            let now = s.zeta();
            prop_assert!(previous.iter().zip(&now).all(|(&was, &is)| !was || is));
            prop_assert_eq!(s.n_inactive() + s.n_active(), grid.n_in_mask());
            let rec = s.history().last().unwrap();
            prop_assert_eq!(rec.jaccard, jaccard(&now, &previous).unwrap());
            if k > 1 {
                prop_assert!(rec.eta < s.history()[k - 2].eta);
            }
            previous = now;
            field = f;
            state = s;
        }
    }
}
