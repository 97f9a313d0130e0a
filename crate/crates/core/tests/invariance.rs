mod common;

use common::{invariants, map_y, random_panel, spec_for as spec};
use panelkit::estimators::{fit_first_differences, fit_within, Estimator};
use proptest::prelude::*;

fn dyadic(v: f64) -> f64 {
    (v * 1024.0).round() / 1024.0
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 32,
        rng_seed: proptest::test_runner::RngSeed::Fixed(20_190_101),
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn scaling_dependent_leaves_inference_unchanged(seed in 0u64..10_000, scale in 0.01f64..100.0) {
        let ds = random_panel(seed).dataset;
        let scaled = map_y(&ds, |_, _, y| scale * y);
        let (a, b) = (invariants(&ds), invariants(&scaled));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-8, "{} vs {}", x, y);
        }
    }

    #[test]
    fn unit_shifts_leave_fd_exact_and_within_slopes(seed in 0u64..10_000, shifts in prop::collection::vec(-1000i32..1000, 10)) {
        // y on a 2^-10 grid so adding an integer is exact
        let ds = map_y(&random_panel(seed).dataset, |_, _, y| dyadic(y));
        let shifted = map_y(&ds, |u, _, y| y + shifts[u] as f64);
        let (fa, fb) = (
            fit_first_differences(&ds, &spec(&ds, Estimator::FirstDifferences)).unwrap(),
            fit_first_differences(&shifted, &spec(&shifted, Estimator::FirstDifferences)).unwrap(),
        );
        prop_assert_eq!(&fa.coefficients, &fb.coefficients);
        prop_assert_eq!(&fa.standard_errors, &fb.standard_errors);
        prop_assert_eq!(&fa.p_values, &fb.p_values);
        let (wa, wb) = (
            fit_within(&ds, &spec(&ds, Estimator::Within)).unwrap(),
            fit_within(&shifted, &spec(&shifted, Estimator::Within)).unwrap(),
        );
        for (x, y) in wa.coefficients.iter().zip(&wb.coefficients) {
            prop_assert!((x - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn linear_trend_moves_only_the_fd_intercept(seed in 0u64..10_000, a in -50.0f64..50.0) {
        let ds = random_panel(seed).dataset;
        let trended = map_y(&ds, |_, t, y| y + a * (t - 2000) as f64);
        let fa = fit_first_differences(&ds, &spec(&ds, Estimator::FirstDifferences)).unwrap();
        let fb = fit_first_differences(&trended, &spec(&trended, Estimator::FirstDifferences)).unwrap();
        prop_assert!((fb.coefficients[0] - fa.coefficients[0] - a).abs() <= 1e-8);
        for (x, y) in fa.coefficients[1..].iter().zip(&fb.coefficients[1..]) {
            prop_assert!((x - y).abs() <= 1e-8);
        }
    }
}
