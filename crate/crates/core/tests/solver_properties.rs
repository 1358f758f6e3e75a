use nalgebra::DMatrix;
use proptest::prelude::*;
use quantkit::qreg::{brute_force_fit, certify, fit_ols, fit_quantile, QuantileFit, SolverOptions};

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn design(n: usize, k: usize, cells: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { cells[i * k + j] })
}

fn assert_certified(x: &DMatrix<f64>, y: &[f64], fit: &QuantileFit) {
    let cert = certify(x, y, fit, opts().zero_tol);
    assert!(cert.holds(), "certificate failed: {cert:?}");
    assert!(cert.n_zero >= x.ncols(), "vertex must interpolate K points: {cert:?}");
}

/// Small instance: n in 3..=12, K in 1..=2, continuous or integer-valued data.
fn small_instance() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, bool)> {
    (3usize..=12, 1usize..=2, any::<bool>()).prop_flat_map(|(n, k, integer)| {
        (
            Just(n),
            Just(k),
            prop::collection::vec(-5.0f64..5.0, n * k),
            prop::collection::vec(-10.0f64..10.0, n),
            Just(integer),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_brute_force((n, k, cells, ys, integer) in small_instance(), t in 1usize..10) {
        let tau = t as f64 / 10.0;
        let round = |v: f64| if integer { v.round() } else { v };
        let cells: Vec<f64> = cells.into_iter().map(round).collect();
        let y: Vec<f64> = ys.into_iter().map(round).collect();
        let x = design(n, k, &cells);
        let Ok(oracle) = brute_force_fit(&x, &y, tau) else { return Ok(()) };
        let fit = fit_quantile(&x, &y, tau, &opts()).unwrap();
        prop_assert!(rel_close(fit.objective, oracle.objective, 1e-8),
            "solver {} vs oracle {}", fit.objective, oracle.objective);
        assert_certified(&x, &y, &fit);
    }

    #[test]
    fn equivariances(
        n in 8usize..40,
        seed_cells in prop::collection::vec(-3.0f64..3.0, 120),
        seed_y in prop::collection::vec(-5.0f64..5.0, 40),
        lambda in 0.1f64..10.0,
        gamma in prop::collection::vec(-2.0f64..2.0, 3),
        t in 1usize..10,
    ) {
        let tau = t as f64 / 10.0;
        let x = design(n, 3, &seed_cells);
        let y = seed_y[..n].to_vec();
        let base = fit_quantile(&x, &y, tau, &opts()).unwrap();
        assert_certified(&x, &y, &base);

        let scaled: Vec<f64> = y.iter().map(|v| lambda * v).collect();
        let fit = fit_quantile(&x, &scaled, tau, &opts()).unwrap();
        prop_assert!(rel_close(fit.objective, lambda * base.objective, 1e-8));

        let flipped: Vec<f64> = y.iter().map(|v| -lambda * v).collect();
        let fit = fit_quantile(&x, &flipped, 1.0 - tau, &opts()).unwrap();
        prop_assert!(rel_close(fit.objective, lambda * base.objective, 1e-8));

        let shifted: Vec<f64> = (0..n)
            .map(|i| y[i] + (0..3).map(|j| x[(i, j)] * gamma[j]).sum::<f64>())
            .collect();
        let fit = fit_quantile(&x, &shifted, tau, &opts()).unwrap();
        prop_assert!(rel_close(fit.objective, base.objective, 1e-8));

        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, -1.0, 0.0, 2.0, 0.3, 0.0, -0.7, 1.5]);
        let xa = &x * &a;
        let fit = fit_quantile(&xa, &y, tau, &opts()).unwrap();
        prop_assert!(rel_close(fit.objective, base.objective, 1e-8));
        assert_certified(&xa, &y, &fit);
    }
}

#[test]
fn lad_objective_is_half_l1_norm() {
    let xs: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).cos()).collect();
    let y: Vec<f64> = xs.iter().enumerate().map(|(i, x)| 2.0 * x + ((i * 31) % 7) as f64).collect();
    let x = DMatrix::from_fn(30, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
    let fit = fit_quantile(&x, &y, 0.5, &opts()).unwrap();
    let l1: f64 = fit.residuals.iter().map(|r| r.abs()).sum();
    assert!((fit.objective - 0.5 * l1).abs() < 1e-12);
}

#[test]
fn larger_fixed_effect_design_is_certified() {
    // 600 rows, intercept + 2 continuous + 9 group dummies with heavy ties.
    let n = 600;
    let x = DMatrix::from_fn(n, 12, |i, j| match j {
        0 => 1.0,
        1 => ((i * 7) % 23) as f64 / 23.0,
        2 => ((i as f64) * 0.013).sin(),
        g => ((i % 10) + 2 == g) as u8 as f64,
    });
    let y: Vec<f64> = (0..n).map(|i| ((i * 97) % 41) as f64 + (i % 10) as f64).collect();
    for tau in [0.05, 0.25, 0.5, 0.75, 0.95] {
        let fit = fit_quantile(&x, &y, tau, &opts()).unwrap();
        assert_certified(&x, &y, &fit);
    }
}

proptest! {
    #[test]
    fn ols_residuals_are_orthogonal_to_the_design(
        n in 5usize..40,
        cells in prop::collection::vec(-3.0f64..3.0, 120),
        ys in prop::collection::vec(-5.0f64..5.0, 40),
    ) {
        let x = design(n, 3, &cells);
        let y = &ys[..n];
        let Ok(ols) = fit_ols(&x, y) else { return Ok(()) };
        let r = nalgebra::DVector::from_column_slice(&ols.residuals);
        let grad = x.transpose() * &r;
        let scale = x.abs().max() * y.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!(grad.amax() <= 1e-8 * scale, "gradient {grad}");
        prop_assert!((ols.ssr - r.norm_squared()).abs() <= 1e-10 * ols.ssr.max(1.0));
    }
}
