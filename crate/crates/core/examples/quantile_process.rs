//! Slope estimates across the quantile grid on a heteroskedastic model,
//! against the analytic conditional-quantile slope.

use nalgebra::DMatrix;
use quantkit::qreg::{fit_grid, ventile_grid, SolverOptions};
use quantkit::resample::replication_rng;
use quantkit::simulate::{analytic_slope, LocationScaleDgp};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dgp = LocationScaleDgp { n: 4000, seed: 12, ..Default::default() };
    let (xs, y) = dgp.sample(&mut replication_rng(dgp.seed, 0));
    let x = DMatrix::from_fn(dgp.n, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });

    let taus = ventile_grid();
    let fits = fit_grid(&x, &y, &taus, &SolverOptions::default())?;

    println!("  tau   slope   truth   pivots");
    for fit in &fits {
        let truth = analytic_slope(&dgp, fit.tau)?;
        println!("{:5.2} {:7.3} {:7.3} {:8}", fit.tau, fit.beta[1], truth, fit.iterations);
    }
    Ok(())
}
