//! Four covariance estimators for the same median fit, and a confidence band
//! over several quantiles.

use nalgebra::DMatrix;
use quantkit::inference::{
    bootstrap_cov, confidence_band, covariance_iid, covariance_sandwich, BootstrapSpec, CovarianceEstimate,
};
use quantkit::qreg::{fit_grid, fit_quantile, SolverOptions};
use quantkit::resample::{replication_rng, Clusters};
use quantkit::simulate::LocationScaleDgp;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dgp = LocationScaleDgp { n: 1500, seed: 3, ..Default::default() };
    let (xs, y) = dgp.sample(&mut replication_rng(dgp.seed, 0));
    let x = DMatrix::from_fn(dgp.n, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
    // 50 groups of 30 consecutive rows.
    let groups: Vec<usize> = (0..dgp.n).map(|i| i / 30).collect();
    let clusters = Clusters::from_labels(&groups);

    let opts = SolverOptions::default();
    let fit = fit_quantile(&x, &y, 0.5, &opts)?;
    let spec = BootstrapSpec { replications: 200, seed: 99 };
    let estimates: Vec<CovarianceEstimate> = vec![
        covariance_iid(&fit, &x, None)?,
        covariance_sandwich(&fit, &x, None)?,
        bootstrap_cov(&x, &y, 0.5, spec, None, &opts)?,
        bootstrap_cov(&x, &y, 0.5, spec, Some(&clusters), &opts)?,
    ];
    println!("median slope {:.4}", fit.beta[1]);
    for est in &estimates {
        let se = est.std_errors();
        println!("{:>18}: se(intercept) {:.4}  se(slope) {:.4}", est.method.as_str(), se[0], se[1]);
    }

    let taus = [0.1, 0.25, 0.5, 0.75, 0.9];
    let fits = fit_grid(&x, &y, &taus, &opts)?;
    let covs = fits
        .iter()
        .map(|f| covariance_sandwich(f, &x, None))
        .collect::<Result<Vec<_>, _>>()?;
    let band = confidence_band(&fits, &covs, 0.9)?;
    println!("\n90% band for the slope");
    for row in band.rows.iter().filter(|r| r.coefficient == 1) {
        println!("tau {:.2}: {:.3} [{:.3}, {:.3}]", row.tau, row.estimate, row.lower, row.upper);
    }
    Ok(())
}
