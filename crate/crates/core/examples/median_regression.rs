//! Least absolute deviations on a small CSV table, next to OLS.
//!
//! ```bash
//! cargo run --release --example median_regression
//! ```

use quantkit::data::{build_design, Dataset, DesignSpec, Schema};
use quantkit::qreg::{certify, fit_ols, fit_quantile, SolverOptions};

const TABLE: &str = "\
income,food
420.2,255.8
541.4,310.9
901.2,450.5
639.1,368.1
750.9,380.6
945.8,510.4
829.4,464.1
1100.0,515.3
1366.0,631.5
2529.0,1034.0
";

fn main() -> quantkit::Result<()> {
    let schema = Schema::new().continuous("income").continuous("food");
    let data = Dataset::from_reader(TABLE.as_bytes(), &schema)?;
    let design = build_design(&data, "food", &DesignSpec::new().continuous(["income"]))?;
    let x = design.matrix.values();
    let y = &design.response;

    let opts = SolverOptions::default();
    let lad = fit_quantile(x, y, 0.5, &opts)?;
    let ols = fit_ols(x, y)?;

    println!("{:<12} {:>10} {:>10}", "", "median", "OLS");
    for (j, name) in design.matrix.column_names().iter().enumerate() {
        println!("{name:<12} {:>10.4} {:>10.4}", lad.beta[j], ols.beta[j]);
    }
    // The high-income household pulls OLS but not the median line.
    println!("\nobjective {:.4}, interpolated rows {:?}", lad.objective, lad.basis);

    let cert = certify(x, y, &lad, opts.zero_tol);
    println!(
        "optimal: {} (negative residuals {}, zero residuals {}, n*tau = {})",
        cert.holds(),
        cert.n_negative,
        cert.n_zero,
        y.len() as f64 * 0.5
    );
    Ok(())
}
