//! # quantkit
//!
//! Quantile econometrics for applied and historical work: exact linear
//! quantile regression, asymptotic and bootstrap inference, unconditional
//! quantile treatment effects and instrument-based local quantile treatment
//! effects.
//!
//! The crate is organised by capability:
//!
//! - [`data`]: CSV loading, design matrices with fixed effects, growth series.
//! - [`qreg`]: the check-loss solver, OLS baseline and a brute-force oracle.
//! - [`inference`]: density estimation, iid / sandwich / bootstrap covariances
//!   and confidence bands.
//! - [`treatment`]: QTE, the Wald LATE, complier CDFs and LQTE.
//! - [`simulate`]: data generators with known conditional quantiles and a
//!   Monte Carlo runner.
//! - [`cli`]: the batch front end used by the `quantkit` binary.
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```bash
//! cargo run --release --example median_regression
//! cargo run --release --example height_panel
//! ```

pub mod cli;
pub mod data;
pub mod error;
pub mod inference;
pub mod qreg;
pub mod resample;
pub mod simulate;
pub mod stats;
pub mod treatment;

pub use data::{build_design, decadal_growth, load_dataset, Dataset, DesignMatrix, DesignSpec};
pub use error::{Error, Result};
pub use inference::{CovarianceEstimate, CovarianceMethod};
pub use qreg::{check_loss, fit_grid, fit_ols, fit_quantile, QuantileFit, SolverOptions};
pub use treatment::{empirical_quantile, TreatmentResult};
