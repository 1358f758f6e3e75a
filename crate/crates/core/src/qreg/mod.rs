//! Linear quantile regression.
//!
//! [`fit_quantile`] minimises the check loss
//!
//! ```text
//! Σ_{r_i ≥ 0} τ·|r_i| + Σ_{r_i < 0} (1−τ)·|r_i|,   r = y − Xβ
//! ```
//!
//! exactly, by pivoting between basic solutions (β interpolating K
//! observations) of the equivalent linear programme
//! `min τ·1ᵀu + (1−τ)·1ᵀv  s.t.  Xβ + u − v = y,  u, v ≥ 0`.
//! The returned β is always a vertex of that programme, so at least K
//! residuals are zero.

mod brute;
mod certify;
mod ols;
mod simplex;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

pub use brute::{brute_force_fit, BRUTE_FORCE_MAX_K, BRUTE_FORCE_MAX_N};
pub use certify::{certify, Certificate};
pub use ols::{fit_ols, OlsFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("quantile {0} is outside (0, 1)")]
    InvalidTau(f64),
    #[error("design is rank deficient")]
    RankDeficient,
    #[error("{n} observations for {k} coefficients")]
    TooFewObservations { n: usize, k: usize },
    #[error("design has {rows} rows but response has {len} values")]
    DimensionMismatch { rows: usize, len: usize },
    #[error("non-finite value in design or response")]
    NonFinite,
    #[error("no convergence after {iterations} pivots")]
    NotConverged { iterations: usize },
    #[error("quantile grid is empty")]
    EmptyGrid,
    #[error("quantile grid must be strictly increasing")]
    UnorderedGrid,
    #[error("at tau={tau}: {source}")]
    AtTau {
        tau: f64,
        #[source]
        source: Box<FitError>,
    },
    #[error("brute force limited to n <= {max_n}, K <= {max_k}; got n={n}, K={k}")]
    TooLarge {
        n: usize,
        k: usize,
        max_n: usize,
        max_k: usize,
    },
    #[error("every {0}-subset of observations is singular")]
    AllSubsetsSingular(usize),
}

/// Solver tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Pivot cap; `None` means `50·(n + K) + 1000`.
    pub max_iterations: Option<usize>,
    /// A residual counts as zero when `|r_i| <= zero_tol · (1 + |y_i|)`.
    pub zero_tol: f64,
    /// Smallest admissible reduced cost at termination.
    pub optimality_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: None,
            zero_tol: 1e-8,
            optimality_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    /// Converged at a vertex with more than K zero residuals.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub tau: f64,
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    pub objective: f64,
    pub n_zero_residuals: usize,
    pub status: SolverStatus,
    pub iterations: usize,
    /// Observations interpolated by the returned vertex.
    pub basis: Vec<usize>,
    pub warnings: Vec<String>,
}

impl QuantileFit {
    /// Count of residuals strictly below zero (outside the zero tolerance).
    pub fn n_negative(&self, y: &[f64], zero_tol: f64) -> usize {
        self.residuals
            .iter()
            .zip(y)
            .filter(|(r, yi)| **r < -zero_tol * (1.0 + yi.abs()))
            .count()
    }

    pub(crate) fn from_beta(
        x: &DMatrix<f64>,
        y: &[f64],
        tau: f64,
        beta: Vec<f64>,
        basis: Vec<usize>,
        iterations: usize,
        zero_tol: f64,
    ) -> Self {
        let residuals = residuals(x, y, &beta);
        let objective = check_loss_unchecked(&residuals, tau);
        let n_zero_residuals = residuals
            .iter()
            .zip(y)
            .filter(|(r, yi)| r.abs() <= zero_tol * (1.0 + yi.abs()))
            .count();
        let status = if n_zero_residuals > x.ncols() {
            SolverStatus::Degenerate
        } else {
            SolverStatus::Converged
        };
        let mut warnings = Vec::new();
        let n = y.len() as f64;
        if n * tau.min(1.0 - tau) < 5.0 * x.ncols() as f64 {
            let msg = format!(
                "tau={tau}: only {:.1} expected observations in the thin tail for {} coefficients; estimates are fragile",
                n * tau.min(1.0 - tau),
                x.ncols()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Self {
            tau,
            beta,
            residuals,
            objective,
            n_zero_residuals,
            status,
            iterations,
            basis,
            warnings,
        }
    }
}

pub(crate) fn residuals(x: &DMatrix<f64>, y: &[f64], beta: &[f64]) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| {
            let fitted: f64 = (0..x.ncols()).map(|k| x[(i, k)] * beta[k]).sum();
            y[i] - fitted
        })
        .collect()
}

pub(crate) fn validate_tau(tau: f64) -> Result<(), FitError> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(FitError::InvalidTau(tau))
    }
}

fn check_loss_unchecked(residuals: &[f64], tau: f64) -> f64 {
    residuals
        .iter()
        .map(|&r| if r >= 0.0 { tau * r } else { (tau - 1.0) * r })
        .sum()
}

/// Check loss of a residual vector at quantile `tau`.
pub fn check_loss(residuals: &[f64], tau: f64) -> Result<f64, FitError> {
    validate_tau(tau)?;
    Ok(check_loss_unchecked(residuals, tau))
}

pub(crate) fn validate_problem(x: &DMatrix<f64>, y: &[f64]) -> Result<(), FitError> {
    let (n, k) = x.shape();
    if n != y.len() {
        return Err(FitError::DimensionMismatch { rows: n, len: y.len() });
    }
    if k == 0 {
        return Err(FitError::RankDeficient);
    }
    if n < k {
        return Err(FitError::TooFewObservations { n, k });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    Ok(())
}

/// Exact quantile regression of `y` on the columns of `x` at quantile `tau`.
pub fn fit_quantile(
    x: &DMatrix<f64>,
    y: &[f64],
    tau: f64,
    options: &SolverOptions,
) -> Result<QuantileFit, FitError> {
    validate_tau(tau)?;
    validate_problem(x, y)?;
    let sol = simplex::solve(x, y, tau, options)?;
    Ok(QuantileFit::from_beta(
        x,
        y,
        tau,
        sol.beta,
        sol.basis,
        sol.iterations,
        options.zero_tol,
    ))
}

/// Checks a quantile grid: non-empty, strictly increasing, inside (0, 1).
pub fn validate_grid(taus: &[f64]) -> Result<(), FitError> {
    if taus.is_empty() {
        return Err(FitError::EmptyGrid);
    }
    for &t in taus {
        validate_tau(t)?;
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FitError::UnorderedGrid);
    }
    Ok(())
}

/// Independent fits at each quantile of `taus`, run in parallel.
pub fn fit_grid(
    x: &DMatrix<f64>,
    y: &[f64],
    taus: &[f64],
    options: &SolverOptions,
) -> Result<Vec<QuantileFit>, FitError> {
    validate_grid(taus)?;
    taus.par_iter()
        .map(|&tau| {
            fit_quantile(x, y, tau, options).map_err(|e| FitError::AtTau {
                tau,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Adjacent quantile fits whose fitted values cross at some sample rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub lower_tau: f64,
    pub upper_tau: f64,
    /// Rows where the fit at `upper_tau` lies below the fit at `lower_tau`.
    pub rows: Vec<usize>,
}

/// Crossings between consecutive fits of a grid, evaluated at the rows of
/// `x`. Differences within `tol·(1 + |fitted|)` are ignored.
pub fn quantile_crossings(x: &DMatrix<f64>, fits: &[QuantileFit], tol: f64) -> Vec<Crossing> {
    let fitted: Vec<DVector<f64>> = fits.iter().map(|f| x * DVector::from_column_slice(&f.beta)).collect();
    fits.windows(2)
        .zip(fitted.windows(2))
        .filter_map(|(f, q)| {
            let rows: Vec<usize> = (0..x.nrows())
                .filter(|&i| q[1][i] < q[0][i] - tol * (1.0 + q[0][i].abs()))
                .collect();
            (!rows.is_empty()).then(|| Crossing {
                lower_tau: f[0].tau,
                upper_tau: f[1].tau,
                rows,
            })
        })
        .collect()
}

/// `0.05, 0.10, …, 0.95` computed as `i / 20` so the values are exact
/// decimal roundings.
pub fn ventile_grid() -> Vec<f64> {
    (1..20).map(|i| i as f64 / 20.0).collect()
}
