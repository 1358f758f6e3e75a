use nalgebra::{DMatrix, DVector};

use super::{residuals, validate_problem, FitError};

/// Least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    pub ssr: f64,
}

/// Ordinary least squares through a Householder QR factorisation.
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit, FitError> {
    validate_problem(x, y)?;
    let k = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..k).any(|j| r[(j, j)].abs() <= 1e-10 * diag_max) || diag_max == 0.0 {
        return Err(FitError::RankDeficient);
    }
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(FitError::RankDeficient)?;
    let beta = beta.as_slice().to_vec();
    let residuals = residuals(x, y, &beta);
    let ssr = residuals.iter().map(|r| r * r).sum();
    Ok(OlsFit {
        beta,
        residuals,
        ssr,
    })
}
