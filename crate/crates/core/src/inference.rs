//! Standard errors for quantile regression coefficients.
//!
//! The asymptotic covariance of β̂(τ) is `τ(1−τ)/N · H⁻¹ J H⁻¹` with
//! `J = XᵀX/N` and `H = Σ f_i(x_iᵀβ) x_i x_iᵀ / N`, where `f_i` is the
//! conditional density of the response at the fitted quantile. The iid
//! variant assumes one common density, estimated from the residual quantile
//! function; the sandwich variant estimates each `f_i` with a Gaussian
//! kernel on the residuals. Resampling alternatives refit on pairs (or
//! whole-cluster) bootstrap samples.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::qreg::{fit_ols, fit_quantile, validate_tau, FitError, OlsFit, QuantileFit, SolverOptions};
use crate::resample::{pairs_indices, replication_rng, Clusters};
use crate::stats::{normal_pdf, normal_quantile, quantile_sorted, scaled_mad, sorted_copy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("residual spread around tau={tau} is zero; density cannot be estimated, use a bootstrap method")]
    DegenerateSpread { tau: f64 },
    #[error("XᵀX is singular")]
    SingularGram,
    #[error("H matrix is singular (smallest eigenvalue {min_eigenvalue:e})")]
    SingularHessian { min_eigenvalue: f64 },
    #[error("bootstrap needs at least {min} replications, got {got}")]
    TooFewReplications { got: usize, min: usize },
    #[error("cluster bootstrap needs at least {min} clusters, got {got}")]
    TooFewClusters { got: usize, min: usize },
    #[error("cluster labels cover {got} rows, design has {expected}")]
    ClusterLength { got: usize, expected: usize },
    #[error("{failed} of {total} bootstrap replications failed (limit 10%)")]
    TooManyFailures { failed: usize, total: usize },
    #[error("{fits} fits but {covs} covariance estimates")]
    LengthMismatch { fits: usize, covs: usize },
    #[error("confidence level {0} is outside (0, 1)")]
    InvalidLevel(f64),
    #[error("invalid bandwidth {0}")]
    InvalidBandwidth(f64),
    #[error(transparent)]
    Fit(#[from] FitError),
}

type Result<T> = std::result::Result<T, InferenceError>;

pub const MIN_BOOTSTRAP_REPLICATIONS: usize = 50;
pub const MIN_CLUSTERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMethod {
    Iid,
    Sandwich,
    Bootstrap,
    ClusterBootstrap,
}

impl CovarianceMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CovarianceMethod::Iid => "iid",
            CovarianceMethod::Sandwich => "sandwich",
            CovarianceMethod::Bootstrap => "bootstrap",
            CovarianceMethod::ClusterBootstrap => "cluster-bootstrap",
        }
    }
}

impl std::str::FromStr for CovarianceMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "iid" => Ok(Self::Iid),
            "sandwich" => Ok(Self::Sandwich),
            "bootstrap" => Ok(Self::Bootstrap),
            "cluster-bootstrap" => Ok(Self::ClusterBootstrap),
            other => Err(format!(
                "unknown inference method `{other}` (expected iid, sandwich, bootstrap or cluster-bootstrap)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub method: CovarianceMethod,
    /// iid: the single density estimate. Sandwich: one kernel estimate per
    /// observation. Empty for resampling methods.
    pub density: Vec<f64>,
    /// Bandwidth in quantile units (iid) or residual units (sandwich).
    pub bandwidth: Option<f64>,
    /// Successful replications (resampling methods).
    pub replications: Option<usize>,
    pub failed_replications: usize,
    pub seed: Option<u64>,
}

impl CovarianceEstimate {
    fn analytic(matrix: DMatrix<f64>, method: CovarianceMethod, density: Vec<f64>, bandwidth: f64) -> Self {
        Self {
            matrix: symmetrize(matrix),
            method,
            density,
            bandwidth: Some(bandwidth),
            replications: None,
            failed_replications: 0,
            seed: None,
        }
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Hall–Sheather bandwidth (in quantile units) for a two-sided interval at
/// level 1 − `alpha`.
pub fn hall_sheather_bandwidth(n: usize, tau: f64, alpha: f64) -> f64 {
    let z = normal_quantile(1.0 - alpha / 2.0);
    let q = normal_quantile(tau);
    let phi = normal_pdf(q);
    (n as f64).powf(-1.0 / 3.0) * z.powf(2.0 / 3.0) * (1.5 * phi * phi / (2.0 * q * q + 1.0)).powf(1.0 / 3.0)
}

/// `(τ − h, τ + h)` clamped into `(ε, 1 − ε)` with `ε = 1/(2n)`.
fn quantile_window(n: usize, tau: f64, h: f64) -> (f64, f64) {
    let eps = 0.5 / n as f64;
    ((tau - h).max(eps), (tau + h).min(1.0 - eps))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityEstimate {
    pub value: f64,
    pub bandwidth: f64,
}

/// Difference-quotient density estimate at the τ-quantile of `residuals`:
/// `f̂ = (τ_hi − τ_lo) / (Q̂(τ_hi) − Q̂(τ_lo))` with `τ_hi, τ_lo = τ ± h`
/// (after clamping). `h` defaults to the Hall–Sheather rule at 95%.
pub fn residual_density(residuals: &[f64], tau: f64, bandwidth: Option<f64>) -> Result<DensityEstimate> {
    validate_tau(tau)?;
    let n = residuals.len();
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(InferenceError::InvalidBandwidth(h)),
        None => hall_sheather_bandwidth(n, tau, 0.05),
    };
    let sorted = sorted_copy(residuals);
    let (lo, hi) = quantile_window(n, tau, h);
    let spread = quantile_sorted(&sorted, hi) - quantile_sorted(&sorted, lo);
    if !(spread > 0.0) || hi <= lo {
        return Err(InferenceError::DegenerateSpread { tau });
    }
    Ok(DensityEstimate {
        value: (hi - lo) / spread,
        bandwidth: h,
    })
}

pub fn estimate_density(fit: &QuantileFit, bandwidth: Option<f64>) -> Result<DensityEstimate> {
    residual_density(&fit.residuals, fit.tau, bandwidth)
}

/// `J = XᵀX / N`.
pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.transpose() * x / x.nrows() as f64
}

/// `(1/N)·τ(1−τ)·f̂⁻²·J⁻¹`.
pub fn covariance_iid(fit: &QuantileFit, x: &DMatrix<f64>, bandwidth: Option<f64>) -> Result<CovarianceEstimate> {
    let density = estimate_density(fit, bandwidth)?;
    let n = x.nrows() as f64;
    let tau = fit.tau;
    let j_inv = gram(x).try_inverse().ok_or(InferenceError::SingularGram)?;
    let matrix = j_inv * (tau * (1.0 - tau) / (n * density.value * density.value));
    Ok(CovarianceEstimate::analytic(
        matrix,
        CovarianceMethod::Iid,
        vec![density.value],
        density.bandwidth,
    ))
}

/// Kernel bandwidth in residual units: the Hall–Sheather window mapped
/// through Φ⁻¹ and scaled by the MAD of the residuals.
pub fn kernel_bandwidth(residuals: &[f64], tau: f64, bandwidth: Option<f64>) -> Result<f64> {
    let n = residuals.len();
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(InferenceError::InvalidBandwidth(h)),
        None => hall_sheather_bandwidth(n, tau, 0.05),
    };
    let (lo, hi) = quantile_window(n, tau, h);
    let spread = scaled_mad(residuals);
    let width = spread * (normal_quantile(hi) - normal_quantile(lo));
    if !(width > 0.0) {
        return Err(InferenceError::DegenerateSpread { tau });
    }
    Ok(width)
}

/// Heteroskedasticity-robust `(1/N)·τ(1−τ)·H⁻¹JH⁻¹` with Gaussian-kernel
/// densities `f̂_i = φ(r_i/h)/h`. `bandwidth` is in quantile units.
pub fn covariance_sandwich(fit: &QuantileFit, x: &DMatrix<f64>, bandwidth: Option<f64>) -> Result<CovarianceEstimate> {
    let h = kernel_bandwidth(&fit.residuals, fit.tau, bandwidth)?;
    let weights: Vec<f64> = fit.residuals.iter().map(|r| normal_pdf(r / h) / h).collect();
    let matrix = sandwich_from_weights(x, fit.tau, &weights)?;
    Ok(CovarianceEstimate::analytic(matrix, CovarianceMethod::Sandwich, weights, h))
}

/// The sandwich formula for given per-observation densities.
pub fn sandwich_from_weights(x: &DMatrix<f64>, tau: f64, weights: &[f64]) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    let nf = n as f64;
    let j = gram(x);
    let mut h = DMatrix::<f64>::zeros(k, k);
    for (i, w) in weights.iter().enumerate() {
        let row = x.row(i);
        h.ger(*w / nf, &row.transpose(), &row.transpose(), 1.0);
    }
    let h = symmetrize(h);
    let h_inv = match h.clone().try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) => inv,
        _ => {
            return Err(InferenceError::SingularHessian {
                min_eigenvalue: h.symmetric_eigenvalues().min(),
            })
        }
    };
    let min_eig = h.symmetric_eigenvalues().min();
    if min_eig <= 1e-14 * h.amax() {
        return Err(InferenceError::SingularHessian { min_eigenvalue: min_eig });
    }
    Ok(symmetrize(&h_inv * j * &h_inv * (tau * (1.0 - tau) / nf)))
}

/// Replication count and seed of a resampling run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapSpec {
    pub replications: usize,
    pub seed: u64,
}

/// Draws from a pairs (or cluster pairs) bootstrap of an arbitrary
/// coefficient estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    pub draws: Vec<Vec<f64>>,
    pub failed: usize,
}

impl BootstrapDraws {
    pub fn covariance(&self) -> DMatrix<f64> {
        let b = self.draws.len();
        let k = self.draws.first().map_or(0, Vec::len);
        let mut mean = DVector::<f64>::zeros(k);
        for d in &self.draws {
            mean += DVector::from_column_slice(d);
        }
        mean /= b as f64;
        let mut cov = DMatrix::<f64>::zeros(k, k);
        for d in &self.draws {
            let c = DVector::from_column_slice(d) - &mean;
            cov.ger(1.0, &c, &c, 1.0);
        }
        symmetrize(cov / (b.saturating_sub(1)).max(1) as f64)
    }
}

/// Resample rows (or whole clusters) with replacement and re-estimate.
///
/// Replication `r` uses the stream `(seed, r)`; replications run in
/// parallel and are collected in order, so the output is independent of the
/// thread count. Failed replications are dropped and counted; more than 10%
/// failures is an error.
pub fn bootstrap_draws<F>(
    x: &DMatrix<f64>,
    y: &[f64],
    spec: BootstrapSpec,
    clusters: Option<&Clusters>,
    estimator: F,
) -> Result<BootstrapDraws>
where
    F: Fn(&DMatrix<f64>, &[f64]) -> std::result::Result<Vec<f64>, FitError> + Sync,
{
    if spec.replications < MIN_BOOTSTRAP_REPLICATIONS {
        return Err(InferenceError::TooFewReplications {
            got: spec.replications,
            min: MIN_BOOTSTRAP_REPLICATIONS,
        });
    }
    let n = x.nrows();
    if let Some(c) = clusters {
        let covered: usize = c.len_rows();
        if covered != n {
            return Err(InferenceError::ClusterLength { got: covered, expected: n });
        }
        if c.len() < MIN_CLUSTERS {
            return Err(InferenceError::TooFewClusters {
                got: c.len(),
                min: MIN_CLUSTERS,
            });
        }
    }
    let results: Vec<Option<Vec<f64>>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(spec.seed, r as u64);
            let rows = match clusters {
                Some(c) => c.draw(&mut rng),
                None => pairs_indices(&mut rng, n),
            };
            let xb = x.select_rows(&rows);
            let yb: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            estimator(&xb, &yb).ok()
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_none()).count();
    if failed * 10 > spec.replications {
        return Err(InferenceError::TooManyFailures {
            failed,
            total: spec.replications,
        });
    }
    Ok(BootstrapDraws {
        draws: results.into_iter().flatten().collect(),
        failed,
    })
}

/// Pairs bootstrap covariance of β̂(τ); whole clusters are resampled when
/// `clusters` is given.
pub fn bootstrap_cov(
    x: &DMatrix<f64>,
    y: &[f64],
    tau: f64,
    spec: BootstrapSpec,
    clusters: Option<&Clusters>,
    options: &SolverOptions,
) -> Result<CovarianceEstimate> {
    validate_tau(tau)?;
    let draws = bootstrap_draws(x, y, spec, clusters, |xb, yb| {
        fit_quantile(xb, yb, tau, options).map(|f| f.beta)
    })?;
    Ok(CovarianceEstimate {
        matrix: draws.covariance(),
        method: if clusters.is_some() {
            CovarianceMethod::ClusterBootstrap
        } else {
            CovarianceMethod::Bootstrap
        },
        density: Vec::new(),
        bandwidth: None,
        replications: Some(draws.draws.len()),
        failed_replications: draws.failed,
        seed: Some(spec.seed),
    })
}

/// Covariance of OLS coefficients matching a quantile-regression method:
/// classical for iid, HC0 for sandwich, and the same bootstrap otherwise.
pub fn ols_covariance(
    x: &DMatrix<f64>,
    y: &[f64],
    fit: &OlsFit,
    method: CovarianceMethod,
    spec: Option<BootstrapSpec>,
    clusters: Option<&Clusters>,
) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    let xtx_inv = (x.transpose() * x).try_inverse().ok_or(InferenceError::SingularGram)?;
    match method {
        CovarianceMethod::Iid => {
            let s2 = fit.ssr / (n.saturating_sub(k)).max(1) as f64;
            Ok(symmetrize(xtx_inv * s2))
        }
        CovarianceMethod::Sandwich => {
            let mut meat = DMatrix::<f64>::zeros(k, k);
            for (i, r) in fit.residuals.iter().enumerate() {
                let row = x.row(i).transpose();
                meat.ger(r * r, &row, &row, 1.0);
            }
            Ok(symmetrize(&xtx_inv * meat * &xtx_inv))
        }
        CovarianceMethod::Bootstrap | CovarianceMethod::ClusterBootstrap => {
            let spec = spec.ok_or(InferenceError::TooFewReplications {
                got: 0,
                min: MIN_BOOTSTRAP_REPLICATIONS,
            })?;
            let draws = bootstrap_draws(x, y, spec, clusters, |xb, yb| fit_ols(xb, yb).map(|f| f.beta))?;
            Ok(draws.covariance())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandRow {
    pub tau: f64,
    pub coefficient: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub rows: Vec<BandRow>,
}

/// Two-sided normal critical value for coverage `level`.
pub fn critical_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(InferenceError::InvalidLevel(level));
    }
    Ok(normal_quantile(0.5 * (1.0 + level)))
}

/// `estimate ± z·SE` per coefficient per quantile.
pub fn confidence_band(fits: &[QuantileFit], covs: &[CovarianceEstimate], level: f64) -> Result<ConfidenceBand> {
    if fits.len() != covs.len() {
        return Err(InferenceError::LengthMismatch {
            fits: fits.len(),
            covs: covs.len(),
        });
    }
    let z = critical_value(level)?;
    let mut rows = Vec::new();
    for (fit, cov) in fits.iter().zip(covs) {
        for (j, (b, se)) in fit.beta.iter().zip(cov.std_errors()).enumerate() {
            rows.push(BandRow {
                tau: fit.tau,
                coefficient: j,
                estimate: *b,
                lower: b - z * se,
                upper: b + z * se,
                level,
            });
        }
    }
    Ok(ConfidenceBand { rows })
}
