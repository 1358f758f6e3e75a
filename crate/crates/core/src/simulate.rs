//! Synthetic data with known conditional quantile functions, and a Monte
//! Carlo runner for quantile regression estimators.
//!
//! Two generators are provided:
//!
//! - [`LocationScaleDgp`]: `y = a + b·x + (s₀ + s₁·x)·ε`, `x ~ U[0, 2]`,
//!   `ε ~ N(0, 1)`, whose τ-quantile slope is `b + s₁·Φ⁻¹(τ)`.
//! - [`HeightPanelDgp`]: adult heights by province and birth decade with
//!   quantile-varying effects of regional growth at ages 0, 6, 12 and 18,
//!   plus province and decade effects. Heights are drawn by the inverse-CDF
//!   method, `height = μ_p + λ_t + σ·Φ⁻¹(U) + Σ_k β_k(U)·growth_k` with
//!   `U ~ U(0, 1)`, so `β_k(τ)` is exactly the τ-quantile coefficient.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::{decadal_growth, Column, DataError, Dataset, GdpSeries};
use crate::inference::{
    bootstrap_cov, covariance_iid, covariance_sandwich, critical_value, BootstrapSpec, CovarianceMethod,
};
use crate::qreg::{fit_quantile, validate_grid, SolverOptions};
use crate::resample::{replication_rng, ReplicationRng};
use crate::stats::normal_quantile;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("estimator failed in {failed} of {total} replications at tau={tau} (limit 10%)")]
    TooManyFailures { tau: f64, failed: usize, total: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

type Result<T> = std::result::Result<T, SimulateError>;

/// Uniform draw on the open interval (0, 1).
fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    normal_quantile(open_unit(rng))
}

/// `y = a + b·x + (s₀ + s₁·x)·ε` with `x ~ U[0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationScaleDgp {
    pub n: usize,
    pub intercept: f64,
    pub slope: f64,
    pub scale_base: f64,
    pub scale_slope: f64,
    pub seed: u64,
}

impl Default for LocationScaleDgp {
    fn default() -> Self {
        Self {
            n: 1000,
            intercept: 1.0,
            slope: 1.0,
            scale_base: 1.0,
            scale_slope: 0.5,
            seed: 1,
        }
    }
}

impl LocationScaleDgp {
    pub const X_MAX: f64 = 2.0;

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(SimulateError::InvalidConfig(format!("n = {} is too small", self.n)));
        }
        let lo = self.scale_base;
        let hi = self.scale_base + self.scale_slope * Self::X_MAX;
        if !(lo > 0.0 && hi > 0.0) {
            return Err(SimulateError::InvalidConfig(format!(
                "scale s0 + s1*x must be positive on [0, 2] (got {lo} .. {hi})"
            )));
        }
        Ok(())
    }

    /// Covariate and response vectors drawn from `rng`.
    pub fn sample(&self, rng: &mut ReplicationRng) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(self.n);
        let mut ys = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let x = Self::X_MAX * open_unit(rng);
            let e = standard_normal(rng);
            xs.push(x);
            ys.push(self.intercept + self.slope * x + (self.scale_base + self.scale_slope * x) * e);
        }
        (xs, ys)
    }

    pub fn analytic_intercept(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        Ok(self.intercept + self.scale_base * normal_quantile(tau))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(SimulateError::InvalidConfig(format!("quantile {tau} is outside (0, 1)")))
    }
}

/// Dataset with continuous columns `x` and `y`, drawn from stream `(seed, 0)`.
pub fn gen_location_scale(dgp: &LocationScaleDgp) -> Result<Dataset> {
    dgp.validate()?;
    let (xs, ys) = dgp.sample(&mut replication_rng(dgp.seed, 0));
    Ok(Dataset::new(vec![
        ("x".into(), Column::Continuous(xs.into_iter().map(Some).collect())),
        ("y".into(), Column::Continuous(ys.into_iter().map(Some).collect())),
    ])?)
}

/// True τ-quantile slope `b + s₁·Φ⁻¹(τ)`.
pub fn analytic_slope(dgp: &LocationScaleDgp, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(dgp.slope + dgp.scale_slope * normal_quantile(tau))
}

/// A coefficient as a function of the quantile level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientProfile {
    Constant(f64),
    /// `at_zero + (at_one − at_zero)·τ`.
    Linear { at_zero: f64, at_one: f64 },
}

impl CoefficientProfile {
    pub fn at(&self, tau: f64) -> f64 {
        match *self {
            CoefficientProfile::Constant(c) => c,
            CoefficientProfile::Linear { at_zero, at_one } => at_zero + (at_one - at_zero) * tau,
        }
    }

    fn slope(&self) -> f64 {
        match *self {
            CoefficientProfile::Constant(_) => 0.0,
            CoefficientProfile::Linear { at_zero, at_one } => at_one - at_zero,
        }
    }
}

/// Ages at which regional growth enters the height equation.
pub const GROWTH_AGES: [u32; 4] = [0, 6, 12, 18];

/// Synthetic height panel with province and decade effects.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightPanelDgp {
    pub provinces: usize,
    pub decades: usize,
    pub first_decade: i64,
    /// Individuals per (province, decade) cell.
    pub cohort_size: usize,
    /// Coefficients on growth at ages 0, 6, 12, 18.
    pub coefficients: [CoefficientProfile; 4],
    /// μ_p in cm; length `provinces`.
    pub province_effects: Vec<f64>,
    /// λ_t in cm; length `decades`.
    pub decade_effects: Vec<f64>,
    /// σ in `σ·Φ⁻¹(U)`.
    pub noise_scale: f64,
    /// Decadal GDP growth is drawn uniformly from this range.
    pub growth_range: (f64, f64),
    pub seed: u64,
}

impl HeightPanelDgp {
    /// Six provinces, six decades from the 1890s, 80 births per cell. The
    /// age-6 coefficient falls linearly from 40 at τ=0 to 0 at τ=1, the
    /// age-12 one from 10 to 0; age 0 has no effect and age 18 a constant 5.
    pub fn standard(seed: u64) -> Self {
        let provinces = 6;
        let decades = 6;
        let mut rng = replication_rng(seed, u64::MAX);
        let province_effects = (0..provinces).map(|_| 160.0 + 3.0 * standard_normal(&mut rng)).collect();
        let decade_effects = (0..decades).map(|t| 0.4 * t as f64).collect();
        Self {
            provinces,
            decades,
            first_decade: 1890,
            cohort_size: 80,
            coefficients: [
                CoefficientProfile::Constant(0.0),
                CoefficientProfile::Linear { at_zero: 40.0, at_one: 0.0 },
                CoefficientProfile::Linear { at_zero: 10.0, at_one: 0.0 },
                CoefficientProfile::Constant(5.0),
            ],
            province_effects,
            decade_effects,
            noise_scale: 6.5,
            growth_range: (-0.05, 0.25),
            seed,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.provinces * self.decades * self.cohort_size
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimulateError::InvalidConfig(msg));
        if self.provinces == 0 || self.decades == 0 || self.cohort_size == 0 {
            return bad("every (province, decade) cell needs at least one birth".into());
        }
        if self.province_effects.len() != self.provinces || self.decade_effects.len() != self.decades {
            return bad("one effect per province and per decade is required".into());
        }
        let (lo, hi) = self.growth_range;
        if !(lo > -1.0 && lo <= hi) {
            return bad(format!("growth range ({lo}, {hi}) must satisfy -1 < lo <= hi"));
        }
        if self.noise_scale < 0.0 {
            return bad("noise scale must be nonnegative".into());
        }
        // d/dτ of the conditional quantile is σ/φ(Φ⁻¹(τ)) + Σ slope_k·g_k,
        // and σ/φ(Φ⁻¹(τ)) ≥ σ·√(2π).
        let worst: f64 = self
            .coefficients
            .iter()
            .map(|c| (c.slope() * lo).min(c.slope() * hi))
            .sum();
        let floor = self.noise_scale * (2.0 * std::f64::consts::PI).sqrt();
        let all_flat = self.coefficients.iter().all(|c| c.slope() == 0.0);
        if !all_flat && floor + worst <= 0.0 {
            return bad(format!(
                "conditional quantiles are not increasing in tau: noise floor {floor:.3} vs coefficient slope term {worst:.3}"
            ));
        }
        Ok(())
    }

    /// Per-province GDP-per-capita series covering the birth decades plus
    /// the two following decades (needed for growth at ages up to 18) and
    /// one more period, whose growth is undefined.
    pub fn gdp_series(&self) -> Result<Vec<GdpSeries>> {
        let periods: Vec<i64> = (0..self.decades as i64 + 3).map(|t| self.first_decade + 10 * t).collect();
        let (lo, hi) = self.growth_range;
        (0..self.provinces)
            .map(|p| {
                let mut rng = replication_rng(self.seed, (1 << 32) + p as u64);
                let mut level = 1000.0 * (1.0 + open_unit(&mut rng));
                let mut values = vec![level];
                for _ in 1..periods.len() {
                    level *= 1.0 + lo + (hi - lo) * open_unit(&mut rng);
                    values.push(level);
                }
                Ok(GdpSeries::new(province_label(p), periods.clone(), values)?)
            })
            .collect()
    }
}

fn province_label(p: usize) -> String {
    format!("p{:02}", p + 1)
}

/// Columns: `height`, `growth0`, `growth6`, `growth12`, `growth18`,
/// `province`, `decade`, `birth_year`.
pub fn gen_height_panel(dgp: &HeightPanelDgp) -> Result<Dataset> {
    dgp.validate()?;
    let growth: Vec<Vec<f64>> = dgp
        .gdp_series()?
        .iter()
        .map(decadal_growth)
        .collect::<std::result::Result<_, _>>()?;

    let n = dgp.n_rows();
    let mut height = Vec::with_capacity(n);
    let mut growth_cols: [Vec<Option<f64>>; 4] = Default::default();
    let mut province = Vec::with_capacity(n);
    let mut decade = Vec::with_capacity(n);
    let mut birth_year = Vec::with_capacity(n);
    for p in 0..dgp.provinces {
        for t in 0..dgp.decades {
            let mut rng = replication_rng(dgp.seed, (p * dgp.decades + t) as u64);
            let base = dgp.province_effects[p] + dgp.decade_effects[t];
            for _ in 0..dgp.cohort_size {
                let offset = rng.random_range(0..10u32);
                let u = open_unit(&mut rng);
                let mut h = base;
                let noise = dgp.noise_scale * normal_quantile(u);
                if noise != 0.0 {
                    h += noise;
                }
                for (k, &age) in GROWTH_AGES.iter().enumerate() {
                    let g = growth[p][t + ((offset + age) / 10) as usize];
                    let effect = dgp.coefficients[k].at(u) * g;
                    if effect != 0.0 {
                        h += effect;
                    }
                    growth_cols[k].push(Some(g));
                }
                if !(h > 0.0) {
                    return Err(SimulateError::InvalidConfig(format!("generated nonpositive height {h}")));
                }
                height.push(Some(h));
                province.push(Some(province_label(p)));
                decade.push(Some((dgp.first_decade + 10 * t as i64).to_string()));
                birth_year.push(Some((dgp.first_decade + 10 * t as i64 + offset as i64) as f64));
            }
        }
    }
    let [g0, g6, g12, g18] = growth_cols;
    Ok(Dataset::new(vec![
        ("height".into(), Column::Continuous(height)),
        ("growth0".into(), Column::Continuous(g0)),
        ("growth6".into(), Column::Continuous(g6)),
        ("growth12".into(), Column::Continuous(g12)),
        ("growth18".into(), Column::Continuous(g18)),
        ("province".into(), Column::Categorical(province)),
        ("decade".into(), Column::Categorical(decade)),
        ("birth_year".into(), Column::Continuous(birth_year)),
    ])?)
}

/// Settings for a Monte Carlo study of the τ-quantile slope estimator on the
/// location-scale model.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub dgp: LocationScaleDgp,
    pub taus: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub method: CovarianceMethod,
    /// Inner replications when `method` is a bootstrap.
    pub bootstrap_replications: usize,
    pub level: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            dgp: LocationScaleDgp::default(),
            taus: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            replications: 200,
            seed: 1,
            method: CovarianceMethod::Sandwich,
            bootstrap_replications: 100,
            level: 0.95,
        }
    }
}

pub const MIN_MC_REPLICATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub tau: f64,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub mean_std_error: f64,
    pub replications: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub method: CovarianceMethod,
}

/// Per-replication slope estimate and standard error, `None` on failure.
type Draw = Vec<Option<(f64, f64)>>;

/// Replication `r` draws its data from stream `(seed, r)`; any inner
/// bootstrap uses seed `seed ^ r`-derived streams. Replications run in
/// parallel and are aggregated in order.
pub fn mc_study(config: &McConfig) -> Result<McReport> {
    config.dgp.validate()?;
    validate_grid(&config.taus).map_err(|e| SimulateError::InvalidConfig(e.to_string()))?;
    if config.replications < MIN_MC_REPLICATIONS {
        return Err(SimulateError::InvalidConfig(format!(
            "at least {MIN_MC_REPLICATIONS} replications required, got {}",
            config.replications
        )));
    }
    let crit = critical_value(config.level).map_err(|e| SimulateError::InvalidConfig(e.to_string()))?;
    let truths = config
        .taus
        .iter()
        .map(|&t| analytic_slope(&config.dgp, t))
        .collect::<Result<Vec<_>>>()?;
    let opts = SolverOptions::default();

    let draws: Vec<Draw> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let (xs, ys) = config.dgp.sample(&mut replication_rng(config.seed, r as u64));
            let x = DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
            config
                .taus
                .iter()
                .map(|&tau| {
                    let fit = fit_quantile(&x, &ys, tau, &opts).ok()?;
                    let cov = match config.method {
                        CovarianceMethod::Iid => covariance_iid(&fit, &x, None),
                        CovarianceMethod::Sandwich => covariance_sandwich(&fit, &x, None),
                        CovarianceMethod::Bootstrap | CovarianceMethod::ClusterBootstrap => {
                            let spec = BootstrapSpec {
                                replications: config.bootstrap_replications,
                                seed: config.seed.wrapping_add(1 + r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                            };
                            bootstrap_cov(&x, &ys, tau, spec, None, &opts)
                        }
                    }
                    .ok()?;
                    Some((fit.beta[1], cov.std_errors()[1]))
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(config.taus.len());
    for (j, (&tau, &truth)) in config.taus.iter().zip(&truths).enumerate() {
        let ok: Vec<(f64, f64)> = draws.iter().filter_map(|d| d[j]).collect();
        let failures = config.replications - ok.len();
        if failures * 10 > config.replications {
            return Err(SimulateError::TooManyFailures {
                tau,
                failed: failures,
                total: config.replications,
            });
        }
        let m = ok.len() as f64;
        let mean_estimate = ok.iter().map(|(b, _)| b).sum::<f64>() / m;
        let rmse = (ok.iter().map(|(b, _)| (b - truth).powi(2)).sum::<f64>() / m).sqrt();
        let covered = ok.iter().filter(|(b, se)| (b - truth).abs() <= crit * se).count();
        rows.push(McRow {
            tau,
            truth,
            mean_estimate,
            bias: mean_estimate - truth,
            rmse,
            coverage: covered as f64 / m,
            mean_std_error: ok.iter().map(|(_, s)| s).sum::<f64>() / m,
            replications: ok.len(),
            failures,
        });
    }
    Ok(McReport {
        rows,
        n: config.dgp.n,
        replications: config.replications,
        seed: config.seed,
        method: config.method,
    })
}
