//! Quantile treatment effects.
//!
//! - [`qte`]: unconditional QTE, the difference of treated and control
//!   τ-quantiles under exogenous treatment.
//! - [`late_wald`]: the Wald ratio for the local average treatment effect with
//!   a binary instrument.
//! - [`complier_cdfs`] and [`lqte`]: outcome distributions of compliers
//!   (Abadie's representation) and the quantile differences between them.
//!
//! Of the identifying assumptions behind the instrumental-variable estimators
//! (independence, exclusion, relevance, monotonicity, no interference) only
//! relevance can be checked from data; it is enforced here. The others are
//! the caller's responsibility.

use rayon::prelude::*;
use thiserror::Error;

use crate::inference::{critical_value, BootstrapSpec, MIN_BOOTSTRAP_REPLICATIONS};
use crate::resample::{pairs_indices, replication_rng};
use crate::stats::{quantile_sorted, sorted_copy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreatmentError {
    #[error("empty sample")]
    EmptySample,
    #[error("quantile {0} is outside (0, 1)")]
    InvalidTau(f64),
    #[error("`{name}` has {got} values, outcome has {expected}")]
    LengthMismatch {
        name: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("`{name}` is not binary (row {row} = {value})")]
    NotBinary {
        name: &'static str,
        row: usize,
        value: u8,
    },
    #[error("no observations with {name} = {value}")]
    EmptyGroup { name: &'static str, value: u8 },
    #[error("instrument is irrelevant: first stage E(D|Z=1) - E(D|Z=0) = {first_stage}")]
    Irrelevant { first_stage: f64 },
    #[error("untreated complier CDF has zero denominator")]
    ZeroUntreatedDenominator,
    #[error("evaluation grid must be strictly increasing and reach max(y) = {max_y}")]
    BadGrid { max_y: f64 },
    #[error("tau={tau} exceeds the {which} complier CDF maximum {max}")]
    TauAboveCdf { tau: f64, which: &'static str, max: f64 },
    #[error("bootstrap needs at least {min} replications, got {got}")]
    TooFewReplications { got: usize, min: usize },
    #[error("{failed} of {total} bootstrap replications failed (limit 10%)")]
    TooManyFailures { failed: usize, total: usize },
    #[error("confidence level {0} is outside (0, 1)")]
    InvalidLevel(f64),
}

impl TreatmentError {
    /// Errors caused by malformed input rather than by the estimator.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            TreatmentError::EmptySample
                | TreatmentError::LengthMismatch { .. }
                | TreatmentError::NotBinary { .. }
                | TreatmentError::EmptyGroup { .. }
                | TreatmentError::BadGrid { .. }
        )
    }
}

type Result<T> = std::result::Result<T, TreatmentError>;

fn validate_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(TreatmentError::InvalidTau(tau))
    }
}

fn validate_binary(name: &'static str, v: &[u8], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(TreatmentError::LengthMismatch {
            name,
            got: v.len(),
            expected: n,
        });
    }
    if let Some((row, &value)) = v.iter().enumerate().find(|(_, b)| **b > 1) {
        return Err(TreatmentError::NotBinary { name, row, value });
    }
    Ok(())
}

/// `inf{y : F(y) ≥ τ}` for the empirical CDF of `sample`: the smallest
/// observation whose empirical CDF value reaches τ.
pub fn empirical_quantile(sample: &[f64], tau: f64) -> Result<f64> {
    validate_tau(tau)?;
    if sample.is_empty() {
        return Err(TreatmentError::EmptySample);
    }
    Ok(quantile_sorted(&sorted_copy(sample), tau))
}

/// Per-quantile effects and the quantiles they are built from.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentResult {
    pub taus: Vec<f64>,
    pub effects: Vec<f64>,
    pub q1: Vec<f64>,
    pub q0: Vec<f64>,
    /// `E(D|Z=1) − E(D|Z=0)`, local effects only.
    pub first_stage: Option<f64>,
    pub band: Option<TreatmentBand>,
}

impl TreatmentResult {
    fn from_quantiles(taus: &[f64], q1: Vec<f64>, q0: Vec<f64>, first_stage: Option<f64>) -> Self {
        Self {
            taus: taus.to_vec(),
            effects: q1.iter().zip(&q0).map(|(a, b)| a - b).collect(),
            q1,
            q0,
            first_stage,
            band: None,
        }
    }
}

fn split_by(y: &[f64], d: &[u8]) -> (Vec<f64>, Vec<f64>) {
    let mut treated = Vec::new();
    let mut control = Vec::new();
    for (&yi, &di) in y.iter().zip(d) {
        if di == 1 {
            treated.push(yi);
        } else {
            control.push(yi);
        }
    }
    (treated, control)
}

/// `Δ(τ) = Q_y(τ | D=1) − Q_y(τ | D=0)`.
pub fn qte(y: &[f64], d: &[u8], taus: &[f64]) -> Result<TreatmentResult> {
    validate_binary("treatment", d, y.len())?;
    for &t in taus {
        validate_tau(t)?;
    }
    let (treated, control) = split_by(y, d);
    if treated.is_empty() {
        return Err(TreatmentError::EmptyGroup { name: "treatment", value: 1 });
    }
    if control.is_empty() {
        return Err(TreatmentError::EmptyGroup { name: "treatment", value: 0 });
    }
    let treated = sorted_copy(&treated);
    let control = sorted_copy(&control);
    let q1 = taus.iter().map(|&t| quantile_sorted(&treated, t)).collect();
    let q0 = taus.iter().map(|&t| quantile_sorted(&control, t)).collect();
    Ok(TreatmentResult::from_quantiles(taus, q1, q0, None))
}

/// Instrument-split sample moments.
struct InstrumentMoments {
    n1: usize,
    n0: usize,
    d1: f64,
    d0: f64,
}

impl InstrumentMoments {
    fn new(d: &[u8], z: &[u8]) -> Result<Self> {
        let n1 = z.iter().filter(|&&v| v == 1).count();
        let n0 = z.len() - n1;
        if n1 == 0 {
            return Err(TreatmentError::EmptyGroup { name: "instrument", value: 1 });
        }
        if n0 == 0 {
            return Err(TreatmentError::EmptyGroup { name: "instrument", value: 0 });
        }
        let treated_z1 = d.iter().zip(z).filter(|(&di, &zi)| di == 1 && zi == 1).count();
        let treated_z0 = d.iter().zip(z).filter(|(&di, &zi)| di == 1 && zi == 0).count();
        Ok(Self {
            n1,
            n0,
            d1: treated_z1 as f64 / n1 as f64,
            d0: treated_z0 as f64 / n0 as f64,
        })
    }

    fn first_stage(&self) -> f64 {
        self.d1 - self.d0
    }

    fn relevant(&self) -> Result<f64> {
        let fs = self.first_stage();
        if fs == 0.0 || !fs.is_finite() {
            return Err(TreatmentError::Irrelevant { first_stage: fs });
        }
        Ok(fs)
    }
}

fn validate_iv(y: &[f64], d: &[u8], z: &[u8]) -> Result<()> {
    if y.is_empty() {
        return Err(TreatmentError::EmptySample);
    }
    validate_binary("treatment", d, y.len())?;
    validate_binary("instrument", z, y.len())
}

/// `[Ē(y|Z=1) − Ē(y|Z=0)] / [Ē(D|Z=1) − Ē(D|Z=0)]`.
pub fn late_wald(y: &[f64], d: &[u8], z: &[u8]) -> Result<f64> {
    validate_iv(y, d, z)?;
    let m = InstrumentMoments::new(d, z)?;
    let fs = m.relevant()?;
    let (y1, y0) = split_by(y, z);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    debug_assert_eq!((y1.len(), y0.len()), (m.n1, m.n0));
    Ok((mean(&y1) - mean(&y0)) / fs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdfKind {
    Raw,
    Monotonized,
}

/// A step function evaluated on ascending support points.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    pub support: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub kind: CdfKind,
}

impl EmpiricalCdf {
    /// Clamp into [0, 1] and take the running maximum. A final value within
    /// 1e−9 of one is set to exactly one.
    pub fn monotonize(&self) -> EmpiricalCdf {
        let mut running = 0.0f64;
        let mut probabilities: Vec<f64> = self
            .probabilities
            .iter()
            .map(|p| {
                running = running.max(p.clamp(0.0, 1.0));
                running
            })
            .collect();
        if let Some(last) = probabilities.last_mut() {
            if *last >= 1.0 - 1e-9 {
                *last = 1.0;
            }
        }
        EmpiricalCdf {
            support: self.support.clone(),
            probabilities,
            kind: CdfKind::Monotonized,
        }
    }

    /// Smallest support point whose probability reaches `tau`, if any.
    pub fn quantile(&self, tau: f64) -> Option<f64> {
        self.probabilities
            .iter()
            .position(|&p| p >= tau)
            .map(|i| self.support[i])
    }

    pub fn max_probability(&self) -> f64 {
        self.probabilities.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Raw and monotonized complier outcome distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplierCdfs {
    pub treated_raw: EmpiricalCdf,
    pub untreated_raw: EmpiricalCdf,
    pub treated: EmpiricalCdf,
    pub untreated: EmpiricalCdf,
    pub first_stage: f64,
}

/// Sorted distinct values.
pub fn distinct_grid(y: &[f64]) -> Vec<f64> {
    let mut g = sorted_copy(y);
    g.dedup();
    g
}

/// Complier CDFs on `grid` (default: the distinct outcome values):
///
/// ```text
/// F1(y) = [Ē(1{Y≤y}·D | Z=1) − Ē(1{Y≤y}·D | Z=0)] / [Ē(D|Z=1) − Ē(D|Z=0)]
/// F0(y) = [Ē(1{Y≤y}·(1−D) | Z=1) − Ē(1{Y≤y}·(1−D) | Z=0)] / [Ē(1−D|Z=1) − Ē(1−D|Z=0)]
/// ```
pub fn complier_cdfs(y: &[f64], d: &[u8], z: &[u8], grid: Option<&[f64]>) -> Result<ComplierCdfs> {
    validate_iv(y, d, z)?;
    let m = InstrumentMoments::new(d, z)?;
    let fs = m.relevant()?;
    let untreated_z1 = d.iter().zip(z).filter(|(&di, &zi)| di == 0 && zi == 1).count();
    let untreated_z0 = d.iter().zip(z).filter(|(&di, &zi)| di == 0 && zi == 0).count();
    let fs_untreated = untreated_z1 as f64 / m.n1 as f64 - untreated_z0 as f64 / m.n0 as f64;
    if fs_untreated == 0.0 {
        return Err(TreatmentError::ZeroUntreatedDenominator);
    }

    let grid = match grid {
        None => distinct_grid(y),
        Some(g) => {
            let max_y = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if g.is_empty() || g.windows(2).any(|w| w[1] <= w[0]) || *g.last().unwrap() < max_y {
                return Err(TreatmentError::BadGrid { max_y });
            }
            g.to_vec()
        }
    };

    // Sweep the grid over the outcomes in ascending order, counting
    // (d, z) cells at or below each grid point.
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut counts = [[0usize; 2]; 2]; // counts[d][z]
    let mut next = 0;
    let (n1, n0) = (m.n1 as f64, m.n0 as f64);
    let mut treated = Vec::with_capacity(grid.len());
    let mut untreated = Vec::with_capacity(grid.len());
    for &g in &grid {
        while next < order.len() && y[order[next]] <= g {
            let i = order[next];
            counts[d[i] as usize][z[i] as usize] += 1;
            next += 1;
        }
        let t1 = counts[1][1] as f64 / n1 - counts[1][0] as f64 / n0;
        let t0 = counts[0][1] as f64 / n1 - counts[0][0] as f64 / n0;
        treated.push(t1 / fs);
        untreated.push(t0 / fs_untreated);
    }
    let raw = |probabilities| EmpiricalCdf {
        support: grid.clone(),
        probabilities,
        kind: CdfKind::Raw,
    };
    let treated_raw = raw(treated);
    let untreated_raw = raw(untreated);
    Ok(ComplierCdfs {
        treated: treated_raw.monotonize(),
        untreated: untreated_raw.monotonize(),
        treated_raw,
        untreated_raw,
        first_stage: fs,
    })
}

/// `Δᶜ(τ) = Qᶜ_{Y1}(τ) − Qᶜ_{Y0}(τ)` by inverting the monotonized complier
/// CDFs on the distinct outcome values.
pub fn lqte(y: &[f64], d: &[u8], z: &[u8], taus: &[f64]) -> Result<TreatmentResult> {
    for &t in taus {
        validate_tau(t)?;
    }
    let cdfs = complier_cdfs(y, d, z, None)?;
    let invert = |cdf: &EmpiricalCdf, which: &'static str| -> Result<Vec<f64>> {
        taus.iter()
            .map(|&tau| {
                cdf.quantile(tau).ok_or(TreatmentError::TauAboveCdf {
                    tau,
                    which,
                    max: cdf.max_probability(),
                })
            })
            .collect()
    };
    let q1 = invert(&cdfs.treated, "treated")?;
    let q0 = invert(&cdfs.untreated, "untreated")?;
    Ok(TreatmentResult::from_quantiles(taus, q1, q0, Some(cdfs.first_stage)))
}

/// Normal-based bootstrap band around per-quantile effects.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentBand {
    pub level: f64,
    pub std_errors: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub replications: usize,
    pub failed: usize,
    pub seed: u64,
}

/// Pairs bootstrap of [`qte`] (no instrument) or [`lqte`] (with instrument).
///
/// Rows are resampled with replacement on the counter-based stream
/// `(seed, r)`. Replications whose estimator fails (e.g. an empty group) are
/// dropped and counted; more than 10% failures is an error. The band is
/// `effect ± z·sd(bootstrap effects)`.
pub fn bootstrap_treatment(
    y: &[f64],
    d: &[u8],
    z: Option<&[u8]>,
    taus: &[f64],
    spec: BootstrapSpec,
    level: f64,
) -> Result<TreatmentResult> {
    let crit = critical_value(level).map_err(|_| TreatmentError::InvalidLevel(level))?;
    if spec.replications < MIN_BOOTSTRAP_REPLICATIONS {
        return Err(TreatmentError::TooFewReplications {
            got: spec.replications,
            min: MIN_BOOTSTRAP_REPLICATIONS,
        });
    }
    let estimate = |y: &[f64], d: &[u8], z: Option<&[u8]>| match z {
        Some(z) => lqte(y, d, z, taus),
        None => qte(y, d, taus),
    };
    let mut result = estimate(y, d, z)?;
    let n = y.len();
    let draws: Vec<Option<Vec<f64>>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(spec.seed, r as u64);
            let rows = pairs_indices(&mut rng, n);
            let yb: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let db: Vec<u8> = rows.iter().map(|&i| d[i]).collect();
            let zb: Option<Vec<u8>> = z.map(|z| rows.iter().map(|&i| z[i]).collect());
            estimate(&yb, &db, zb.as_deref()).ok().map(|r| r.effects)
        })
        .collect();
    let failed = draws.iter().filter(|d| d.is_none()).count();
    if failed * 10 > spec.replications {
        return Err(TreatmentError::TooManyFailures {
            failed,
            total: spec.replications,
        });
    }
    let draws: Vec<Vec<f64>> = draws.into_iter().flatten().collect();
    let b = draws.len() as f64;
    let std_errors: Vec<f64> = (0..taus.len())
        .map(|j| {
            let mean = draws.iter().map(|d| d[j]).sum::<f64>() / b;
            let var = draws.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (b - 1.0).max(1.0);
            var.sqrt()
        })
        .collect();
    result.band = Some(TreatmentBand {
        level,
        lower: result.effects.iter().zip(&std_errors).map(|(e, s)| e - crit * s).collect(),
        upper: result.effects.iter().zip(&std_errors).map(|(e, s)| e + crit * s).collect(),
        std_errors,
        replications: draws.len(),
        failed,
        seed: spec.seed,
    });
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_quantile_definition() {
        let s = [40.0, 10.0, 30.0, 20.0];
        assert_eq!(empirical_quantile(&s, 0.5).unwrap(), 20.0);
        assert_eq!(empirical_quantile(&s, 0.51).unwrap(), 30.0);
        assert_eq!(empirical_quantile(&[7.0], 0.01).unwrap(), 7.0);
        assert_eq!(empirical_quantile(&[7.0], 0.99).unwrap(), 7.0);
        assert_eq!(empirical_quantile(&[], 0.5), Err(TreatmentError::EmptySample));
    }

    #[test]
    fn qte_worked_example() {
        let y = [2.0, 4.0, 6.0, 8.0, 1.0, 2.0, 3.0, 4.0];
        let d = [1, 1, 1, 1, 0, 0, 0, 0];
        let r = qte(&y, &d, &[0.5]).unwrap();
        assert_eq!((r.q1[0], r.q0[0], r.effects[0]), (4.0, 2.0, 2.0));
    }

    #[test]
    fn qte_identity_and_shift() {
        let base = [3.1, 0.4, 2.2, 5.9, 1.7, 4.4];
        let y: Vec<f64> = base.iter().chain(base.iter()).copied().collect();
        let d = [1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0];
        let taus = [0.1, 0.3, 0.5, 0.7, 0.9];
        assert!(qte(&y, &d, &taus).unwrap().effects.iter().all(|&e| e == 0.0));
        let shifted: Vec<f64> = y.iter().zip(&d).map(|(v, &di)| if di == 1 { v + 2.5 } else { *v }).collect();
        let r = qte(&shifted, &d, &taus).unwrap();
        for (e, (a, b)) in r.effects.iter().zip(r.q1.iter().zip(&r.q0)) {
            assert_eq!(*e, a - b);
        }
    }

    #[test]
    fn qte_errors() {
        assert!(matches!(
            qte(&[1.0, 2.0], &[1, 1], &[0.5]),
            Err(TreatmentError::EmptyGroup { value: 0, .. })
        ));
        assert!(matches!(qte(&[1.0, 2.0], &[1, 2], &[0.5]), Err(TreatmentError::NotBinary { .. })));
    }

    #[test]
    fn wald_examples() {
        // Perfect compliance: difference in means 5 − 3.
        let y = [4.0, 6.0, 2.0, 4.0];
        let z = [1, 1, 0, 0];
        assert_eq!(late_wald(&y, &z, &z).unwrap(), 2.0);
        // No reduced-form effect.
        assert_eq!(late_wald(&[1.0, 3.0, 3.0, 1.0], &[1, 1, 1, 0], &[1, 1, 0, 0]).unwrap(), 0.0);
        // ȳ 6 vs 4, d̄ 0.8 vs 0.3 (ten rows per arm).
        let mut y = vec![6.0; 10];
        y.extend(vec![4.0; 10]);
        let mut d = vec![1, 1, 1, 1, 1, 1, 1, 1, 0, 0];
        d.extend([1, 1, 1, 0, 0, 0, 0, 0, 0, 0]);
        let mut z = vec![1; 10];
        z.extend(vec![0; 10]);
        assert!((late_wald(&y, &d, &z).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn irrelevant_instrument() {
        let err = late_wald(&[1.0, 2.0, 3.0, 4.0], &[1, 0, 1, 0], &[1, 1, 0, 0]).unwrap_err();
        assert_eq!(err, TreatmentError::Irrelevant { first_stage: 0.0 });
        assert!(lqte(&[1.0, 2.0, 3.0, 4.0], &[1, 0, 1, 0], &[1, 1, 0, 0], &[0.5]).is_err());
    }

    #[test]
    fn perfect_compliance_cdfs_are_group_ecdfs() {
        let y = [3.0, 1.0, 4.0, 1.5, 5.0, 9.0, 2.0, 6.0];
        let z = [1, 1, 1, 1, 0, 0, 0, 0];
        let c = complier_cdfs(&y, &z, &z, None).unwrap();
        for (g, (p1, p0)) in c
            .treated_raw
            .support
            .iter()
            .zip(c.treated_raw.probabilities.iter().zip(&c.untreated_raw.probabilities))
        {
            let e1 = y[..4].iter().filter(|v| *v <= g).count() as f64 / 4.0;
            let e0 = y[4..].iter().filter(|v| *v <= g).count() as f64 / 4.0;
            assert_eq!((*p1, *p0), (e1, e0));
        }
        let below = complier_cdfs(&y, &z, &z, Some(&[0.0, 9.0])).unwrap();
        assert_eq!(below.treated_raw.probabilities[0], 0.0);
        assert_eq!(below.untreated_raw.probabilities[0], 0.0);
        assert!(complier_cdfs(&y, &z, &z, Some(&[0.0, 5.0])).is_err());
    }

    #[test]
    fn monotonize_clamps_and_accumulates() {
        let cdf = EmpiricalCdf {
            support: vec![1.0, 2.0, 3.0, 4.0],
            probabilities: vec![-0.2, 0.6, 0.4, 1.0000000001],
            kind: CdfKind::Raw,
        };
        let m = cdf.monotonize();
        assert_eq!(m.probabilities, vec![0.0, 0.6, 0.6, 1.0]);
        assert_eq!(m.quantile(0.5), Some(2.0));
        assert_eq!(m.kind, CdfKind::Monotonized);
    }
}
