use nalgebra::{DMatrix, DVector};

use super::QuantileFit;

/// Independent optimality checks for a returned fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Largest `|Σ ψ_τ(r_i) x_ik| − Σ_{r_i = 0} |x_ik|` over columns, scaled
    /// by the column's L1 norm. Non-positive (up to rounding) at an optimum.
    pub subgradient_excess: f64,
    pub n_negative: usize,
    pub n_zero: usize,
    /// `N⁻ ≤ nτ ≤ N⁻ + N⁰`; only defined when the constant vector lies in
    /// the column span of the design.
    pub counting: Option<bool>,
    /// `|objective − check_loss(residuals)|` relative to the objective.
    pub objective_mismatch: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.subgradient_excess <= 1e-9 && self.counting != Some(false) && self.objective_mismatch <= 1e-10
    }
}

/// Recompute residuals from `fit.beta` and test first-order optimality and
/// the counting property. Zero residuals use `|r| <= zero_tol·(1 + |y|)`.
pub fn certify(x: &DMatrix<f64>, y: &[f64], fit: &QuantileFit, zero_tol: f64) -> Certificate {
    let (n, k) = x.shape();
    let tau = fit.tau;
    let r: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..k).map(|j| x[(i, j)] * fit.beta[j]).sum::<f64>())
        .collect();
    let is_zero: Vec<bool> = r
        .iter()
        .zip(y)
        .map(|(ri, yi)| ri.abs() <= zero_tol * (1.0 + yi.abs()))
        .collect();
    let n_zero = is_zero.iter().filter(|z| **z).count();
    let n_negative = r.iter().zip(&is_zero).filter(|(ri, z)| !**z && **ri < 0.0).count();

    let mut excess = f64::NEG_INFINITY;
    for j in 0..k {
        let mut score = 0.0;
        let mut slack = 0.0;
        let mut l1 = 0.0;
        for i in 0..n {
            let xij = x[(i, j)];
            l1 += xij.abs();
            let psi = if is_zero[i] || r[i] >= 0.0 { tau } else { tau - 1.0 };
            score += psi * xij;
            if is_zero[i] {
                slack += xij.abs();
            }
        }
        if l1 > 0.0 {
            excess = excess.max((score.abs() - slack) / l1);
        }
    }

    let ones = DVector::from_element(n, 1.0);
    let spans_constant = x
        .clone()
        .svd(true, true)
        .solve(&ones, 1e-12)
        .map(|c| (x * c - &ones).amax() <= 1e-8)
        .unwrap_or(false);
    let counting = spans_constant.then(|| {
        let nt = n as f64 * tau;
        let eps = 1e-9 * n as f64;
        n_negative as f64 <= nt + eps && nt <= (n_negative + n_zero) as f64 + eps
    });

    let direct: f64 = r
        .iter()
        .map(|&ri| if ri >= 0.0 { tau * ri } else { (tau - 1.0) * ri })
        .sum();
    let objective_mismatch = (fit.objective - direct).abs() / fit.objective.abs().max(1e-300).max(direct.abs());
    let objective_mismatch = if fit.objective == direct { 0.0 } else { objective_mismatch };

    Certificate {
        subgradient_excess: excess,
        n_negative,
        n_zero,
        counting,
        objective_mismatch,
    }
}
