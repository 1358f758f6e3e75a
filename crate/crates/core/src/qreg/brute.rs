use nalgebra::{DMatrix, DVector};

use super::{check_loss_unchecked, validate_problem, validate_tau, FitError, QuantileFit, SolverOptions};

pub const BRUTE_FORCE_MAX_N: usize = 14;
pub const BRUTE_FORCE_MAX_K: usize = 3;

/// Exhaustive search over all basic solutions: every K-subset of
/// observations with a nonsingular design block is interpolated exactly and
/// scored. A check-loss minimum is always attained at such a vertex, so the
/// best subset is a global minimiser.
///
/// Only meant as a verification oracle for tiny problems.
pub fn brute_force_fit(x: &DMatrix<f64>, y: &[f64], tau: f64) -> Result<QuantileFit, FitError> {
    validate_tau(tau)?;
    validate_problem(x, y)?;
    let (n, k) = x.shape();
    if n > BRUTE_FORCE_MAX_N || k > BRUTE_FORCE_MAX_K {
        return Err(FitError::TooLarge {
            n,
            k,
            max_n: BRUTE_FORCE_MAX_N,
            max_k: BRUTE_FORCE_MAX_K,
        });
    }

    let mut best: Option<(f64, Vec<f64>, Vec<usize>)> = None;
    let mut visited = 0usize;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        visited += 1;
        let block = x.select_rows(&subset);
        let scale = block.amax().powi(k as i32);
        let det = block.determinant();
        if det.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            let rhs = DVector::from_iterator(k, subset.iter().map(|&i| y[i]));
            if let Some(beta) = block.lu().solve(&rhs) {
                let r: Vec<f64> = (0..n)
                    .map(|i| y[i] - (0..k).map(|j| x[(i, j)] * beta[j]).sum::<f64>())
                    .collect();
                let obj = check_loss_unchecked(&r, tau);
                if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
                    best = Some((obj, beta.as_slice().to_vec(), subset.clone()));
                }
            }
        }
        if !next_combination(&mut subset, n) {
            break;
        }
    }
    let (_, beta, basis) = best.ok_or(FitError::AllSubsetsSingular(k))?;
    Ok(QuantileFit::from_beta(
        x,
        y,
        tau,
        beta,
        basis,
        visited,
        SolverOptions::default().zero_tol,
    ))
}

/// Advance `c` to the next K-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
