//! Exterior-point exchange solver for the check-loss linear programme.
//!
//! State is a basis `h` of K observations with nonsingular `X_h`, so that
//! `β = X_h⁻¹ y_h` interpolates them, plus a side (`u` or `v`) for every
//! other observation whose residual is zero. Each pivot frees one basic
//! observation in the direction with the most negative reduced cost and runs
//! an exact line search over the residual sign changes (several breakpoints
//! may be crossed in one pivot). When pivots stop making progress the solver
//! switches to Bland's smallest-index rule with single-breakpoint steps,
//! which is the textbook simplex method and cannot cycle.

use nalgebra::{DMatrix, DVector};

use super::{FitError, SolverOptions};

pub(crate) struct Solution {
    pub beta: Vec<f64>,
    pub basis: Vec<usize>,
    pub iterations: usize,
}

/// Row-major copy of the design for cache-friendly row access.
struct Rows {
    data: Vec<f64>,
    k: usize,
}

impl Rows {
    fn new(x: &DMatrix<f64>) -> Self {
        let (n, k) = x.shape();
        let mut data = Vec::with_capacity(n * k);
        for i in 0..n {
            for j in 0..k {
                data.push(x[(i, j)]);
            }
        }
        Self { data, k }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    fn dot(&self, i: usize, v: &[f64]) -> f64 {
        self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

pub(crate) fn solve(
    x: &DMatrix<f64>,
    y: &[f64],
    tau: f64,
    opts: &SolverOptions,
) -> Result<Solution, FitError> {
    let (n, k) = x.shape();
    let rows = Rows::new(x);
    let max_iter = opts.max_iterations.unwrap_or(50 * (n + k) + 1000);
    let zero_tol: Vec<f64> = y.iter().map(|v| opts.zero_tol * (1.0 + v.abs())).collect();

    let mut basis = initial_basis(x, y, tau, &rows)?;
    let mut in_basis = vec![false; n];
    for &i in &basis {
        in_basis[i] = true;
    }
    // true: observation sits on the `u` (nonnegative residual) side.
    let mut upper = vec![true; n];
    let mut bland = false;
    let mut stalled = 0usize;
    let stall_limit = 5 * k + 20;

    let mut r = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut breakpoints: Vec<(f64, usize, usize)> = Vec::with_capacity(n);

    for iteration in 0..max_iter {
        let xh = DMatrix::from_fn(k, k, |i, j| rows.row(basis[i])[j]);
        let inv = xh.try_inverse().ok_or(FitError::RankDeficient)?;
        let yh = DVector::from_iterator(k, basis.iter().map(|&i| y[i]));
        let beta = &inv * yh;

        let mut g = DVector::<f64>::zeros(k);
        for i in 0..n {
            if in_basis[i] {
                r[i] = 0.0;
                continue;
            }
            let ri = y[i] - rows.dot(i, beta.as_slice());
            r[i] = ri;
            if ri > zero_tol[i] {
                upper[i] = true;
            } else if ri < -zero_tol[i] {
                upper[i] = false;
            }
            let w = if upper[i] { tau } else { tau - 1.0 };
            for (gj, xij) in g.iter_mut().zip(rows.row(i)) {
                *gj += w * xij;
            }
        }
        let z = inv.transpose() * &g;

        // Reduced cost of freeing basis slot j upwards (+) or downwards (−).
        let mut entering: Option<(usize, f64, f64)> = None;
        for j in 0..k {
            for (sigma, rc) in [(1.0, tau + z[j]), (-1.0, (1.0 - tau) - z[j])] {
                if rc >= -opts.optimality_tol {
                    continue;
                }
                let better = match entering {
                    None => true,
                    Some((bj, bsigma, brc)) => {
                        if bland {
                            var_index(basis[j], sigma > 0.0, n) < var_index(basis[bj], bsigma > 0.0, n)
                        } else {
                            rc < brc
                        }
                    }
                };
                if better {
                    entering = Some((j, sigma, rc));
                }
            }
        }
        let Some((slot, sigma, rc)) = entering else {
            return Ok(Solution {
                beta: beta.as_slice().to_vec(),
                basis,
                iterations: iteration,
            });
        };

        // β moves along δ = −σ·X_h⁻¹ e_slot; the freed residual grows as σ·t.
        let delta: Vec<f64> = inv.column(slot).iter().map(|v| -sigma * v).collect();
        let delta_norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        breakpoints.clear();
        for i in 0..n {
            if in_basis[i] {
                continue;
            }
            let ai = -rows.dot(i, &delta);
            a[i] = ai;
            let scale = rows.row(i).iter().map(|v| v.abs()).fold(0.0, f64::max) * delta_norm;
            if ai.abs() <= 1e-11 * scale.max(f64::MIN_POSITIVE) {
                continue;
            }
            let crosses = (upper[i] && ai < 0.0) || (!upper[i] && ai > 0.0);
            if !crosses {
                continue;
            }
            let t = if r[i].abs() <= zero_tol[i] {
                0.0
            } else {
                (-r[i] / ai).max(0.0)
            };
            breakpoints.push((t, var_index(i, upper[i], n), i));
        }
        if breakpoints.is_empty() {
            return Err(FitError::RankDeficient);
        }
        breakpoints.sort_unstable_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));

        let mut slope = rc;
        let mut stop = None;
        for (pos, &(_, _, i)) in breakpoints.iter().enumerate() {
            slope += a[i].abs();
            if bland || slope >= 0.0 {
                stop = Some(pos);
                break;
            }
        }
        let Some(stop) = stop else {
            return Err(FitError::RankDeficient);
        };
        for &(_, _, i) in &breakpoints[..stop] {
            upper[i] = !upper[i];
        }
        let (step, _, enter) = breakpoints[stop];

        let leave = basis[slot];
        in_basis[leave] = false;
        upper[leave] = sigma > 0.0;
        in_basis[enter] = true;
        basis[slot] = enter;

        if step * delta_norm <= 1e-14 * (1.0 + beta.amax()) {
            stalled += 1;
            if stalled > stall_limit {
                bland = true;
            }
        } else {
            stalled = 0;
            bland = false;
        }
    }
    Err(FitError::NotConverged { iterations: max_iter })
}

/// Position of a slack variable in Bland's ordering: `u_1..u_n, v_1..v_n`.
fn var_index(obs: usize, upper: bool, n: usize) -> usize {
    if upper {
        obs
    } else {
        n + obs
    }
}

/// K linearly independent observations closest to a quantile-shifted
/// least-squares fit, chosen greedily.
fn initial_basis(x: &DMatrix<f64>, y: &[f64], tau: f64, rows: &Rows) -> Result<Vec<usize>, FitError> {
    let (n, k) = x.shape();
    let yv = DVector::from_column_slice(y);
    let start = x
        .clone()
        .svd(true, true)
        .solve(&yv, 1e-12)
        .map(|b| &yv - x * b)
        .unwrap_or_else(|_| yv.clone());
    let sorted = crate::stats::sorted_copy(start.as_slice());
    let shift = crate::stats::quantile_sorted(&sorted, tau);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        (start[i] - shift)
            .abs()
            .total_cmp(&(start[j] - shift).abs())
            .then(i.cmp(&j))
    });

    let mut chosen = Vec::with_capacity(k);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(k);
    for i in order {
        let row = DVector::from_column_slice(rows.row(i));
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = row;
        for _ in 0..2 {
            for q in &ortho {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let rest = v.norm();
        if rest > 1e-8 * norm {
            ortho.push(v / rest);
            chosen.push(i);
            if chosen.len() == k {
                return Ok(chosen);
            }
        }
    }
    Err(FitError::RankDeficient)
}
