//! Dense two-phase simplex for linear programs over the unit box:
//!
//! maximize `c' beta` subject to `E beta = f` and `beta in [-1, 1]^m`.
//!
//! Every set query on a constrained zonotope (emptiness, membership, segment
//! occlusion, support functions for vertex enumeration) reduces to this form.
//! Problems are small (tens of variables), so a dense tableau with Dantzig
//! pricing and a Bland fallback is plenty.

use nalgebra::{DMatrix, DVector};

/// Result of a box LP solve.
#[derive(Debug, Clone)]
pub enum LpResult {
    /// No `beta` satisfies the constraints; `residual` is the smallest
    /// attainable normalized constraint violation.
    Infeasible { residual: f64 },
    /// An optimal solution. `value` is the objective `c' beta`.
    Optimal { beta: DVector<f64>, value: f64 },
}

impl LpResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpResult::Optimal { .. })
    }

    pub fn beta(&self) -> Option<&DVector<f64>> {
        match self {
            LpResult::Optimal { beta, .. } => Some(beta),
            LpResult::Infeasible { .. } => None,
        }
    }
}

const COST_EPS: f64 = 1e-10;
/// Minimum pivot magnitude admitted by the ratio test. Rows are normalized to
/// unit scale, so anything smaller is degenerate noise: pivoting on it would
/// amplify row roundoff by its reciprocal and wreck feasibility.
const RATIO_EPS: f64 = 1e-8;
/// Bound violation accepted on the refined basic solution before the basis is
/// declared broken and the solve retried.
const BASIS_TOL: f64 = 1e-7;

/// Solve `max c' beta` s.t. `E beta = f`, `-1 <= beta <= 1`.
///
/// With `objective = None` this is a pure feasibility check. `feas_tol` is the
/// allowed residual on the (row-normalized) equality constraints; `1e-9` is
/// the conventional choice throughout the crate.
///
/// The final basic solution is always re-solved from the original constraint
/// data; if that reveals an infeasible basis (the pivot sequence went astray
/// on a degenerate tableau), the whole solve is retried once with Bland's
/// rule, whose cautious pivots trade speed for exactness.
pub fn solve_box_lp(
    objective: Option<&DVector<f64>>,
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    feas_tol: f64,
) -> LpResult {
    match solve_box_lp_once(objective, e, f, feas_tol, false) {
        Ok(res) => res,
        Err(first) => match solve_box_lp_once(objective, e, f, feas_tol, true) {
            Ok(res) => res,
            Err(second) => {
                log::warn!("simplex basis still infeasible after Bland retry");
                second.or(first).unwrap_or(LpResult::Infeasible { residual: f64::INFINITY })
            }
        },
    }
}

/// One full two-phase solve. `Err` carries a best-effort result when the
/// verified basic solution was out of bounds and the caller should retry.
fn solve_box_lp_once(
    objective: Option<&DVector<f64>>,
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    feas_tol: f64,
    bland_only: bool,
) -> Result<LpResult, Option<LpResult>> {
    let p = e.nrows();
    let m = e.ncols();
    debug_assert_eq!(f.len(), p);

    if m == 0 {
        // Only the empty beta; feasible iff f ~ 0 row by row.
        let mut residual = 0.0f64;
        for i in 0..p {
            residual += f[i].abs();
        }
        if residual <= feas_tol.max(1e-12) {
            return Ok(LpResult::Optimal {
                beta: DVector::zeros(0),
                value: 0.0,
            });
        }
        return Ok(LpResult::Infeasible { residual });
    }

    // Shift to x = beta + 1 in [0, 2]; standard form with slack rows x + s = 2.
    // Columns: x (m), s (m), artificials (p). Rows: p equality + m bounds.
    let rows = p + m;
    let cols = 2 * m + p + 1; // last column is the RHS
    let rhs = cols - 1;
    let mut t = vec![vec![0.0f64; cols]; rows];
    let mut basis = vec![0usize; rows];
    // Keep the normalized equality rows: the final basic solution is re-solved
    // against them, since tableau updates drift over many pivots.
    let mut en = DMatrix::<f64>::zeros(p, m);
    let mut fn_ = DVector::<f64>::zeros(p);

    for r in 0..p {
        // Normalize so feas_tol is meaningful across scales.
        let mut fp = f[r];
        for j in 0..m {
            fp += e[(r, j)];
        }
        let mut scale = fp.abs();
        for j in 0..m {
            scale = scale.max(e[(r, j)].abs());
        }
        let inv = if scale > 0.0 { 1.0 / scale } else { 1.0 };
        let sign = if fp * inv < 0.0 { -1.0 } else { 1.0 };
        for j in 0..m {
            t[r][j] = e[(r, j)] * inv * sign;
            en[(r, j)] = t[r][j];
        }
        t[r][2 * m + r] = 1.0;
        t[r][rhs] = fp * inv * sign;
        fn_[r] = t[r][rhs];
        basis[r] = 2 * m + r;
    }
    for i in 0..m {
        let r = p + i;
        t[r][i] = 1.0;
        t[r][m + i] = 1.0;
        t[r][rhs] = 2.0;
        basis[r] = m + i;
    }

    // Phase 1: maximize -(sum of artificials).
    let mut cost = vec![0.0f64; cols - 1];
    for j in 2 * m..2 * m + p {
        cost[j] = -1.0;
    }
    let num_art = p;
    run_simplex(&mut t, &mut basis, &cost, rows, cols, usize::MAX, bland_only);

    let mut residual = 0.0f64;
    for r in 0..rows {
        if basis[r] >= 2 * m {
            residual += t[r][rhs].max(0.0);
        }
    }
    if residual > feas_tol.max(1e-12) {
        // A clear-cut residual is a trustworthy "empty"; a borderline one on
        // the fast path may be tableau drift, so ask for the Bland retry.
        if residual < 1e-3 && !bland_only {
            return Err(Some(LpResult::Infeasible { residual }));
        }
        return Ok(LpResult::Infeasible { residual });
    }

    // Drive any basic artificials (at zero level) out of the basis so phase 2
    // pivots cannot reintroduce constraint violations.
    for r in 0..rows {
        if basis[r] >= 2 * m {
            // Pivot on the largest structural coefficient for stability; a
            // row whose coefficients are all (near) zero is redundant, and
            // pivoting on a tiny entry there would blow its roundoff-level
            // RHS up into a real infeasibility.
            let mut best_j = None;
            let mut best_mag = 1e-9;
            for j in 0..2 * m {
                if t[r][j].abs() > best_mag {
                    best_mag = t[r][j].abs();
                    best_j = Some(j);
                }
            }
            let Some(j) = best_j else {
                // Row is vacuous (all structural coefficients zero).
                continue;
            };
            let piv = t[r][j];
            for v in t[r].iter_mut() {
                *v /= piv;
            }
            let row = t[r].clone();
            for (rr, trr) in t.iter_mut().enumerate() {
                if rr != r {
                    let f = trr[j];
                    if f != 0.0 {
                        for jj in 0..cols {
                            trr[jj] -= f * row[jj];
                        }
                    }
                }
            }
            basis[r] = j;
        }
    }

    // Phase 2: artificials may no longer enter.
    if let Some(c) = objective {
        let mut cost2 = vec![0.0f64; cols - 1];
        for j in 0..m {
            cost2[j] = c[j];
        }
        let ban_from = cols - 1 - num_art;
        run_simplex(&mut t, &mut basis, &cost2, rows, cols, ban_from, bland_only);
    }

    // Iterative-refinement step: re-solve the basic system from the original
    // normalized data (nonbasic variables sit at zero), discarding whatever
    // roundoff the pivot sequence accumulated in the tableau. An out-of-bounds
    // or artificial-carrying refined solution means the basis itself is bad.
    let mut beta = DVector::<f64>::from_element(m, -1.0);
    match refine_basic_solution(&basis, &en, &fn_, m, p) {
        Some(x) => {
            let mut art = 0.0f64;
            let mut viol = 0.0f64;
            for r in 0..rows {
                if basis[r] >= 2 * m {
                    art += x[r].abs();
                } else {
                    viol = viol.max(-x[r]).max(x[r] - 2.0);
                }
            }
            if art > feas_tol.max(1e-9) {
                let res = LpResult::Infeasible { residual: art };
                if bland_only {
                    return Ok(res);
                }
                return Err(Some(res));
            }
            for r in 0..rows {
                if basis[r] < m {
                    beta[basis[r]] = (x[r] - 1.0).clamp(-1.0, 1.0);
                }
            }
            let value = objective.map_or(0.0, |c| c.dot(&beta));
            let res = LpResult::Optimal { beta, value };
            if viol > BASIS_TOL {
                return Err(Some(res));
            }
            Ok(res)
        }
        None => {
            // Singular basis matrix: fall back to the tableau values, but only
            // trust them on the careful path.
            for r in 0..rows {
                if basis[r] < m {
                    beta[basis[r]] = (t[r][rhs] - 1.0).clamp(-1.0, 1.0);
                }
            }
            let value = objective.map_or(0.0, |c| c.dot(&beta));
            let res = LpResult::Optimal { beta, value };
            if bland_only {
                Ok(res)
            } else {
                Err(Some(res))
            }
        }
    }
}

/// Solve the square basic system `B x_B = rhs` built from the original
/// normalized constraint columns; returns per-row basic values, or `None` if
/// the basis matrix is numerically singular.
fn refine_basic_solution(
    basis: &[usize],
    en: &DMatrix<f64>,
    fn_: &DVector<f64>,
    m: usize,
    p: usize,
) -> Option<DVector<f64>> {
    let rows = p + m;
    let mut b = DMatrix::<f64>::zeros(rows, rows);
    for (k, &col) in basis.iter().enumerate() {
        if col < m {
            for r in 0..p {
                b[(r, k)] = en[(r, col)];
            }
            b[(p + col, k)] = 1.0;
        } else if col < 2 * m {
            b[(p + (col - m), k)] = 1.0;
        } else {
            b[(col - 2 * m, k)] = 1.0;
        }
    }
    let mut rhs = DVector::<f64>::zeros(rows);
    for r in 0..p {
        rhs[r] = fn_[r];
    }
    for r in p..rows {
        rhs[r] = 2.0;
    }
    let lu = b.full_piv_lu();
    let x = lu.solve(&rhs)?;
    if !x.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(x)
}

/// Tableau simplex loop: Dantzig pricing with a Bland fallback after an
/// iteration budget, which rules out cycling on degenerate bases.
fn run_simplex(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    rows: usize,
    cols: usize,
    ban_from: usize,
    bland_only: bool,
) {
    let rhs = cols - 1;
    // Reduced-cost row for the current basis.
    let mut obj = cost.to_vec();
    for r in 0..rows {
        let cb = cost[basis[r]];
        if cb != 0.0 {
            for j in 0..cols - 1 {
                obj[j] -= cb * t[r][j];
            }
        }
    }

    let dantzig_budget = if bland_only { 0 } else { 50 * (rows + cols) };
    let hard_cap = 2000 * (rows + cols);
    let mut iter = 0usize;
    loop {
        iter += 1;
        if iter > hard_cap {
            log::warn!("simplex iteration cap reached; returning current basis");
            return;
        }
        let bland = iter > dantzig_budget;

        // Entering column.
        let mut enter = None;
        if bland {
            for j in 0..cols - 1 {
                if j >= ban_from {
                    continue;
                }
                if obj[j] > COST_EPS {
                    enter = Some(j);
                    break;
                }
            }
        } else {
            let mut best = COST_EPS;
            for j in 0..cols - 1 {
                if j >= ban_from {
                    continue;
                }
                if obj[j] > best {
                    best = obj[j];
                    enter = Some(j);
                }
            }
        }
        let Some(j) = enter else { return };

        // Ratio test.
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..rows {
            let a = t[r][j];
            if a > RATIO_EPS {
                // Clamp roundoff-negative basic values so a slightly
                // infeasible row cannot win the ratio test with a negative
                // ratio and drag the basis further out of feasibility.
                let ratio = t[r][rhs].max(0.0) / a;
                let better = ratio < best_ratio - 1e-12
                    || (ratio < best_ratio + 1e-12
                        && leave.is_some_and(|l| basis[r] < basis[l]));
                if better {
                    best_ratio = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(r) = leave else {
            // Unbounded direction cannot occur for box-bounded problems;
            // treat as numerically stalled.
            log::warn!("simplex found no leaving row; returning current basis");
            return;
        };

        // Pivot on (r, j).
        let piv = t[r][j];
        for v in t[r].iter_mut() {
            *v /= piv;
        }
        let row = t[r].clone();
        for (rr, trr) in t.iter_mut().enumerate() {
            if rr != r {
                let f = trr[j];
                if f != 0.0 {
                    for jj in 0..cols {
                        trr[jj] -= f * row[jj];
                    }
                }
            }
        }
        let f = obj[j];
        if f != 0.0 {
            for jj in 0..cols - 1 {
                obj[jj] -= f * row[jj];
            }
        }
        basis[r] = j;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unconstrained_box_support() {
        // max beta1 + 2 beta2 over the box -> (1, 1), value 3.
        let e = DMatrix::<f64>::zeros(0, 2);
        let f = DVector::<f64>::zeros(0);
        let c = DVector::from_row_slice(&[1.0, 2.0]);
        match solve_box_lp(Some(&c), &e, &f, 1e-9) {
            LpResult::Optimal { beta, value } => {
                assert_relative_eq!(value, 3.0, epsilon = 1e-9);
                assert_relative_eq!(beta[0], 1.0, epsilon = 1e-9);
                assert_relative_eq!(beta[1], 1.0, epsilon = 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn equality_constrained_support() {
        // beta1 + beta2 = 1, maximize beta1 -> beta = (1, 0), value 1.
        let e = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let f = DVector::from_row_slice(&[1.0]);
        let c = DVector::from_row_slice(&[1.0, 0.0]);
        match solve_box_lp(Some(&c), &e, &f, 1e-9) {
            LpResult::Optimal { beta, value } => {
                assert_relative_eq!(value, 1.0, epsilon = 1e-9);
                assert_relative_eq!(beta[0], 1.0, epsilon = 1e-9);
                assert_relative_eq!(beta[1], 0.0, epsilon = 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn infeasible_out_of_box() {
        let e = DMatrix::from_row_slice(1, 1, &[1.0]);
        let f = DVector::from_row_slice(&[3.0]);
        assert!(!solve_box_lp(None, &e, &f, 1e-9).is_feasible());
    }

    #[test]
    fn infeasible_zero_row() {
        let e = DMatrix::from_row_slice(1, 1, &[0.0]);
        let f = DVector::from_row_slice(&[1.0]);
        assert!(!solve_box_lp(None, &e, &f, 1e-9).is_feasible());
    }

    #[test]
    fn feasibility_with_many_constraints() {
        // Random-ish consistent system.
        let e = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.5, 0.0, 1.0, -1.0, 0.25]);
        let f = DVector::from_row_slice(&[0.7, -0.3]);
        let res = solve_box_lp(None, &e, &f, 1e-9);
        let beta = res.beta().expect("feasible");
        let r = &e * beta - &f;
        assert!(r.amax() < 1e-8);
        assert!(beta.amax() <= 1.0 + 1e-9);
    }
}
