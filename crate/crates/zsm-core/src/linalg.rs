//! Small dense linear-algebra helpers shared by the constrained-zonotope
//! routines: row reduction of constraint systems and null-space bases.

use nalgebra::{DMatrix, DVector};

/// Outcome of reducing the constraint system `A x = b` by Gaussian elimination.
pub struct ReducedSystem {
    /// Row-reduced constraint matrix with zero rows removed.
    pub a: DMatrix<f64>,
    /// Right-hand side matching `a`.
    pub b: DVector<f64>,
    /// Rank of the original `[A]`.
    pub rank: usize,
    /// True when a zero row had a nonzero right-hand side, i.e. `A x = b`
    /// has no solution at all.
    pub inconsistent: bool,
    /// True when redundant (dependent) rows were dropped.
    pub had_redundant_rows: bool,
}

/// Row-reduce `A x = b`, dropping redundant rows and flagging inconsistency.
///
/// Rows are scaled to unit max-norm before elimination so `tol` acts as a
/// relative tolerance. An inconsistent system is reported rather than treated
/// as an error; callers interpret it as the empty set.
pub fn reduce_system(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> ReducedSystem {
    let p = a.nrows();
    let m = a.ncols();
    let mut aug = DMatrix::<f64>::zeros(p, m + 1);
    for i in 0..p {
        let mut scale = b[i].abs();
        for j in 0..m {
            scale = scale.max(a[(i, j)].abs());
        }
        let s = if scale > 0.0 { 1.0 / scale } else { 1.0 };
        for j in 0..m {
            aug[(i, j)] = a[(i, j)] * s;
        }
        aug[(i, m)] = b[i] * s;
    }

    let mut rank = 0;
    for col in 0..m {
        if rank == p {
            break;
        }
        // partial pivot
        let mut best = rank;
        for r in rank + 1..p {
            if aug[(r, col)].abs() > aug[(best, col)].abs() {
                best = r;
            }
        }
        if aug[(best, col)].abs() <= tol {
            continue;
        }
        aug.swap_rows(rank, best);
        let piv = aug[(rank, col)];
        for j in col..=m {
            aug[(rank, j)] /= piv;
        }
        for r in 0..p {
            if r != rank {
                let f = aug[(r, col)];
                if f != 0.0 {
                    for j in col..=m {
                        aug[(r, j)] -= f * aug[(rank, j)];
                    }
                }
            }
        }
        rank += 1;
    }

    let mut inconsistent = false;
    for r in rank..p {
        if aug[(r, m)].abs() > tol {
            inconsistent = true;
        }
    }

    let mut a_out = DMatrix::<f64>::zeros(rank, m);
    let mut b_out = DVector::<f64>::zeros(rank);
    for r in 0..rank {
        for j in 0..m {
            a_out[(r, j)] = aug[(r, j)];
        }
        b_out[r] = aug[(r, m)];
    }
    ReducedSystem {
        a: a_out,
        b: b_out,
        rank,
        inconsistent,
        had_redundant_rows: rank < p,
    }
}

/// Orthonormal basis of the null space of `a`, via SVD.
///
/// Returns an `m x (m - rank)` matrix whose columns span `{x : A x = 0}`.
pub fn nullspace(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let m = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::<f64>::identity(m, m);
    }
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("svd requested v_t");
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let thresh = tol * max_sv.max(1.0);
    let rank = svd.singular_values.iter().filter(|s| **s > thresh).count();

    // The thin SVD only yields the row-space basis; complete it to a full
    // orthonormal basis of R^m by Gram-Schmidt over the identity columns.
    let mut basis: Vec<DVector<f64>> = (0..rank)
        .map(|r| DVector::from_iterator(m, (0..m).map(|j| v_t[(r, j)])))
        .collect();
    let mut kernel: Vec<DVector<f64>> = Vec::with_capacity(m - rank);
    for i in 0..m {
        if basis.len() == m {
            break;
        }
        let mut v = DVector::<f64>::zeros(m);
        v[i] = 1.0;
        for b in &basis {
            let d = b.dot(&v);
            v -= d * b;
        }
        let nv = v.norm();
        if nv > 1e-10 {
            let v = v / nv;
            basis.push(v.clone());
            kernel.push(v);
        }
    }
    let mut n = DMatrix::<f64>::zeros(m, kernel.len());
    for (k, v) in kernel.iter().enumerate() {
        n.set_column(k, v);
    }
    n
}

/// Rank of the column space of `a` with relative tolerance `tol`.
pub fn column_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let svd = a.clone().svd(false, false);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let thresh = tol * max_sv.max(1.0);
    svd.singular_values.iter().filter(|s| **s > thresh).count()
}
