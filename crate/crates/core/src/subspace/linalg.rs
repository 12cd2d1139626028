//! Small dense kernels: nullspace by row reduction, modified Gram–Schmidt,
//! and a symmetric positive definite solve.

use nalgebra::{Cholesky, DMatrix, DVector};

/// Relative pivot threshold for row reduction.
pub const PIVOT_TOL: f64 = 1e-12;

/// Columns whose norm falls below this fraction of their original norm after
/// orthogonalization are treated as linearly dependent.
pub const DEPENDENCE_TOL: f64 = 1e-8;

/// Basis of the nullspace of `a` (one column per free variable), computed by
/// reduction to row echelon form with partial pivoting.
///
/// The returned columns are not orthonormal.
pub fn nullspace(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    let mut r = a.clone();
    let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = PIVOT_TOL * scale.max(f64::MIN_POSITIVE);

    let mut pivot_cols = Vec::new();
    let mut free_cols = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            free_cols.push(col);
            continue;
        }
        let (best, best_abs) = (row..rows)
            .map(|i| (i, r[(i, col)].abs()))
            .fold((row, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best_abs <= tol {
            free_cols.push(col);
            continue;
        }
        r.swap_rows(row, best);
        let p = r[(row, col)];
        for j in col..cols {
            r[(row, j)] /= p;
        }
        for i in 0..rows {
            if i == row {
                continue;
            }
            let factor = r[(i, col)];
            if factor != 0.0 {
                for j in col..cols {
                    r[(i, j)] -= factor * r[(row, j)];
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }

    let mut basis = DMatrix::zeros(cols, free_cols.len());
    for (b, &f) in free_cols.iter().enumerate() {
        basis[(f, b)] = 1.0;
        for (pr, &pc) in pivot_cols.iter().enumerate() {
            basis[(pc, b)] = -r[(pr, f)];
        }
    }
    basis
}

/// Orthonormalizes the columns of `candidates` against `against` (assumed
/// orthonormal) and each other by modified Gram–Schmidt with one
/// re-orthogonalization pass. Dependent columns are dropped.
pub fn orthonormalize(candidates: &DMatrix<f64>, against: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let n = candidates.nrows();
    let fixed: Vec<DVector<f64>> = against
        .map(|m| m.column_iter().map(|c| c.into_owned()).collect())
        .unwrap_or_default();
    let mut accepted: Vec<DVector<f64>> = Vec::new();
    for col in candidates.column_iter() {
        let mut w = col.into_owned();
        let orig = w.norm();
        if orig == 0.0 {
            continue;
        }
        for _pass in 0..2 {
            for q in fixed.iter().chain(accepted.iter()) {
                let proj = q.dot(&w);
                w.axpy(-proj, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm <= DEPENDENCE_TOL * orig {
            continue;
        }
        accepted.push(w / norm);
    }
    if accepted.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&accepted)
}

/// Solves `h · x = rhs` for symmetric positive definite `h`, or `None` when
/// the Cholesky factorization breaks down.
pub fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = Cholesky::new(h.clone())?;
    let x = chol.solve(rhs);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Largest `|h_ij − h_ji|` relative to the largest entry.
pub fn asymmetry(h: &DMatrix<f64>) -> f64 {
    let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..h.nrows() {
        for j in 0..i {
            worst = worst.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    worst / scale
}
