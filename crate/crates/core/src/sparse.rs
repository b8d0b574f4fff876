//! Compressed sparse row matrices and the iterative kernels built on them.
//!
//! Everything downstream assembles symmetric matrices, so only a few
//! operations are needed: triplet assembly, mat-vec, symmetric restriction
//! to an index subset, and conjugate gradients. `solve_spd_plus_diag`
//! handles systems of the form (A + diag(d)) x = r where A is positive
//! definite but d may carry a few negative entries; the negative part is
//! folded in through a low-rank Woodbury correction so CG only ever sees a
//! positive definite operator.

use crate::error::Error;

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicate positions are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            assert!(i < rows && j < cols, "triplet ({i},{j}) out of bounds");
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for &(i, _, _) in &merged {
            row_ptr[i + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let col_idx = merged.iter().map(|e| e.1).collect();
        let vals = merged.iter().map(|e| e.2).collect();
        CsrMatrix { rows, cols, row_ptr, col_idx, vals }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for i in 0..self.rows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec(x, &mut y);
        y
    }

    /// x' A y for a square matrix.
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    pub fn total_sum(&self) -> f64 {
        self.vals.iter().sum()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    /// Entrywise sum of two matrices with identical shape.
    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut trips = Vec::with_capacity(self.nnz() + other.nnz());
        for m in [self, other] {
            for i in 0..m.rows {
                for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                    trips.push((i, m.col_idx[k], m.vals[k]));
                }
            }
        }
        CsrMatrix::from_triplets(self.rows, self.cols, &trips)
    }

    /// Symmetric restriction to the given (sorted, deduplicated) index set.
    pub fn restrict(&self, keep: &[usize]) -> CsrMatrix {
        assert_eq!(self.rows, self.cols, "restrict expects a square matrix");
        let mut new_of_old = vec![usize::MAX; self.rows];
        for (new, &old) in keep.iter().enumerate() {
            new_of_old[old] = new;
        }
        let mut trips = Vec::new();
        for (new_i, &old_i) in keep.iter().enumerate() {
            for k in self.row_ptr[old_i]..self.row_ptr[old_i + 1] {
                let new_j = new_of_old[self.col_idx[k]];
                if new_j != usize::MAX {
                    trips.push((new_i, new_j, self.vals[k]));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), keep.len(), &trips)
    }

    /// Largest absolute difference between the matrix and its transpose.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.vals[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.vals[k]))
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += s * x
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients for symmetric positive definite systems.
///
/// Stops when ||r|| <= tol * ||b|| (or an absolute floor when b = 0).
pub fn cg(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
) -> (Vec<f64>, CgOutcome) {
    let n = b.len();
    let mut x = match x0 {
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    let bnorm = norm2(b);
    let stop = if bnorm > 0.0 { tol * bnorm } else { tol };
    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = a.apply(&x);
        for i in 0..n {
            r[i] -= ax[i];
        }
    }
    let mut rho = dot(&r, &r);
    if rho.sqrt() <= stop {
        return (x, CgOutcome { converged: true, iterations: 0, residual: rho.sqrt() });
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iters {
        a.matvec(&p, &mut ap);
        let denom = dot(&p, &ap);
        if denom <= 0.0 {
            // loss of positive definiteness; report where we stopped
            return (x, CgOutcome { converged: false, iterations: it, residual: rho.sqrt() });
        }
        let alpha = rho / denom;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rho_new = dot(&r, &r);
        if rho_new.sqrt() <= stop {
            return (x, CgOutcome { converged: true, iterations: it, residual: rho_new.sqrt() });
        }
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    (x, CgOutcome { converged: false, iterations: max_iters, residual: rho.sqrt() })
}

/// Solve (base + diag(d)) x = rhs where base plus the nonnegative part of d
/// is positive definite. Negative diagonal entries (isolated boundary nodes
/// with concave kink curvature) are handled by a rank-k Woodbury update so
/// the inner solves stay positive definite.
pub fn solve_spd_plus_diag(
    base: &CsrMatrix,
    d: &[f64],
    rhs: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, usize), Error> {
    let n = rhs.len();
    assert_eq!(base.nrows(), n);
    assert_eq!(d.len(), n);
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    let mut negatives: Vec<(usize, f64)> = Vec::new();
    for (i, &di) in d.iter().enumerate() {
        if di > 0.0 {
            trips.push((i, i, di));
        } else if di < 0.0 {
            negatives.push((i, -di));
        }
    }
    let b_mat = if trips.is_empty() {
        base.clone()
    } else {
        for (i, j, v) in base.iter_entries() {
            trips.push((i, j, v));
        }
        CsrMatrix::from_triplets(n, n, &trips)
    };

    let run_cg = |r: &[f64]| -> Result<(Vec<f64>, usize), Error> {
        let (x, out) = cg(&b_mat, r, None, tol, max_iters);
        if out.converged {
            Ok((x, out.iterations))
        } else {
            Err(Error::LinearSolveFailed { iterations: out.iterations, residual: out.residual })
        }
    };

    if negatives.is_empty() {
        return run_cg(rhs);
    }

    // Woodbury: (B - U C U')^{-1} = B^{-1} + B^{-1} U (C^{-1} - U' B^{-1} U)^{-1} U' B^{-1}
    let (y, mut iters) = run_cg(rhs)?;
    let k = negatives.len();
    let mut z_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for &(idx, _) in &negatives {
        let mut e = vec![0.0; n];
        e[idx] = 1.0;
        let (z, it) = run_cg(&e)?;
        iters += it;
        z_cols.push(z);
    }
    // small dense system S w = U' y with S = C^{-1} - U' B^{-1} U
    let mut s = vec![vec![0.0; k]; k];
    for a in 0..k {
        for bcol in 0..k {
            s[a][bcol] = -z_cols[bcol][negatives[a].0];
        }
        s[a][a] += 1.0 / negatives[a].1;
    }
    let uy: Vec<f64> = negatives.iter().map(|&(idx, _)| y[idx]).collect();
    let w = solve_dense(s, uy).ok_or(Error::SingularSystem)?;
    let mut x = y;
    for (col, wv) in z_cols.iter().zip(&w) {
        axpy(*wv, col, &mut x);
    }
    Ok((x, iters))
}

/// Gaussian elimination with partial pivoting for small dense systems.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for j in col..n {
                    a[row][j] -= f * a[col][j];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in row + 1..n {
            acc -= a[row][j] * x[j];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, 2.0));
            if i > 0 {
                trips.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                trips.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &trips)
    }

    #[test]
    fn triplets_accumulate_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn cg_solves_tridiagonal_system() {
        let n = 40;
        let a = laplace_1d(n);
        let b = vec![1.0; n];
        let (x, out) = cg(&a, &b, None, 1e-12, 10 * n);
        assert!(out.converged, "cg stalled at residual {}", out.residual);
        let r = a.apply(&x);
        for i in 0..n {
            assert!((r[i] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn restriction_keeps_selected_block() {
        let a = laplace_1d(5);
        let sub = a.restrict(&[1, 2, 3]);
        assert_eq!(sub.nrows(), 3);
        assert_eq!(sub.get(0, 0), 2.0);
        assert_eq!(sub.get(0, 1), -1.0);
        assert_eq!(sub.get(0, 2), 0.0);
    }

    #[test]
    fn woodbury_matches_direct_solve_with_negative_diagonal() {
        let n = 12;
        let a = laplace_1d(n);
        let mut d = vec![0.5; n];
        d[3] = -0.8;
        d[7] = -0.3;
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let (x, _) = solve_spd_plus_diag(&a, &d, &rhs, 1e-13, 2000).unwrap();
        // check residual of the indefinite-diagonal system directly
        let mut r = a.apply(&x);
        for i in 0..n {
            r[i] += d[i] * x[i] - rhs[i];
        }
        assert!(norm2(&r) < 1e-9, "residual {}", norm2(&r));
    }

    #[test]
    fn dense_solve_recovers_known_solution() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let x = solve_dense(a, vec![1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
    }
}
