//! Small dense routines: pivoted Cholesky and symmetric eigenvalues.

use crate::scalar::Scalar;

/// Dense symmetric matrix stored row-major.
pub type Dense<T> = Vec<Vec<T>>;

/// Factor `Q = Fᵀ F` for a positive semidefinite `Q` with diagonal pivoting.
/// Returns the rows of `F` (rank × n). Pivots below `tol · max diag` stop the
/// factorization; the remainder is treated as zero.
pub fn pivoted_cholesky<T: Scalar>(q: &Dense<T>, tol: T) -> Vec<Vec<T>> {
    let n = q.len();
    let mut a = q.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let dmax = (0..n).fold(T::zero(), |m, i| m.max(a[i][i].abs()));
    let mut rows: Vec<Vec<T>> = Vec::new();
    if dmax == T::zero() {
        return rows;
    }
    for k in 0..n {
        let (mut p, mut best) = (k, a[perm[k]][perm[k]]);
        for j in k + 1..n {
            let d = a[perm[j]][perm[j]];
            if d > best {
                best = d;
                p = j;
            }
        }
        if best <= tol * dmax {
            break;
        }
        perm.swap(k, p);
        let pk = perm[k];
        let s = best.sqrt();
        let mut row = vec![T::zero(); n];
        row[pk] = s;
        for &pj in &perm[k + 1..] {
            row[pj] = a[pk][pj] / s;
        }
        for (ii, &pi) in perm.iter().enumerate().skip(k + 1) {
            for &pj in &perm[ii..] {
                let upd = row[pi] * row[pj];
                a[pi][pj] -= upd;
                if pi != pj {
                    a[pj][pi] -= upd;
                }
            }
        }
        rows.push(row);
    }
    rows
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues<T: Scalar>(q: &Dense<T>) -> Vec<T> {
    let n = q.len();
    let mut a = q.clone();
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += a[i][i] * a[i][i];
            for j in 0..n {
                if i != j {
                    off += a[i][j] * a[i][j];
                }
            }
        }
        if off <= T::epsilon() * T::epsilon() * (diag + off) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                if a[p][r] == T::zero() {
                    continue;
                }
                let theta = (a[r][r] - a[p][p]) / (two * a[p][r]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akr = a[k][r];
                    a[k][p] = c * akp - s * akr;
                    a[k][r] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let ark = a[r][k];
                    a[p][k] = c * apk - s * ark;
                    a[r][k] = s * apk + c * ark;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}
