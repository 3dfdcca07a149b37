//! Compressed sparse column storage and a left-looking LU factorization.

use crate::scalar::Scalar;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("matrix is singular at column {0}")]
    Singular(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Column-compressed matrix. Row indices within a column are sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct Csc<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub vals: Vec<T>,
}

/// Coordinate-format accumulator. Duplicate entries are summed on conversion.
#[derive(Debug, Clone)]
pub struct Triplets<T> {
    pub(crate) nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> Triplets<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets { nrows, ncols, entries: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(i < self.nrows && j < self.ncols, "entry ({i},{j}) out of bounds");
        self.entries.push((i, j, v));
    }

    pub fn to_csc(&self) -> Csc<T> {
        let mut e = self.entries.clone();
        e.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut colptr = vec![0usize; self.ncols + 1];
        let mut rowidx: Vec<usize> = Vec::with_capacity(e.len());
        let mut vals: Vec<T> = Vec::with_capacity(e.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in e {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                rowidx.push(i);
                vals.push(v);
                colptr[j + 1] += 1;
                last = Some((i, j));
            }
        }
        for j in 0..self.ncols {
            colptr[j + 1] += colptr[j];
        }
        Csc { nrows: self.nrows, ncols: self.ncols, colptr, rowidx, vals }
    }
}

impl<T: Scalar> Csc<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csc { nrows, ncols, colptr: vec![0; ncols + 1], rowidx: vec![], vals: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Csc {
            nrows: n,
            ncols: n,
            colptr: (0..=n).collect(),
            rowidx: (0..n).collect(),
            vals: vec![T::one(); n],
        }
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Triplets::new(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != T::zero() {
                    t.push(i, j, v);
                }
            }
        }
        t.to_csc()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.colptr[j]..self.colptr[j + 1];
        self.rowidx[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.colptr[j]..self.colptr[j + 1];
        match self.rowidx[r.clone()].binary_search(&i) {
            Ok(p) => self.vals[r.start + p],
            Err(_) => T::zero(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                d[i][j] = v;
            }
        }
        d
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::zero(); self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == T::zero() {
                continue;
            }
            for (i, v) in self.col(j) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// `y = Aᵀ x`
    pub fn mul_t_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols).map(|j| self.col(j).fold(T::zero(), |s, (i, v)| s + v * x[i])).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                t.push(j, i, v);
            }
        }
        t.to_csc()
    }

    pub fn scale(&self, s: T) -> Self {
        let mut m = self.clone();
        m.vals.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.nrows];
        for (k, &r) in rows.iter().enumerate() {
            map[r] = k;
        }
        let mut t = Triplets::new(rows.len(), self.ncols);
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                if map[i] != usize::MAX {
                    t.push(map[i], j, v);
                }
            }
        }
        t.to_csc()
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let mut t = Triplets::new(self.nrows, cols.len());
        for (k, &j) in cols.iter().enumerate() {
            for (i, v) in self.col(j) {
                t.push(i, k, v);
            }
        }
        t.to_csc()
    }

    /// Stacks blocks; each row of `blocks` is a block-row, `None` is a zero block.
    pub fn block(blocks: &[Vec<Option<&Csc<T>>>], row_sizes: &[usize], col_sizes: &[usize]) -> Self {
        let nrows: usize = row_sizes.iter().sum();
        let ncols: usize = col_sizes.iter().sum();
        let mut t = Triplets::new(nrows, ncols);
        let mut r0 = 0;
        for (bi, brow) in blocks.iter().enumerate() {
            let mut c0 = 0;
            for (bj, blk) in brow.iter().enumerate() {
                if let Some(m) = blk {
                    assert_eq!((m.nrows, m.ncols), (row_sizes[bi], col_sizes[bj]), "block ({bi},{bj}) shape");
                    for j in 0..m.ncols {
                        for (i, v) in m.col(j) {
                            t.push(r0 + i, c0 + j, v);
                        }
                    }
                }
                c0 += col_sizes[bj];
            }
            r0 += row_sizes[bi];
        }
        t.to_csc()
    }

    /// `A B`
    pub fn mul(&self, b: &Csc<T>) -> Self {
        assert_eq!(self.ncols, b.nrows);
        let mut t = Triplets::new(self.nrows, b.ncols);
        let mut acc = vec![T::zero(); self.nrows];
        let mut mark = vec![usize::MAX; self.nrows];
        let mut pat = Vec::new();
        for j in 0..b.ncols {
            pat.clear();
            for (k, bkj) in b.col(j) {
                for (i, aik) in self.col(k) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = T::zero();
                        pat.push(i);
                    }
                    acc[i] += aik * bkj;
                }
            }
            for &i in &pat {
                t.push(i, j, acc[i]);
            }
        }
        t.to_csc()
    }

    pub fn add(&self, b: &Csc<T>) -> Self {
        assert_eq!((self.nrows, self.ncols), (b.nrows, b.ncols));
        let mut t = Triplets::new(self.nrows, self.ncols);
        for m in [self, b] {
            for j in 0..m.ncols {
                for (i, v) in m.col(j) {
                    t.push(i, j, v);
                }
            }
        }
        t.to_csc()
    }

    pub fn factor_lu(&self) -> Result<SparseLu<T>, SparseError> {
        SparseLu::factor(self)
    }
}

/// `P A = L U` computed column by column (Gilbert-Peierls) with threshold-free
/// partial pivoting. `L` keeps original row indices; `U` is stored by pivot index.
#[derive(Debug, Clone)]
pub struct SparseLu<T> {
    n: usize,
    l_colptr: Vec<usize>,
    l_rowidx: Vec<usize>,
    l_vals: Vec<T>,
    u_colptr: Vec<usize>,
    u_rowidx: Vec<usize>,
    u_vals: Vec<T>,
    u_diag: Vec<T>,
    // pinv[row] = pivot step at which `row` was chosen
    pinv: Vec<usize>,
    perm: Vec<usize>,
}

const UNSET: usize = usize::MAX;

impl<T: Scalar> SparseLu<T> {
    pub fn factor(a: &Csc<T>) -> Result<Self, SparseError> {
        if a.nrows != a.ncols {
            return Err(SparseError::Dimension { expected: a.nrows, got: a.ncols });
        }
        let n = a.ncols;
        let scale = a.vals.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tiny = scale * T::epsilon() * T::lit(16.0);
        let mut lu = SparseLu {
            n,
            l_colptr: vec![0],
            l_rowidx: vec![],
            l_vals: vec![],
            u_colptr: vec![0],
            u_rowidx: vec![],
            u_vals: vec![],
            u_diag: Vec::with_capacity(n),
            pinv: vec![UNSET; n],
            perm: Vec::with_capacity(n),
        };
        let mut x = vec![T::zero(); n];
        let mut visited = vec![UNSET; n];
        let mut topo: Vec<usize> = Vec::with_capacity(n);
        let mut stack: Vec<(usize, usize)> = Vec::new();

        for k in 0..n {
            // symbolic: rows reachable from the pattern of A[:,k] through L
            topo.clear();
            for (i, _) in a.col(k) {
                if visited[i] == k {
                    continue;
                }
                stack.push((i, 0));
                visited[i] = k;
                while let Some(&(node, mut next)) = stack.last() {
                    let top = stack.len() - 1;
                    let piv = lu.pinv[node];
                    let mut pushed = false;
                    if piv != UNSET {
                        let (s, e) = (lu.l_colptr[piv], lu.l_colptr[piv + 1]);
                        while s + next < e {
                            let child = lu.l_rowidx[s + next];
                            next += 1;
                            if visited[child] != k {
                                visited[child] = k;
                                pushed = true;
                                stack[top].1 = next;
                                stack.push((child, 0));
                                break;
                            }
                        }
                    }
                    if !pushed {
                        stack.pop();
                        topo.push(node);
                    }
                }
            }
            // numeric: sparse triangular solve in reverse post-order
            for &i in &topo {
                x[i] = T::zero();
            }
            for (i, v) in a.col(k) {
                x[i] = v;
            }
            for &i in topo.iter().rev() {
                let piv = lu.pinv[i];
                if piv == UNSET {
                    continue;
                }
                let xi = x[i];
                if xi == T::zero() {
                    continue;
                }
                for p in lu.l_colptr[piv]..lu.l_colptr[piv + 1] {
                    let r = lu.l_rowidx[p];
                    x[r] -= lu.l_vals[p] * xi;
                }
            }
            // pivot choice among rows not yet pivoted
            let mut best = UNSET;
            let mut best_abs = T::zero();
            for &i in &topo {
                if lu.pinv[i] == UNSET && x[i].abs() > best_abs {
                    best_abs = x[i].abs();
                    best = i;
                }
            }
            if best == UNSET || best_abs <= tiny {
                return Err(SparseError::Singular(k));
            }
            let d = x[best];
            lu.pinv[best] = k;
            lu.perm.push(best);
            lu.u_diag.push(d);
            let mut ucol: Vec<(usize, T)> = Vec::new();
            for &i in &topo {
                let piv = lu.pinv[i];
                if i == best {
                    continue;
                }
                if piv != UNSET {
                    if x[i] != T::zero() {
                        ucol.push((piv, x[i]));
                    }
                } else if x[i] != T::zero() {
                    lu.l_rowidx.push(i);
                    lu.l_vals.push(x[i] / d);
                }
            }
            ucol.sort_by_key(|e| e.0);
            for (r, v) in ucol {
                lu.u_rowidx.push(r);
                lu.u_vals.push(v);
            }
            lu.l_colptr.push(lu.l_rowidx.len());
            lu.u_colptr.push(lu.u_rowidx.len());
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let mut w = b.to_vec();
        let mut y = vec![T::zero(); self.n];
        for j in 0..self.n {
            let yj = w[self.perm[j]];
            y[j] = yj;
            if yj != T::zero() {
                for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                    w[self.l_rowidx[p]] -= self.l_vals[p] * yj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let xj = y[j] / self.u_diag[j];
            y[j] = xj;
            if xj != T::zero() {
                for p in self.u_colptr[j]..self.u_colptr[j + 1] {
                    y[self.u_rowidx[p]] -= self.u_vals[p] * xj;
                }
            }
        }
        y
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        // Uᵀ z = b
        let mut z = vec![T::zero(); self.n];
        for j in 0..self.n {
            let mut s = b[j];
            for p in self.u_colptr[j]..self.u_colptr[j + 1] {
                s -= self.u_vals[p] * z[self.u_rowidx[p]];
            }
            z[j] = s / self.u_diag[j];
        }
        // Lᵀ (P x) = z
        let mut x = vec![T::zero(); self.n];
        for j in (0..self.n).rev() {
            let mut s = z[j];
            for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                s -= self.l_vals[p] * x[self.l_rowidx[p]];
            }
            x[self.perm[j]] = s;
        }
        x
    }

    pub fn fill(&self) -> usize {
        self.l_vals.len() + self.u_vals.len() + self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn triplets_sum_duplicates() {
        let mut t = Triplets::<f64>::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 0, 2.0);
        t.push(1, 1, 4.0);
        let m = t.to_csc();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn lu_needs_pivoting() {
        let a = vec![vec![0.0, 2.0, 1.0], vec![1.0, 0.0, 0.0], vec![3.0, 1.0, 5.0]];
        let m = Csc::from_dense(&a);
        let lu = m.factor_lu().unwrap();
        let b = vec![1.0, 2.0, 3.0];
        let x = lu.solve(&b);
        let r = dense_mul(&a, &x);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
        let xt = lu.solve_transpose(&b);
        let at = m.transpose().to_dense();
        let rt = dense_mul(&at, &xt);
        for i in 0..3 {
            assert!((rt[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lu_reports_singular() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(Csc::from_dense(&a).factor_lu(), Err(SparseError::Singular(1))));
    }

    #[test]
    fn mul_and_block() {
        let a = Csc::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]]);
        let i = Csc::<f64>::identity(2);
        assert_eq!(a.mul(&i), a);
        let b = Csc::block(&[vec![Some(&a), None], vec![None, Some(&i)]], &[2, 2], &[2, 2]);
        assert_eq!(b.get(0, 1), 2.0);
        assert_eq!(b.get(3, 3), 1.0);
        assert_eq!(b.get(0, 3), 0.0);
        assert_eq!(a.mul_t_vec(&[1.0, 1.0]), vec![1.0, 5.0]);
        assert_eq!(a.select_rows(&[1]).to_dense(), vec![vec![0.0, 3.0]]);
    }

    #[test]
    fn lu_f32() {
        let a = Csc::from_dense(&[vec![4.0f32, 1.0], vec![1.0, 3.0]]);
        let x = a.factor_lu().unwrap().solve(&[1.0, 2.0]);
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-6);
    }
}
