//! Compressed sparse-row matrices and the small set of linear solvers the
//! state and adjoint problems need: CG for SPD pressure operators,
//! Jacobi-preconditioned BiCGStab for the nonsymmetric coupled operators and
//! a dense LU as oracle and fallback.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Largest system the dense LU fallback will densify.
pub const DENSE_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Validates raw CSR arrays.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 || row_offsets[0] != 0 {
            return Err(Error::invalid(
                "row offsets must have nrows+1 entries starting at 0",
            ));
        }
        let nnz = row_offsets[nrows];
        if col_indices.len() != nnz || values.len() != nnz {
            return Err(Error::invalid("column/value arrays must have nnz entries"));
        }
        for r in 0..nrows {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            if lo > hi {
                return Err(Error::invalid("row offsets must be nondecreasing"));
            }
            let cols = &col_indices[lo..hi];
            if cols.iter().any(|&c| c >= ncols) {
                return Err(Error::invalid(format!(
                    "column index out of range in row {r}"
                )));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "column indices not strictly increasing in row {r}"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a CSR matrix from a row-major dense array, dropping zeros.
    pub fn from_dense(nrows: usize, ncols: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != nrows * ncols {
            return Err(Error::invalid("dense array has wrong length"));
        }
        let mut b = TripletBuilder::new(nrows, ncols);
        for r in 0..nrows {
            for c in 0..ncols {
                let v = dense[r * ncols + c];
                if v != 0.0 {
                    b.push(r, c, v);
                }
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }
    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored entries of one row as `(column, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        self.col_indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// All stored entries in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Entry `(r, c)`, zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        match self.col_indices[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|r| self.get(r, r))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows * self.ncols];
        for (r, c, v) in self.triplets() {
            d[r * self.ncols + c] = v;
        }
        d
    }

    /// `y = A·x`, one row at a time in storage order.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::invalid("spmv: vector length does not match columns"));
        }
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yr = acc;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // rows are visited in increasing order, so each transposed row stays sorted
        for (r, c, v) in self.triplets() {
            let slot = next[c];
            col_indices[slot] = r;
            values[slot] = v;
            next[c] += 1;
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Largest `|A_ij - A_ji|` over all entries.
    pub fn max_asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut m: f64 = 0.0;
        for (r, c, v) in self.triplets() {
            m = m.max((v - t.get(r, c)).abs());
        }
        for (r, c, v) in t.triplets() {
            m = m.max((v - self.get(r, c)).abs());
        }
        m
    }
}

/// Accumulates `(row, col, value)` entries; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols);
        self.entries.push((r, c, v));
    }

    /// Sorts, merges duplicates in insertion order and drops nothing:
    /// explicit zeros stay stored so the sparsity pattern is state independent.
    pub fn build(mut self) -> Result<SparseMatrix> {
        if self
            .entries
            .iter()
            .any(|&(r, c, _)| r >= self.nrows || c >= self.ncols)
        {
            return Err(Error::invalid("triplet index out of range"));
        }
        // stable sort keeps duplicate summation order deterministic
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; self.nrows + 1];
        let mut col_indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_offsets[r + 1] += row_offsets[r];
        }
        SparseMatrix::from_csr(self.nrows, self.ncols, row_offsets, col_indices, values)
    }
}

/// Result of a linear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolve {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖A·x − b‖₂` (∞-norm for the dense path).
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn residual_into(a: &SparseMatrix, x: &[f64], b: &[f64], r: &mut [f64]) {
    a.spmv_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

fn check_square(a: &SparseMatrix, b: &[f64]) -> Result<()> {
    if a.nrows != a.ncols {
        return Err(Error::invalid("matrix must be square"));
    }
    if b.len() != a.nrows {
        return Err(Error::invalid(
            "right-hand side length does not match matrix",
        ));
    }
    Ok(())
}

/// Conjugate gradients for symmetric positive-definite `A`, started at zero.
/// Converged when `‖A·x − b‖₂ ≤ tol·‖b‖₂`, checked on the true residual.
pub fn solve_cg(a: &SparseMatrix, b: &[f64], tol: f64, maxit: usize) -> Result<LinearSolve> {
    check_square(a, b)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(LinearSolve {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let target = tol * bnorm;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut history = Vec::new();
    let mut it = 0;
    while it < maxit {
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap.is_nan() || pap <= 0.0 {
            return Err(Error::NonConvergence {
                method: "cg",
                iterations: it,
                residual: libm::sqrt(rr),
                history,
            });
        }
        let alpha = rr / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        it += 1;
        let rr_new = dot(&r, &r);
        history.push(libm::sqrt(rr_new));
        if libm::sqrt(rr_new) <= target {
            // recursive residual can drift; confirm and restart if needed
            residual_into(a, &x, b, &mut r);
            let true_rr = dot(&r, &r);
            if libm::sqrt(true_rr) <= target {
                return Ok(LinearSolve {
                    x,
                    iterations: it,
                    residual: libm::sqrt(true_rr),
                });
            }
            p.copy_from_slice(&r);
            rr = true_rr;
            continue;
        }
        let beta = rr_new / rr;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_new;
    }
    residual_into(a, &x, b, &mut r);
    Err(Error::NonConvergence {
        method: "cg",
        iterations: it,
        residual: norm2(&r),
        history,
    })
}

/// Right-preconditioned BiCGStab, started at zero. Jacobi scaling is used
/// when every diagonal entry is nonzero. On breakdown or iteration cap the
/// error suggests the dense path, see [`solve_dense`].
pub fn solve_bicgstab(a: &SparseMatrix, b: &[f64], tol: f64, maxit: usize) -> Result<LinearSolve> {
    check_square(a, b)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(LinearSolve {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let diag = a.diagonal();
    let inv_diag: Vec<f64> = if diag.iter().all(|&d| d != 0.0) {
        diag.iter().map(|d| 1.0 / d).collect()
    } else {
        vec![1.0; n]
    };
    let precond = |v: &[f64], out: &mut [f64]| {
        for k in 0..n {
            out[k] = inv_diag[k] * v[k];
        }
    };

    let target = tol * bnorm;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut history = Vec::new();
    let mut it = 0;
    let mut restarts = 0;
    let (mut ph, mut sh, mut v, mut s, mut t, mut p) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );

    'outer: while it < maxit {
        let r0 = r.clone();
        let mut rho = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        v.iter_mut().for_each(|e| *e = 0.0);
        p.iter_mut().for_each(|e| *e = 0.0);
        while it < maxit {
            let rho_new = dot(&r0, &r);
            if rho_new == 0.0 || !rho_new.is_finite() {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            for k in 0..n {
                p[k] = r[k] + beta * (p[k] - omega * v[k]);
            }
            precond(&p, &mut ph);
            a.spmv_into(&ph, &mut v);
            let r0v = dot(&r0, &v);
            if r0v == 0.0 || !r0v.is_finite() {
                break;
            }
            alpha = rho_new / r0v;
            for k in 0..n {
                s[k] = r[k] - alpha * v[k];
            }
            it += 1;
            if norm2(&s) <= target {
                for k in 0..n {
                    x[k] += alpha * ph[k];
                }
                history.push(norm2(&s));
                if confirm(a, &x, b, &mut r, target) {
                    return Ok(LinearSolve {
                        x,
                        iterations: it,
                        residual: norm2(&r),
                    });
                }
                continue 'outer;
            }
            precond(&s, &mut sh);
            a.spmv_into(&sh, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                break;
            }
            omega = dot(&t, &s) / tt;
            for k in 0..n {
                x[k] += alpha * ph[k] + omega * sh[k];
                r[k] = s[k] - omega * t[k];
            }
            rho = rho_new;
            let rn = norm2(&r);
            history.push(rn);
            if !rn.is_finite() {
                break 'outer;
            }
            if rn <= target {
                if confirm(a, &x, b, &mut r, target) {
                    return Ok(LinearSolve {
                        x,
                        iterations: it,
                        residual: norm2(&r),
                    });
                }
                continue 'outer;
            }
            if omega == 0.0 {
                break;
            }
        }
        // breakdown: restart from the true residual a bounded number of times
        restarts += 1;
        if restarts > 8 {
            break;
        }
        residual_into(a, &x, b, &mut r);
    }
    residual_into(a, &x, b, &mut r);
    Err(Error::NonConvergence {
        method: "bicgstab (consider the dense LU path)",
        iterations: it,
        residual: norm2(&r),
        history,
    })
}

fn confirm(a: &SparseMatrix, x: &[f64], b: &[f64], r: &mut [f64], target: f64) -> bool {
    residual_into(a, x, b, r);
    norm2(r) <= target
}

/// Dense LU with partial pivoting, limited to [`DENSE_CAP`] unknowns.
pub fn solve_dense(a: &SparseMatrix, b: &[f64]) -> Result<LinearSolve> {
    solve_dense_capped(a, b, DENSE_CAP)
}

pub fn solve_dense_capped(a: &SparseMatrix, b: &[f64], cap: usize) -> Result<LinearSolve> {
    check_square(a, b)?;
    let n = a.nrows;
    if n > cap {
        return Err(Error::invalid(format!(
            "dense solve limited to {cap} unknowns, got {n}"
        )));
    }
    let mut m = a.to_dense();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let eps = f64::EPSILON * scale * n as f64;
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].abs();
        for r in col + 1..n {
            let v = m[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= eps || best == 0.0 {
            return Err(Error::SingularMatrix { column: col });
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let factor = m[r * n + col] / d;
            if factor != 0.0 {
                m[r * n + col] = 0.0;
                for c in col + 1..n {
                    m[r * n + c] -= factor * m[col * n + c];
                }
                x[r] -= factor * x[col];
            }
        }
    }
    for r in (0..n).rev() {
        let mut acc = x[r];
        for c in r + 1..n {
            acc -= m[r * n + c] * x[c];
        }
        x[r] = acc / m[r * n + r];
    }
    let ax = a.spmv(&x)?;
    let residual = ax
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    Ok(LinearSolve {
        x,
        iterations: 1,
        residual,
    })
}

/// BiCGStab, falling back to dense LU when the system is small enough.
pub(crate) fn solve_general(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<LinearSolve> {
    match solve_bicgstab(a, b, tol, maxit) {
        Ok(s) => Ok(s),
        Err(e) if a.nrows() <= DENSE_CAP && e.is_nonconvergence() => solve_dense(a, b),
        Err(e) => Err(e),
    }
}
