//! Compressed sparse row storage and the two solvers used by the time
//! stepper: Jacobi-preconditioned conjugate gradients for symmetric positive
//! definite systems and a band LU factorization with partial pivoting for
//! everything else.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed on build.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, entries: Vec::new() }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Self { n_rows, n_cols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.entries.push((i, j, v));
    }

    /// Buckets entries by row (counting sort) and then stably sorts each row
    /// by column, so duplicates are summed in insertion order and the result
    /// is deterministic.
    pub fn build(self) -> SparseMatrix {
        let mut counts = alloc::vec![0usize; self.n_rows + 1];
        for &(i, _, _) in &self.entries {
            counts[i + 1] += 1;
        }
        for i in 0..self.n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut bucketed = alloc::vec![(0usize, 0.0f64); self.entries.len()];
        for &(i, j, v) in &self.entries {
            bucketed[next[i]] = (j, v);
            next[i] += 1;
        }
        let mut row_offsets = alloc::vec![0usize; self.n_rows + 1];
        let mut col_indices = Vec::with_capacity(bucketed.len());
        let mut values: Vec<f64> = Vec::with_capacity(bucketed.len());
        for i in 0..self.n_rows {
            let row = &mut bucketed[counts[i]..counts[i + 1]];
            row.sort_by_key(|e| e.0);
            let mut last = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_offsets[i + 1] = values.len();
        }
        SparseMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_offsets, col_indices, values }
    }
}

impl SparseMatrix {
    /// Builds from raw CSR arrays, checking the structural invariants.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 || row_offsets[0] != 0 {
            return Err(Error::InvalidArgument("row offsets must have n_rows + 1 entries starting at 0".into()));
        }
        if col_indices.len() != values.len() || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::InvalidArgument("column and value arrays disagree with row offsets".into()));
        }
        for i in 0..n_rows {
            if row_offsets[i] > row_offsets[i + 1] {
                return Err(Error::InvalidArgument(format!("row offsets decrease at row {i}")));
            }
            let cols = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&j| j >= n_cols) {
                return Err(Error::InvalidArgument(format!("row {i} has unsorted or out-of-range columns")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix value".into()));
        }
        Ok(Self { n_rows, n_cols, row_offsets, col_indices, values })
    }

    pub fn from_triplets(n_rows: usize, n_cols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut b = TripletBuilder::with_capacity(n_rows, n_cols, entries.len());
        for &(i, j, v) in entries {
            b.push(i, j, v);
        }
        b.build()
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        TripletBuilder::new(n_rows, n_cols).build()
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_matrix(&alloc::vec![1.0; n])
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
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

    /// `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch { expected: self.n_cols, found: x.len() });
        }
        let mut y = alloc::vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without dimension checks beyond debug assertions.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                s += self.values[k] * x[self.col_indices[k]];
            }
            *yi = s;
        }
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.n_rows {
            return Err(Error::DimensionMismatch { expected: self.n_rows, found: x.len() });
        }
        Ok(dot(x, &self.spmv(y)?))
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::with_capacity(self.n_cols, self.n_rows, self.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                b.push(j, i, v);
            }
        }
        b.build()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `a A + b B` on the union of both patterns.
    pub fn linear_combination(&self, a: f64, other: &SparseMatrix, b: f64) -> Result<Self> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch { expected: self.n_rows * self.n_cols, found: other.n_rows * other.n_cols });
        }
        let mut out = TripletBuilder::with_capacity(self.n_rows, self.n_cols, self.nnz() + other.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                out.push(i, j, a * v);
            }
            for (j, v) in other.row(i) {
                out.push(i, j, b * v);
            }
        }
        Ok(out.build())
    }

    /// Rows `rows` and columns `cols` (both given as index lists) as a new matrix.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = alloc::vec![usize::MAX; self.n_cols];
        for (k, &j) in cols.iter().enumerate() {
            col_map[j] = k;
        }
        let mut b = TripletBuilder::new(rows.len(), cols.len());
        for (r, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                if col_map[j] != usize::MAX {
                    b.push(r, col_map[j], v);
                }
            }
        }
        b.build()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji|` over all stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                let vt = if j < self.n_rows && i < self.n_cols { self.get(j, i) } else { 0.0 };
                worst = worst.max((v - vt).abs());
            }
        }
        worst
    }

    /// Lower and upper bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.n_rows {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                d.set(i, j, v);
            }
        }
        d
    }

    /// Spot check of `A_ij = A_ji` on up to 64 evenly spaced rows.
    fn spot_check_symmetric(&self) -> Result<()> {
        if self.n_rows != self.n_cols {
            return Err(Error::InvalidArgument("matrix is not square".into()));
        }
        let tol = 1e-12 * self.max_abs().max(f64::MIN_POSITIVE);
        let stride = (self.n_rows / 64).max(1);
        for i in (0..self.n_rows).step_by(stride) {
            for (j, v) in self.row(i) {
                if (v - self.get(j, i)).abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric: A[{i}][{j}] = {v}, A[{j}][{i}] = {}",
                        self.get(j, i)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, data: alloc::vec![0.0; n_rows * n_cols] }
    }

    pub fn from_rows(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch { expected: n_rows * n_cols, found: data.len() });
        }
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn mat_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch { expected: self.n_cols, found: x.len() });
        }
        Ok((0..self.n_rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            for j in 0..self.n_cols.min(self.n_rows) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Stores every entry, zeros included, so the pattern is the full matrix.
    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets: (0..=self.n_rows).map(|i| i * self.n_cols).collect(),
            col_indices: (0..self.n_rows).flat_map(|_| 0..self.n_cols).collect(),
            values: self.data.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual target `‖Ax − b‖ ≤ tol ‖b‖`.
    pub tol: f64,
    pub jacobi: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-10, jacobi: true }
    }
}

/// Conjugate gradients from `x₀ = 0`, capped at `10 n` iterations.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], opts: CgOptions) -> Result<Vec<f64>> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if b.len() != a.n_rows {
        return Err(Error::DimensionMismatch { expected: a.n_rows, found: b.len() });
    }
    a.spot_check_symmetric()?;
    let n = b.len();
    let b_norm = norm(b);
    let mut x = alloc::vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let inv_diag: Vec<f64> = if opts.jacobi {
        a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect()
    } else {
        alloc::vec![1.0; n]
    };
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = alloc::vec![0.0; n];
    let mut rz = dot(&r, &z);
    let target = opts.tol * b_norm;
    let cap = 10 * n.max(1);
    for _ in 0..cap {
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::InvalidArgument("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        if norm(&r) <= target {
            return Ok(x);
        }
        for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *zi = ri * di;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NoConvergence { iterations: cap, residual: norm(&r) / b_norm })
}

/// Largest band storage (in entries) [`BandLu`] will allocate.
pub const MAX_BAND_ENTRIES: usize = 64_000_000;

/// LU factorization with partial pivoting in band storage.
///
/// Row `i` stores columns `i − kl ..= i + kl + ku`; the extra `kl` upper
/// diagonals hold the fill created by row interchanges. For a full matrix
/// this is ordinary dense Gaussian elimination.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        if a.n_rows != a.n_cols {
            return Err(Error::InvalidArgument(format!("direct solve needs a square matrix, got {}x{}", a.n_rows, a.n_cols)));
        }
        let n = a.n_rows;
        let (kl, ku) = a.bandwidth();
        let width = 2 * kl + ku + 1;
        if n.saturating_mul(width) > MAX_BAND_ENTRIES {
            return Err(Error::InvalidArgument(format!(
                "band storage {n} x {width} exceeds the direct-solver cap of {MAX_BAND_ENTRIES} entries"
            )));
        }
        let mut band = alloc::vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                band[i * width + (j + kl - i)] = v;
            }
        }
        let scale = a.max_abs();
        let mut lu = Self { n, kl, ku, width, band, pivots: alloc::vec![0; n] };
        lu.eliminate(scale)?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self, scale: f64) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let tiny = 1e-14 * scale;
        let mut row_buf = alloc::vec![0.0; self.width];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.band[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::SingularMatrix { pivot: k });
            }
            self.pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                // Columns < k are already eliminated in both rows.
                for (c, j) in (k..=last_col).enumerate() {
                    row_buf[c] = self.band[self.idx(k, j)];
                }
                for j in k..=last_col {
                    let (ik, ip) = (self.idx(k, j), self.idx(p, j));
                    self.band[ik] = self.band[ip];
                }
                for (c, j) in (k..=last_col).enumerate() {
                    let ip = self.idx(p, j);
                    self.band[ip] = row_buf[c];
                }
            }
            let pivot = self.band[self.idx(k, k)];
            for r in k + 1..=last_row {
                let irk = self.idx(r, k);
                let l = self.band[irk] / pivot;
                self.band[irk] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let (ir, ik) = (self.idx(r, j), self.idx(k, j));
                    self.band[ir] -= l * self.band[ik];
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: b.len() });
        }
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                    x[r] -= self.band[self.idx(r, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.band[self.idx(k, j)] * x[j];
            }
            x[k] = s / self.band[self.idx(k, k)];
        }
        Ok(x)
    }
}

/// Direct solve by band LU with partial pivoting.
pub fn direct_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n_rows {
        return Err(Error::DimensionMismatch { expected: a.n_rows, found: b.len() });
    }
    BandLu::factor(a)?.solve(b)
}
