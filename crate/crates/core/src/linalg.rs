//! Design matrix storage, cached column norms and active-set bookkeeping.

use thiserror::Error;

/// Fraction of nonzeros above which a matrix is stored densely.
pub const DENSE_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("row {0} is identically zero")]
    ZeroRow(usize),
    #[error("negative entry at ({0}, {1})")]
    NegativeEntry(usize, usize),
    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix has no rows or no columns")]
    EmptyMatrix,
    #[error("index ({0}, {1}) out of bounds")]
    OutOfBounds(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// Column-major, `m * n` entries.
    Dense(Vec<f64>),
    /// Compressed sparse columns.
    Sparse {
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

/// Column-accessible matrix with the per-column norms used by screening tests.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    m: usize,
    n: usize,
    storage: Storage,
    zero_rows_i0: Vec<usize>,
    col_norm2: Vec<f64>,
    col_norm2_restricted: Vec<f64>,
    col_norm1: Vec<f64>,
    col_norm1_on_i0: Vec<f64>,
}

impl DesignMatrix {
    /// Builds from row-major rows without checking the zero-row or sign
    /// invariants; storage is chosen by density.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let m = rows.len();
        if m == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(LinalgError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m, n, &triplets)
    }

    /// Builds from `(row, col, value)` entries. Duplicates are summed.
    pub fn from_triplets(
        m: usize,
        n: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        if m == 0 || n == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in entries {
            if i >= m || j >= n {
                return Err(LinalgError::OutOfBounds(i, j));
            }
            if !v.is_finite() {
                return Err(LinalgError::NonFinite(i, j));
            }
            cols[j].push((i, v));
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for col in cols.iter_mut() {
            col.sort_by_key(|&(i, _)| i);
            let mut k = 0;
            while k < col.len() {
                let i = col[k].0;
                let mut v = 0.0;
                while k < col.len() && col[k].0 == i {
                    v += col[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    indices.push(i);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        let nnz = values.len();
        let density = nnz as f64 / (m as f64 * n as f64);
        let storage = if density > DENSE_THRESHOLD {
            let mut data = vec![0.0; m * n];
            for j in 0..n {
                for k in indptr[j]..indptr[j + 1] {
                    data[j * m + indices[k]] = values[k];
                }
            }
            Storage::Dense(data)
        } else {
            Storage::Sparse {
                indptr,
                indices,
                values,
            }
        };
        let mut a = DesignMatrix {
            m,
            n,
            storage,
            zero_rows_i0: Vec::new(),
            col_norm2: Vec::new(),
            col_norm2_restricted: Vec::new(),
            col_norm1: Vec::new(),
            col_norm1_on_i0: Vec::new(),
        };
        a.refresh_norms();
        Ok(a)
    }

    /// Replaces the row set I₀ used by the restricted norms.
    pub fn with_i0(mut self, i0: &[usize]) -> Result<Self, LinalgError> {
        let mut i0 = i0.to_vec();
        i0.sort_unstable();
        i0.dedup();
        if let Some(&i) = i0.iter().find(|&&i| i >= self.m) {
            return Err(LinalgError::OutOfBounds(i, 0));
        }
        self.zero_rows_i0 = i0;
        self.refresh_norms();
        Ok(self)
    }

    fn refresh_norms(&mut self) {
        let mut in_i0 = vec![false; self.m];
        for &i in &self.zero_rows_i0 {
            in_i0[i] = true;
        }
        let n = self.n;
        let mut n2 = vec![0.0; n];
        let mut n2r = vec![0.0; n];
        let mut n1 = vec![0.0; n];
        let mut n1i0 = vec![0.0; n];
        for j in 0..n {
            let (mut s2, mut s2r, mut s1, mut s1i0) = (0.0, 0.0, 0.0, 0.0);
            self.for_each_in_col(j, |i, v| {
                s2 += v * v;
                s1 += v.abs();
                if in_i0[i] {
                    s1i0 += v.abs();
                } else {
                    s2r += v * v;
                }
            });
            n2[j] = s2.sqrt();
            n2r[j] = s2r.sqrt();
            n1[j] = s1;
            n1i0[j] = s1i0;
        }
        self.col_norm2 = n2;
        self.col_norm2_restricted = n2r;
        self.col_norm1 = n1;
        self.col_norm1_on_i0 = n1i0;
    }

    /// Checks the invariants the losses rely on.
    pub fn validate(&self, require_nonneg: bool) -> Result<(), LinalgError> {
        if let Some(&i) = self.zero_rows().first() {
            return Err(LinalgError::ZeroRow(i));
        }
        if require_nonneg {
            for j in 0..self.n {
                let mut bad = None;
                self.for_each_in_col(j, |i, v| {
                    if v < 0.0 && bad.is_none() {
                        bad = Some(i);
                    }
                });
                if let Some(i) = bad {
                    return Err(LinalgError::NegativeEntry(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.iter().filter(|v| **v != 0.0).count(),
            Storage::Sparse { values, .. } => values.len(),
        }
    }

    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.m as f64 * self.n as f64)
    }

    pub fn i0(&self) -> &[usize] {
        &self.zero_rows_i0
    }

    pub fn col_norm2(&self) -> &[f64] {
        &self.col_norm2
    }

    pub fn col_norm2_restricted(&self) -> &[f64] {
        &self.col_norm2_restricted
    }

    pub fn col_norm1(&self) -> &[f64] {
        &self.col_norm1
    }

    pub fn col_norm1_on_i0(&self) -> &[f64] {
        &self.col_norm1_on_i0
    }

    /// Rows whose entries are all zero.
    pub fn zero_rows(&self) -> Vec<usize> {
        let mut seen = vec![false; self.m];
        for j in 0..self.n {
            self.for_each_in_col(j, |i, v| {
                if v != 0.0 {
                    seen[i] = true;
                }
            });
        }
        (0..self.m).filter(|&i| !seen[i]).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d[j * self.m + i],
            Storage::Sparse {
                indptr,
                indices,
                values,
            } => {
                let range = indptr[j]..indptr[j + 1];
                match indices[range.clone()].binary_search(&i) {
                    Ok(k) => values[range.start + k],
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// Visits the stored nonzero entries of column `j` in ascending row order.
    #[inline]
    pub fn for_each_in_col<F: FnMut(usize, f64)>(&self, j: usize, mut f: F) {
        match &self.storage {
            Storage::Dense(d) => {
                for (i, &v) in d[j * self.m..(j + 1) * self.m].iter().enumerate() {
                    if v != 0.0 {
                        f(i, v);
                    }
                }
            }
            Storage::Sparse {
                indptr,
                indices,
                values,
            } => {
                for k in indptr[j]..indptr[j + 1] {
                    f(indices[k], values[k]);
                }
            }
        }
    }

    /// `aⱼᵀ v`.
    #[inline]
    pub fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d[j * self.m..(j + 1) * self.m]
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum(),
            Storage::Sparse {
                indptr,
                indices,
                values,
            } => (indptr[j]..indptr[j + 1])
                .map(|k| values[k] * v[indices[k]])
                .sum(),
        }
    }

    /// `out += alpha * aⱼ`.
    #[inline]
    pub fn col_axpy(&self, j: usize, alpha: f64, out: &mut [f64]) {
        match &self.storage {
            Storage::Dense(d) => {
                for (o, a) in out.iter_mut().zip(&d[j * self.m..(j + 1) * self.m]) {
                    *o += alpha * a;
                }
            }
            Storage::Sparse {
                indptr,
                indices,
                values,
            } => {
                for k in indptr[j]..indptr[j + 1] {
                    out[indices[k]] += alpha * values[k];
                }
            }
        }
    }

    /// `A x`, accumulated column by column in ascending order.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.check_len(x.len(), self.n)?;
        let mut out = vec![0.0; self.m];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                self.col_axpy(j, xj, &mut out);
            }
        }
        Ok(out)
    }

    /// `Aᵀ v`.
    pub fn rmatvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.check_len(v.len(), self.m)?;
        Ok((0..self.n).map(|j| self.col_dot(j, v)).collect())
    }

    /// `max_j ‖aⱼ‖₁ · max_i ‖Aᵢ‖₁`, an upper bound on `‖A‖₂²`.
    pub fn norm1_times_norm_inf(&self) -> f64 {
        let mut row_sums = vec![0.0; self.m];
        for j in 0..self.n {
            self.for_each_in_col(j, |i, v| row_sums[i] += v.abs());
        }
        let n1 = self.col_norm1.iter().cloned().fold(0.0, f64::max);
        let ninf = row_sums.into_iter().fold(0.0, f64::max);
        n1 * ninf
    }

    /// Dense row-major copy.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let mut rows = vec![vec![0.0; self.n]; self.m];
        for j in 0..self.n {
            self.for_each_in_col(j, |i, v| rows[i][j] = v);
        }
        rows
    }

    /// Nonzero entries as `(row, col, value)` in column-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for j in 0..self.n {
            self.for_each_in_col(j, |i, v| out.push((i, j, v)));
        }
        out
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<(), LinalgError> {
        if got != expected {
            Err(LinalgError::DimensionMismatch { expected, got })
        } else {
            Ok(())
        }
    }
}

/// Strict constructor: rejects zero rows, and negative entries when asked.
pub fn build_matrix(
    rows: &[Vec<f64>],
    require_nonneg: bool,
    i0: &[usize],
) -> Result<DesignMatrix, LinalgError> {
    let a = DesignMatrix::from_rows(rows)?.with_i0(i0)?;
    a.validate(require_nonneg)?;
    Ok(a)
}

/// The preserved set of columns. Columns only ever leave it.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    mask: Vec<bool>,
    count: usize,
    screened_at: Vec<Option<usize>>,
}

impl ActiveSet {
    pub fn full(n: usize) -> Self {
        ActiveSet {
            mask: vec![true; n],
            count: n,
            screened_at: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.mask[j]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Iteration at which `j` was screened, if it was.
    pub fn screened_at(&self, j: usize) -> Option<usize> {
        self.screened_at[j]
    }

    /// Removes `j`; returns false if it was already inactive.
    pub fn deactivate(&mut self, j: usize, iter: usize) -> bool {
        if self.mask[j] {
            self.mask[j] = false;
            self.count -= 1;
            self.screened_at[j] = Some(iter);
            true
        } else {
            false
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(j, &a)| if a { Some(j) } else { None })
    }

    pub fn screened(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(j, &a)| if a { None } else { Some(j) })
    }
}

/// `A x` touching only active columns.
pub fn masked_matvec(
    a: &DesignMatrix,
    x: &[f64],
    active: &ActiveSet,
) -> Result<Vec<f64>, LinalgError> {
    if x.len() != a.cols() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.cols(),
            got: x.len(),
        });
    }
    if active.len() != a.cols() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.cols(),
            got: active.len(),
        });
    }
    let mut out = vec![0.0; a.rows()];
    for j in active.indices() {
        if x[j] != 0.0 {
            a.col_axpy(j, x[j], &mut out);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessReport {
    pub dropped_rows: Vec<usize>,
    /// Original ℓ2 norm of each column; zero columns keep scale 1.
    pub scales: Vec<f64>,
}

/// Drops all-zero rows and rescales columns to unit ℓ2 norm.
pub fn preprocess(
    a: &DesignMatrix,
    y: &[f64],
) -> Result<(DesignMatrix, Vec<f64>, PreprocessReport), LinalgError> {
    if y.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            got: y.len(),
        });
    }
    let dropped = a.zero_rows();
    if dropped.len() == a.rows() {
        return Err(LinalgError::EmptyMatrix);
    }
    let mut new_index = vec![usize::MAX; a.rows()];
    let mut y_new = Vec::with_capacity(a.rows() - dropped.len());
    let mut next = 0;
    let mut d = 0;
    for i in 0..a.rows() {
        if d < dropped.len() && dropped[d] == i {
            d += 1;
            continue;
        }
        new_index[i] = next;
        y_new.push(y[i]);
        next += 1;
    }
    let scales: Vec<f64> = a
        .col_norm2()
        .iter()
        .map(|&s| if s > 0.0 { s } else { 1.0 })
        .collect();
    let mut entries = Vec::with_capacity(a.nnz());
    for j in 0..a.cols() {
        a.for_each_in_col(j, |i, v| entries.push((new_index[i], j, v / scales[j])));
    }
    let i0: Vec<usize> = a
        .i0()
        .iter()
        .filter(|&&i| new_index[i] != usize::MAX)
        .map(|&i| new_index[i])
        .collect();
    let out = DesignMatrix::from_triplets(next, a.cols(), &entries)?.with_i0(&i0)?;
    Ok((
        out,
        y_new,
        PreprocessReport {
            dropped_rows: dropped,
            scales,
        },
    ))
}
