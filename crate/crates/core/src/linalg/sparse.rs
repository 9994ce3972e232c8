//! Compressed sparse row matrices.

use super::dense::DenseMatrix;
use super::vector::axpy;
use crate::error::{Error, Result};

/// CSR matrix with strictly increasing column indices per row and no stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Validates raw CSR arrays; explicit zeros are removed.
    pub fn new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 || row_ptr[rows] != col_idx.len() {
            return Err(Error::InvalidArgument("malformed CSR row pointer".into()));
        }
        if col_idx.len() != values.len() {
            return Err(Error::InvalidArgument(
                "CSR index and value lengths differ".into(),
            ));
        }
        for i in 0..rows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidArgument(
                    "CSR row pointer is not monotone".into(),
                ));
            }
            let cols_i = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols_i.windows(2).any(|w| w[0] >= w[1]) || cols_i.iter().any(|&c| c >= cols) {
                return Err(Error::InvalidArgument(format!(
                    "CSR row {i} has unsorted or out-of-range columns"
                )));
            }
        }
        let mut m = Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        };
        m.drop_zeros();
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        };
        m.drop_zeros();
        m
    }

    /// Sums duplicate triplets in input order, so the result is reproducible.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; rows + 1];
        for &(i, j, _) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut order = vec![0usize; triplets.len()];
        for (t, &(i, _, _)) in triplets.iter().enumerate() {
            order[next[i]] = t;
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, usize)> = Vec::new();
        for i in 0..rows {
            scratch.clear();
            scratch.extend(
                order[counts[i]..counts[i + 1]]
                    .iter()
                    .map(|&t| (triplets[t].1, t)),
            );
            scratch.sort_unstable();
            let mut k = 0;
            while k < scratch.len() {
                let col = scratch[k].0;
                let mut sum = 0.0;
                while k < scratch.len() && scratch[k].0 == col {
                    sum += triplets[scratch[k].1].2;
                    k += 1;
                }
                if sum != 0.0 {
                    col_idx.push(col);
                    values.push(sum);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Keeps every nonzero entry of a dense matrix.
    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..d.rows() {
            for (j, v) in d.row(i).iter().enumerate() {
                if *v != 0.0 {
                    col_idx.push(j);
                    values.push(*v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: d.rows(),
            cols: d.cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    fn drop_zeros(&mut self) {
        if !self.values.contains(&0.0) {
            return;
        }
        let mut w = 0;
        let mut start = 0;
        for i in 0..self.rows {
            let end = self.row_ptr[i + 1];
            for k in start..end {
                if self.values[k] != 0.0 {
                    self.col_idx[w] = self.col_idx[k];
                    self.values[w] = self.values[k];
                    w += 1;
                }
            }
            start = end;
            self.row_ptr[i + 1] = w;
        }
        self.col_idx.truncate(w);
        self.values.truncate(w);
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |k| v[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "spmv with {} columns and a vector of length {}",
                self.cols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` into a caller buffer; lengths are checked in debug builds.
    #[inline]
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            let mut s = 0.0;
            for (j, a) in c.iter().zip(v) {
                s += a * x[*j];
            }
            *yi = s;
        }
    }

    /// `y += alpha·A x`.
    pub fn spmv_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            let mut s = 0.0;
            for (j, a) in c.iter().zip(v) {
                s += a * x[*j];
            }
            *yi += alpha * s;
        }
    }

    /// `y += alpha·Aᵀ x` without forming the transpose.
    pub fn transpose_spmv_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (i, xi) in x.iter().enumerate() {
            let s = alpha * xi;
            if s == 0.0 {
                continue;
            }
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                y[*j] += a * s;
            }
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                let k = next[*j];
                col_idx[k] = i;
                values[k] = *a;
                next[*j] += 1;
            }
        }
        CsrMatrix {
            rows: self.cols,
            cols: self.rows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// Sparse product `A B` by row-wise accumulation.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        self.matmul_scaled(None, other)
    }

    /// `A diag(s) B`, or `A B` when `s` is `None`.
    fn matmul_scaled(&self, s: Option<&[f64]>, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = vec![0.0; other.cols];
        let mut marker = vec![usize::MAX; other.cols];
        let mut pattern: Vec<usize> = Vec::new();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.rows {
            pattern.clear();
            let (ca, va) = self.row(i);
            for (k, a) in ca.iter().zip(va) {
                let a = match s {
                    Some(s) => a * s[*k],
                    None => *a,
                };
                let (cb, vb) = other.row(*k);
                for (j, b) in cb.iter().zip(vb) {
                    if marker[*j] != i {
                        marker[*j] = i;
                        acc[*j] = 0.0;
                        pattern.push(*j);
                    }
                    acc[*j] += a * b;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                if acc[j] != 0.0 {
                    col_idx.push(j);
                    values.push(acc[j]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            rows: self.rows,
            cols: other.cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// `alpha·A + beta·B` for matrices of equal shape.
    pub fn linear_combination(
        &self,
        alpha: f64,
        other: &CsrMatrix,
        beta: f64,
    ) -> Result<CsrMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(
                "sum of differently shaped matrices".into(),
            ));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.rows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let (j, v) = if q >= cb.len() || (p < ca.len() && ca[p] < cb[q]) {
                    p += 1;
                    (ca[p - 1], alpha * va[p - 1])
                } else if p >= ca.len() || cb[q] < ca[p] {
                    q += 1;
                    (cb[q - 1], beta * vb[q - 1])
                } else {
                    p += 1;
                    q += 1;
                    (ca[p - 1], alpha * va[p - 1] + beta * vb[q - 1])
                };
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        if alpha == 0.0 {
            return CsrMatrix::zeros(self.rows, self.cols);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Replaces the rows and columns in `nodes` by unit vectors, keeping the size.
    pub fn with_symmetric_dirichlet(&self, nodes: &[usize]) -> CsrMatrix {
        let mut fixed = vec![false; self.rows.max(self.cols)];
        for &k in nodes {
            fixed[k] = true;
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            if fixed[i] {
                col_idx.push(i);
                values.push(1.0);
            } else {
                let (c, v) = self.row(i);
                for (j, a) in c.iter().zip(v) {
                    if !fixed[*j] && *a != 0.0 {
                        col_idx.push(*j);
                        values.push(*a);
                    }
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Zeroes the columns listed in `cols`.
    pub fn without_columns(&self, cols: &[usize]) -> CsrMatrix {
        let mut drop = vec![false; self.cols];
        for &j in cols {
            drop[j] = true;
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                if !drop[*j] {
                    col_idx.push(*j);
                    values.push(*a);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Assembles a block matrix; `None` blocks are zero. Every block row must
    /// contain at least one block fixing its height, likewise for columns.
    pub fn block(blocks: &[Vec<Option<&CsrMatrix>>]) -> Result<CsrMatrix> {
        let nbr = blocks.len();
        let nbc = blocks.first().map_or(0, Vec::len);
        let mut heights = vec![None; nbr];
        let mut widths = vec![None; nbc];
        for (bi, brow) in blocks.iter().enumerate() {
            if brow.len() != nbc {
                return Err(Error::DimensionMismatch("ragged block layout".into()));
            }
            for (bj, b) in brow.iter().enumerate() {
                if let Some(b) = b {
                    for (slot, v) in [(&mut heights[bi], b.rows), (&mut widths[bj], b.cols)] {
                        match slot {
                            Some(old) if *old != v => {
                                return Err(Error::DimensionMismatch(format!(
                                    "block ({bi}, {bj}) does not fit its row or column"
                                )))
                            }
                            _ => *slot = Some(v),
                        }
                    }
                }
            }
        }
        let heights: Vec<usize> = heights
            .into_iter()
            .map(|h| h.ok_or_else(|| Error::DimensionMismatch("empty block row".into())))
            .collect::<Result<_>>()?;
        let widths: Vec<usize> = widths
            .into_iter()
            .map(|w| w.ok_or_else(|| Error::DimensionMismatch("empty block column".into())))
            .collect::<Result<_>>()?;
        let mut offsets = vec![0usize; nbc + 1];
        for j in 0..nbc {
            offsets[j + 1] = offsets[j] + widths[j];
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for (bi, brow) in blocks.iter().enumerate() {
            for i in 0..heights[bi] {
                for (bj, b) in brow.iter().enumerate() {
                    if let Some(b) = b {
                        let (c, v) = b.row(i);
                        col_idx.extend(c.iter().map(|j| j + offsets[bj]));
                        values.extend_from_slice(v);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        Ok(CsrMatrix {
            rows: heights.iter().sum(),
            cols: offsets[nbc],
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Extracts rows `r0..r0+rows` and columns `c0..c0+cols`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CsrMatrix {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in r0..r0 + rows {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                if *j >= c0 && *j < c0 + cols {
                    col_idx.push(j - c0);
                    values.push(*a);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            let row = d.row_mut(i);
            for (j, a) in c.iter().zip(v) {
                row[*j] = *a;
            }
        }
        d
    }

    /// `A X` with a dense right factor.
    pub fn mul_dense(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != x.rows() {
            return Err(Error::DimensionMismatch("sparse times dense shapes".into()));
        }
        let mut out = DenseMatrix::zeros(self.rows, x.cols());
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            let row = out.row_mut(i);
            for (j, a) in c.iter().zip(v) {
                axpy(*a, x.row(*j), row);
            }
        }
        Ok(out)
    }

    /// `X A` with a dense left factor.
    pub fn dense_mul(x: &DenseMatrix, a: &CsrMatrix) -> Result<DenseMatrix> {
        if x.cols() != a.rows {
            return Err(Error::DimensionMismatch("dense times sparse shapes".into()));
        }
        let mut out = DenseMatrix::zeros(x.rows(), a.cols);
        for i in 0..x.rows() {
            let (xr, orow) = (x.row(i).to_vec(), out.row_mut(i));
            for (k, xv) in xr.iter().enumerate() {
                if *xv == 0.0 {
                    continue;
                }
                let (c, v) = a.row(k);
                for (j, av) in c.iter().zip(v) {
                    orow[*j] += xv * av;
                }
            }
        }
        Ok(out)
    }

    /// Largest `|a_ij − a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let t = self.transpose();
        let d = self.linear_combination(1.0, &t, -1.0).expect("square");
        d.max_abs() / scale
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Returns `Ct · diag(d)⁻¹ · C` as a sparse matrix.
pub fn sparse_triple_diag(ct: &CsrMatrix, d: &[f64], c: &CsrMatrix) -> Result<CsrMatrix> {
    if ct.cols != d.len() || c.rows != d.len() {
        return Err(Error::DimensionMismatch(format!(
            "triple product {}x{} · diag({}) · {}x{}",
            ct.rows,
            ct.cols,
            d.len(),
            c.rows,
            c.cols
        )));
    }
    if let Some(k) = d.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "diagonal entry {k} is not positive ({})",
            d[k]
        )));
    }
    let inv: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
    ct.matmul_scaled(Some(&inv), c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                if rng.gen::<f64>() < density {
                    t.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        CsrMatrix::from_triplets(rows, cols, &t).unwrap()
    }

    #[test]
    fn identity_spmv_returns_input() {
        let x = vec![1.0, -3.0, 2.5];
        assert_eq!(CsrMatrix::identity(3).spmv(&x).unwrap(), x);
    }

    #[test]
    fn spmv_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = random_sparse(&mut rng, 20, 20, 0.3);
            let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = a.spmv(&x).unwrap();
            let yd = a.to_dense().matvec(&x).unwrap();
            for (p, q) in y.iter().zip(&yd) {
                assert!((p - q).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn spmv_rejects_wrong_length() {
        assert!(CsrMatrix::identity(3).spmv(&[1.0]).is_err());
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m =
            CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 0, -1.0)])
                .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 3.0);
    }

    #[test]
    fn triple_diag_with_unit_weights_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ct = random_sparse(&mut rng, 6, 4, 0.5);
        let out = sparse_triple_diag(&ct, &[1.0; 4], &CsrMatrix::identity(4)).unwrap();
        assert_eq!(out, ct);
    }

    #[test]
    fn triple_diag_matches_dense_oracle_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let c = random_sparse(&mut rng, 15, 25, 0.2);
            let d: Vec<f64> = (0..15).map(|_| rng.gen_range(0.5..2.0)).collect();
            let ct = c.transpose();
            let p = sparse_triple_diag(&ct, &d, &c).unwrap();
            let dinv = DenseMatrix::from_diagonal(&d.iter().map(|v| 1.0 / v).collect::<Vec<_>>());
            let oracle = ct
                .to_dense()
                .matmul(&dinv)
                .unwrap()
                .matmul(&c.to_dense())
                .unwrap();
            assert!(p.to_dense().add_scaled(-1.0, &oracle).unwrap().max_abs() <= 1e-13);
            assert!(p.asymmetry() <= 1e-14);
        }
    }

    #[test]
    fn triple_diag_rejects_nonpositive_weight() {
        let c = CsrMatrix::identity(2);
        assert!(sparse_triple_diag(&c, &[1.0, 0.0], &c).is_err());
    }

    #[test]
    fn block_assembly_and_submatrix() {
        let a = CsrMatrix::identity(2);
        let b = CsrMatrix::from_triplets(2, 1, &[(1, 0, 4.0)]).unwrap();
        let bt = b.transpose();
        let big = CsrMatrix::block(&[vec![Some(&a), Some(&b)], vec![Some(&bt), None]]).unwrap();
        assert_eq!(big.rows(), 3);
        assert_eq!(big.get(2, 1), 4.0);
        assert_eq!(big.get(1, 2), 4.0);
        assert_eq!(big.submatrix(0, 2, 2, 1), b);
    }

    #[test]
    fn dirichlet_replacement_is_symmetric() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 2.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 2.0),
            ],
        )
        .unwrap();
        let d = a.with_symmetric_dirichlet(&[0]);
        assert_eq!(d.get(0, 0), 1.0);
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(d.get(1, 0), 0.0);
        assert_eq!(d.asymmetry(), 0.0);
    }

    #[test]
    fn matmul_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_sparse(&mut rng, 7, 9, 0.4);
        let b = random_sparse(&mut rng, 9, 5, 0.4);
        let p = a.matmul(&b).unwrap().to_dense();
        let q = a.to_dense().matmul(&b.to_dense()).unwrap();
        assert!(p.add_scaled(-1.0, &q).unwrap().max_abs() < 1e-14);
        let pd = a.mul_dense(&b.to_dense()).unwrap();
        assert!(pd.add_scaled(-1.0, &q).unwrap().max_abs() < 1e-14);
        let dp = CsrMatrix::dense_mul(&a.to_dense(), &b).unwrap();
        assert!(dp.add_scaled(-1.0, &q).unwrap().max_abs() < 1e-14);
    }
}
