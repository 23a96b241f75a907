use rayon::prelude::*;

use super::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};

const ROW_TASK: usize = 64;

/// Sparse matrix in row-major sorted coordinate form.
///
/// Entries are kept sorted by `(row, col)` with duplicates merged by summation
/// at construction time; `row_ptr` indexes the start of every row so the
/// layout doubles as CSR.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(Error::invalid(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite value at ({r}, {c})")));
            }
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("merged entry has a predecessor") += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(col, value)` pairs of one row, together with their global entry
    /// offset.
    pub fn row_entries(&self, r: usize) -> (usize, &[usize], &[f64]) {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (s, &self.col_idx[s..e], &self.values[s..e])
    }

    /// All entries as `(row, col, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |i| (r, self.col_idx[i], self.values[i]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (_, cols, vals) = self.row_entries(r);
        cols.binary_search(&c).map_or(0.0, |i| vals[i])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            out.set(r, c, v);
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let triplets = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.cols, self.rows, triplets).expect("transpose keeps indices valid")
    }

    /// Same sparsity pattern with every stored value multiplied by the
    /// matching entry of `weights` (aligned with storage order).
    pub fn reweighted(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.nnz() {
            return Err(Error::invalid(format!(
                "{} weights for {} stored entries",
                weights.len(),
                self.nnz()
            )));
        }
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(weights) {
            *v *= w;
        }
        Ok(out)
    }

    /// Sparse × dense product, `O(nnz · b.cols)`.
    pub fn spmm(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        self.spmm_with(None, b)
    }

    /// `(self ∘ W) · b` where `W` holds one weight per stored entry.
    pub fn spmm_weighted(&self, weights: &[f64], b: &DenseMatrix) -> Result<DenseMatrix> {
        if weights.len() != self.nnz() {
            return Err(Error::invalid(format!(
                "{} weights for {} stored entries",
                weights.len(),
                self.nnz()
            )));
        }
        self.spmm_with(Some(weights), b)
    }

    fn spmm_with(&self, weights: Option<&[f64]>, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != b.rows() {
            return Err(Error::invalid(format!(
                "spmm: {}x{} x {:?}",
                self.rows,
                self.cols,
                b.shape()
            )));
        }
        let p = b.cols();
        let mut out = DenseMatrix::zeros(self.rows, p);
        if p == 0 {
            return Ok(out);
        }
        out.data_mut()
            .par_chunks_mut(ROW_TASK * p)
            .enumerate()
            .for_each(|(task, block)| {
                let first = task * ROW_TASK;
                for (i, out_row) in block.chunks_mut(p).enumerate() {
                    let r = first + i;
                    for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                        let w = weights.map_or(1.0, |w| w[e]);
                        let a = self.values[e] * w;
                        for (o, &x) in out_row.iter_mut().zip(b.row(self.col_idx[e])) {
                            *o += a * x;
                        }
                    }
                }
            });
        Ok(out)
    }

    /// For every stored entry `(r, c)`, `value · ⟨left[r], right[c]⟩`: the
    /// gradient of `⟨left, (self ∘ W)·right⟩` with respect to `W`.
    pub fn sampled_dot(&self, left: &DenseMatrix, right: &DenseMatrix) -> Result<Vec<f64>> {
        if left.rows() != self.rows || right.rows() != self.cols || left.cols() != right.cols() {
            return Err(Error::invalid(format!(
                "sampled_dot: pattern {}x{}, left {:?}, right {:?}",
                self.rows,
                self.cols,
                left.shape(),
                right.shape()
            )));
        }
        Ok(self
            .iter()
            .map(|(r, c, v)| v * dot(left.row(r), right.row(c)))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;
    use proptest::prelude::*;

    #[test]
    fn identity_product() {
        let b = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(SparseMatrix::identity(3).spmm(&b).unwrap(), b);
    }

    #[test]
    fn empty_product_is_zero() {
        let b = DenseMatrix::filled(3, 2, 7.0);
        assert_eq!(SparseMatrix::empty(4, 3).spmm(&b).unwrap(), DenseMatrix::zeros(4, 2));
    }

    #[test]
    fn permutation_product() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let b = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(a.spmm(&b).unwrap().data(), &[3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn construction_merges_and_validates() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(1, 1, 2.0), (0, 0, 1.0), (1, 1, 0.5)])
            .unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(1, 1), 2.5);
        assert!(SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 0, f64::INFINITY)]).is_err());
        assert!(a.spmm(&DenseMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn weighted_product_matches_reweighted_pattern() {
        let a = SparseMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)])
            .unwrap();
        let w = [0.5, -1.0, 2.0];
        let b = DenseMatrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let direct = a.spmm_weighted(&w, &b).unwrap();
        assert_eq!(direct, a.reweighted(&w).unwrap().spmm(&b).unwrap());
        assert_eq!(direct.data(), &[0.5 - 6.0, 12.0]);
    }

    proptest! {
        #[test]
        fn spmm_matches_dense(seed in any::<u64>(), nnz in 0usize..100) {
            let mut rng = Rng::new(seed);
            let (rows, cols) = (1 + rng.below(12), 1 + rng.below(12));
            let triplets = (0..nnz)
                .map(|_| (rng.below(rows), rng.below(cols), rng.normal()))
                .collect();
            let a = SparseMatrix::from_triplets(rows, cols, triplets).unwrap();
            let b = DenseMatrix::from_fn(cols, 4, |_, _| rng.normal());
            let sparse = a.spmm(&b).unwrap();
            let dense = a.to_dense().matmul(&b).unwrap();
            prop_assert!(sparse.max_abs_diff(&dense) <= 1e-12);
            prop_assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
        }
    }
}
