use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows handed to a single rayon task by the row-parallel kernels.
const ROW_TASK: usize = 32;

/// Input rows folded into one partial sum by reducing kernels (`matmul_tn`).
/// Fixed independently of the thread count so that the summation tree, and
/// therefore every bit of the result, does not depend on the pool size.
const REDUCE_CHUNK: usize = 512;

/// Row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix({}x{}", self.rows, self.cols)?;
        if self.data.len() <= 64 {
            for r in 0..self.rows {
                write!(f, "\n  {:?}", self.row(r))?;
            }
        }
        write!(f, ")")
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite entry {bad}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::filled(1, 1, value)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copies rows `start..end` into a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.rows {
            return Err(Error::invalid(format!(
                "row range {start}..{end} outside 0..{}",
                self.rows
            )));
        }
        Ok(Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::invalid(format!(
                "{op}: shape {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, op: &str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other, op)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn sigmoid(&self) -> Self {
        self.map(sigmoid)
    }

    pub fn relu(&self) -> Self {
        self.map(relu)
    }

    /// `self += other`.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `self · other`. Zero entries of `self` are skipped, which makes the
    /// product cheap for bag-of-words feature matrices.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "matmul: {:?} x {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (k, p) = (self.cols, other.cols);
        let mut out = Self::zeros(self.rows, p);
        if p == 0 {
            return Ok(out);
        }
        out.data
            .par_chunks_mut(ROW_TASK * p)
            .enumerate()
            .for_each(|(task, block)| {
                let first = task * ROW_TASK;
                for (i, out_row) in block.chunks_mut(p).enumerate() {
                    let a_row = &self.data[(first + i) * k..(first + i + 1) * k];
                    for (j, &a) in a_row.iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        let b_row = &other.data[j * p..(j + 1) * p];
                        for (o, &b) in out_row.iter_mut().zip(b_row) {
                            *o += a * b;
                        }
                    }
                }
            });
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn matmul_tn(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::invalid(format!(
                "matmul_tn: {:?}ᵀ x {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (m, p) = (self.cols, other.cols);
        let partial = |start: usize| {
            let end = (start + REDUCE_CHUNK).min(self.rows);
            let mut acc = vec![0.0; m * p];
            for i in start..end {
                let g_row = other.row(i);
                for (j, &a) in self.row(i).iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for (o, &g) in acc[j * p..(j + 1) * p].iter_mut().zip(g_row) {
                        *o += a * g;
                    }
                }
            }
            acc
        };
        let starts: Vec<usize> = (0..self.rows).step_by(REDUCE_CHUNK).collect();
        let partials: Vec<Vec<f64>> = starts.par_iter().map(|&s| partial(s)).collect();
        let mut data = vec![0.0; m * p];
        for part in &partials {
            for (o, v) in data.iter_mut().zip(part) {
                *o += v;
            }
        }
        Ok(Self { rows: m, cols: p, data })
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::invalid(format!(
                "matmul_nt: {:?} x {:?}ᵀ",
                self.shape(),
                other.shape()
            )));
        }
        let p = other.rows;
        let mut out = Self::zeros(self.rows, p);
        if p == 0 {
            return Ok(out);
        }
        out.data
            .par_chunks_mut(ROW_TASK * p)
            .enumerate()
            .for_each(|(task, block)| {
                let first = task * ROW_TASK;
                for (i, out_row) in block.chunks_mut(p).enumerate() {
                    let a_row = self.row(first + i);
                    for (j, o) in out_row.iter_mut().enumerate() {
                        *o = dot(a_row, other.row(j));
                    }
                }
            });
        Ok(out)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Logistic function, evaluated on the branch that cannot overflow `exp`.
/// Saturated tails are pinned to the nearest floats inside (0, 1).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Named entrywise kernels, for callers that pick the operation at runtime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementwise {
    Sigmoid,
    Relu,
    Add,
    Sub,
    Hadamard,
    Scale(f64),
}

pub fn elementwise(op: Elementwise, args: &[&DenseMatrix]) -> Result<DenseMatrix> {
    let arity = match op {
        Elementwise::Sigmoid | Elementwise::Relu | Elementwise::Scale(_) => 1,
        _ => 2,
    };
    if args.len() != arity {
        return Err(Error::invalid(format!(
            "{op:?} takes {arity} operand(s), got {}",
            args.len()
        )));
    }
    match op {
        Elementwise::Sigmoid => Ok(args[0].sigmoid()),
        Elementwise::Relu => Ok(args[0].relu()),
        Elementwise::Scale(f) => Ok(args[0].scale(f)),
        Elementwise::Add => args[0].add(args[1]),
        Elementwise::Sub => args[0].sub(args[1]),
        Elementwise::Hadamard => args[0].hadamard(args[1]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;
    use proptest::prelude::*;

    fn naive(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    fn random(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    #[test]
    fn hand_product() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[5.0], [6.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[17.0, 39.0]);
    }

    #[test]
    fn identity_is_neutral() {
        let mut rng = Rng::new(3);
        let a = random(4, 6, &mut rng);
        assert_eq!(a.matmul(&DenseMatrix::identity(6)).unwrap(), a);
    }

    #[test]
    fn row_times_column_is_dot() {
        let a = DenseMatrix::from_rows(&[[1.0, -2.0, 0.5]]).unwrap();
        let b = DenseMatrix::from_rows(&[[4.0], [1.0], [2.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (1, 1));
        assert_eq!(c.get(0, 0), 3.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(Error::InvalidArgument(_))));
        assert!(a.add(&DenseMatrix::zeros(3, 2)).is_err());
        assert!(a.matmul_tn(&DenseMatrix::zeros(3, 1)).is_err());
        assert!(a.matmul_nt(&DenseMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn construction_rejects_nan_and_bad_length() {
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn activations() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(relu(-3.0), 0.0);
        assert_eq!(relu(3.0), 3.0);
        // 1/(1+e^-500) is 1 - 7e-218, which rounds to exactly 1.0.
        assert_eq!(sigmoid(500.0), 1.0 - f64::EPSILON / 2.0);
        assert_eq!(sigmoid(-800.0), f64::MIN_POSITIVE);
        assert!(sigmoid(-500.0) > 0.0 && sigmoid(-500.0) < 1e-200);
        assert!(sigmoid(-800.0).is_finite());
    }

    #[test]
    fn elementwise_dispatch() {
        let a = DenseMatrix::from_rows(&[[-1.0, 2.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(elementwise(Elementwise::Relu, &[&a]).unwrap().data(), &[0.0, 2.0]);
        assert_eq!(
            elementwise(Elementwise::Hadamard, &[&a, &b]).unwrap().data(),
            &[-3.0, 8.0]
        );
        assert_eq!(elementwise(Elementwise::Scale(2.0), &[&a]).unwrap().data(), &[-2.0, 4.0]);
        assert!(elementwise(Elementwise::Add, &[&a]).is_err());
    }

    #[test]
    fn transposed_kernels_match_naive() {
        let mut rng = Rng::new(11);
        let a = random(700, 5, &mut rng);
        let g = random(700, 3, &mut rng);
        let tn = a.matmul_tn(&g).unwrap();
        let expect = naive(&a.transpose(), &g);
        assert!(tn.max_abs_diff(&expect) < 1e-10);
        let w = random(4, 5, &mut rng);
        let nt = a.matmul_nt(&w).unwrap();
        assert!(nt.max_abs_diff(&naive(&a, &w.transpose())) < 1e-12);
    }

    #[test]
    fn kernels_are_thread_count_independent() {
        let mut rng = Rng::new(5);
        let a = random(1500, 7, &mut rng);
        let g = random(1500, 4, &mut rng);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| (a.matmul_tn(&g).unwrap(), a.matmul(&a.matmul_tn(&g).unwrap()).unwrap()))
        };
        assert_eq!(run(1), run(3));
    }

    proptest! {
        #[test]
        fn sigmoid_in_open_unit_interval(x in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
            let s = sigmoid(x);
            prop_assert!(s > 0.0 && s < 1.0);
            prop_assert!(relu(x) >= 0.0);
        }

        #[test]
        fn transpose_of_product(seed in any::<u64>()) {
            let mut rng = Rng::new(seed);
            let a = random(5, 7, &mut rng);
            let b = random(7, 3, &mut rng);
            let lhs = a.matmul(&b).unwrap().transpose();
            let rhs = b.transpose().matmul(&a.transpose()).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
        }
    }
}
