//! The numeric table every stage works on, plus standardization and a
//! seeded generator of block-correlated data.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Binary,
    Multiclass,
    Regression,
    None,
}

/// `n` samples by `m` features, with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Matrix,
    column_names: Vec<String>,
    labels: Option<Vec<f64>>,
    task: Task,
    zero_variance: Vec<bool>,
}

impl DataMatrix {
    /// Checks shape (`n, m >= 2`), finiteness and label consistency with `task`.
    pub fn new(
        values: Matrix,
        column_names: Vec<String>,
        labels: Option<Vec<f64>>,
        task: Task,
    ) -> Result<Self> {
        let (n, m) = (values.rows(), values.cols());
        if n < 2 || m < 2 {
            return Err(Error::InvalidShape { rows: n, cols: m });
        }
        if column_names.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "{} column names for {} columns",
                column_names.len(),
                m
            )));
        }
        for r in 0..n {
            for (c, v) in values.row(r).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
            }
        }
        validate_labels(labels.as_deref(), n, task)?;
        Ok(Self { values, column_names, labels, task, zero_variance: vec![false; m] })
    }

    /// Unlabeled matrix with generated column names `f0, f1, ...`.
    pub fn from_values(values: Matrix) -> Result<Self> {
        let names = (0..values.cols()).map(|j| format!("f{j}")).collect();
        Self::new(values, names, None, Task::None)
    }

    pub fn with_labels(mut self, labels: Vec<f64>, task: Task) -> Result<Self> {
        validate_labels(Some(&labels), self.n(), task)?;
        self.labels = Some(labels);
        self.task = task;
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Number of classes for classification tasks (`max label + 1`).
    pub fn n_classes(&self) -> Option<usize> {
        match self.task {
            Task::Binary => Some(2),
            Task::Multiclass => self
                .labels
                .as_ref()
                .map(|l| l.iter().fold(0.0f64, |a, &b| a.max(b)) as usize + 1),
            _ => None,
        }
    }

    /// Columns whose variance was zero when the matrix was standardized.
    pub fn zero_variance(&self) -> &[bool] {
        &self.zero_variance
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    /// Row subset, keeping names, labels and task.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let m = self.m();
        let mut data = Vec::with_capacity(rows.len() * m);
        for &r in rows {
            data.extend_from_slice(self.values.row(r));
        }
        Matrix::from_vec(rows.len(), m, data)
    }

    pub(crate) fn replace_columns(&self, values: Matrix, names: Vec<String>, zero_var: Vec<bool>) -> Self {
        Self {
            values,
            column_names: names,
            labels: self.labels.clone(),
            task: self.task,
            zero_variance: zero_var,
        }
    }
}

fn validate_labels(labels: Option<&[f64]>, n: usize, task: Task) -> Result<()> {
    let Some(labels) = labels else {
        return match task {
            Task::None => Ok(()),
            _ => Err(Error::InvalidLabels("task requires labels".to_string())),
        };
    };
    if labels.len() != n {
        return Err(Error::InvalidLabels(format!("{} labels for {} rows", labels.len(), n)));
    }
    if labels.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidLabels("non-finite label".to_string()));
    }
    let is_int = |v: f64| v >= 0.0 && libm::floor(v) == v;
    match task {
        Task::Binary => {
            if labels.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidLabels("binary labels must be 0 or 1".to_string()));
            }
        }
        Task::Multiclass => {
            if labels.iter().any(|&v| !is_int(v)) {
                return Err(Error::InvalidLabels(
                    "multiclass labels must be integers 0..C-1".to_string(),
                ));
            }
            let max = labels.iter().fold(0.0f64, |a, &b| a.max(b));
            if max < 1.0 {
                return Err(Error::InvalidLabels("multiclass needs at least 2 classes".to_string()));
            }
        }
        Task::Regression | Task::None => {}
    }
    Ok(())
}

/// Column-wise z-scores with the unbiased (`n - 1`) standard deviation.
///
/// Zero-variance columns become all-zero and are flagged in
/// [`DataMatrix::zero_variance`].
pub fn standardize(x: &DataMatrix) -> DataMatrix {
    let (n, m) = (x.n(), x.m());
    let mut out = x.values.clone();
    let mut flags = vec![false; m];
    for j in 0..m {
        let mean = (0..n).map(|i| x.values[(i, j)]).sum::<f64>() / n as f64;
        let ss = (0..n)
            .map(|i| {
                let d = x.values[(i, j)] - mean;
                d * d
            })
            .sum::<f64>();
        let sd = libm::sqrt(ss / (n - 1) as f64);
        // Relative cutoff so that round-off on a constant column counts as zero.
        let scale = (0..n).map(|i| x.values[(i, j)].abs()).fold(0.0f64, f64::max);
        if sd == 0.0 || sd <= 1e-14 * scale {
            flags[j] = true;
            for i in 0..n {
                out[(i, j)] = 0.0;
            }
        } else {
            for i in 0..n {
                out[(i, j)] = (x.values[(i, j)] - mean) / sd;
            }
        }
    }
    x.replace_columns(out, x.column_names.clone(), flags)
}

/// Reorders columns (and their names) so that new column `p` is old column
/// `order.sequence()[p]`. Values are copied bit for bit.
pub fn apply_permutation(x: &DataMatrix, order: &crate::Permutation) -> Result<DataMatrix> {
    let m = x.m();
    if order.len() != m {
        return Err(Error::NotAPermutation(m));
    }
    let seq = order.sequence();
    let mut out = Matrix::zeros(x.n(), m);
    for i in 0..x.n() {
        let src = x.values.row(i);
        for (dst, &f) in out.row_mut(i).iter_mut().zip(seq) {
            *dst = src[f];
        }
    }
    let names = seq.iter().map(|&f| x.column_names[f].clone()).collect();
    let flags = seq.iter().map(|&f| x.zero_variance[f]).collect();
    Ok(x.replace_columns(out, names, flags))
}

/// Samples `n` rows of Gaussian features organized in blocks: every block
/// shares one latent factor, so features in the same block have correlation
/// `intra_corr` and features in different blocks are independent.
///
/// Each block draws from its own stream keyed by `(seed, block size,
/// occurrence of that size)`, so permuting `block_sizes` permutes the output
/// columns and nothing else.
pub fn synth_blocks(n: usize, block_sizes: &[usize], intra_corr: f64, seed: u64) -> Result<DataMatrix> {
    if !(0.0..1.0).contains(&intra_corr) {
        return Err(Error::InvalidCorrelation(intra_corr));
    }
    if block_sizes.contains(&0) {
        return Err(Error::InvalidConfig("block sizes must be >= 1".to_string()));
    }
    let m: usize = block_sizes.iter().sum();
    if n < 2 || m < 2 {
        return Err(Error::InvalidShape { rows: n, cols: m });
    }
    let load = libm::sqrt(intra_corr);
    let noise = libm::sqrt(1.0 - intra_corr);
    let mut values = Matrix::zeros(n, m);
    let mut names = Vec::with_capacity(m);
    let mut col = 0;
    for (b, &size) in block_sizes.iter().enumerate() {
        let ordinal = block_sizes[..b].iter().filter(|&&s| s == size).count();
        let mut stream = rng::seeded(seed);
        stream.set_stream(((size as u64) << 32) | ordinal as u64);
        for i in 0..n {
            let z = rng::standard_normal(&mut stream);
            for j in 0..size {
                values[(i, col + j)] = load * z + noise * rng::standard_normal(&mut stream);
            }
        }
        for j in 0..size {
            names.push(format!("b{size}_{ordinal}_{j}"));
        }
        col += size;
    }
    DataMatrix::new(values, names, None, Task::None)
}

/// Ground-truth block id of every column produced by [`synth_blocks`].
pub fn block_membership(block_sizes: &[usize]) -> Vec<usize> {
    block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| core::iter::repeat_n(b, s))
        .collect()
}

/// Fraction of the achievable same-block adjacencies realized by `order`:
/// 1.0 exactly when every block occupies contiguous positions.
pub fn block_contiguity(order: &crate::Permutation, membership: &[usize]) -> f64 {
    let seq = order.sequence();
    let same = seq.windows(2).filter(|w| membership[w[0]] == membership[w[1]]).count();
    let mut blocks: Vec<usize> = membership.to_vec();
    blocks.sort_unstable();
    blocks.dedup();
    let achievable = membership.len() - blocks.len();
    if achievable == 0 {
        1.0
    } else {
        same as f64 / achievable as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Permutation;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / libm::sqrt(saa * sbb)
    }

    fn one_col(v: &[f64]) -> DataMatrix {
        // second column is a dummy so the shape check passes
        let mut data = Vec::new();
        for (i, &x) in v.iter().enumerate() {
            data.push(x);
            data.push(i as f64);
        }
        DataMatrix::from_values(Matrix::from_vec(v.len(), 2, data)).unwrap()
    }

    #[test]
    fn standardize_uses_sample_std() {
        let s = standardize(&one_col(&[1.0, 2.0, 3.0]));
        let c = s.column(0);
        // mean 2, sum of squares 2, n - 1 = 2, so the scale is 1
        assert_eq!(c, vec![-1.0, 0.0, 1.0]);
        let s = standardize(&one_col(&[2.0, 4.0, 9.0, 1.0]));
        let c = s.column(0);
        let sd = libm::sqrt((0.0 + 4.0 + 25.0 + 9.0) / 3.0);
        for (z, x) in c.iter().zip([2.0, 4.0, 9.0, 1.0]) {
            assert!((z - (x - 4.0) / sd).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_column_flagged() {
        let s = standardize(&one_col(&[5.0, 5.0, 5.0]));
        assert_eq!(s.column(0), vec![0.0, 0.0, 0.0]);
        assert_eq!(s.zero_variance(), &[true, false]);
    }

    #[test]
    fn standardize_is_idempotent() {
        let x = synth_blocks(50, &[2, 3], 0.5, 1).unwrap();
        let once = standardize(&x);
        let twice = standardize(&once);
        for (a, b) in once.values().as_slice().iter().zip(twice.values().as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_and_label_checks() {
        let m = Matrix::from_vec(1, 2, vec![1.0, 2.0]);
        assert!(matches!(DataMatrix::from_values(m), Err(Error::InvalidShape { .. })));
        let m = Matrix::from_vec(2, 2, vec![1.0, f64::NAN, 0.0, 1.0]);
        assert_eq!(DataMatrix::from_values(m), Err(Error::NonFinite { row: 0, col: 1 }));
        let x = synth_blocks(4, &[2], 0.0, 0).unwrap();
        assert!(x.clone().with_labels(vec![0.0, 1.0, 2.0, 1.0], Task::Binary).is_err());
        assert!(x.clone().with_labels(vec![0.0, 1.0, 2.0, 1.0], Task::Multiclass).is_ok());
        assert!(x.with_labels(vec![0.0, 0.0, 0.0, 0.0], Task::Multiclass).is_err());
    }

    #[test]
    fn synth_blocks_correlation_structure() {
        let x = synth_blocks(200, &[3, 3], 0.9, 7).unwrap();
        let cols: Vec<Vec<f64>> = (0..6).map(|j| x.column(j)).collect();
        for i in 0..6 {
            for j in i + 1..6 {
                let r = pearson(&cols[i], &cols[j]).abs();
                if i / 3 == j / 3 {
                    assert!(r > 0.7, "within ({i},{j}) = {r}");
                } else {
                    assert!(r < 0.2, "cross ({i},{j}) = {r}");
                }
            }
        }
    }

    #[test]
    fn synth_blocks_independent_when_uncorrelated() {
        let x = synth_blocks(500, &[2, 2, 2], 0.0, 3).unwrap();
        for i in 0..6 {
            for j in i + 1..6 {
                assert!(pearson(&x.column(i), &x.column(j)).abs() < 0.15);
            }
        }
    }

    #[test]
    fn synth_blocks_deterministic_and_validated() {
        let a = synth_blocks(30, &[2, 2], 0.5, 9).unwrap();
        let b = synth_blocks(30, &[2, 2], 0.5, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(synth_blocks(30, &[2], 1.0, 0), Err(Error::InvalidCorrelation(1.0)));
    }

    #[test]
    fn synth_blocks_block_order_permutes_columns() {
        let a = synth_blocks(40, &[3, 2], 0.6, 4).unwrap();
        let b = synth_blocks(40, &[2, 3], 0.6, 4).unwrap();
        // b = a with columns [3,4,0,1,2]
        let p = Permutation::new(vec![3, 4, 0, 1, 2]).unwrap();
        let a_perm = apply_permutation(&a, &p).unwrap();
        assert_eq!(a_perm.values(), b.values());
        assert_eq!(a_perm.column_names(), b.column_names());
    }

    #[test]
    fn apply_permutation_names_and_inverse() {
        let v = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let x = DataMatrix::new(v, names, None, Task::None).unwrap();
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let y = apply_permutation(&x, &p).unwrap();
        assert_eq!(y.column_names(), &["c", "a", "b"]);
        assert_eq!(y.values().row(0), &[3.0, 1.0, 2.0]);
        let back = apply_permutation(&y, &p.inverse()).unwrap();
        assert_eq!(back, x);
        assert_eq!(apply_permutation(&x, &Permutation::identity(3)).unwrap(), x);
        assert!(apply_permutation(&x, &Permutation::identity(2)).is_err());
    }

    #[test]
    fn contiguity_score() {
        let membership = block_membership(&[2, 2]);
        assert_eq!(membership, vec![0, 0, 1, 1]);
        let good = Permutation::new(vec![1, 0, 3, 2]).unwrap();
        assert_eq!(block_contiguity(&good, &membership), 1.0);
        let bad = Permutation::new(vec![0, 2, 1, 3]).unwrap();
        assert_eq!(block_contiguity(&bad, &membership), 0.0);
    }
}
