//! Dense matrix primitives shared by the estimators: column centering and
//! scaling, dominant singular pairs of cross-product matrices and rank-one
//! deflation.

use std::collections::HashSet;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries with absolute value at or below this are treated as zero.
pub const NUMERICAL_ZERO: f64 = 1e-14;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;
/// Stalled power iterations between successive squarings of the Gram matrix.
const SQUARE_AFTER: usize = 16;

/// Observations in rows, variables in columns, every column named.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    col_names: Vec<String>,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>, col_names: Vec<String>) -> Result<Self> {
        let (n, m) = values.dim();
        if n < 2 {
            return Err(Error::InvalidData(format!(
                "at least 2 rows required, got {n}"
            )));
        }
        if m < 1 {
            return Err(Error::InvalidData("at least 1 column required".into()));
        }
        if col_names.len() != m {
            return Err(Error::InvalidData(format!(
                "{} column names for {m} columns",
                col_names.len()
            )));
        }
        let mut seen = HashSet::with_capacity(m);
        for name in &col_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidData(format!(
                    "duplicate column name '{name}'"
                )));
            }
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteInput { row, col });
        }
        Ok(DataMatrix { values, col_names })
    }

    /// Names columns `{prefix}1`, `{prefix}2`, ...
    pub fn with_prefix(values: Array2<f64>, prefix: &str) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("{prefix}{j}")).collect();
        Self::new(values, names)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.values.select(Axis(0), rows), self.col_names.clone())
    }

    /// Single column as its own matrix.
    pub fn select_column(&self, j: usize) -> Result<Self> {
        Self::new(
            self.values.select(Axis(1), &[j]),
            vec![self.col_names[j].clone()],
        )
    }

    /// Reorders columns to follow `names`. Fails listing every missing and
    /// unexpected name when the two sets differ.
    pub fn align_to(&self, names: &[String]) -> Result<Self> {
        if self.col_names == names {
            return Ok(self.clone());
        }
        let have: HashSet<&str> = self.col_names.iter().map(String::as_str).collect();
        let want: HashSet<&str> = names.iter().map(String::as_str).collect();
        let missing: Vec<String> = names
            .iter()
            .filter(|n| !have.contains(n.as_str()))
            .cloned()
            .collect();
        let extra: Vec<String> = self
            .col_names
            .iter()
            .filter(|n| !want.contains(n.as_str()))
            .cloned()
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::ColumnMismatch { missing, extra });
        }
        let order: Vec<usize> = names
            .iter()
            .map(|n| self.col_names.iter().position(|c| c == n).unwrap())
            .collect();
        Self::new(self.values.select(Axis(1), &order), names.to_vec())
    }
}

/// How columns are standardized before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    /// Subtract column means only.
    #[default]
    Center,
    /// Subtract column means and divide by sample standard deviations.
    Autoscale,
}

/// Per-column location (and optional scale) learned on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteringInfo {
    pub means: Array1<f64>,
    pub scales: Option<Array1<f64>>,
}

impl CenteringInfo {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// `(x - mean) / scale`, column by column.
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x - &self.means;
        if let Some(s) = &self.scales {
            out /= s;
        }
        out
    }

    /// Inverse of [`CenteringInfo::apply`].
    pub fn invert(&self, z: &Array2<f64>) -> Array2<f64> {
        let mut out = z.to_owned();
        if let Some(s) = &self.scales {
            out *= s;
        }
        out + &self.means
    }
}

/// Sample standard deviation (n - 1 denominator) of each column.
pub fn column_std(x: &Array2<f64>) -> Array1<f64> {
    x.std_axis(Axis(0), 1.0)
}

pub fn center_scale(data: &DataMatrix, mode: ScalingMode) -> Result<(DataMatrix, CenteringInfo)> {
    let x = data.values();
    let means = x.mean_axis(Axis(0)).expect("DataMatrix has at least two rows");
    let scales = match mode {
        ScalingMode::Center => None,
        ScalingMode::Autoscale => {
            let sd = column_std(x);
            for (j, s) in sd.iter().enumerate() {
                let spread = x.column(j).iter().fold(0.0_f64, |acc, v| acc.max((v - means[j]).abs()));
                if !(*s > 0.0) || spread <= NUMERICAL_ZERO * means[j].abs().max(1.0) {
                    return Err(Error::ConstantColumn(data.col_names()[j].clone()));
                }
            }
            Some(sd)
        }
    };
    let info = CenteringInfo { means, scales };
    let transformed = DataMatrix::new(info.apply(x), data.col_names().to_vec())?;
    Ok((transformed, info))
}

/// Top singular triple of a matrix, sign-normalized so that the entry of
/// `right` with the largest magnitude is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPair {
    pub left: Array1<f64>,
    pub right: Array1<f64>,
    pub value: f64,
}

pub fn max_abs(x: ArrayView2<'_, f64>) -> f64 {
    x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn norm2(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

pub fn frobenius(x: ArrayView2<'_, f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Index of the first entry with the largest absolute value.
fn argmax_abs(v: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_val {
            best_val = x.abs();
            best = i;
        }
    }
    best
}

/// Dominant eigenvector of a symmetric positive semidefinite matrix.
///
/// Power iteration started from the Gram column of largest norm. While the
/// iterates keep moving, the operator is replaced by its (rescaled) square
/// every few steps, which leaves the eigenvectors unchanged but squares the
/// ratio between the two leading eigenvalues.
fn dominant_eigenvector(gram: &Array2<f64>) -> Result<Array1<f64>> {
    let col_norms: Vec<f64> = gram.columns().into_iter().map(norm2).collect();
    let start = col_norms
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best });
    if start.1 <= NUMERICAL_ZERO {
        return Err(Error::ZeroMatrix);
    }
    let mut x = gram.column(start.0).to_owned() / start.1;

    let scale = max_abs(gram.view());
    let mut op = gram / scale;
    let mut stalled = 0;
    for _ in 0..POWER_MAX_ITER {
        let mut y = op.dot(&x);
        let ny = norm2(y.view());
        if ny <= f64::MIN_POSITIVE {
            return Err(Error::ZeroMatrix);
        }
        y /= ny;
        let diff = norm2((&y - &x).view());
        x = y;
        if diff < POWER_TOL {
            return Ok(x);
        }
        stalled += 1;
        if stalled == SQUARE_AFTER {
            stalled = 0;
            let sq = op.dot(&op);
            let m = max_abs(sq.view());
            if m > 0.0 && m.is_finite() {
                op = sq / m;
            }
        }
    }
    Err(Error::NoConvergence(POWER_MAX_ITER))
}

/// Top singular triple of a `p x q` matrix via power iteration on the
/// smaller of its two Gram matrices.
pub fn dominant_singular_pair(cross: ArrayView2<'_, f64>) -> Result<SingularPair> {
    if max_abs(cross) <= NUMERICAL_ZERO {
        return Err(Error::ZeroMatrix);
    }
    let (p, q) = cross.dim();
    let (mut left, mut right, value) = if q <= p {
        let right = dominant_eigenvector(&cross.t().dot(&cross))?;
        let img = cross.dot(&right);
        let value = norm2(img.view());
        (img / value, right, value)
    } else {
        let left = dominant_eigenvector(&cross.dot(&cross.t()))?;
        let img = cross.t().dot(&left);
        let value = norm2(img.view());
        (left, img / value, value)
    };
    if right[argmax_abs(right.view())] < 0.0 {
        left.mapv_inplace(|v| -v);
        right.mapv_inplace(|v| -v);
    }
    Ok(SingularPair { left, right, value })
}

/// `block - score * loading'`.
pub fn deflate(
    block: ArrayView2<'_, f64>,
    score: ArrayView1<'_, f64>,
    loading: ArrayView1<'_, f64>,
) -> Result<Array2<f64>> {
    let (n, m) = block.dim();
    if score.len() != n || loading.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "block is {n}x{m}, score has {} entries, loading has {}",
            score.len(),
            loading.len()
        )));
    }
    let mut out = block.to_owned();
    for (mut row, &t) in out.rows_mut().into_iter().zip(score.iter()) {
        row.scaled_add(-t, &loading);
    }
    Ok(out)
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations,
/// sorted in decreasing order.
pub(crate) fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let k = a.nrows();
    let mut m = a.to_owned();
    for _sweep in 0..100 {
        let off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let diag: f64 = (0..k).map(|i| m[[i, i]] * m[[i, i]]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for i in 0..k {
            for j in (i + 1)..k {
                let aij = m[[i, j]];
                if aij == 0.0 {
                    continue;
                }
                let theta = (m[[j, j]] - m[[i, i]]) / (2.0 * aij);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let mri = m[[r, i]];
                    let mrj = m[[r, j]];
                    m[[r, i]] = c * mri - s * mrj;
                    m[[r, j]] = s * mri + c * mrj;
                }
                for r in 0..k {
                    let mir = m[[i, r]];
                    let mjr = m[[j, r]];
                    m[[i, r]] = c * mir - s * mjr;
                    m[[j, r]] = s * mir + c * mjr;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..k).map(|i| m[[i, i]]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Solves `a x = b` for symmetric positive definite `a` by Cholesky.
/// Returns `None` when a pivot is not strictly positive.
pub(crate) fn cholesky_solve(a: &Array2<f64>, b: &Array2<f64>) -> Option<Array2<f64>> {
    let k = a.nrows();
    let mut l = Array2::<f64>::zeros((k, k));
    for j in 0..k {
        let mut d = a[[j, j]];
        for c in 0..j {
            d -= l[[j, c]] * l[[j, c]];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..k {
            let mut s = a[[i, j]];
            for c in 0..j {
                s -= l[[i, c]] * l[[j, c]];
            }
            l[[i, j]] = s / d;
        }
    }
    let mut x = b.to_owned();
    for mut col in x.columns_mut() {
        // forward: L y = b
        for i in 0..k {
            let mut s = col[i];
            for c in 0..i {
                s -= l[[i, c]] * col[c];
            }
            col[i] = s / l[[i, i]];
        }
        // backward: L' x = y
        for i in (0..k).rev() {
            let mut s = col[i];
            for c in (i + 1)..k {
                s -= l[[c, i]] * col[c];
            }
            col[i] = s / l[[i, i]];
        }
    }
    Some(x)
}

/// Solves a small general system `a x = b` by Gaussian elimination with
/// partial pivoting. Returns `None` for a numerically singular `a`.
pub(crate) fn lu_solve(a: &Array2<f64>, b: &Array2<f64>) -> Option<Array2<f64>> {
    let k = a.nrows();
    let mut m = a.to_owned();
    let mut x = b.to_owned();
    let scale = max_abs(a.view()).max(f64::MIN_POSITIVE);
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .unwrap();
        if m[[pivot, col]].abs() <= 1e-13 * scale {
            return None;
        }
        if pivot != col {
            for c in 0..k {
                m.swap([pivot, c], [col, c]);
            }
            for c in 0..x.ncols() {
                x.swap([pivot, c], [col, c]);
            }
        }
        for r in (col + 1)..k {
            let f = m[[r, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for c in col..k {
                m[[r, c]] -= f * m[[col, c]];
            }
            for c in 0..x.ncols() {
                x[[r, c]] -= f * x[[col, c]];
            }
        }
    }
    for c in 0..x.ncols() {
        for i in (0..k).rev() {
            let mut s = x[[i, c]];
            for j in (i + 1)..k {
                s -= m[[i, j]] * x[[j, c]];
            }
            x[[i, c]] = s / m[[i, i]];
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        Array2::from_shape_fn((rows, cols), |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn data_matrix_rejects_bad_input() {
        assert!(matches!(
            DataMatrix::with_prefix(array![[1.0, 2.0]], "x"),
            Err(Error::InvalidData(_))
        ));
        assert!(matches!(
            DataMatrix::with_prefix(array![[1.0], [f64::NAN]], "x"),
            Err(Error::NonFiniteInput { row: 1, col: 0 })
        ));
        assert!(matches!(
            DataMatrix::new(array![[1.0, 2.0], [3.0, 4.0]], vec!["a".into(), "a".into()]),
            Err(Error::InvalidData(_))
        ));
        assert!(DataMatrix::new(array![[1.0], [2.0]], vec![]).is_err());
    }

    #[test]
    fn align_reorders_and_reports() {
        let d = DataMatrix::new(array![[1.0, 2.0], [3.0, 4.0]], vec!["a".into(), "b".into()]).unwrap();
        let names = vec!["b".to_string(), "a".to_string()];
        let r = d.align_to(&names).unwrap();
        assert_eq!(r.values(), &array![[2.0, 1.0], [4.0, 3.0]]);
        match d.align_to(&["a".to_string(), "c".to_string()]) {
            Err(Error::ColumnMismatch { missing, extra }) => {
                assert_eq!(missing, vec!["c"]);
                assert_eq!(extra, vec!["b"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn center_symmetric_pair() {
        let d = DataMatrix::with_prefix(array![[1.0], [3.0]], "x").unwrap();
        let (c, info) = center_scale(&d, ScalingMode::Center).unwrap();
        assert_eq!(c.values(), &array![[-1.0], [1.0]]);
        assert_eq!(info.means, array![2.0]);
        assert!(info.scales.is_none());
    }

    #[test]
    fn center_is_idempotent_on_centered_data() {
        let d = DataMatrix::with_prefix(array![[-1.0, 2.0], [1.0, -2.0], [0.0, 0.0]], "x").unwrap();
        let (c, info) = center_scale(&d, ScalingMode::Center).unwrap();
        assert_eq!(c.values(), d.values());
        assert!(info.means.iter().all(|m| m.abs() < 1e-15));
    }

    #[test]
    fn autoscale_gives_unit_std() {
        let x = lcg_matrix(10, 4, 7) * 3.0 + 5.0;
        let d = DataMatrix::with_prefix(x.clone(), "x").unwrap();
        let (c, info) = center_scale(&d, ScalingMode::Autoscale).unwrap();
        // independent two-pass standard deviation
        for j in 0..4 {
            let col: Vec<f64> = c.values().column(j).to_vec();
            let mean = col.iter().sum::<f64>() / 10.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 9.0;
            assert!(mean.abs() < 1e-12);
            assert!((var.sqrt() - 1.0).abs() < 1e-10);
        }
        let back = info.invert(c.values());
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn autoscale_rejects_constant_column() {
        let d = DataMatrix::new(array![[1.0, 2.0], [3.0, 2.0], [4.0, 2.0]], vec!["a".into(), "flat".into()])
            .unwrap();
        match center_scale(&d, ScalingMode::Autoscale) {
            Err(Error::ConstantColumn(name)) => assert_eq!(name, "flat"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singular_pair_of_diagonal() {
        let sp = dominant_singular_pair(array![[3.0, 0.0], [0.0, 1.0]].view()).unwrap();
        assert_abs_diff_eq!(sp.value, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sp.left, array![1.0, 0.0], epsilon = 1e-12);
        assert_abs_diff_eq!(sp.right, array![1.0, 0.0], epsilon = 1e-12);
    }

    #[test]
    fn singular_pair_with_tied_values() {
        let c = array![[0.0, 2.0], [2.0, 0.0]];
        let sp = dominant_singular_pair(c.view()).unwrap();
        // Gram is 4I: any unit vector is a top eigenvector; the start
        // column rule picks e1.
        assert_abs_diff_eq!(sp.value, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sp.right, array![1.0, 0.0], epsilon = 1e-12);
        assert_abs_diff_eq!(sp.left, array![0.0, 1.0], epsilon = 1e-12);
        let resid = c.dot(&sp.right) - sp.value * &sp.left;
        assert!(norm2(resid.view()) <= 1e-8 * sp.value);
    }

    #[test]
    fn singular_pair_rejects_zero() {
        assert!(matches!(
            dominant_singular_pair(Array2::<f64>::zeros((3, 2)).view()),
            Err(Error::ZeroMatrix)
        ));
    }

    #[test]
    fn singular_pair_wide_and_tall_agree() {
        let c = lcg_matrix(4, 7, 3);
        let a = dominant_singular_pair(c.view()).unwrap();
        let b = dominant_singular_pair(c.t()).unwrap();
        assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-10);
        // transposition swaps roles; joint sign may differ
        let s = a.left.dot(&b.right).signum();
        assert_abs_diff_eq!(a.left, &b.right * s, epsilon = 1e-9);
        assert_abs_diff_eq!(a.right, &b.left * s, epsilon = 1e-9);
    }

    #[test]
    fn deflate_rank_one_to_zero() {
        let t = array![1.0, -2.0, 0.5];
        let p = array![2.0, 3.0];
        let block = deflate(Array2::zeros((3, 2)).view(), t.view(), (-&p).view()).unwrap();
        let z = deflate(block.view(), t.view(), p.view()).unwrap();
        assert!(max_abs(z.view()) < 1e-10);
    }

    #[test]
    fn deflate_zero_loading_is_identity() {
        let block = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let t = array![0.0, 0.0, 1.0];
        let out = deflate(block.view(), t.view(), array![0.0, 0.0].view()).unwrap();
        assert_eq!(out, block);
    }

    #[test]
    fn deflate_least_squares_loading_is_orthogonal() {
        let block = lcg_matrix(8, 3, 11);
        let t = lcg_matrix(8, 1, 12).column(0).to_owned();
        let p = block.t().dot(&t) / t.dot(&t);
        let out = deflate(block.view(), t.view(), p.view()).unwrap();
        let proj = t.dot(&out);
        assert!(proj.iter().all(|v| v.abs() < 1e-8 * norm2(t.view()) * frobenius(block.view())));
    }

    #[test]
    fn deflate_dimension_mismatch() {
        let block = Array2::<f64>::zeros((3, 2));
        assert!(matches!(
            deflate(block.view(), array![1.0, 2.0].view(), array![1.0, 2.0].view()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        let ev = symmetric_eigenvalues(&array![[2.0, 1.0], [1.0, 2.0]]);
        assert_abs_diff_eq!(ev[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn small_solvers() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let b = array![[1.0], [2.0]];
        let x1 = cholesky_solve(&a, &b).unwrap();
        let x2 = lu_solve(&a, &b).unwrap();
        assert_abs_diff_eq!(a.dot(&x1), b, epsilon = 1e-12);
        assert_abs_diff_eq!(x1, x2, epsilon = 1e-12);
        assert!(cholesky_solve(&array![[1.0, 1.0], [1.0, 1.0]], &b).is_none());
        assert!(lu_solve(&array![[1.0, 1.0], [1.0, 1.0]], &b).is_none());
    }
}
