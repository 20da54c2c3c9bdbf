//! Sparse twoblock PLS and its dense special case, XY-PLS.
//!
//! Both blocks are reduced independently. The response loop extracts `g`
//! components from the (deflated) Y block against the fixed centered X
//! block; the predictor loop extracts `h` components from the (deflated) X
//! block against the fixed centered Y block. Each raw weight vector is the
//! dominant singular vector of the current cross-product matrix, which is
//! then soft-thresholded at a fraction (`kappa` for Y, `eta` for X) of its
//! largest absolute entry and rescaled to unit length. The stored loadings
//! are restricted to the surviving variables; the block is deflated with
//! the full loading so that successive scores stay orthogonal. The
//! regression coefficients are
//!
//! ```text
//! B = W (W'X'XW)^-1 W'X'Y V V'
//! ```
//!
//! With `eta = kappa = 0` no entry is thresholded and the fit is exactly
//! dense XY-PLS.

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    center_scale, cholesky_solve, dominant_singular_pair, frobenius, max_abs, norm2, symmetric_eigenvalues,
    CenteringInfo, DataMatrix, ScalingMode, NUMERICAL_ZERO,
};
use crate::pls::{check_shapes, rank_one_update, rescale_coefficients, stack_columns};

const DEGENERATE_RATIO: f64 = 1e-12;
const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoblockHyperparams {
    /// Response components.
    pub g: usize,
    /// Predictor components.
    pub h: usize,
    /// Response sparsity in `[0, 1)`.
    pub kappa: f64,
    /// Predictor sparsity in `[0, 1)`.
    pub eta: f64,
}

impl TwoblockHyperparams {
    pub fn dense(g: usize, h: usize) -> Self {
        TwoblockHyperparams {
            g,
            h,
            kappa: 0.0,
            eta: 0.0,
        }
    }

    pub fn is_dense(&self) -> bool {
        self.kappa == 0.0 && self.eta == 0.0
    }

    /// Checks sparsities and the component bounds `g <= min(q, n-1)`,
    /// `h <= min(p, n-1)`.
    pub fn validate(&self, n: usize, p: usize, q: usize) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("eta", self.eta)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidHyperparameter(format!("{name} = {v} is outside [0, 1)")));
            }
        }
        if self.g == 0 || self.h == 0 {
            return Err(Error::InvalidHyperparameter("g and h must be positive".into()));
        }
        let g_bound = q.min(n.saturating_sub(1));
        if self.g > g_bound {
            return Err(Error::ComponentCountTooLarge {
                what: "g",
                requested: self.g,
                bound: g_bound,
            });
        }
        let h_bound = p.min(n.saturating_sub(1));
        if self.h > h_bound {
            return Err(Error::ComponentCountTooLarge {
                what: "h",
                requested: self.h,
                bound: h_bound,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoblockModel {
    /// `p x h` predictor weights, one unit column per component.
    pub x_weights: Array2<f64>,
    /// `q x g` response weights.
    pub y_weights: Array2<f64>,
    pub x_loadings: Array2<f64>,
    pub y_loadings: Array2<f64>,
    pub x_scores: Array2<f64>,
    pub y_scores: Array2<f64>,
    /// 0/1 support of each predictor weight column.
    pub x_masks: Array2<u8>,
    /// 0/1 support of each response weight column.
    pub y_masks: Array2<u8>,
    /// `p x q` coefficients in the centered (and scaled) space.
    pub coefficients: Array2<f64>,
    pub x_center: CenteringInfo,
    pub y_center: CenteringInfo,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    pub hyper: TwoblockHyperparams,
    /// The predictor loop stopped early on a vanishing residual.
    pub x_truncated: bool,
    /// The response loop stopped early on a vanishing residual.
    pub y_truncated: bool,
}

impl TwoblockModel {
    pub fn predict(&self, x_new: &DataMatrix) -> Result<DataMatrix> {
        let x = x_new.align_to(&self.x_names)?;
        let z = self.x_center.apply(x.values()).dot(&self.coefficients);
        DataMatrix::new(self.y_center.invert(&z), self.y_names.clone())
    }

    pub fn coefficients_original_scale(&self) -> Array2<f64> {
        rescale_coefficients(&self.coefficients, &self.x_center, &self.y_center)
    }

    /// Predictor `j` is selected iff row `j` of the weights has a nonzero.
    pub fn selected_predictors(&self) -> Vec<bool> {
        nonzero_rows(self.x_weights.view())
    }

    pub fn selected_responses(&self) -> Vec<bool> {
        nonzero_rows(self.y_weights.view())
    }
}

pub(crate) fn nonzero_rows(m: ArrayView2<'_, f64>) -> Vec<bool> {
    m.rows()
        .into_iter()
        .map(|r| r.iter().any(|v| v.abs() > NUMERICAL_ZERO))
        .collect()
}

/// Soft-thresholds the normalized vector at `sparsity * max |v_k|` and
/// rescales the survivors to unit length. Returns the vector and its 0/1
/// support mask.
pub fn soft_threshold_vector(v: ArrayView1<'_, f64>, sparsity: f64) -> Result<(Array1<f64>, Array1<u8>)> {
    let nv = norm2(v);
    if v.iter().all(|x| x.abs() <= NUMERICAL_ZERO) || !(nv > 0.0) {
        return Err(Error::ZeroVector);
    }
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::InvalidHyperparameter(format!(
            "sparsity {sparsity} is outside [0, 1)"
        )));
    }
    let normalized = v.mapv(|x| x / nv);
    let top = normalized.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let tau = sparsity * top;
    let mask = normalized.mapv(|x| u8::from(x.abs() > tau));
    let mut out = Array1::zeros(v.len());
    for ((o, &x), &m) in out.iter_mut().zip(normalized.iter()).zip(mask.iter()) {
        if m == 1 {
            *o = x.signum() * (x.abs() - tau);
        }
    }
    let no = norm2(out.view());
    out /= no;
    Ok((out, mask))
}

/// Components extracted from one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockReduction {
    pub weights: Array2<f64>,
    pub loadings: Array2<f64>,
    pub scores: Array2<f64>,
    pub masks: Array2<u8>,
    /// Block left after the last deflation.
    pub residual: Array2<f64>,
    pub truncated: bool,
}

impl BlockReduction {
    pub fn n_components(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Response,
    Predictor,
}

fn reduce_block(
    block: ArrayView2<'_, f64>,
    opposite: ArrayView2<'_, f64>,
    n_comp: usize,
    sparsity: f64,
    side: Side,
) -> Result<BlockReduction> {
    let (n, m) = block.dim();
    if opposite.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "blocks have {n} and {} rows",
            opposite.nrows()
        )));
    }
    // cross is always predictors x responses
    let cross_of = |resid: &Array2<f64>| match side {
        Side::Response => opposite.t().dot(resid),
        Side::Predictor => resid.t().dot(&opposite),
    };
    let mut resid = block.to_owned();
    let initial = frobenius(cross_of(&resid).view());
    let mut weights = Vec::with_capacity(n_comp);
    let mut loadings = Vec::with_capacity(n_comp);
    let mut scores = Vec::with_capacity(n_comp);
    let mut masks = Vec::with_capacity(n_comp);
    let mut truncated = false;

    for k in 0..n_comp {
        let cross = cross_of(&resid);
        let size = frobenius(cross.view());
        if max_abs(cross.view()) <= NUMERICAL_ZERO || size <= DEGENERATE_RATIO * initial {
            truncated = true;
            break;
        }
        let pair = dominant_singular_pair(cross.view())?;
        let raw = match side {
            Side::Response => pair.right,
            Side::Predictor => pair.left,
        };
        let (weight, mask) = soft_threshold_vector(raw.view(), sparsity)?;
        let score = resid.dot(&weight);
        let ss = score.dot(&score);
        if ss <= NUMERICAL_ZERO * NUMERICAL_ZERO {
            truncated = true;
            break;
        }
        let full = resid.t().dot(&score) / ss;
        let loading = &full * &mask.mapv(f64::from);
        rank_one_update(&mut resid, &score, &full);
        log::trace!("component {} kept {} of {m} variables", k + 1, mask.iter().filter(|&&b| b == 1).count());
        weights.push(weight);
        loadings.push(loading);
        scores.push(score);
        masks.push(mask.mapv(f64::from));
    }
    if truncated {
        warn!(
            "{} residual vanished after {} of {n_comp} components",
            match side {
                Side::Response => "response",
                Side::Predictor => "predictor",
            },
            weights.len()
        );
    }
    Ok(BlockReduction {
        weights: stack_columns(&weights, m),
        loadings: stack_columns(&loadings, m),
        scores: stack_columns(&scores, n),
        masks: stack_columns(&masks, m).mapv(|v| v as u8),
        residual: resid,
        truncated,
    })
}

/// Response loop: `g` components of centered `y` against centered `x`.
pub fn response_reduction(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, g: usize, kappa: f64) -> Result<BlockReduction> {
    reduce_block(y, x, g, kappa, Side::Response)
}

/// Predictor loop: `h` components of centered `x` against centered `y`.
pub fn predictor_reduction(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, h: usize, eta: f64) -> Result<BlockReduction> {
    reduce_block(x, y, h, eta, Side::Predictor)
}

/// `B = W (W'X'XW)^-1 W'X'Y V V'` for centered `x` and `y`.
pub fn compute_coefficients(
    w: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    v: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let (p, h) = w.dim();
    let (q, g) = v.dim();
    if x.ncols() != p || y.ncols() != q || x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "W is {p}x{h}, V is {q}x{g}, X is {}x{}, Y is {}x{}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    if h == 0 || g == 0 {
        return Ok(Array2::zeros((p, q)));
    }
    let xw = x.dot(&w);
    let gram = xw.t().dot(&xw);
    let ev = symmetric_eigenvalues(&gram);
    let (top, bottom) = (ev[0], ev[h - 1]);
    let condition = if bottom > 0.0 { top / bottom } else { f64::INFINITY };
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::SingularGram { condition });
    }
    let rhs = xw.t().dot(&y).dot(&v);
    let z = cholesky_solve(&gram, &rhs).ok_or(Error::SingularGram { condition })?;
    Ok(w.dot(&z.dot(&v.t())))
}

/// Centers both blocks, runs the response and predictor loops and
/// assembles the coefficients.
pub fn fit_twoblock(
    x: &DataMatrix,
    y: &DataMatrix,
    hyper: TwoblockHyperparams,
    scaling: ScalingMode,
) -> Result<TwoblockModel> {
    check_shapes(x, y)?;
    hyper.validate(x.nrows(), x.ncols(), y.ncols())?;
    let (xc, x_center) = center_scale(x, scaling)?;
    let (yc, y_center) = center_scale(y, scaling)?;
    let (xc, yc) = (xc.values(), yc.values());

    let resp = response_reduction(xc.view(), yc.view(), hyper.g, hyper.kappa)?;
    let pred = predictor_reduction(xc.view(), yc.view(), hyper.h, hyper.eta)?;
    let coefficients = compute_coefficients(pred.weights.view(), xc.view(), yc.view(), resp.weights.view())?;

    Ok(TwoblockModel {
        x_weights: pred.weights,
        y_weights: resp.weights,
        x_loadings: pred.loadings,
        y_loadings: resp.loadings,
        x_scores: pred.scores,
        y_scores: resp.scores,
        x_masks: pred.masks,
        y_masks: resp.masks,
        coefficients,
        x_center,
        y_center,
        x_names: x.col_names().to_vec(),
        y_names: y.col_names().to_vec(),
        hyper,
        x_truncated: pred.truncated,
        y_truncated: resp.truncated,
    })
}

/// Which variables a fitted twoblock model retains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionReport {
    pub selected_predictors: Vec<String>,
    pub selected_responses: Vec<String>,
    pub deselected_predictors: Vec<String>,
    pub deselected_responses: Vec<String>,
}

impl SelectionReport {
    /// `(predictors, responses)` dropped by the model.
    pub fn deselected_counts(&self) -> (usize, usize) {
        (self.deselected_predictors.len(), self.deselected_responses.len())
    }
}

pub fn selection_report(model: &TwoblockModel) -> SelectionReport {
    fn split(names: &[String], keep: &[bool]) -> (Vec<String>, Vec<String>) {
        let (a, b): (Vec<_>, Vec<_>) = names.iter().zip(keep).partition(|(_, &k)| k);
        (
            a.into_iter().map(|(n, _)| n.clone()).collect(),
            b.into_iter().map(|(n, _)| n.clone()).collect(),
        )
    }
    let (selected_predictors, deselected_predictors) = split(&model.x_names, &model.selected_predictors());
    let (selected_responses, deselected_responses) = split(&model.y_names, &model.selected_responses());
    SelectionReport {
        selected_predictors,
        selected_responses,
        deselected_predictors,
        deselected_responses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Axis};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut rng))
    }

    fn dm(a: Array2<f64>, prefix: &str) -> DataMatrix {
        DataMatrix::with_prefix(a, prefix).unwrap()
    }

    fn centered(a: &Array2<f64>) -> Array2<f64> {
        a - &a.mean_axis(Axis(0)).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let v = array![0.8, 0.6];
        let (w, m) = soft_threshold_vector(v.view(), 0.0).unwrap();
        assert_abs_diff_eq!(w, v, epsilon = 1e-15);
        assert_eq!(m, array![1, 1]);

        let (w, m) = soft_threshold_vector(v.view(), 0.99).unwrap();
        assert_eq!(m, array![1, 0]);
        assert_abs_diff_eq!(w, array![1.0, 0.0], epsilon = 1e-15);

        let (w, _) = soft_threshold_vector(v.view(), 0.5).unwrap();
        assert_abs_diff_eq!(w, array![0.894_427_191, 0.447_213_595], epsilon = 1e-9);
    }

    #[test]
    fn threshold_rejects_zero_and_bad_sparsity() {
        assert!(matches!(soft_threshold_vector(array![0.0, 0.0].view(), 0.1), Err(Error::ZeroVector)));
        assert!(soft_threshold_vector(array![1.0].view(), 1.0).is_err());
        assert!(soft_threshold_vector(array![1.0].view(), -0.1).is_err());
    }

    proptest! {
        #[test]
        fn threshold_properties(v in prop::collection::vec(-10.0f64..10.0, 1..30), s in 0.0f64..0.999) {
            prop_assume!(v.iter().any(|x| x.abs() > 1e-6));
            let v = Array1::from(v);
            let (w, m) = soft_threshold_vector(v.view(), s).unwrap();
            let nv = v.mapv(|x| x / norm2(v.view()));
            let top = nv.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            prop_assert!(m.iter().any(|&b| b == 1));
            for k in 0..v.len() {
                prop_assert_eq!(m[k] == 1, nv[k].abs() > s * top);
                prop_assert_eq!(w[k] != 0.0, m[k] == 1);
                if m[k] == 1 {
                    prop_assert_eq!(w[k].signum(), nv[k].signum());
                }
            }
            prop_assert!((norm2(w.view()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_component_weights_are_top_singular_vectors() {
        let x = centered(&random(20, 5, 1));
        let y = centered(&(random(20, 3, 2) + x.slice(ndarray::s![.., 0..3])));
        let pair = dominant_singular_pair(x.t().dot(&y).view()).unwrap();
        let r = response_reduction(x.view(), y.view(), 1, 0.0).unwrap();
        let p = predictor_reduction(x.view(), y.view(), 1, 0.0).unwrap();
        assert_abs_diff_eq!(r.weights.column(0), pair.right, epsilon = 1e-12);
        assert_abs_diff_eq!(p.weights.column(0), pair.left, epsilon = 1e-12);
    }

    #[test]
    fn single_response_block_has_unit_weight() {
        let x = random(15, 4, 3);
        let y = random(15, 1, 4);
        let m = fit_twoblock(&dm(x, "x"), &dm(y, "y"), TwoblockHyperparams::dense(1, 2), ScalingMode::Center).unwrap();
        assert_abs_diff_eq!(m.y_weights[[0, 0]].abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn high_sparsity_keeps_one_entry_per_component() {
        let x = random(25, 8, 5);
        let y = random(25, 4, 6) + x.slice(ndarray::s![.., 0..4]);
        let hyper = TwoblockHyperparams { g: 2, h: 3, kappa: 0.99, eta: 0.99 };
        let m = fit_twoblock(&dm(x, "x"), &dm(y, "y"), hyper, ScalingMode::Center).unwrap();
        for col in m.x_weights.columns().into_iter().chain(m.y_weights.columns()) {
            assert_eq!(col.iter().filter(|v| v.abs() > NUMERICAL_ZERO).count(), 1);
        }
    }

    #[test]
    fn rank_one_predictor_block_is_exhausted() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t: Array1<f64> = (0..10).map(|_| StandardNormal.sample(&mut rng)).collect();
        let t = &t - t.mean().unwrap();
        let p = array![1.0, -2.0, 0.5];
        let c = array![3.0, 1.0];
        let x = t.view().insert_axis(Axis(1)).dot(&p.view().insert_axis(Axis(0)));
        let y = t.view().insert_axis(Axis(1)).dot(&c.view().insert_axis(Axis(0)));
        let red = predictor_reduction(x.view(), y.view(), 1, 0.0).unwrap();
        let s = red.scores.column(0);
        let cos = s.dot(&t).abs() / (norm2(s) * norm2(t.view()));
        assert_abs_diff_eq!(cos, 1.0, epsilon = 1e-12);
        assert!(frobenius(red.residual.view()) < 1e-10);
    }

    #[test]
    fn scalar_case_is_least_squares_slope() {
        let x = centered(&random(12, 1, 8));
        let y = centered(&random(12, 1, 9));
        let one = array![[1.0]];
        let b = compute_coefficients(one.view(), x.view(), y.view(), one.view()).unwrap();
        let slope = x.column(0).dot(&y.column(0)) / x.column(0).dot(&x.column(0));
        assert_abs_diff_eq!(b[[0, 0]], slope, epsilon = 1e-14);
    }

    #[test]
    fn zero_weight_row_gives_zero_coefficient_row() {
        let x = centered(&random(12, 3, 10));
        let y = centered(&random(12, 2, 11));
        let w = array![[0.6, 0.0], [0.0, 0.0], [0.8, 1.0]];
        let v = array![[1.0], [0.0]];
        let b = compute_coefficients(w.view(), x.view(), y.view(), v.view()).unwrap();
        assert!(b.row(1).iter().all(|&e| e == 0.0));
        assert!(b.column(1).iter().all(|&e| e == 0.0));
    }

    fn naive_coefficients(w: &Array2<f64>, x: &Array2<f64>, y: &Array2<f64>, v: &Array2<f64>) -> Array2<f64> {
        fn mul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
            let mut c = Array2::zeros((a.nrows(), b.ncols()));
            for i in 0..a.nrows() {
                for j in 0..b.ncols() {
                    let mut s = 0.0;
                    for k in 0..a.ncols() {
                        s += a[[i, k]] * b[[k, j]];
                    }
                    c[[i, j]] = s;
                }
            }
            c
        }
        let xw = mul(x, w);
        let g = mul(&xw.t().to_owned(), &xw);
        // 2x2 inverse by cofactors
        let det = g[[0, 0]] * g[[1, 1]] - g[[0, 1]] * g[[1, 0]];
        let inv = array![[g[[1, 1]] / det, -g[[0, 1]] / det], [-g[[1, 0]] / det, g[[0, 0]] / det]];
        let right = mul(&mul(&mul(&xw.t().to_owned(), y), v), &v.t().to_owned());
        mul(&mul(w, &inv), &right)
    }

    #[test]
    fn coefficients_match_naive_formula() {
        let x = centered(&random(15, 4, 12));
        let y = centered(&random(15, 3, 13));
        let w = random(4, 2, 14);
        let v = random(3, 2, 15);
        let b = compute_coefficients(w.view(), x.view(), y.view(), v.view()).unwrap();
        assert_abs_diff_eq!(b, naive_coefficients(&w, &x, &y, &v), epsilon = 1e-10);
    }

    #[test]
    fn collinear_weights_are_singular() {
        let x = centered(&random(10, 3, 16));
        let y = centered(&random(10, 2, 17));
        let w = array![[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]];
        let v = array![[1.0], [0.0]];
        assert!(matches!(
            compute_coefficients(w.view(), x.view(), y.view(), v.view()),
            Err(Error::SingularGram { .. })
        ));
    }

    fn hand_model() -> TwoblockModel {
        let names = |p: &str, k: usize| (1..=k).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        TwoblockModel {
            x_weights: Array2::eye(2),
            y_weights: Array2::eye(2),
            x_loadings: Array2::eye(2),
            y_loadings: Array2::eye(2),
            x_scores: Array2::zeros((2, 2)),
            y_scores: Array2::zeros((2, 2)),
            x_masks: Array2::ones((2, 2)),
            y_masks: Array2::ones((2, 2)),
            coefficients: array![[1.0, 2.0], [0.0, -1.0]],
            x_center: CenteringInfo { means: array![1.0, 2.0], scales: None },
            y_center: CenteringInfo { means: array![10.0, 20.0], scales: None },
            x_names: names("x", 2),
            y_names: names("y", 2),
            hyper: TwoblockHyperparams::dense(2, 2),
            x_truncated: false,
            y_truncated: false,
        }
    }

    #[test]
    fn hand_model_predicts_affine_map() {
        let m = hand_model();
        let x = DataMatrix::new(array![[2.0, 5.0], [1.0, 2.0]], vec!["x1".into(), "x2".into()]).unwrap();
        let pred = m.predict(&x).unwrap();
        // (1, 3) . B + means = (1, 2 - 3) + (10, 20)
        assert_abs_diff_eq!(pred.values().row(0), array![11.0, 19.0], epsilon = 1e-14);
        assert_abs_diff_eq!(pred.values().row(1), array![10.0, 20.0], epsilon = 1e-14);
    }

    #[test]
    fn selection_report_lists_zero_rows() {
        let mut m = hand_model();
        m.x_weights = array![[1.0, 0.0], [0.0, 0.0]];
        let r = selection_report(&m);
        assert_eq!(r.selected_predictors, vec!["x1"]);
        assert_eq!(r.deselected_predictors, vec!["x2"]);
        assert_eq!(r.deselected_counts(), (1, 0));
    }

    #[test]
    fn dense_fit_selects_everything() {
        let x = random(20, 6, 18);
        let y = random(20, 3, 19);
        let m = fit_twoblock(&dm(x, "x"), &dm(y, "y"), TwoblockHyperparams::dense(2, 3), ScalingMode::Center).unwrap();
        let r = selection_report(&m);
        assert_eq!(r.deselected_counts(), (0, 0));
    }

    #[test]
    fn sparse_fit_keeps_scores_orthogonal_and_supports_consistent() {
        let x = random(30, 10, 20);
        let y = random(30, 4, 21) + x.slice(ndarray::s![.., 0..4]);
        let hyper = TwoblockHyperparams { g: 3, h: 4, kappa: 0.4, eta: 0.6 };
        let m = fit_twoblock(&dm(x, "x"), &dm(y, "y"), hyper, ScalingMode::Autoscale).unwrap();
        for s in [&m.x_scores, &m.y_scores] {
            for i in 0..s.ncols() {
                for j in 0..i {
                    let (a, b) = (s.column(i), s.column(j));
                    assert!(a.dot(&b).abs() <= 1e-8 * norm2(a) * norm2(b));
                }
            }
        }
        for (w, p, mask) in [(&m.x_weights, &m.x_loadings, &m.x_masks), (&m.y_weights, &m.y_loadings, &m.y_masks)] {
            for ((&wv, &pv), &k) in w.iter().zip(p.iter()).zip(mask.iter()) {
                assert_eq!(wv != 0.0, k == 1);
                if k == 0 {
                    assert_eq!(pv, 0.0);
                }
            }
        }
        let sel = m.selected_predictors();
        for (j, keep) in sel.iter().enumerate() {
            if !keep {
                assert!(m.coefficients.row(j).iter().all(|&b| b == 0.0));
            }
        }
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        let x = dm(random(5, 3, 22), "x");
        let y = dm(random(5, 2, 23), "y");
        let err = fit_twoblock(&x, &y, TwoblockHyperparams::dense(1, 5), ScalingMode::Center).unwrap_err();
        assert!(matches!(err, Error::ComponentCountTooLarge { what: "h", bound: 3, .. }));
        let err = fit_twoblock(&x, &y, TwoblockHyperparams::dense(3, 1), ScalingMode::Center).unwrap_err();
        assert!(matches!(err, Error::ComponentCountTooLarge { what: "g", bound: 2, .. }));
        let bad = TwoblockHyperparams { g: 1, h: 1, kappa: 1.0, eta: 0.0 };
        assert!(matches!(fit_twoblock(&x, &y, bad, ScalingMode::Center), Err(Error::InvalidHyperparameter(_))));
    }

    #[test]
    fn fits_are_deterministic() {
        let x = dm(random(20, 7, 24), "x");
        let y = dm(random(20, 3, 25), "y");
        let hyper = TwoblockHyperparams { g: 2, h: 3, kappa: 0.3, eta: 0.5 };
        let a = fit_twoblock(&x, &y, hyper, ScalingMode::Center).unwrap();
        let b = fit_twoblock(&x, &y, hyper, ScalingMode::Center).unwrap();
        assert_eq!(a, b);
    }
}
