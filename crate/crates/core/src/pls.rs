//! NIPALS PLS2 regression, with PLS1 as the single-response case.

use log::warn;
use ndarray::{concatenate, Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg::{center_scale, frobenius, lu_solve, norm2, CenteringInfo, DataMatrix, ScalingMode, NUMERICAL_ZERO};

const NIPALS_TOL: f64 = 1e-10;
const NIPALS_MAX_ITER: usize = 10_000;
const DEGENERATE_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PlsModel {
    /// `p x h` X-block weights.
    pub weights: Array2<f64>,
    pub x_loadings: Array2<f64>,
    pub y_loadings: Array2<f64>,
    pub scores: Array2<f64>,
    /// `p x q` coefficients in the centered (and scaled) space.
    pub coefficients: Array2<f64>,
    pub x_center: CenteringInfo,
    pub y_center: CenteringInfo,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    /// Requested number of components.
    pub requested: usize,
    /// Set when the residual vanished before `requested` components; the
    /// fit then holds fewer columns than requested.
    pub truncated: bool,
}

impl PlsModel {
    /// Components actually extracted.
    pub fn n_components(&self) -> usize {
        self.weights.ncols()
    }

    pub fn predict(&self, x_new: &DataMatrix) -> Result<DataMatrix> {
        let x = x_new.align_to(&self.x_names)?;
        let z = self.x_center.apply(x.values()).dot(&self.coefficients);
        DataMatrix::new(self.y_center.invert(&z), self.y_names.clone())
    }

    /// Coefficients mapping raw X to raw Y, i.e. undoing any autoscaling.
    pub fn coefficients_original_scale(&self) -> Array2<f64> {
        rescale_coefficients(&self.coefficients, &self.x_center, &self.y_center)
    }
}

pub(crate) fn rescale_coefficients(b: &Array2<f64>, x: &CenteringInfo, y: &CenteringInfo) -> Array2<f64> {
    let mut out = b.clone();
    if let Some(sx) = &x.scales {
        for (mut row, s) in out.rows_mut().into_iter().zip(sx.iter()) {
            row /= *s;
        }
    }
    if let Some(sy) = &y.scales {
        out *= sy;
    }
    out
}

pub(crate) fn check_shapes(x: &DataMatrix, y: &DataMatrix) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows but Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    Ok(())
}

/// Fits PLS2 by NIPALS. With a single response this is classical PLS1.
pub fn fit_pls(x: &DataMatrix, y: &DataMatrix, h: usize, scaling: ScalingMode) -> Result<PlsModel> {
    check_shapes(x, y)?;
    let (n, p) = (x.nrows(), x.ncols());
    let q = y.ncols();
    let bound = p.min(n - 1);
    if h == 0 {
        return Err(Error::InvalidHyperparameter("h must be positive".into()));
    }
    if h > bound {
        return Err(Error::ComponentCountTooLarge {
            what: "h",
            requested: h,
            bound,
        });
    }
    let (xc, x_center) = center_scale(x, scaling)?;
    let (yc, y_center) = center_scale(y, scaling)?;
    let mut e = xc.into_values();
    let mut f = yc.into_values();

    let initial = frobenius(e.t().dot(&f).view());
    let mut ws = Vec::with_capacity(h);
    let mut ps = Vec::with_capacity(h);
    let mut cs = Vec::with_capacity(h);
    let mut ts = Vec::with_capacity(h);
    let mut truncated = false;

    for k in 0..h {
        let cov = frobenius(e.t().dot(&f).view());
        if cov <= NUMERICAL_ZERO || cov <= DEGENERATE_RATIO * initial {
            warn!("PLS residual vanished at component {}; keeping {k}", k + 1);
            truncated = true;
            break;
        }
        let (w, t, c) = nipals_component(&e, &f)?;
        let tt = t.dot(&t);
        let pl = e.t().dot(&t) / tt;
        rank_one_update(&mut e, &t, &pl);
        rank_one_update(&mut f, &t, &c);
        ws.push(w);
        ps.push(pl);
        cs.push(c);
        ts.push(t);
    }

    let weights = stack_columns(&ws, p);
    let x_loadings = stack_columns(&ps, p);
    let y_loadings = stack_columns(&cs, q);
    let scores = stack_columns(&ts, n);
    let coefficients = if ws.is_empty() {
        Array2::zeros((p, q))
    } else {
        // B = W (P'W)^-1 C'
        let ptw = x_loadings.t().dot(&weights);
        let z = lu_solve(&ptw, &y_loadings.t().to_owned()).ok_or_else(|| {
            Error::DimensionMismatch("P'W is singular; reduce the number of components".into())
        })?;
        weights.dot(&z)
    };

    Ok(PlsModel {
        weights,
        x_loadings,
        y_loadings,
        scores,
        coefficients,
        x_center,
        y_center,
        x_names: x.col_names().to_vec(),
        y_names: y.col_names().to_vec(),
        requested: h,
        truncated,
    })
}

/// One NIPALS component: returns `(w, t, c)`.
fn nipals_component(e: &Array2<f64>, f: &Array2<f64>) -> Result<(Array1<f64>, Array1<f64>, Array1<f64>)> {
    let start = (0..f.ncols())
        .max_by(|&a, &b| {
            let na = norm2(f.column(a));
            let nb = norm2(f.column(b));
            na.total_cmp(&nb).then(b.cmp(&a))
        })
        .unwrap();
    let mut u = f.column(start).to_owned();
    let mut w_old: Option<Array1<f64>> = None;
    for _ in 0..NIPALS_MAX_ITER {
        let mut w = e.t().dot(&u);
        let nw = norm2(w.view());
        if nw <= f64::MIN_POSITIVE {
            return Err(Error::ZeroVector);
        }
        w /= nw;
        let t = e.dot(&w);
        let c = f.t().dot(&t) / t.dot(&t);
        let converged = w_old
            .as_ref()
            .is_some_and(|old| norm2((&w - old).view()) < NIPALS_TOL);
        if converged {
            return Ok((w, t, c));
        }
        u = f.dot(&c) / c.dot(&c);
        w_old = Some(w);
    }
    Err(Error::NoConvergence(NIPALS_MAX_ITER))
}

pub(crate) fn rank_one_update(block: &mut Array2<f64>, score: &Array1<f64>, loading: &Array1<f64>) {
    for (mut row, &t) in block.rows_mut().into_iter().zip(score.iter()) {
        row.scaled_add(-t, loading);
    }
}

pub(crate) fn stack_columns(cols: &[Array1<f64>], rows: usize) -> Array2<f64> {
    if cols.is_empty() {
        return Array2::zeros((rows, 0));
    }
    let views: Vec<_> = cols.iter().map(|c| c.view().insert_axis(Axis(1))).collect();
    concatenate(Axis(1), &views).expect("columns share a length")
}

/// Independent PLS1 fits, one per response, each with its own component count.
#[derive(Debug, Clone, PartialEq)]
pub struct Pls1Set {
    pub models: Vec<PlsModel>,
}

impl Pls1Set {
    pub fn fit(x: &DataMatrix, y: &DataMatrix, h_per_response: &[usize], scaling: ScalingMode) -> Result<Self> {
        if h_per_response.len() != y.ncols() {
            return Err(Error::InvalidHyperparameter(format!(
                "{} component counts given for {} responses",
                h_per_response.len(),
                y.ncols()
            )));
        }
        let models = h_per_response
            .iter()
            .enumerate()
            .map(|(k, &h)| fit_pls(x, &y.select_column(k)?, h, scaling))
            .collect::<Result<Vec<_>>>()?;
        Ok(Pls1Set { models })
    }

    pub fn response_names(&self) -> Vec<String> {
        self.models.iter().map(|m| m.y_names[0].clone()).collect()
    }

    pub fn predict(&self, x_new: &DataMatrix) -> Result<DataMatrix> {
        let cols = self
            .models
            .iter()
            .map(|m| m.predict(x_new).map(|d| d.values().column(0).to_owned()))
            .collect::<Result<Vec<_>>>()?;
        DataMatrix::new(stack_columns(&cols, x_new.nrows()), self.response_names())
    }

    pub fn coefficients_original_scale(&self) -> Array2<f64> {
        let cols: Vec<Array1<f64>> = self
            .models
            .iter()
            .map(|m| m.coefficients_original_scale().column(0).to_owned())
            .collect();
        let p = self.models.first().map_or(0, |m| m.x_names.len());
        stack_columns(&cols, p)
    }
}
