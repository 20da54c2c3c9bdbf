//! K-fold grid-search cross-validation.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DataMatrix, ScalingMode};
use crate::model::FittedModel;
use crate::pls::{check_shapes, fit_pls, Pls1Set};
use crate::twoblock::{fit_twoblock, TwoblockHyperparams};

const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Independent PLS1 fits, each response with its own `h`.
    Pls1,
    Pls2,
    /// Dense twoblock (`eta = kappa = 0`).
    Xypls,
    SparseTwoblock,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pls1, Method::Pls2, Method::Xypls, Method::SparseTwoblock];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Pls1 => "pls1",
            Method::Pls2 => "pls2",
            Method::Xypls => "xypls",
            Method::SparseTwoblock => "sparse-twoblock",
        }
    }

    fn uses_g(&self) -> bool {
        matches!(self, Method::Xypls | Method::SparseTwoblock)
    }

    fn uses_sparsity(&self) -> bool {
        matches!(self, Method::SparseTwoblock)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}' (expected pls1, pls2, xypls or sparse-twoblock)")))
    }
}

/// One hyperparameter tuple. Baselines ignore the fields they do not use,
/// which are then held at `g = 0`, `eta = kappa = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub g: usize,
    pub h: usize,
    pub eta: f64,
    pub kappa: f64,
}

impl GridPoint {
    pub fn describe(&self, method: Method) -> String {
        match method {
            Method::Pls1 | Method::Pls2 => format!("h={}", self.h),
            Method::Xypls => format!("g={}, h={}", self.g, self.h),
            Method::SparseTwoblock => {
                format!("g={}, h={}, eta={}, kappa={}", self.g, self.h, self.eta, self.kappa)
            }
        }
    }

    /// Fits `method` at this point.
    pub fn fit(&self, method: Method, x: &DataMatrix, y: &DataMatrix, scaling: ScalingMode) -> Result<FittedModel> {
        Ok(match method {
            Method::Pls1 => FittedModel::Pls1Set(Pls1Set::fit(x, y, &vec![self.h; y.ncols()], scaling)?),
            Method::Pls2 => FittedModel::Pls2(fit_pls(x, y, self.h, scaling)?),
            Method::Xypls => FittedModel::Twoblock(fit_twoblock(x, y, TwoblockHyperparams::dense(self.g, self.h), scaling)?),
            Method::SparseTwoblock => FittedModel::Twoblock(fit_twoblock(
                x,
                y,
                TwoblockHyperparams {
                    g: self.g,
                    h: self.h,
                    kappa: self.kappa,
                    eta: self.eta,
                },
                scaling,
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub g: Vec<usize>,
    pub h: Vec<usize>,
    pub eta: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl Default for CvGrid {
    fn default() -> Self {
        CvGrid {
            g: vec![1, 2, 3],
            h: (1..=10).collect(),
            eta: vec![0.0, 0.25, 0.5, 0.75],
            kappa: vec![0.0, 0.25, 0.5, 0.75],
        }
    }
}

impl CvGrid {
    /// Cartesian product in enumeration order `g`, `h`, `eta`, `kappa`,
    /// restricted to the dimensions `method` uses.
    pub fn points(&self, method: Method) -> Vec<GridPoint> {
        let gs = if method.uses_g() { self.g.clone() } else { vec![0] };
        let (etas, kappas) = if method.uses_sparsity() {
            (self.eta.clone(), self.kappa.clone())
        } else {
            (vec![0.0], vec![0.0])
        };
        let mut out = Vec::new();
        for &g in &gs {
            for &h in &self.h {
                for &eta in &etas {
                    for &kappa in &kappas {
                        out.push(GridPoint { g, h, eta, kappa });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvScore {
    /// Held-out MSE averaged over responses.
    #[default]
    MeanMse,
    /// As `MeanMse`, with each response's squared errors divided by its
    /// training-fold variance.
    StandardizedMeanMse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub grid: CvGrid,
    pub seed: u64,
    pub shuffle: bool,
    pub score: CvScore,
    pub scaling: ScalingMode,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            grid: CvGrid::default(),
            seed: 0,
            shuffle: true,
            score: CvScore::MeanMse,
            scaling: ScalingMode::Center,
        }
    }
}

impl CvConfig {
    pub fn validate(&self, n: usize, method: Method) -> Result<()> {
        if self.folds < 2 || self.folds > n {
            return Err(Error::TooFewRows {
                rows: n,
                folds: self.folds,
            });
        }
        let g = &self.grid;
        if g.h.is_empty() || (method.uses_g() && g.g.is_empty()) {
            return Err(Error::InvalidConfig("grid has an empty dimension".into()));
        }
        if method.uses_sparsity() && (g.eta.is_empty() || g.kappa.is_empty()) {
            return Err(Error::InvalidConfig("grid has an empty dimension".into()));
        }
        if g.eta.iter().chain(&g.kappa).any(|v| !(0.0..1.0).contains(v)) {
            return Err(Error::InvalidConfig("eta and kappa candidates must lie in [0, 1)".into()));
        }
        if g.h.contains(&0) || (method.uses_g() && g.g.contains(&0)) {
            return Err(Error::InvalidConfig("component counts must be positive".into()));
        }
        Ok(())
    }
}

/// Row-to-fold assignment. Rows are optionally shuffled with a seeded
/// generator, then cut into contiguous blocks; the first `n % folds` folds
/// get one extra row.
pub fn make_folds(n: usize, folds: usize, seed: u64, shuffle: bool) -> Result<Vec<usize>> {
    if folds < 2 || folds > n {
        return Err(Error::TooFewRows { rows: n, folds });
    }
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let (base, extra) = (n / folds, n % folds);
    let mut assignment = vec![0; n];
    let mut pos = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        for &row in &order[pos..pos + size] {
            assignment[row] = f;
        }
        pos += size;
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PointOutcome {
    Scored {
        /// Fold-averaged score of the point.
        score: f64,
        /// Per-response fold-averaged held-out MSE.
        response_mse: Vec<f64>,
        /// Per-response fold-averaged score contribution.
        response_score: Vec<f64>,
    },
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: GridPoint,
    pub outcome: PointOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub method: Method,
    pub score: CvScore,
    pub response_names: Vec<String>,
    pub points: Vec<PointResult>,
    /// Selected tuple. For PLS1 this is the first response's choice; see
    /// `best_h_per_response`.
    pub best: GridPoint,
    /// PLS1 only: the `h` selected for each response.
    pub best_h_per_response: Option<Vec<usize>>,
    pub fold_assignment: Vec<usize>,
    /// Score of the refit model on the full training data.
    pub refit_training_score: f64,
}

impl CvReport {
    /// Table-style parameter string, e.g. `h=7,6,6,7` or `g=2, h=9, eta=0.5, kappa=0`.
    pub fn describe_best(&self) -> String {
        match &self.best_h_per_response {
            Some(hs) => format!("h={}", hs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")),
            None => self.best.describe(self.method),
        }
    }

    /// CSV rows: one per (grid point, response), then a summary row per
    /// point with response `mean`.
    pub fn csv_rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let header = vec!["method", "g", "h", "eta", "kappa", "response", "mse", "score", "selected", "note"];
        let mut rows = Vec::new();
        for pr in &self.points {
            let p = pr.point;
            let lead = |resp: &str| {
                vec![
                    self.method.to_string(),
                    p.g.to_string(),
                    p.h.to_string(),
                    p.eta.to_string(),
                    p.kappa.to_string(),
                    resp.to_string(),
                ]
            };
            match &pr.outcome {
                PointOutcome::Scored {
                    score,
                    response_mse,
                    response_score,
                } => {
                    for (k, name) in self.response_names.iter().enumerate() {
                        let selected = match &self.best_h_per_response {
                            Some(hs) => hs[k] == p.h,
                            None => p == self.best,
                        };
                        let mut r = lead(name);
                        r.extend([
                            response_mse[k].to_string(),
                            response_score[k].to_string(),
                            u8::from(selected).to_string(),
                            String::new(),
                        ]);
                        rows.push(r);
                    }
                    let mean_mse = response_mse.iter().sum::<f64>() / response_mse.len() as f64;
                    let selected = self.best_h_per_response.is_none() && p == self.best;
                    let mut r = lead("mean");
                    r.extend([mean_mse.to_string(), score.to_string(), u8::from(selected).to_string(), String::new()]);
                    rows.push(r);
                }
                PointOutcome::Infeasible(reason) => {
                    let mut r = lead("mean");
                    r.extend([String::new(), String::new(), "0".into(), format!("infeasible: {reason}")]);
                    rows.push(r);
                }
            }
        }
        (header, rows)
    }
}

struct FoldScore {
    mse: Vec<f64>,
    scaled: Vec<f64>,
}

fn score_fold(
    method: Method,
    point: &GridPoint,
    x: &DataMatrix,
    y: &DataMatrix,
    train: &[usize],
    test: &[usize],
    scaling: ScalingMode,
) -> Result<FoldScore> {
    let (xt, yt) = (x.select_rows(train)?, y.select_rows(train)?);
    let model = point.fit(method, &xt, &yt, scaling)?;
    // a single held-out row is padded to the two-row minimum of DataMatrix
    let rows: Vec<usize> = if test.len() == 1 { vec![test[0]; 2] } else { test.to_vec() };
    let pred = model.predict(&x.select_rows(&rows)?)?;
    let pred = pred.values().slice(ndarray::s![..test.len(), ..]).to_owned();
    let actual = y.values().select(Axis(0), test);
    let var = yt.values().var_axis(Axis(0), 1.0);
    let err: Array2<f64> = (pred - &actual).mapv(|e| e * e);
    let mse = err.mean_axis(Axis(0)).expect("nonempty fold").to_vec();
    let scaled = mse.iter().zip(var.iter()).map(|(m, &v)| if v > 0.0 { m / v } else { *m }).collect();
    Ok(FoldScore { mse, scaled })
}

fn choose(candidates: &[(GridPoint, f64)]) -> Option<GridPoint> {
    let min = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    candidates
        .iter()
        .filter(|c| c.1 <= min + TIE_TOLERANCE * min.abs())
        .map(|c| c.0)
        .min_by(|a, b| {
            a.h.cmp(&b.h)
                .then(a.g.cmp(&b.g))
                .then(b.eta.total_cmp(&a.eta))
                .then(b.kappa.total_cmp(&a.kappa))
        })
}

/// Scores every grid point by k-fold CV, selects the best (ties: smallest
/// `h`, smallest `g`, largest `eta`, largest `kappa`) and refits on all rows.
pub fn grid_search(x: &DataMatrix, y: &DataMatrix, method: Method, config: &CvConfig) -> Result<(CvReport, FittedModel)> {
    check_shapes(x, y)?;
    let n = x.nrows();
    config.validate(n, method)?;
    let assignment = make_folds(n, config.folds, config.seed, config.shuffle)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..config.folds)
        .map(|f| ((0..n).filter(|&i| assignment[i] != f).collect(), (0..n).filter(|&i| assignment[i] == f).collect()))
        .collect();
    let points = config.grid.points(method);
    let q = y.ncols();

    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..config.folds).map(move |f| (p, f))).collect();
    let fold_scores: Vec<Result<FoldScore>> = jobs
        .par_iter()
        .map(|&(p, f)| score_fold(method, &points[p], x, y, &splits[f].0, &splits[f].1, config.scaling))
        .collect();

    let mut results = Vec::with_capacity(points.len());
    for (pi, point) in points.iter().enumerate() {
        let per_fold = &fold_scores[pi * config.folds..(pi + 1) * config.folds];
        let outcome = match per_fold.iter().position(Result::is_err) {
            Some(f) => {
                let msg = per_fold[f].as_ref().err().map(ToString::to_string).unwrap_or_default();
                log::info!("{} at {} is infeasible: {msg}", method, point.describe(method));
                PointOutcome::Infeasible(format!("fold {}: {msg}", f + 1))
            }
            None => {
                let k = config.folds as f64;
                let mut mse = vec![0.0; q];
                let mut scaled = vec![0.0; q];
                for fs in per_fold.iter().flatten() {
                    for r in 0..q {
                        mse[r] += fs.mse[r] / k;
                        scaled[r] += fs.scaled[r] / k;
                    }
                }
                let response_score = match config.score {
                    CvScore::MeanMse => mse.clone(),
                    CvScore::StandardizedMeanMse => scaled,
                };
                let score = response_score.iter().sum::<f64>() / q as f64;
                PointOutcome::Scored {
                    score,
                    response_mse: mse,
                    response_score,
                }
            }
        };
        results.push(PointResult { point: *point, outcome });
    }

    let scored: Vec<(GridPoint, &Vec<f64>, f64)> = results
        .iter()
        .filter_map(|r| match &r.outcome {
            PointOutcome::Scored { score, response_score, .. } => Some((r.point, response_score, *score)),
            PointOutcome::Infeasible(_) => None,
        })
        .collect();
    if scored.is_empty() {
        return Err(Error::AllPointsInfeasible);
    }

    let (best, best_h, model) = if method == Method::Pls1 {
        let hs = (0..q)
            .map(|r| {
                let cands: Vec<(GridPoint, f64)> = scored.iter().map(|s| (s.0, s.1[r])).collect();
                choose(&cands).map(|p| p.h).ok_or(Error::AllPointsInfeasible)
            })
            .collect::<Result<Vec<_>>>()?;
        let model = FittedModel::Pls1Set(Pls1Set::fit(x, y, &hs, config.scaling)?);
        (GridPoint { g: 0, h: hs[0], eta: 0.0, kappa: 0.0 }, Some(hs), model)
    } else {
        let cands: Vec<(GridPoint, f64)> = scored.iter().map(|s| (s.0, s.2)).collect();
        let best = choose(&cands).ok_or(Error::AllPointsInfeasible)?;
        let model = best.fit(method, x, y, config.scaling)?;
        (best, None, model)
    };

    let fitted = model.predict(x)?;
    let var = y.values().var_axis(Axis(0), 1.0);
    let err = (fitted.values() - y.values()).mapv(|e| e * e);
    let mse = err.mean_axis(Axis(0)).expect("rows");
    let refit_training_score = mse
        .iter()
        .zip(var.iter())
        .map(|(m, &v)| match config.score {
            CvScore::StandardizedMeanMse if v > 0.0 => m / v,
            _ => *m,
        })
        .sum::<f64>()
        / q as f64;

    let report = CvReport {
        method,
        score: config.score,
        response_names: y.col_names().to_vec(),
        points: results,
        best,
        best_h_per_response: best_h,
        fold_assignment: assignment,
        refit_training_score,
    };
    Ok((report, model))
}
