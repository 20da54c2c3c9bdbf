//! Latent-variable data generation, selection/coefficient metrics and
//! batched Monte-Carlo comparison of estimators.

use std::fmt;

use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DataMatrix, ScalingMode};
use crate::model::FittedModel;
use crate::pls::{fit_pls, Pls1Set};
use crate::twoblock::{fit_twoblock, TwoblockHyperparams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub n: usize,
    /// Informative predictors.
    pub p1: usize,
    /// Uninformative predictors.
    pub p2: usize,
    /// Informative responses.
    pub q1: usize,
    /// Uninformative responses.
    pub q2: usize,
    pub h_true: usize,
    pub noise_sd: f64,
    pub loading_range: (f64, f64),
    pub coef_range: (f64, f64),
    pub seed: u64,
}

impl Default for SimScenario {
    fn default() -> Self {
        SimScenario {
            n: 100,
            p1: 100,
            p2: 200,
            q1: 3,
            q2: 2,
            h_true: 3,
            noise_sd: 0.1,
            loading_range: (-5.0, 5.0),
            coef_range: (0.02, 0.07),
            seed: 0,
        }
    }
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if self.p1 == 0 || self.q1 == 0 || self.h_true == 0 {
            return bad("p1, q1 and h_true must be positive");
        }
        if !(self.noise_sd > 0.0) || !self.noise_sd.is_finite() {
            return bad("noise_sd must be positive");
        }
        for (name, (lo, hi)) in [("loading_range", self.loading_range), ("coef_range", self.coef_range)] {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} bounds must be finite and ordered")));
            }
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p1 + self.p2
    }

    pub fn q(&self) -> usize {
        self.q1 + self.q2
    }
}

/// Ground truth behind a simulated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub scores: Array2<f64>,
    /// `p x h_true`; rows of uninformative predictors are zero.
    pub loadings: Array2<f64>,
    /// `p x q`; only the informative `p1 x q1` block is nonzero.
    pub coefficients: Array2<f64>,
    pub informative_x: Vec<bool>,
    pub informative_y: Vec<bool>,
}

/// Draws `X = T P' + G` and `Y = X B + H`.
pub fn generate_dataset(scenario: &SimScenario) -> Result<(DataMatrix, DataMatrix, SimTruth)> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let (n, p, q, h) = (scenario.n, scenario.p(), scenario.q(), scenario.h_true);
    let noise = Normal::new(0.0, scenario.noise_sd).expect("validated noise_sd");
    let load = Uniform::new(scenario.loading_range.0, scenario.loading_range.1).expect("validated range");
    let coef = Uniform::new(scenario.coef_range.0, scenario.coef_range.1).expect("validated range");

    let scores = Array2::from_shape_fn((n, h), |_| StandardNormal.sample(&mut rng));
    let mut loadings = Array2::<f64>::zeros((p, h));
    loadings
        .slice_mut(s![..scenario.p1, ..])
        .mapv_inplace(|_| load.sample(&mut rng));
    let g = Array2::from_shape_fn((n, p), |_| noise.sample(&mut rng));
    let x = scores.dot(&loadings.t()) + g;

    let mut coefficients = Array2::<f64>::zeros((p, q));
    coefficients
        .slice_mut(s![..scenario.p1, ..scenario.q1])
        .mapv_inplace(|_| coef.sample(&mut rng));
    let hn = Array2::from_shape_fn((n, q), |_| noise.sample(&mut rng));
    let y = x.dot(&coefficients) + hn;

    let truth = SimTruth {
        scores,
        loadings,
        coefficients,
        informative_x: (0..p).map(|j| j < scenario.p1).collect(),
        informative_y: (0..q).map(|k| k < scenario.q1).collect(),
    };
    Ok((DataMatrix::with_prefix(x, "x")?, DataMatrix::with_prefix(y, "y")?, truth))
}

/// Metrics for one fitted model against the truth. Rates are percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub mseb: f64,
    pub fpx: f64,
    pub fnx: f64,
    pub fpy: f64,
    pub fny: f64,
}

impl SimMetrics {
    pub const NAMES: [&'static str; 5] = ["mseb", "fpx", "fnx", "fpy", "fny"];

    pub fn as_array(&self) -> [f64; 5] {
        [self.mseb, self.fpx, self.fnx, self.fpy, self.fny]
    }

    fn from_array(a: [f64; 5]) -> Self {
        SimMetrics {
            mseb: a[0],
            fpx: a[1],
            fnx: a[2],
            fpy: a[3],
            fny: a[4],
        }
    }
}

fn false_rates(selected: &[bool], informative: &[bool]) -> (f64, f64) {
    let (mut fp, mut n_uninf, mut fnn, mut n_inf) = (0usize, 0usize, 0usize, 0usize);
    for (&sel, &inf) in selected.iter().zip(informative) {
        if inf {
            n_inf += 1;
            fnn += usize::from(!sel);
        } else {
            n_uninf += 1;
            fp += usize::from(sel);
        }
    }
    let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
    (pct(fp, n_uninf), pct(fnn, n_inf))
}

/// MSEB over the informative-response columns plus the four selection
/// error rates.
pub fn compute_metrics(model: &FittedModel, truth: &SimTruth) -> Result<SimMetrics> {
    let b = model.coefficients_original_scale();
    let (sel_x, sel_y) = model.selection();
    metrics_from_parts(&b, &sel_x, &sel_y, truth)
}

pub(crate) fn metrics_from_parts(b: &Array2<f64>, sel_x: &[bool], sel_y: &[bool], truth: &SimTruth) -> Result<SimMetrics> {
    if b.dim() != truth.coefficients.dim() || sel_x.len() != truth.informative_x.len() || sel_y.len() != truth.informative_y.len() {
        return Err(Error::DimensionMismatch(format!(
            "fitted coefficients are {:?}, truth is {:?}",
            b.dim(),
            truth.coefficients.dim()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, &inf) in truth.informative_y.iter().enumerate() {
        if !inf {
            continue;
        }
        for (est, tr) in b.column(k).iter().zip(truth.coefficients.column(k)) {
            sum += (est - tr) * (est - tr);
            count += 1;
        }
    }
    let mseb = if count == 0 { 0.0 } else { sum / count as f64 };
    let (fpx, fnx) = false_rates(sel_x, &truth.informative_x);
    let (fpy, fny) = false_rates(sel_y, &truth.informative_y);
    Ok(SimMetrics { mseb, fpx, fnx, fpy, fny })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum SimEstimator {
    SparseTwoblock { g: usize, h: usize, eta: f64, kappa: f64 },
    Xypls { g: usize, h: usize },
    Pls2 { h: usize },
    Pls1 { h: usize },
}

impl fmt::Display for SimEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimEstimator::SparseTwoblock { g, h, eta, kappa } => {
                write!(f, "sparse-twoblock(g={g},h={h},eta={eta},kappa={kappa})")
            }
            SimEstimator::Xypls { g, h } => write!(f, "xypls(g={g},h={h})"),
            SimEstimator::Pls2 { h } => write!(f, "pls2(h={h})"),
            SimEstimator::Pls1 { h } => write!(f, "pls1(h={h})"),
        }
    }
}

impl SimEstimator {
    pub fn fit(&self, x: &DataMatrix, y: &DataMatrix, scaling: ScalingMode) -> Result<FittedModel> {
        Ok(match *self {
            SimEstimator::SparseTwoblock { g, h, eta, kappa } => {
                FittedModel::Twoblock(fit_twoblock(x, y, TwoblockHyperparams { g, h, kappa, eta }, scaling)?)
            }
            SimEstimator::Xypls { g, h } => {
                FittedModel::Twoblock(fit_twoblock(x, y, TwoblockHyperparams::dense(g, h), scaling)?)
            }
            SimEstimator::Pls2 { h } => FittedModel::Pls2(fit_pls(x, y, h, scaling)?),
            SimEstimator::Pls1 { h } => FittedModel::Pls1Set(Pls1Set::fit(x, y, &vec![h; y.ncols()], scaling)?),
        })
    }
}

/// Metric means and standard errors for one scenario and estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub scenario: SimScenario,
    pub estimator: SimEstimator,
    pub runs: usize,
    /// Runs whose fit failed; excluded from the aggregates.
    pub failures: usize,
    pub first_error: Option<String>,
    pub mean: SimMetrics,
    pub std_error: SimMetrics,
}

/// SplitMix64 step, used to derive independent per-run seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_seed(master: u64, scenario_index: usize, run: usize) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(scenario_index as u64)).wrapping_add(run as u64))
}

/// Runs every estimator on `runs` data sets per scenario. All estimators
/// see the same data set within a run. Output is ordered by scenario, then
/// estimator.
pub fn run_batch(
    scenarios: &[SimScenario],
    estimators: &[SimEstimator],
    runs: usize,
    seed: u64,
    scaling: ScalingMode,
) -> Result<Vec<SimResult>> {
    if runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    if estimators.is_empty() {
        return Err(Error::InvalidConfig("no estimators given".into()));
    }
    let mut out = Vec::with_capacity(scenarios.len() * estimators.len());
    for (si, scenario) in scenarios.iter().enumerate() {
        scenario.validate()?;
        let per_run: Vec<Vec<std::result::Result<SimMetrics, String>>> = (0..runs)
            .into_par_iter()
            .map(|r| {
                let sc = SimScenario {
                    seed: run_seed(seed, si, r),
                    ..scenario.clone()
                };
                match generate_dataset(&sc) {
                    Ok((x, y, truth)) => estimators
                        .iter()
                        .map(|e| {
                            e.fit(&x, &y, scaling)
                                .and_then(|m| compute_metrics(&m, &truth))
                                .map_err(|err| err.to_string())
                        })
                        .collect(),
                    Err(err) => vec![Err(err.to_string()); estimators.len()],
                }
            })
            .collect();
        for (ei, est) in estimators.iter().enumerate() {
            let ok: Vec<[f64; 5]> = per_run
                .iter()
                .filter_map(|r| r[ei].as_ref().ok().map(SimMetrics::as_array))
                .collect();
            let first_error = per_run.iter().find_map(|r| r[ei].as_ref().err().cloned());
            let (mean, se) = aggregate(&ok);
            out.push(SimResult {
                scenario: scenario.clone(),
                estimator: est.clone(),
                runs,
                failures: runs - ok.len(),
                first_error,
                mean: SimMetrics::from_array(mean),
                std_error: SimMetrics::from_array(se),
            });
        }
    }
    Ok(out)
}

fn aggregate(rows: &[[f64; 5]]) -> ([f64; 5], [f64; 5]) {
    let n = rows.len();
    if n == 0 {
        return ([f64::NAN; 5], [f64::NAN; 5]);
    }
    let mut mean = [0.0; 5];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut se = [0.0; 5];
    if n > 1 {
        for r in rows {
            for ((s, v), m) in se.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        se.iter_mut()
            .for_each(|s| *s = (*s / (n - 1) as f64).sqrt() / (n as f64).sqrt());
    }
    (mean, se)
}

/// One row per scenario and estimator: scenario echo, metric means and
/// standard errors.
pub fn metrics_table(results: &[SimResult]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header: Vec<String> = ["n", "p1", "p2", "q1", "q2", "h_true", "estimator", "runs", "failures"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in SimMetrics::NAMES {
        header.push(m.to_string());
        header.push(format!("{m}_se"));
    }
    let rows = results
        .iter()
        .map(|r| {
            let s = &r.scenario;
            let mut row = vec![
                s.n.to_string(),
                s.p1.to_string(),
                s.p2.to_string(),
                s.q1.to_string(),
                s.q2.to_string(),
                s.h_true.to_string(),
                r.estimator.to_string(),
                r.runs.to_string(),
                r.failures.to_string(),
            ];
            for (m, se) in r.mean.as_array().iter().zip(r.std_error.as_array()) {
                row.push(m.to_string());
                row.push(se.to_string());
            }
            row
        })
        .collect();
    (header, rows)
}

/// Long-format plot data for one metric: `p1, estimator, mean, std_error`.
pub fn plot_data(results: &[SimResult], metric: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let idx = SimMetrics::NAMES
        .iter()
        .position(|&m| m == metric)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown metric '{metric}'")))?;
    let header = ["p1", "estimator", "mean", "std_error"].iter().map(|s| s.to_string()).collect();
    let rows = results
        .iter()
        .map(|r| {
            vec![
                r.scenario.p1.to_string(),
                r.estimator.to_string(),
                r.mean.as_array()[idx].to_string(),
                r.std_error.as_array()[idx].to_string(),
            ]
        })
        .collect();
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn small(seed: u64) -> SimScenario {
        SimScenario {
            n: 30,
            p1: 6,
            p2: 9,
            q1: 2,
            q2: 1,
            h_true: 2,
            seed,
            ..SimScenario::default()
        }
    }

    #[test]
    fn no_uninformative_variables() {
        let sc = SimScenario { p2: 0, q2: 0, ..small(1) };
        let (_, _, truth) = generate_dataset(&sc).unwrap();
        assert!(truth.informative_x.iter().all(|&b| b));
        assert!(truth.informative_y.iter().all(|&b| b));
        assert!(truth.coefficients.iter().all(|&b| b != 0.0));
        assert!(truth.loadings.iter().all(|&b| b != 0.0));
    }

    #[test]
    fn figure_scenario_dimensions_and_zero_structure() {
        let sc = SimScenario { seed: 5, ..SimScenario::default() };
        let (x, y, truth) = generate_dataset(&sc).unwrap();
        assert_eq!((x.nrows(), x.ncols()), (100, 300));
        assert_eq!((y.nrows(), y.ncols()), (100, 5));
        assert!(truth.coefficients.slice(s![.., 3..]).iter().all(|&b| b == 0.0));
        assert!(truth.coefficients.slice(s![100.., ..]).iter().all(|&b| b == 0.0));
        assert!(truth.loadings.slice(s![100.., ..]).iter().all(|&b| b == 0.0));
        assert!(truth.coefficients.slice(s![..100, ..3]).iter().all(|&b| (0.02..0.07).contains(&b)));
        assert!(truth.loadings.slice(s![..100, ..]).iter().all(|&b| (-5.0..5.0).contains(&b)));
    }

    #[test]
    fn noise_variance_matches_large_sample() {
        let sc = SimScenario {
            n: 100_000,
            p1: 1,
            p2: 1,
            q1: 1,
            q2: 0,
            h_true: 1,
            seed: 9,
            ..SimScenario::default()
        };
        let (x, _, truth) = generate_dataset(&sc).unwrap();
        let g = x.values() - &truth.scores.dot(&truth.loadings.t());
        for col in g.columns() {
            let var = col.var(1.0);
            assert!((var - 0.01).abs() < 0.01 * 0.05, "variance {var}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_dataset(&small(3)).unwrap();
        let b = generate_dataset(&small(3)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
    }

    fn truth_2x2() -> SimTruth {
        SimTruth {
            scores: Array2::zeros((2, 1)),
            loadings: array![[1.0], [0.0]],
            coefficients: array![[1.0, 0.0], [0.0, 0.0]],
            informative_x: vec![true, false],
            informative_y: vec![true, false],
        }
    }

    #[test]
    fn oracle_estimator_scores_zero() {
        let t = truth_2x2();
        let m = metrics_from_parts(&t.coefficients, &[true, false], &[true, false], &t).unwrap();
        assert_eq!(m.as_array(), [0.0; 5]);
    }

    #[test]
    fn hand_mseb_and_dense_rates() {
        let t = truth_2x2();
        let b = array![[0.5, 0.1], [0.5, 0.2]];
        let m = metrics_from_parts(&b, &[true, true], &[true, true], &t).unwrap();
        assert_abs_diff_eq!(m.mseb, 0.25, epsilon = 1e-15);
        assert_eq!((m.fpx, m.fnx, m.fpy, m.fny), (100.0, 0.0, 100.0, 0.0));
        let m = metrics_from_parts(&b, &[false, false], &[false, false], &t).unwrap();
        assert_eq!((m.fpx, m.fnx, m.fpy, m.fny), (0.0, 100.0, 0.0, 100.0));
        assert!(metrics_from_parts(&b, &[true], &[true, true], &t).is_err());
    }

    #[test]
    fn metrics_are_permutation_equivariant() {
        let (x, y, truth) = generate_dataset(&small(4)).unwrap();
        let est = SimEstimator::SparseTwoblock { g: 1, h: 2, eta: 0.5, kappa: 0.5 };
        let model = est.fit(&x, &y, ScalingMode::Autoscale).unwrap();
        let base = compute_metrics(&model, &truth).unwrap();

        let px: Vec<usize> = (0..x.ncols()).rev().collect();
        let py: Vec<usize> = vec![2, 0, 1];
        let b = model.coefficients_original_scale();
        let (sx, sy) = model.selection();
        let b_perm = b.select(ndarray::Axis(0), &px).select(ndarray::Axis(1), &py);
        let sx_perm: Vec<bool> = px.iter().map(|&i| sx[i]).collect();
        let sy_perm: Vec<bool> = py.iter().map(|&i| sy[i]).collect();
        let t_perm = SimTruth {
            scores: truth.scores.clone(),
            loadings: truth.loadings.select(ndarray::Axis(0), &px),
            coefficients: truth.coefficients.select(ndarray::Axis(0), &px).select(ndarray::Axis(1), &py),
            informative_x: px.iter().map(|&i| truth.informative_x[i]).collect(),
            informative_y: py.iter().map(|&i| truth.informative_y[i]).collect(),
        };
        let perm = metrics_from_parts(&b_perm, &sx_perm, &sy_perm, &t_perm).unwrap();
        assert_abs_diff_eq!(base.mseb, perm.mseb, epsilon = 1e-18);
        assert_eq!(&base.as_array()[1..], &perm.as_array()[1..]);
    }

    #[test]
    fn dense_baseline_selects_everything() {
        let (x, y, truth) = generate_dataset(&small(6)).unwrap();
        let m = SimEstimator::Pls2 { h: 2 }.fit(&x, &y, ScalingMode::Center).unwrap();
        let r = compute_metrics(&m, &truth).unwrap();
        assert_eq!((r.fpx, r.fnx), (100.0, 0.0));
    }

    #[test]
    fn single_run_batch_equals_that_run() {
        let est = [SimEstimator::Pls2 { h: 2 }];
        let res = run_batch(&[small(0)], &est, 1, 77, ScalingMode::Center).unwrap();
        let sc = SimScenario { seed: run_seed(77, 0, 0), ..small(0) };
        let (x, y, truth) = generate_dataset(&sc).unwrap();
        let direct = compute_metrics(&est[0].fit(&x, &y, ScalingMode::Center).unwrap(), &truth).unwrap();
        assert_eq!(res[0].mean, direct);
        assert_eq!(res[0].std_error.as_array(), [0.0; 5]);
    }

    #[test]
    fn batches_are_deterministic_and_ordered() {
        let scs = [small(0), SimScenario { p1: 8, ..small(0) }];
        let est = [
            SimEstimator::SparseTwoblock { g: 1, h: 2, eta: 0.5, kappa: 0.5 },
            SimEstimator::Xypls { g: 1, h: 2 },
            SimEstimator::Pls1 { h: 2 },
        ];
        let a = run_batch(&scs, &est, 8, 5, ScalingMode::Autoscale).unwrap();
        let b = run_batch(&scs, &est, 8, 5, ScalingMode::Autoscale).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert_eq!(a[3].scenario.p1, 8);
        assert_eq!(a[4].estimator, est[1]);
        let (h, rows) = metrics_table(&a);
        assert_eq!(h.len(), 19);
        assert_eq!(rows.len(), 6);
        let (_, rows) = plot_data(&a, "fnx").unwrap();
        assert_eq!(rows[0][0], "6");
        assert!(plot_data(&a, "r2").is_err());
    }

    #[test]
    fn fit_failures_are_recorded_not_fatal() {
        let res = run_batch(&[small(0)], &[SimEstimator::Pls2 { h: 40 }], 2, 1, ScalingMode::Center).unwrap();
        assert_eq!(res[0].failures, 2);
        assert!(res[0].first_error.is_some());
        assert!(res[0].mean.mseb.is_nan());
    }
}
