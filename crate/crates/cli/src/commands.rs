use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};

use twoblock_core::csvio::{read_matrix, write_matrix, write_records};
use twoblock_core::cv::PointOutcome;
use twoblock_core::{
    fit_pls, fit_twoblock, grid_search, load_model, metrics_table, plot_data, run_batch, save_model, CvConfig, CvGrid,
    CvReport, CvScore, DataMatrix, FittedModel, Method, Pls1Set, ScalingMode, SimEstimator, SimScenario,
    TwoblockHyperparams,
};

use crate::config::{pick, require, FileConfig};
use crate::{CompareArgs, Command, Common, CvArgs, FitArgs, GridArgs, PredictArgs, SimulateArgs};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

struct Resolved {
    file: FileConfig,
    out: PathBuf,
    seed: u64,
}

fn resolve(common: &Common) -> Result<Resolved> {
    let mut file = FileConfig::load(common.config.as_deref())?;
    let out = require(common.out.clone(), file.out.take(), "out")?;
    let seed = pick(common.seed, file.seed).unwrap_or(0);
    Ok(Resolved { file, out, seed })
}

fn scaling(flag: &Option<String>, file: &Option<String>, default: ScalingMode) -> Result<ScalingMode> {
    match pick(flag.as_deref(), file.as_deref()) {
        None => Ok(default),
        Some("center") => Ok(ScalingMode::Center),
        Some("autoscale") => Ok(ScalingMode::Autoscale),
        Some(other) => bail!("invalid --scaling '{other}' (expected center or autoscale)"),
    }
}

fn method(flag: &Option<String>, file: &Option<String>) -> Result<Method> {
    let s = require(flag.as_deref(), file.as_deref(), "method")?;
    Ok(s.parse::<Method>()?)
}

fn read(path: &Path, what: &str) -> Result<DataMatrix> {
    read_matrix(path).with_context(|| format!("cannot load {what}"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_records(path, &h, rows)?;
    Ok(())
}

/// `1 - SSE/SST`, SST centered at the mean of `actual`.
fn r_squared(actual: ndarray::ArrayView1<'_, f64>, predicted: ndarray::ArrayView1<'_, f64>) -> f64 {
    let mean = actual.mean().unwrap_or(0.0);
    let sse: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    let sst: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    1.0 - sse / sst
}

fn mse(actual: ndarray::ArrayView1<'_, f64>, predicted: ndarray::ArrayView1<'_, f64>) -> f64 {
    actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum::<f64>() / actual.len() as f64
}

fn selection_rows(model: &FittedModel) -> Vec<Vec<String>> {
    let (sx, sy) = model.selection();
    let mut rows = Vec::new();
    for (name, s) in model.predictor_names().iter().zip(&sx) {
        rows.push(vec!["x".into(), name.clone(), u8::from(*s).to_string()]);
    }
    for (name, s) in model.response_names().iter().zip(&sy) {
        rows.push(vec!["y".into(), name.clone(), u8::from(*s).to_string()]);
    }
    rows
}

fn write_model_outputs(out: &Path, model: &FittedModel) -> Result<()> {
    save_model(model, out.join("model.json"))?;
    write_records(out.join("selection.csv"), &["block", "variable", "selected"], &selection_rows(model))?;
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let Resolved { file, out, .. } = resolve(&a.common)?;
    let xp = require(a.common.x.clone(), file.x.clone(), "x")?;
    let yp = require(a.common.y.clone(), file.y.clone(), "y")?;
    let mode = scaling(&a.common.scaling, &file.scaling, ScalingMode::Center)?;
    let method = method(&a.est.method, &file.method)?;
    let e = &a.est;
    let g = pick(e.g, file.g);
    let h = pick(e.h, file.h);
    let eta = pick(e.eta, file.eta).unwrap_or(0.0);
    let kappa = pick(e.kappa, file.kappa).unwrap_or(0.0);
    let (x, y) = (read(&xp, "X")?, read(&yp, "Y")?);

    let model = match method {
        Method::Pls1 => {
            let hs = match pick(e.h_per_response.clone().map(|l| l.0), file.h_per_response.clone()) {
                Some(hs) => hs,
                None => vec![require(h, None, "h")?; y.ncols()],
            };
            FittedModel::Pls1Set(Pls1Set::fit(&x, &y, &hs, mode)?)
        }
        Method::Pls2 => FittedModel::Pls2(fit_pls(&x, &y, require(h, None, "h")?, mode)?),
        Method::Xypls | Method::SparseTwoblock => {
            let hyper = if method == Method::Xypls {
                TwoblockHyperparams::dense(require(g, None, "g")?, require(h, None, "h")?)
            } else {
                TwoblockHyperparams {
                    g: require(g, None, "g")?,
                    h: require(h, None, "h")?,
                    eta,
                    kappa,
                }
            };
            FittedModel::Twoblock(fit_twoblock(&x, &y, hyper, mode)?)
        }
    };
    report_truncation(&model);

    let fitted = model.predict(&x)?;
    let mut rows = Vec::new();
    println!("method: {method}, components: {}", model.describe_components());
    for (k, name) in y.col_names().iter().enumerate() {
        let r2 = r_squared(y.values().column(k), fitted.values().column(k));
        let comps = match &model {
            FittedModel::Pls1Set(set) => format!("h={}", set.models[k].n_components()),
            other => other.describe_components(),
        };
        println!("  {name}: training R2 = {r2:.4} ({comps})");
        rows.push(vec![name.clone(), r2.to_string(), comps]);
    }
    let (sx, sy) = model.selection();
    println!(
        "  selected {} of {} predictors, {} of {} responses",
        sx.iter().filter(|&&s| s).count(),
        sx.len(),
        sy.iter().filter(|&&s| s).count(),
        sy.len()
    );

    ensure_dir(&out)?;
    write_model_outputs(&out, &model)?;
    write_records(out.join("fit_summary.csv"), &["response", "training_r2", "components"], &rows)?;
    Ok(())
}

fn report_truncation(model: &FittedModel) {
    let truncated = match model {
        FittedModel::Pls1Set(s) => s.models.iter().any(|m| m.truncated),
        FittedModel::Pls2(m) => m.truncated,
        FittedModel::Twoblock(m) => m.x_truncated || m.y_truncated,
    };
    if truncated {
        warn!("residual vanished early; fitted {}", model.describe_components());
    }
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let Resolved { file, out, .. } = resolve(&a.common)?;
    let mp = require(a.model.clone(), file.model.clone(), "model")?;
    let xp = require(a.common.x.clone(), file.x.clone(), "x")?;
    let model = load_model(&mp).with_context(|| format!("cannot load model {}", mp.display()))?;
    let x = read(&xp, "X")?;
    let pred = model.predict(&x)?;
    ensure_dir(&out)?;
    write_matrix(out.join("predictions.csv"), &pred)?;
    info!("wrote {} predictions", pred.nrows());
    Ok(())
}

fn cv_config(grid: &GridArgs, file: &FileConfig, seed: u64, mode: ScalingMode) -> Result<CvConfig> {
    let default = CvGrid::default();
    let score = match pick(grid.cv_score.as_deref(), file.cv_score.as_deref()) {
        None | Some("mean-mse") => CvScore::MeanMse,
        Some("standardized-mean-mse") => CvScore::StandardizedMeanMse,
        Some(other) => bail!("invalid --cv-score '{other}' (expected mean-mse or standardized-mean-mse)"),
    };
    let shuffle = if grid.no_shuffle { false } else { file.shuffle.unwrap_or(true) };
    Ok(CvConfig {
        folds: pick(grid.folds, file.folds).unwrap_or(5),
        grid: CvGrid {
            g: pick(grid.g_grid.clone().map(|l| l.0), file.g_grid.clone()).unwrap_or(default.g),
            h: pick(grid.h_grid.clone().map(|l| l.0), file.h_grid.clone()).unwrap_or(default.h),
            eta: pick(grid.eta_grid.clone().map(|l| l.0), file.eta_grid.clone()).unwrap_or(default.eta),
            kappa: pick(grid.kappa_grid.clone().map(|l| l.0), file.kappa_grid.clone()).unwrap_or(default.kappa),
        },
        seed,
        shuffle,
        score,
        scaling: mode,
    })
}

fn write_cv_report(path: &Path, report: &CvReport) -> Result<()> {
    let (header, rows) = report.csv_rows();
    write_records(path, &header, &rows)?;
    Ok(())
}

fn cmd_cv(a: CvArgs) -> Result<()> {
    let Resolved { file, out, seed } = resolve(&a.common)?;
    let xp = require(a.common.x.clone(), file.x.clone(), "x")?;
    let yp = require(a.common.y.clone(), file.y.clone(), "y")?;
    let mode = scaling(&a.common.scaling, &file.scaling, ScalingMode::Center)?;
    let method = method(&a.method, &file.method)?;
    let config = cv_config(&a.grid, &file, seed, mode)?;
    let (x, y) = (read(&xp, "X")?, read(&yp, "Y")?);
    config.validate(x.nrows(), method)?;

    let (report, model) = grid_search(&x, &y, method, &config)?;
    let infeasible = report
        .points
        .iter()
        .filter(|p| matches!(p.outcome, PointOutcome::Infeasible(_)))
        .count();
    if infeasible > 0 {
        warn!("{infeasible} of {} grid points were infeasible", report.points.len());
    }
    println!("{method}  Parameters: {}", report.describe_best());
    ensure_dir(&out)?;
    write_cv_report(&out.join("cv_report.csv"), &report)?;
    write_model_outputs(&out, &model)?;
    Ok(())
}

/// Parses `name:key=value,...`.
fn parse_estimator(spec: &str) -> Result<SimEstimator> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut g = None;
    let mut h = None;
    let mut eta = None;
    let mut kappa = None;
    for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("estimator '{spec}': expected key=value, got '{kv}'"))?;
        let bad = || format!("estimator '{spec}': bad value for {k}");
        match k.trim() {
            "g" => g = Some(v.trim().parse::<usize>().with_context(bad)?),
            "h" => h = Some(v.trim().parse::<usize>().with_context(bad)?),
            "eta" => eta = Some(v.trim().parse::<f64>().with_context(bad)?),
            "kappa" => kappa = Some(v.trim().parse::<f64>().with_context(bad)?),
            other => bail!("estimator '{spec}': unknown key '{other}'"),
        }
    }
    let need = |v: Option<usize>, k: &str| v.with_context(|| format!("estimator '{spec}' needs {k}"));
    Ok(match name.trim().parse::<Method>()? {
        Method::Pls1 => SimEstimator::Pls1 { h: need(h, "h")? },
        Method::Pls2 => SimEstimator::Pls2 { h: need(h, "h")? },
        Method::Xypls => SimEstimator::Xypls {
            g: need(g, "g")?,
            h: need(h, "h")?,
        },
        Method::SparseTwoblock => SimEstimator::SparseTwoblock {
            g: need(g, "g")?,
            h: need(h, "h")?,
            eta: eta.unwrap_or(0.0),
            kappa: kappa.unwrap_or(0.0),
        },
    })
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let Resolved { file, out, seed } = resolve(&a.common)?;
    let mode = scaling(&a.common.scaling, &file.scaling, ScalingMode::Autoscale)?;
    let base = SimScenario::default();
    let template = SimScenario {
        n: pick(a.n, file.n).unwrap_or(base.n),
        p2: pick(a.p2, file.p2).unwrap_or(base.p2),
        q1: pick(a.q1, file.q1).unwrap_or(base.q1),
        q2: pick(a.q2, file.q2).unwrap_or(base.q2),
        h_true: pick(a.h_true, file.h_true).unwrap_or(base.h_true),
        noise_sd: pick(a.noise_sd, file.noise_sd).unwrap_or(base.noise_sd),
        ..base
    };
    let p1s = pick(a.p1_grid.clone().map(|l| l.0), file.p1_grid.clone()).unwrap_or_else(|| vec![100, 150, 200]);
    let scenarios: Vec<SimScenario> = p1s.iter().map(|&p1| SimScenario { p1, ..template.clone() }).collect();
    for s in &scenarios {
        s.validate()?;
    }
    let runs = pick(a.runs, file.runs).unwrap_or(100);
    let specs = if a.estimators.is_empty() {
        file.estimators.clone().unwrap_or_else(|| {
            vec!["sparse-twoblock:g=1,h=3,eta=0.5,kappa=0.5".into(), "pls2:h=3".into()]
        })
    } else {
        a.estimators.clone()
    };
    let estimators = specs.iter().map(|s| parse_estimator(s)).collect::<Result<Vec<_>>>()?;

    let results = run_batch(&scenarios, &estimators, runs, seed, mode)?;
    for r in &results {
        if r.failures > 0 {
            warn!(
                "p1={} {}: {} of {} runs failed ({})",
                r.scenario.p1,
                r.estimator,
                r.failures,
                r.runs,
                r.first_error.as_deref().unwrap_or("")
            );
        }
        let m = r.mean;
        println!(
            "p1={:<4} {:<45} MSEB={:.4e} FPX={:.2} FNX={:.2} FPY={:.2} FNY={:.2}",
            r.scenario.p1,
            r.estimator.to_string(),
            m.mseb,
            m.fpx,
            m.fnx,
            m.fpy,
            m.fny
        );
    }
    ensure_dir(&out)?;
    let (h, rows) = metrics_table(&results);
    write_table(&out.join("metrics.csv"), &h, &rows)?;
    for metric in twoblock_core::SimMetrics::NAMES {
        let (h, rows) = plot_data(&results, metric)?;
        write_table(&out.join(format!("plotdata_{metric}.csv")), &h, &rows)?;
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let Resolved { file, out, seed } = resolve(&a.common)?;
    let xp = require(a.common.x.clone(), file.x.clone(), "x")?;
    let yp = require(a.common.y.clone(), file.y.clone(), "y")?;
    let txp = require(a.test_x.clone(), file.test_x.clone(), "test-x")?;
    let typ = require(a.test_y.clone(), file.test_y.clone(), "test-y")?;
    let mode = scaling(&a.common.scaling, &file.scaling, ScalingMode::Center)?;
    let config = cv_config(&a.grid, &file, seed, mode)?;
    let (x, y) = (read(&xp, "training X")?, read(&yp, "training Y")?);
    let (tx, ty) = (read(&txp, "test X")?, read(&typ, "test Y")?);
    let ty = ty.align_to(y.col_names()).context("test Y columns do not match training Y")?;
    if tx.nrows() != ty.nrows() {
        bail!("test X has {} rows but test Y has {}", tx.nrows(), ty.nrows());
    }

    let mut table = Vec::new();
    let mut preds = Vec::new();
    ensure_dir(&out)?;
    println!("{:<16} {:<36} {:>12} {:>8}", "method", "parameters", "response", "MSE / R2");
    for method in Method::ALL {
        config.validate(x.nrows(), method)?;
        let (report, model) = grid_search(&x, &y, method, &config).with_context(|| format!("cross-validating {method}"))?;
        write_cv_report(&out.join(format!("cv_report_{method}.csv")), &report)?;
        let pred = model.predict(&tx)?;
        let params = report.describe_best();
        let mut mses = Vec::new();
        let mut r2s = Vec::new();
        for (k, name) in y.col_names().iter().enumerate() {
            let (act, pr) = (ty.values().column(k), pred.values().column(k));
            let (m, r2) = (mse(act, pr), r_squared(act, pr));
            mses.push(m);
            r2s.push(r2);
            println!("{:<16} {:<36} {:>12} {m:.4} / {r2:.4}", method.as_str(), params, name);
            table.push(vec![method.to_string(), params.clone(), name.clone(), m.to_string(), r2.to_string()]);
            for (i, (av, pv)) in act.iter().zip(pr).enumerate() {
                preds.push(vec![method.to_string(), name.clone(), (i + 1).to_string(), av.to_string(), pv.to_string()]);
            }
        }
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (am, ar) = (avg(&mses), avg(&r2s));
        println!("{:<16} {:<36} {:>12} {am:.4} / {ar:.4}", method.as_str(), params, "average");
        table.push(vec![method.to_string(), params, "average".into(), am.to_string(), ar.to_string()]);
    }
    write_records(out.join("compare_table.csv"), &["method", "parameters", "response", "mse", "r2"], &table)?;
    write_records(
        out.join("compare_predictions.csv"),
        &["method", "response", "row", "actual", "predicted"],
        &preds,
    )?;
    Ok(())
}
