//! Optional TOML run configuration and list-flag parsing.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

/// Keys accepted in a `--config` file. Every key is optional; command-line
/// flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub test_x: Option<PathBuf>,
    pub test_y: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub scaling: Option<String>,
    pub method: Option<String>,
    pub g: Option<usize>,
    pub h: Option<usize>,
    pub h_per_response: Option<Vec<usize>>,
    pub eta: Option<f64>,
    pub kappa: Option<f64>,
    pub folds: Option<usize>,
    pub shuffle: Option<bool>,
    pub cv_score: Option<String>,
    pub g_grid: Option<Vec<usize>>,
    pub h_grid: Option<Vec<usize>>,
    pub eta_grid: Option<Vec<f64>>,
    pub kappa_grid: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub p1_grid: Option<Vec<usize>>,
    pub p2: Option<usize>,
    pub q1: Option<usize>,
    pub q2: Option<usize>,
    pub h_true: Option<usize>,
    pub noise_sd: Option<f64>,
    pub runs: Option<usize>,
    pub estimators: Option<Vec<String>>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("invalid config {}", p.display()))
            }
        }
    }
}

/// Flag value if given, else config value, else `None`.
pub fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

/// Like [`pick`] but the value is mandatory.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    match flag.or(file) {
        Some(v) => Ok(v),
        None => bail!("missing required parameter --{name}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsizeList(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
pub struct F64List(pub Vec<f64>);

/// Comma-separated list. An integer list may contain `...` to continue an
/// arithmetic progression: `1,2,...,12`.
pub fn parse_usize_list(s: &str) -> Result<UsizeList, String> {
    let toks: Vec<&str> = s.split(',').map(str::trim).collect();
    let mut out: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i] == "..." {
            let (a, b) = match out.as_slice() {
                [.., a, b] => (*a, *b),
                _ => return Err(format!("'...' needs two preceding values in '{s}'")),
            };
            let end: usize = toks
                .get(i + 1)
                .ok_or_else(|| format!("'...' needs an end value in '{s}'"))?
                .parse()
                .map_err(|_| format!("bad end value in '{s}'"))?;
            if b <= a || end < b {
                return Err(format!("'...' needs an increasing progression in '{s}'"));
            }
            let step = b - a;
            let mut v = b + step;
            while v <= end {
                out.push(v);
                v += step;
            }
            if *out.last().unwrap() != end {
                return Err(format!("{end} is not reached by step {step} in '{s}'"));
            }
            i += 2;
        } else {
            out.push(parse_one(toks[i], s)?);
            i += 1;
        }
    }
    Ok(UsizeList(out))
}

pub fn parse_f64_list(s: &str) -> Result<F64List, String> {
    s.split(',').map(|t| parse_one(t.trim(), s)).collect::<Result<_, _>>().map(F64List)
}

fn parse_one<T: FromStr>(t: &str, whole: &str) -> Result<T, String> {
    t.parse().map_err(|_| format!("'{t}' is not a valid value in '{whole}'"))
}
