//! JSON model archives.
//!
//! An archive is `{schema_version, estimator_kind, payload}`. Matrices are
//! stored as `{rows, cols, data}` with `data` flattened row-major. Floats
//! are written in shortest round-trip form, so a save/load cycle is
//! bitwise exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::CenteringInfo;
use crate::model::{EstimatorKind, FittedModel};
use crate::pls::{Pls1Set, PlsModel};
use crate::twoblock::{TwoblockHyperparams, TwoblockModel};

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixRecord {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixRecord {
    fn from_array(a: &Array2<f64>) -> Self {
        MatrixRecord {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }

    fn into_array(self, field: &str) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data)
            .map_err(|_| Error::CorruptArchive(format!("{field}: data length does not match {}x{}", self.rows, self.cols)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CenteringRecord {
    means: Vec<f64>,
    scales: Option<Vec<f64>>,
}

impl CenteringRecord {
    fn from_info(c: &CenteringInfo) -> Self {
        CenteringRecord {
            means: c.means.to_vec(),
            scales: c.scales.as_ref().map(|s| s.to_vec()),
        }
    }

    fn into_info(self, field: &str, len: usize) -> Result<CenteringInfo> {
        if self.means.len() != len || self.scales.as_ref().is_some_and(|s| s.len() != len) {
            return Err(Error::CorruptArchive(format!("{field}: expected {len} entries")));
        }
        if self.scales.as_ref().is_some_and(|s| s.iter().any(|&v| !(v > 0.0))) {
            return Err(Error::CorruptArchive(format!("{field}: scales must be positive")));
        }
        Ok(CenteringInfo {
            means: Array1::from(self.means),
            scales: self.scales.map(Array1::from),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlsRecord {
    weights: MatrixRecord,
    x_loadings: MatrixRecord,
    y_loadings: MatrixRecord,
    scores: MatrixRecord,
    coefficients: MatrixRecord,
    x_center: CenteringRecord,
    y_center: CenteringRecord,
    x_names: Vec<String>,
    y_names: Vec<String>,
    requested: usize,
    truncated: bool,
}

impl PlsRecord {
    fn from_model(m: &PlsModel) -> Self {
        PlsRecord {
            weights: MatrixRecord::from_array(&m.weights),
            x_loadings: MatrixRecord::from_array(&m.x_loadings),
            y_loadings: MatrixRecord::from_array(&m.y_loadings),
            scores: MatrixRecord::from_array(&m.scores),
            coefficients: MatrixRecord::from_array(&m.coefficients),
            x_center: CenteringRecord::from_info(&m.x_center),
            y_center: CenteringRecord::from_info(&m.y_center),
            x_names: m.x_names.clone(),
            y_names: m.y_names.clone(),
            requested: m.requested,
            truncated: m.truncated,
        }
    }

    fn into_model(self) -> Result<PlsModel> {
        let (p, q) = (self.x_names.len(), self.y_names.len());
        let m = PlsModel {
            weights: self.weights.into_array("weights")?,
            x_loadings: self.x_loadings.into_array("x_loadings")?,
            y_loadings: self.y_loadings.into_array("y_loadings")?,
            scores: self.scores.into_array("scores")?,
            coefficients: self.coefficients.into_array("coefficients")?,
            x_center: self.x_center.into_info("x_center", p)?,
            y_center: self.y_center.into_info("y_center", q)?,
            x_names: self.x_names,
            y_names: self.y_names,
            requested: self.requested,
            truncated: self.truncated,
        };
        let h = m.weights.ncols();
        check_dims("weights", m.weights.dim(), (p, h))?;
        check_dims("x_loadings", m.x_loadings.dim(), (p, h))?;
        check_dims("y_loadings", m.y_loadings.dim(), (q, h))?;
        check_dims("scores", m.scores.dim(), (m.scores.nrows(), h))?;
        check_dims("coefficients", m.coefficients.dim(), (p, q))?;
        check_names(&m.x_names)?;
        check_names(&m.y_names)?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Pls1SetRecord {
    models: Vec<PlsRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TwoblockRecord {
    x_weights: MatrixRecord,
    y_weights: MatrixRecord,
    x_loadings: MatrixRecord,
    y_loadings: MatrixRecord,
    x_scores: MatrixRecord,
    y_scores: MatrixRecord,
    x_masks: MatrixRecord,
    y_masks: MatrixRecord,
    coefficients: MatrixRecord,
    x_center: CenteringRecord,
    y_center: CenteringRecord,
    x_names: Vec<String>,
    y_names: Vec<String>,
    hyper: TwoblockHyperparams,
    x_truncated: bool,
    y_truncated: bool,
}

fn mask_from_array(m: &Array2<u8>) -> MatrixRecord {
    MatrixRecord::from_array(&m.mapv(f64::from))
}

fn mask_into_array(r: MatrixRecord, field: &str) -> Result<Array2<u8>> {
    let a = r.into_array(field)?;
    if a.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::CorruptArchive(format!("{field}: mask entries must be 0 or 1")));
    }
    Ok(a.mapv(|v| v as u8))
}

impl TwoblockRecord {
    fn from_model(m: &TwoblockModel) -> Self {
        TwoblockRecord {
            x_weights: MatrixRecord::from_array(&m.x_weights),
            y_weights: MatrixRecord::from_array(&m.y_weights),
            x_loadings: MatrixRecord::from_array(&m.x_loadings),
            y_loadings: MatrixRecord::from_array(&m.y_loadings),
            x_scores: MatrixRecord::from_array(&m.x_scores),
            y_scores: MatrixRecord::from_array(&m.y_scores),
            x_masks: mask_from_array(&m.x_masks),
            y_masks: mask_from_array(&m.y_masks),
            coefficients: MatrixRecord::from_array(&m.coefficients),
            x_center: CenteringRecord::from_info(&m.x_center),
            y_center: CenteringRecord::from_info(&m.y_center),
            x_names: m.x_names.clone(),
            y_names: m.y_names.clone(),
            hyper: m.hyper,
            x_truncated: m.x_truncated,
            y_truncated: m.y_truncated,
        }
    }

    fn into_model(self) -> Result<TwoblockModel> {
        let (p, q) = (self.x_names.len(), self.y_names.len());
        let m = TwoblockModel {
            x_weights: self.x_weights.into_array("x_weights")?,
            y_weights: self.y_weights.into_array("y_weights")?,
            x_loadings: self.x_loadings.into_array("x_loadings")?,
            y_loadings: self.y_loadings.into_array("y_loadings")?,
            x_scores: self.x_scores.into_array("x_scores")?,
            y_scores: self.y_scores.into_array("y_scores")?,
            x_masks: mask_into_array(self.x_masks, "x_masks")?,
            y_masks: mask_into_array(self.y_masks, "y_masks")?,
            coefficients: self.coefficients.into_array("coefficients")?,
            x_center: self.x_center.into_info("x_center", p)?,
            y_center: self.y_center.into_info("y_center", q)?,
            x_names: self.x_names,
            y_names: self.y_names,
            hyper: self.hyper,
            x_truncated: self.x_truncated,
            y_truncated: self.y_truncated,
        };
        let (h, g) = (m.x_weights.ncols(), m.y_weights.ncols());
        check_dims("x_weights", m.x_weights.dim(), (p, h))?;
        check_dims("y_weights", m.y_weights.dim(), (q, g))?;
        check_dims("x_loadings", m.x_loadings.dim(), (p, h))?;
        check_dims("y_loadings", m.y_loadings.dim(), (q, g))?;
        check_dims("x_masks", m.x_masks.dim(), (p, h))?;
        check_dims("y_masks", m.y_masks.dim(), (q, g))?;
        check_dims("x_scores", m.x_scores.dim(), (m.x_scores.nrows(), h))?;
        check_dims("y_scores", m.y_scores.dim(), (m.x_scores.nrows(), g))?;
        check_dims("coefficients", m.coefficients.dim(), (p, q))?;
        check_names(&m.x_names)?;
        check_names(&m.y_names)?;
        Ok(m)
    }
}

fn check_dims(field: &str, found: (usize, usize), expected: (usize, usize)) -> Result<()> {
    if found != expected {
        return Err(Error::CorruptArchive(format!(
            "{field} is {}x{}, expected {}x{}",
            found.0, found.1, expected.0, expected.1
        )));
    }
    Ok(())
}

fn check_names(names: &[String]) -> Result<()> {
    let mut sorted: Vec<&String> = names.iter().collect();
    sorted.sort();
    sorted.dedup();
    if names.is_empty() || sorted.len() != names.len() {
        return Err(Error::CorruptArchive("column names must be nonempty and unique".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct ArchiveOut<'a> {
    schema_version: i64,
    estimator_kind: EstimatorKind,
    payload: &'a Value,
}

/// Serializes a model to the archive JSON text.
pub fn to_json(model: &FittedModel) -> Result<String> {
    let payload = match model {
        FittedModel::Pls1Set(set) => serde_json::to_value(Pls1SetRecord {
            models: set.models.iter().map(PlsRecord::from_model).collect(),
        }),
        FittedModel::Pls2(m) => serde_json::to_value(PlsRecord::from_model(m)),
        FittedModel::Twoblock(m) => serde_json::to_value(TwoblockRecord::from_model(m)),
    }
    .map_err(|e| Error::InvalidData(format!("model cannot be serialized: {e}")))?;
    let archive = ArchiveOut {
        schema_version: SCHEMA_VERSION,
        estimator_kind: model.kind(),
        payload: &payload,
    };
    serde_json::to_string_pretty(&archive).map_err(|e| Error::InvalidData(format!("model cannot be serialized: {e}")))
}

fn decode<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::CorruptArchive(e.to_string()))
}

/// Parses archive JSON text, checking the schema version first.
pub fn from_json(text: &str) -> Result<FittedModel> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| Error::CorruptArchive(e.to_string()))?;
    let version = doc
        .get("schema_version")
        .and_then(Value::as_i64)
        .ok_or_else(|| Error::CorruptArchive("missing integer schema_version".into()))?;
    if version != SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    let kind: EstimatorKind = decode(doc.get("estimator_kind").cloned().unwrap_or(Value::Null))?;
    let payload = doc
        .get_mut("payload")
        .map(Value::take)
        .ok_or_else(|| Error::CorruptArchive("missing payload".into()))?;
    match kind {
        EstimatorKind::Pls1Set => {
            let rec: Pls1SetRecord = decode(payload)?;
            if rec.models.is_empty() {
                return Err(Error::CorruptArchive("PLS1 set holds no models".into()));
            }
            let models = rec.models.into_iter().map(PlsRecord::into_model).collect::<Result<Vec<_>>>()?;
            if models.iter().any(|m| m.y_names.len() != 1 || m.x_names != models[0].x_names) {
                return Err(Error::CorruptArchive("PLS1 set members must share predictors and have one response".into()));
            }
            Ok(FittedModel::Pls1Set(Pls1Set { models }))
        }
        EstimatorKind::Pls2 => Ok(FittedModel::Pls2(decode::<PlsRecord>(payload)?.into_model()?)),
        EstimatorKind::Twoblock => Ok(FittedModel::Twoblock(decode::<TwoblockRecord>(payload)?.into_model()?)),
    }
}

/// Writes `text` to `path` through a temporary file in the same directory
/// and a rename.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidInput, "no file name")))?;
    let tmp = dir.join(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn save_model(model: &FittedModel, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &to_json(model)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DataMatrix, ScalingMode};
    use crate::pls::fit_pls;
    use crate::twoblock::fit_twoblock;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn data(n: usize, p: usize, q: usize, seed: u64) -> (DataMatrix, DataMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
        let y = Array2::from_shape_fn((n, q), |_| StandardNormal.sample(&mut rng)) + x.slice(ndarray::s![.., 0..q]);
        (DataMatrix::with_prefix(x, "x").unwrap(), DataMatrix::with_prefix(y, "y").unwrap())
    }

    fn twoblock() -> FittedModel {
        let (x, y) = data(20, 6, 3, 1);
        let hyper = TwoblockHyperparams { g: 2, h: 3, kappa: 0.3, eta: 0.5 };
        FittedModel::Twoblock(fit_twoblock(&x, &y, hyper, ScalingMode::Autoscale).unwrap())
    }

    #[test]
    fn twoblock_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let m = twoblock();
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(m, back);
        let (x, _) = data(20, 6, 3, 1);
        let a = m.predict(&x).unwrap();
        let b = back.predict(&x).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    #[test]
    fn pls_round_trips() {
        let (x, y) = data(15, 5, 4, 2);
        let pls2 = FittedModel::Pls2(fit_pls(&x, &y, 3, ScalingMode::Center).unwrap());
        assert_eq!(from_json(&to_json(&pls2).unwrap()).unwrap(), pls2);

        let set = FittedModel::Pls1Set(Pls1Set::fit(&x, &y, &[1, 2, 3, 2], ScalingMode::Center).unwrap());
        let text = to_json(&set).unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["estimator_kind"], "pls1-set");
        assert_eq!(doc["payload"]["models"].as_array().unwrap().len(), 4);
        assert_eq!(from_json(&text).unwrap(), set);
    }

    #[test]
    fn matrices_are_row_major() {
        let text = to_json(&twoblock()).unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        let c = &doc["payload"]["coefficients"];
        assert_eq!(c["rows"], 6);
        assert_eq!(c["cols"], 3);
        let FittedModel::Twoblock(m) = twoblock() else { unreachable!() };
        assert_eq!(c["data"][1].as_f64().unwrap(), m.coefficients[[0, 1]]);
    }

    #[test]
    fn unwritable_path_is_io_failure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("model.json");
        assert!(matches!(save_model(&twoblock(), &path), Err(Error::IoFailure { .. })));
        assert!(matches!(load_model(dir.path().join("none.json")), Err(Error::IoFailure { .. })));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let text = to_json(&twoblock()).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(from_json(cut), Err(Error::CorruptArchive(_))));
    }

    #[test]
    fn bumped_version_is_rejected() {
        let text = to_json(&twoblock()).unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
        assert!(matches!(from_json(&text), Err(Error::SchemaMismatch { found: 2, expected: 1 })));
    }

    #[test]
    fn inconsistent_shapes_are_corrupt() {
        let mut doc: Value = serde_json::from_str(&to_json(&twoblock()).unwrap()).unwrap();
        doc["payload"]["coefficients"]["rows"] = Value::from(5);
        assert!(matches!(from_json(&doc.to_string()), Err(Error::CorruptArchive(_))));
        let mut doc: Value = serde_json::from_str(&to_json(&twoblock()).unwrap()).unwrap();
        doc["estimator_kind"] = Value::from("lasso");
        assert!(matches!(from_json(&doc.to_string()), Err(Error::CorruptArchive(_))));
    }
}
