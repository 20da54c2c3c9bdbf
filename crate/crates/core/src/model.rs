//! A fitted estimator of any supported kind.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::DataMatrix;
use crate::pls::{Pls1Set, PlsModel};
use crate::twoblock::{nonzero_rows, TwoblockModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Pls1Set,
    Pls2,
    Twoblock,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Pls1Set => "pls1-set",
            EstimatorKind::Pls2 => "pls2",
            EstimatorKind::Twoblock => "twoblock",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Pls1Set(Pls1Set),
    Pls2(PlsModel),
    Twoblock(TwoblockModel),
}

impl FittedModel {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            FittedModel::Pls1Set(_) => EstimatorKind::Pls1Set,
            FittedModel::Pls2(_) => EstimatorKind::Pls2,
            FittedModel::Twoblock(_) => EstimatorKind::Twoblock,
        }
    }

    pub fn predict(&self, x: &DataMatrix) -> Result<DataMatrix> {
        match self {
            FittedModel::Pls1Set(m) => m.predict(x),
            FittedModel::Pls2(m) => m.predict(x),
            FittedModel::Twoblock(m) => m.predict(x),
        }
    }

    pub fn coefficients_original_scale(&self) -> Array2<f64> {
        match self {
            FittedModel::Pls1Set(m) => m.coefficients_original_scale(),
            FittedModel::Pls2(m) => m.coefficients_original_scale(),
            FittedModel::Twoblock(m) => m.coefficients_original_scale(),
        }
    }

    pub fn predictor_names(&self) -> &[String] {
        match self {
            FittedModel::Pls1Set(m) => &m.models[0].x_names,
            FittedModel::Pls2(m) => &m.x_names,
            FittedModel::Twoblock(m) => &m.x_names,
        }
    }

    pub fn response_names(&self) -> Vec<String> {
        match self {
            FittedModel::Pls1Set(m) => m.response_names(),
            FittedModel::Pls2(m) => m.y_names.clone(),
            FittedModel::Twoblock(m) => m.y_names.clone(),
        }
    }

    /// `(predictors, responses)` retained by the model. Twoblock models
    /// select through their weight rows; dense baselines through nonzero
    /// coefficient rows and columns.
    pub fn selection(&self) -> (Vec<bool>, Vec<bool>) {
        match self {
            FittedModel::Twoblock(m) => (m.selected_predictors(), m.selected_responses()),
            other => {
                let b = other.coefficients_original_scale();
                (nonzero_rows(b.view()), nonzero_rows(b.t()))
            }
        }
    }

    /// Human-readable component counts, e.g. `h=4` or `g=2, h=5`.
    pub fn describe_components(&self) -> String {
        match self {
            FittedModel::Pls1Set(m) => {
                let hs: Vec<String> = m.models.iter().map(|p| p.n_components().to_string()).collect();
                format!("h={}", hs.join(","))
            }
            FittedModel::Pls2(m) => format!("h={}", m.n_components()),
            FittedModel::Twoblock(m) => format!("g={}, h={}", m.y_weights.ncols(), m.x_weights.ncols()),
        }
    }
}
