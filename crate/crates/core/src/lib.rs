//! Sparse twoblock partial least squares.
//!
//! Simultaneous sparse dimension reduction of a predictor block and a
//! response block, with variable selection in both, plus the dense XY-PLS
//! special case and NIPALS PLS1/PLS2 baselines. The crate also provides
//! k-fold grid-search cross-validation, a JSON model archive, CSV dataset
//! I/O and a Monte-Carlo harness for latent-variable simulation studies.

pub mod csvio;
pub mod cv;
pub mod error;
pub mod linalg;
pub mod model;
pub mod model_io;
pub mod pls;
pub mod simulation;
pub mod twoblock;

pub use cv::{grid_search, make_folds, CvConfig, CvGrid, CvReport, CvScore, GridPoint, Method};
pub use error::{Error, Result};
pub use linalg::{center_scale, deflate, dominant_singular_pair, CenteringInfo, DataMatrix, ScalingMode, SingularPair};
pub use model::{EstimatorKind, FittedModel};
pub use model_io::{load_model, save_model};
pub use pls::{fit_pls, Pls1Set, PlsModel};
pub use simulation::{
    compute_metrics, generate_dataset, metrics_table, plot_data, run_batch, SimEstimator, SimMetrics, SimResult, SimScenario,
    SimTruth,
};
pub use twoblock::{fit_twoblock, selection_report, SelectionReport, TwoblockHyperparams, TwoblockModel};
