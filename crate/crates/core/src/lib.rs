//! Periodic SVARX-TARCHX wind speed modelling.
//!
//! The mean of every station variable is a vector autoregression whose
//! intercept and lag coefficients vary smoothly over the day and the year
//! through periodic cubic B-splines. The conditional scale follows a
//! threshold ARCH equation with diurnal modulation. Both parts are estimated
//! equation by equation with a weighted lasso or elastic net, re-weighting
//! the mean fit by the inverse fitted variance until the scale path settles.
//!
//! Modules, bottom-up:
//! - [`panel`]: station panels, CSV ingestion, azimuth decomposition
//! - [`spline`]: periodic cubic B-spline bases
//! - [`design`]: model spec, labelled mean and variance designs
//! - [`shrinkage`]: weighted coordinate-descent lasso / elastic net paths
//! - [`estimator`]: the iteratively re-weighted two-stage fit
//! - [`simulate`]: synthetic panels from a known truth
//! - [`benchmarks`]: persistence, AR(p) and VAR(p)
//! - [`forecast`]: recursive multi-step forecasts
//! - [`evaluation`]: RMSE/MAE over random origins and PIT histograms
//! - [`diagnostics`]: ACF, Ljung-Box, smoothed periodogram
//! - [`model_file`]: versioned JSON persistence for fitted models

pub mod benchmarks;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod forecast;
pub mod model_file;
pub mod panel;
pub mod shrinkage;
pub mod simulate;
pub mod spline;

pub use design::{
    build_mean_design, build_variance_design, parameter_count, ColumnLabel, ConvergenceNorm,
    DesignBlock, LambdaGrid, ModelSpec,
};
pub use error::{Error, Result};
pub use estimator::{fit_irw, residual_diagnostics, FittedEquation, FittedModel, Method};
pub use panel::{decompose_azimuth, load_panel, write_panel, Panel, PanelSchema, VariableKind, VariableRef};
pub use shrinkage::{fit_path, select_by_aic, soft_threshold, PathResult, ShrinkageProblem};
pub use spline::{eval_interaction_row, make_basis, PeriodicSplineBasis};
