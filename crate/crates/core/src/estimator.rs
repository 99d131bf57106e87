//! Iteratively re-weighted two-stage estimation.
//!
//! Each iteration fits every mean equation by weighted shrinkage, fits the
//! scale equations on the absolute residuals, and sets the next weights to
//! `ω_t = σ̂_t⁻²`. The loop stops once every equation's sigma path moves by
//! less than `irw_tol` between iterations, or after `irw_max_iter` rounds.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{
    build_mean_regressors, build_variance_regressors, mean_response, variance_response,
    ColumnLabel, ConvergenceNorm, DesignBlock, ModelSpec, SparseCoefficients,
};
use crate::diagnostics::{acf, ljung_box, spike_fraction, LjungBox};
use crate::error::{Error, Result};
use crate::panel::{Panel, VariableRef, VARIABLES_PER_STATION};
use crate::shrinkage::{fit_path_with_gram, PathResult, PathSummary, WeightedGram};

/// `E|ε| = σ·√(2/π)` for Gaussian `ε`; fitted absolute residuals are
/// scaled by the reciprocal to obtain `σ̂`.
pub const ABS_TO_SD: f64 = 1.253_314_137_315_500_3; // √(π/2)

/// AIC margin within which the previous iteration's lambda index is kept.
/// Without it, near-tied path points can alternate between iterations and
/// the sigma path never settles.
pub const AIC_HYSTERESIS: f64 = 2.0;

/// Sigma floor relative to the constant-scale estimate `√(π/2)·mean|ε̂|`.
const SIGMA_FLOOR_RATIO: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lasso,
    ElasticNet,
}

impl Method {
    pub fn alpha(self, spec: &ModelSpec) -> f64 {
        match self {
            Method::Lasso => 1.0,
            Method::ElasticNet => spec.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEquation {
    pub target: VariableRef,
    pub mean: SparseCoefficients,
    /// Coefficients of `σ_t` (already on the standard deviation scale).
    pub variance: SparseCoefficients,
    pub mean_lambda: f64,
    pub variance_lambda: f64,
    /// Fitted `σ̂_t` over the usable rows.
    #[serde(skip)]
    pub sigma_path: Vec<f64>,
    /// Mean residuals `ε̂_t` over the usable rows.
    #[serde(skip)]
    pub residual_path: Vec<f64>,
    /// Final mean and scale shrinkage paths.
    #[serde(skip)]
    pub mean_path: PathSummary,
    #[serde(skip)]
    pub variance_path: PathSummary,
    /// Points where the positivity floor replaced the linear fit.
    pub floored: usize,
    pub sigma_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub method: Method,
    pub stations: Vec<String>,
    /// Panel row of the first usable observation.
    pub first_row: usize,
    pub equations: Vec<FittedEquation>,
    pub iterations_used: usize,
    /// Largest per-equation Δ at the last iteration; absent after one
    /// iteration since there is no previous path to compare with.
    pub final_delta: Option<f64>,
    pub delta_history: Vec<f64>,
    /// Per-equation Δ at the last iteration, in column order.
    pub equation_deltas: Vec<f64>,
    pub converged: bool,
}

impl FittedModel {
    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    pub fn equation(&self, target: VariableRef) -> &FittedEquation {
        &self.equations[target.column(self.station_count())]
    }
}

struct MeanStep {
    path: PathResult,
    residuals: DVector<f64>,
}

fn fit_mean(
    block: &DesignBlock,
    gram: &WeightedGram<'_>,
    y: &DVector<f64>,
    alpha: f64,
    spec: &ModelSpec,
    previous: Option<usize>,
) -> Result<MeanStep> {
    let mut path = fit_path_with_gram(
        gram,
        y,
        alpha,
        &spec.lambda_grid,
        None,
        spec.cd_tol,
        spec.max_sweeps,
    )?;
    keep_previous_choice(&mut path, previous);
    let (b0, beta) = path.chosen_coefficients();
    let mut residuals = y.add_scalar(-b0);
    residuals.gemv(-1.0, &block.matrix, beta, 1.0);
    Ok(MeanStep { path, residuals })
}

fn keep_previous_choice(path: &mut PathResult, previous: Option<usize>) {
    if let Some(p) = previous.filter(|&p| p < path.lambdas.len()) {
        if path.aic(p) <= path.aic(path.chosen) + AIC_HYSTERESIS {
            path.chosen = p;
        }
    }
}

fn chosen_sparse(labels: &[ColumnLabel], path: &PathResult, scale: f64) -> SparseCoefficients {
    let (b0, beta) = path.chosen_coefficients();
    // the intercept column is constant and always carries a zero slope
    let slopes: Vec<f64> = beta.iter().skip(1).map(|b| b * scale).collect();
    SparseCoefficients::from_dense(labels, b0 * scale, &slopes)
}

fn delta(prev: &DVector<f64>, cur: &DVector<f64>, norm: ConvergenceNorm) -> f64 {
    let raw = (prev - cur).norm();
    match norm {
        ConvergenceNorm::Raw => raw,
        ConvergenceNorm::Rms => raw / (cur.len() as f64).sqrt(),
    }
}

/// Runs the re-weighting scheme on `panel`.
///
/// Per-equation fits within a step run on the current rayon pool; results
/// do not depend on the number of workers.
pub fn fit_irw(panel: &Panel, spec: &ModelSpec, method: Method) -> Result<FittedModel> {
    spec.validate()?;
    let m = panel.station_count();
    let k = VARIABLES_PER_STATION * m;
    let alpha = method.alpha(spec);
    let targets = VariableRef::all(m);

    let mean_block = build_mean_regressors(panel, spec)?;
    let first = mean_block.first_row;
    let n = mean_block.rows();
    let responses: Vec<DVector<f64>> = targets
        .iter()
        .map(|&t| mean_response(panel, spec, t))
        .collect::<Result<_>>()?;

    let mut weights: Option<Vec<DVector<f64>>> = None;
    let mut prev_sigma: Option<Vec<DVector<f64>>> = None;
    let mut mean_choice: Vec<Option<usize>> = vec![None; k];
    let mut var_choice: Vec<Option<usize>> = vec![None; k];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut final_delta = None;
    let mut equation_deltas = Vec::new();
    let mut last: Option<(Vec<MeanStep>, Vec<(PathResult, DVector<f64>, usize, f64)>)> = None;

    while iterations < spec.irw_max_iter {
        iterations += 1;

        // (2) weighted mean fits
        let mean_steps: Vec<MeanStep> = match &weights {
            None => {
                let gram = WeightedGram::new(&mean_block.matrix, None, true, true);
                responses
                    .par_iter()
                    .zip(&mean_choice)
                    .map(|(y, &prev)| fit_mean(&mean_block, &gram, y, alpha, spec, prev))
                    .collect::<Result<_>>()?
            }
            Some(w) => responses
                .par_iter()
                .zip(w.par_iter())
                .zip(&mean_choice)
                .map(|((y, w), &prev)| {
                    let gram = WeightedGram::new(&mean_block.matrix, Some(w), true, true);
                    fit_mean(&mean_block, &gram, y, alpha, spec, prev)
                })
                .collect::<Result<_>>()?,
        };

        // residuals over every row the variance design looks back to
        let valid_from = spec.max_mean_lag();
        let mut residuals = DMatrix::zeros(panel.len(), k);
        for (c, step) in mean_steps.iter().enumerate() {
            for r in 0..n {
                residuals[(first + r, c)] = step.residuals[r];
            }
            let coefs = chosen_sparse(&mean_block.labels, &step.path, 1.0);
            let bases = spec.bases()?;
            for t in valid_from..first {
                let seasonal = bases.row(panel.time_index(t));
                let fit = coefs.evaluate(
                    &seasonal,
                    |lag, v| panel.values()[(t - lag, v.column(m))],
                    |_, _| 0.0,
                );
                residuals[(t, c)] = panel.values()[(t, c)] - fit;
            }
        }

        // (3) scale fits on |ε̂|
        let var_block =
            build_variance_regressors(&residuals, valid_from, spec, |t| panel.time_index(t))?;
        let var_gram = WeightedGram::new(&var_block.matrix, None, true, true);
        let var_steps: Vec<(PathResult, DVector<f64>, usize, f64)> = targets
            .par_iter()
            .zip(&var_choice)
            .map(|(&target, &prev)| {
                let y = variance_response(&residuals, spec, target)?;
                let mut path = fit_path_with_gram(
                    &var_gram,
                    &y,
                    alpha,
                    &spec.lambda_grid,
                    None,
                    spec.cd_tol,
                    spec.max_sweeps,
                )?;
                keep_previous_choice(&mut path, prev);
                let (b0, beta) = path.chosen_coefficients();
                let mut fitted = DVector::from_element(n, b0);
                fitted.gemv(1.0, &var_block.matrix, beta, 1.0);
                let floor = SIGMA_FLOOR_RATIO * ABS_TO_SD * y.mean();
                let mut floored = 0;
                let sigma = fitted.map(|f| {
                    let s = ABS_TO_SD * f;
                    if s < floor {
                        floored += 1;
                        floor
                    } else {
                        s
                    }
                });
                if 2 * floored > n {
                    return Err(Error::IllConditioned {
                        column: target.column(m),
                        floored,
                        total: n,
                    });
                }
                Ok((path, sigma, floored, floor))
            })
            .collect::<Result<_>>()?;

        mean_choice = mean_steps.iter().map(|s| Some(s.path.chosen)).collect();
        var_choice = var_steps.iter().map(|s| Some(s.0.chosen)).collect();

        // (4) ω = σ̂⁻²
        let sigmas: Vec<DVector<f64>> = var_steps.iter().map(|s| s.1.clone()).collect();
        weights = Some(sigmas.iter().map(|s| s.map(|v| 1.0 / (v * v))).collect());

        // (5) abort once every sigma path has settled
        if let Some(prev) = &prev_sigma {
            equation_deltas = prev
                .iter()
                .zip(&sigmas)
                .map(|(a, b)| delta(a, b, spec.convergence_norm))
                .collect();
            let worst = equation_deltas.iter().copied().fold(0.0, f64::max);
            history.push(worst);
            final_delta = Some(worst);
            if worst < spec.irw_tol {
                converged = true;
                last = Some((mean_steps, var_steps));
                break;
            }
        }
        prev_sigma = Some(sigmas);
        last = Some((mean_steps, var_steps));
    }

    let (mean_steps, var_steps) = last.expect("at least one iteration");
    let var_labels = crate::design::variance_labels(spec, m);
    let equations = targets
        .iter()
        .zip(mean_steps)
        .zip(var_steps)
        .map(|((&target, ms), (vp, sigma, floored, floor))| FittedEquation {
            target,
            mean: chosen_sparse(&mean_block.labels, &ms.path, 1.0),
            variance: chosen_sparse(&var_labels, &vp, ABS_TO_SD),
            mean_lambda: ms.path.lambdas[ms.path.chosen],
            variance_lambda: vp.lambdas[vp.chosen],
            sigma_path: sigma.iter().copied().collect(),
            residual_path: ms.residuals.iter().copied().collect(),
            mean_path: ms.path.summary(),
            variance_path: vp.summary(),
            floored,
            sigma_floor: floor,
        })
        .collect();

    Ok(FittedModel {
        spec: spec.clone(),
        method,
        stations: panel.stations().to_vec(),
        first_row: first,
        equations,
        iterations_used: iterations,
        final_delta,
        delta_history: history,
        equation_deltas,
        converged,
    })
}

/// Whiteness diagnostics for one equation's standardized residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationDiagnostics {
    pub target: VariableRef,
    pub acf: Vec<f64>,
    pub abs_acf: Vec<f64>,
    pub ljung_box: Vec<LjungBox>,
    pub abs_ljung_box: Vec<LjungBox>,
    /// Share of ACF values outside `±1.96/√T`.
    pub spike_fraction: f64,
    pub abs_spike_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub equations: Vec<EquationDiagnostics>,
}

/// Diagnostics for a standardized series `z` and `|z|`.
pub fn series_diagnostics(
    target: VariableRef,
    z: &[f64],
    max_lag: usize,
    lb_lags: &[usize],
) -> EquationDiagnostics {
    let abs: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    let acf_z = acf(z, max_lag);
    let acf_abs = acf(&abs, max_lag);
    EquationDiagnostics {
        target,
        spike_fraction: spike_fraction(&acf_z, z.len()),
        abs_spike_fraction: spike_fraction(&acf_abs, z.len()),
        ljung_box: lb_lags.iter().map(|&h| ljung_box(z, h, 0)).collect(),
        abs_ljung_box: lb_lags.iter().map(|&h| ljung_box(&abs, h, 0)).collect(),
        acf: acf_z,
        abs_acf: acf_abs,
    }
}

/// ACF, Ljung-Box and band-exceedance statistics of `ε̂/σ̂` and `|ε̂/σ̂|`
/// using the final sigma path.
pub fn residual_diagnostics(
    model: &FittedModel,
    max_lag: usize,
    lb_lags: &[usize],
) -> DiagnosticsReport {
    let equations = model
        .equations
        .iter()
        .map(|eq| {
            let z: Vec<f64> = eq
                .residual_path
                .iter()
                .zip(&eq.sigma_path)
                .map(|(e, s)| e / s)
                .collect();
            series_diagnostics(eq.target, &z, max_lag, lb_lags)
        })
        .collect();
    DiagnosticsReport { equations }
}

/// Expected signed shock contributions `E[I⁺ε] = σ/√(2π)` and
/// `E[I⁻ε] = −σ/√(2π)` under Gaussian innovations.
pub fn expected_signed_shock(sigma: f64) -> (f64, f64) {
    let half = sigma / (2.0 * PI).sqrt();
    (half, -half)
}

/// `√(2/π)`, the ratio `E|ε| / σ` for Gaussian `ε`.
pub fn abs_moment_ratio() -> f64 {
    (1.0 / FRAC_PI_2).sqrt()
}
