//! Persistence, AR(p) and VAR(p) comparison models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Panel;

/// Largest order considered by AIC order selection.
pub const MAX_BENCHMARK_ORDER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Persistence,
    Ar,
    Var,
}

impl BenchmarkKind {
    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Persistence => "persistence",
            BenchmarkKind::Ar => "ar",
            BenchmarkKind::Var => "var",
        }
    }
}

/// A fitted benchmark over `K` series. AR models are stored as VAR models
/// with diagonal lag matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkModel {
    pub kind: BenchmarkKind,
    pub order: usize,
    pub stations: Vec<String>,
    pub intercept: Vec<f64>,
    /// `lags[j][r][c]`: effect of series `c` at lag `j + 1` on series `r`.
    pub lags: Vec<Vec<Vec<f64>>>,
    pub intercept_se: Vec<f64>,
    pub lag_se: Vec<Vec<Vec<f64>>>,
    /// Innovation covariance, `K × K` (diagonal for AR).
    pub innovation_cov: Vec<Vec<f64>>,
    /// Persistence only: `difference_sd[o − 1][c]` is the sample deviation
    /// of `y_{t+o} − y_t`.
    pub difference_sd: Vec<Vec<f64>>,
}

impl BenchmarkModel {
    pub fn series_count(&self) -> usize {
        self.intercept.len()
    }

    pub fn lag_matrix(&self, lag: usize) -> DMatrix<f64> {
        let k = self.series_count();
        DMatrix::from_fn(k, k, |r, c| self.lags[lag - 1][r][c])
    }

    pub fn lag_matrices(&self) -> Vec<DMatrix<f64>> {
        (1..=self.order).map(|j| self.lag_matrix(j)).collect()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let k = self.series_count();
        DMatrix::from_fn(k, k, |r, c| self.innovation_cov[r][c])
    }

    /// Rows of history needed before the first forecast.
    pub fn history_needed(&self) -> usize {
        self.order.max(1)
    }

    /// Recursive forecasts for `horizon` steps after the last row of
    /// `history` (rows are time, columns are series).
    pub fn recursive_forecast(&self, history: &DMatrix<f64>, horizon: usize) -> Result<DMatrix<f64>> {
        let k = self.series_count();
        let rows = history.nrows();
        if history.ncols() != k {
            return Err(Error::Range(format!(
                "history has {} series, model has {k}",
                history.ncols()
            )));
        }
        if rows < self.history_needed() {
            return Err(Error::Range(format!(
                "{} history rows, {} needed",
                rows,
                self.history_needed()
            )));
        }
        let mut out = DMatrix::zeros(horizon, k);
        if self.kind == BenchmarkKind::Persistence {
            for o in 0..horizon {
                out.row_mut(o).copy_from(&history.row(rows - 1));
            }
            return Ok(out);
        }
        let phis = self.lag_matrices();
        let value = |out: &DMatrix<f64>, step: usize, lag: usize| -> DVector<f64> {
            // forecast step `step` (0-based) looks back `lag` rows
            if lag <= step {
                out.row(step - lag).transpose()
            } else {
                history.row(rows + step - lag).transpose()
            }
        };
        for o in 0..horizon {
            let mut next = DVector::from_column_slice(&self.intercept);
            for (j, phi) in phis.iter().enumerate() {
                next.gemv(1.0, phi, &value(&out, o, j + 1), 1.0);
            }
            out.row_mut(o).copy_from(&next.transpose());
        }
        Ok(out)
    }

    /// Forecast-error standard deviations for horizons `1..=horizon`,
    /// `horizon × K`, from the moving-average representation
    /// `Var_o = Σ_{i<o} Ψ_i Σ Ψ_iᵀ`.
    pub fn forecast_sd(&self, horizon: usize) -> DMatrix<f64> {
        let k = self.series_count();
        if self.kind == BenchmarkKind::Persistence {
            return DMatrix::from_fn(horizon, k, |o, c| {
                let row = o.min(self.difference_sd.len().saturating_sub(1));
                self.difference_sd.get(row).map_or(0.0, |r| r[c])
            });
        }
        let phis = self.lag_matrices();
        let sigma = self.covariance();
        let mut psi: Vec<DMatrix<f64>> = vec![DMatrix::identity(k, k)];
        let mut var = DMatrix::<f64>::zeros(k, k);
        let mut out = DMatrix::zeros(horizon, k);
        for o in 0..horizon {
            let last = &psi[o];
            var += last * &sigma * last.transpose();
            for c in 0..k {
                out[(o, c)] = var[(c, c)].max(0.0).sqrt();
            }
            let mut next = DMatrix::zeros(k, k);
            for (j, phi) in phis.iter().enumerate() {
                if j <= o {
                    next += phi * &psi[o - j];
                }
            }
            psi.push(next);
        }
        out
    }
}

/// Lagged design `[1, y_{t−1}, …, y_{t−p}]` over rows `start..T` of `data`,
/// lag-major, restricted to the series in `inputs`.
fn lag_design(data: &DMatrix<f64>, p: usize, start: usize, inputs: &[usize]) -> DMatrix<f64> {
    let n = data.nrows() - start;
    let width = 1 + p * inputs.len();
    DMatrix::from_fn(n, width, |r, c| {
        if c == 0 {
            return 1.0;
        }
        let lag = (c - 1) / inputs.len() + 1;
        let series = inputs[(c - 1) % inputs.len()];
        data[(start + r - lag, series)]
    })
}

struct Ols {
    coef: DMatrix<f64>,
    xtx_inv: DMatrix<f64>,
    /// Residual cross-products `EᵀE`.
    sse: DMatrix<f64>,
    n: usize,
}

/// Cholesky of a normal-equations matrix, rejecting pivots that are
/// negligible against the matrix scale (exact collinearity can survive
/// factorization through rounding).
fn normal_cholesky(xtx: DMatrix<f64>, what: impl Fn() -> String) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = xtx.diagonal().amax();
    let chol = xtx.cholesky().ok_or_else(|| Error::Rank(what()))?;
    let l = chol.l_dirty();
    if (0..l.nrows()).any(|i| l[(i, i)] * l[(i, i)] <= 1e-12 * scale) {
        return Err(Error::Rank(what()));
    }
    Ok(chol)
}

fn ols(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Ols> {
    let chol = normal_cholesky(x.tr_mul(x), || {
        format!("singular normal equations ({} regressors)", x.ncols())
    })?;
    let coef = chol.solve(&x.tr_mul(y));
    let resid = y - x * &coef;
    Ok(Ols {
        xtx_inv: chol.inverse(),
        sse: resid.tr_mul(&resid),
        coef,
        n: x.nrows(),
    })
}

fn check_length(len: usize, p: usize) -> Result<()> {
    if len <= 10 * p.max(1) {
        return Err(Error::Length {
            needed: 10 * p.max(1) + 1,
            available: len,
        });
    }
    Ok(())
}

fn unpack(
    kind: BenchmarkKind,
    k: usize,
    p: usize,
    rows: &[(usize, Ols, Vec<usize>)],
    stations: Vec<String>,
) -> BenchmarkModel {
    let mut intercept = vec![0.0; k];
    let mut intercept_se = vec![0.0; k];
    let mut lags = vec![vec![vec![0.0; k]; k]; p];
    let mut lag_se = vec![vec![vec![0.0; k]; k]; p];
    let mut cov = vec![vec![0.0; k]; k];
    for (target, fit, inputs) in rows {
        // one response column per regression
        let dof = (fit.n - fit.coef.nrows()).max(1) as f64;
        let s2 = fit.sse[(0, 0)] / dof;
        intercept[*target] = fit.coef[(0, 0)];
        intercept_se[*target] = (s2 * fit.xtx_inv[(0, 0)]).sqrt();
        for c in 1..fit.coef.nrows() {
            let lag = (c - 1) / inputs.len();
            let series = inputs[(c - 1) % inputs.len()];
            lags[lag][*target][series] = fit.coef[(c, 0)];
            lag_se[lag][*target][series] = (s2 * fit.xtx_inv[(c, c)]).sqrt();
        }
        cov[*target][*target] = s2;
    }
    BenchmarkModel {
        kind,
        order: p,
        stations,
        intercept,
        lags,
        intercept_se,
        lag_se,
        innovation_cov: cov,
        difference_sd: Vec::new(),
    }
}

/// OLS AR(p) with intercept for one series.
pub fn fit_ar(series: &[f64], p: usize) -> Result<BenchmarkModel> {
    let data = DMatrix::from_column_slice(series.len(), 1, series);
    fit_ar_matrix(&data, &[p], Vec::new())
}

fn fit_ar_matrix(data: &DMatrix<f64>, orders: &[usize], stations: Vec<String>) -> Result<BenchmarkModel> {
    let k = data.ncols();
    let p_max = orders.iter().copied().max().unwrap_or(0);
    check_length(data.nrows(), p_max)?;
    let mut rows = Vec::with_capacity(k);
    for (c, &p) in orders.iter().enumerate() {
        let x = lag_design(data, p, p, &[c]);
        let y = DMatrix::from_fn(data.nrows() - p, 1, |r, _| data[(p + r, c)]);
        rows.push((c, ols(&x, &y)?, vec![c]));
    }
    Ok(unpack(BenchmarkKind::Ar, k, p_max, &rows, stations))
}

/// OLS VAR(p) with intercept over the stations' wind speeds.
pub fn fit_var(panel: &Panel, p: usize) -> Result<BenchmarkModel> {
    fit_var_matrix(&panel.wind_speed(), p, panel.stations().to_vec())
}

pub fn fit_var_matrix(data: &DMatrix<f64>, p: usize, stations: Vec<String>) -> Result<BenchmarkModel> {
    let k = data.ncols();
    check_length(data.nrows(), p)?;
    let inputs: Vec<usize> = (0..k).collect();
    let x = lag_design(data, p, p, &inputs);
    let y = data.rows(p, data.nrows() - p).into_owned();
    let fit = ols(&x, &y)?;
    let dof = (fit.n - fit.coef.nrows()).max(1) as f64;
    let mut model = unpack(BenchmarkKind::Var, k, p, &[], stations);
    for t in 0..k {
        let s2 = fit.sse[(t, t)] / dof;
        model.intercept[t] = fit.coef[(0, t)];
        model.intercept_se[t] = (s2 * fit.xtx_inv[(0, 0)]).sqrt();
        for c in 1..fit.coef.nrows() {
            let lag = (c - 1) / k;
            let series = (c - 1) % k;
            model.lags[lag][t][series] = fit.coef[(c, t)];
            model.lag_se[lag][t][series] = (s2 * fit.xtx_inv[(c, c)]).sqrt();
        }
        for u in 0..k {
            model.innovation_cov[t][u] = fit.sse[(t, u)] / dof;
        }
    }
    Ok(model)
}

/// AIC-selected AR order for each column over `1..=max_order`, compared on
/// a common sample starting at `max_order`.
pub fn select_ar_orders(data: &DMatrix<f64>, max_order: usize) -> Result<Vec<usize>> {
    check_length(data.nrows(), max_order)?;
    (0..data.ncols())
        .map(|c| {
            let x = lag_design(data, max_order, max_order, &[c]);
            let y = DMatrix::from_fn(data.nrows() - max_order, 1, |r, _| data[(max_order + r, c)]);
            let xtx = x.tr_mul(&x);
            let xty = x.tr_mul(&y);
            let yy = y.norm_squared();
            let n = y.nrows() as f64;
            let mut best = (f64::INFINITY, 1);
            for p in 1..=max_order {
                let w = 1 + p;
                let a = xtx.view((0, 0), (w, w)).into_owned();
                let b = xty.view((0, 0), (w, 1)).into_owned();
                let chol = normal_cholesky(a, || format!("AR({p}) on column {c}"))?;
                let coef = chol.solve(&b);
                let rss = (yy - coef.dot(&b)).max(f64::MIN_POSITIVE);
                let aic = n * (rss / n).ln() + 2.0 * w as f64;
                if aic < best.0 {
                    best = (aic, p);
                }
            }
            Ok(best.1)
        })
        .collect()
}

/// AIC-selected VAR order over `1..=max_order` on a common sample,
/// `n·ln det Σ̂ + 2·K(Kp + 1)`.
pub fn select_var_order(data: &DMatrix<f64>, max_order: usize) -> Result<usize> {
    let k = data.ncols();
    check_length(data.nrows(), max_order)?;
    let inputs: Vec<usize> = (0..k).collect();
    let x = lag_design(data, max_order, max_order, &inputs);
    let y = data.rows(max_order, data.nrows() - max_order).into_owned();
    let xtx = x.tr_mul(&x);
    let xty = x.tr_mul(&y);
    let yty = y.tr_mul(&y);
    let n = y.nrows() as f64;
    let mut best = (f64::INFINITY, 1);
    for p in 1..=max_order {
        let w = 1 + k * p;
        let a = xtx.view((0, 0), (w, w)).into_owned();
        let b = xty.view((0, 0), (w, k)).into_owned();
        let chol = normal_cholesky(a, || format!("VAR({p})"))?;
        let coef = chol.solve(&b);
        let sse = &yty - coef.tr_mul(&b);
        let det = (sse / n).determinant();
        if !(det > 0.0) {
            return Err(Error::Rank(format!("VAR({p}) residual covariance is singular")));
        }
        let aic = n * det.ln() + 2.0 * (k * w) as f64;
        if aic < best.0 {
            best = (aic, p);
        }
    }
    Ok(best.1)
}

/// Per-station wind-speed AR models with AIC-selected orders (`order`
/// fixes them).
pub fn fit_ar_panel(panel: &Panel, order: Option<usize>) -> Result<BenchmarkModel> {
    let data = panel.wind_speed();
    let orders = match order {
        Some(p) => vec![p; data.ncols()],
        None => select_ar_orders(&data, MAX_BENCHMARK_ORDER)?,
    };
    fit_ar_matrix(&data, &orders, panel.stations().to_vec())
}

/// VAR with an AIC-selected order unless `order` is given.
pub fn fit_var_panel(panel: &Panel, order: Option<usize>) -> Result<BenchmarkModel> {
    let p = match order {
        Some(p) => p,
        None => select_var_order(&panel.wind_speed(), MAX_BENCHMARK_ORDER)?,
    };
    fit_var(panel, p)
}

/// The persistence predictor for wind speed, with the spread of `o`-step
/// changes on `panel` recorded for `o = 1..=max_horizon`.
pub fn fit_persistence(panel: &Panel, max_horizon: usize) -> Result<BenchmarkModel> {
    let data = &panel.wind_speed();
    let (t, k) = data.shape();
    if t <= max_horizon + 1 {
        return Err(Error::Length {
            needed: max_horizon + 2,
            available: t,
        });
    }
    let difference_sd = (1..=max_horizon)
        .map(|o| {
            (0..k)
                .map(|c| {
                    let d: Vec<f64> = (o..t).map(|r| data[(r, c)] - data[(r - o, c)]).collect();
                    let mean = d.iter().sum::<f64>() / d.len() as f64;
                    let ss: f64 = d.iter().map(|v| (v - mean).powi(2)).sum();
                    (ss / (d.len() - 1) as f64).sqrt()
                })
                .collect()
        })
        .collect();
    Ok(BenchmarkModel {
        kind: BenchmarkKind::Persistence,
        order: 0,
        stations: panel.stations().to_vec(),
        intercept: vec![0.0; k],
        lags: Vec::new(),
        intercept_se: Vec::new(),
        lag_se: Vec::new(),
        innovation_cov: vec![vec![0.0; k]; k],
        difference_sd,
    })
}

/// `W_t` repeated for horizons `1..=horizon`.
pub fn persistence_forecast(series: &[f64], origin: usize, horizon: usize) -> Result<Vec<f64>> {
    let value = *series
        .get(origin)
        .ok_or_else(|| Error::Range(format!("origin {origin} outside series of {}", series.len())))?;
    Ok(vec![value; horizon])
}

/// Forecasts through powers of the companion matrix, used as an
/// independent check on [`BenchmarkModel::recursive_forecast`].
pub fn companion_forecast(model: &BenchmarkModel, history: &DMatrix<f64>, horizon: usize) -> DMatrix<f64> {
    let k = model.series_count();
    let p = model.order.max(1);
    let dim = k * p;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for (j, phi) in model.lag_matrices().iter().enumerate() {
        a.view_mut((0, j * k), (k, k)).copy_from(phi);
    }
    for j in 1..p {
        a.view_mut((j * k, (j - 1) * k), (k, k)).fill_with_identity();
    }
    let mut c = DVector::zeros(dim);
    c.rows_mut(0, k).copy_from(&DVector::from_column_slice(&model.intercept));
    let rows = history.nrows();
    let mut state = DVector::zeros(dim);
    for j in 0..p {
        state.rows_mut(j * k, k).copy_from(&history.row(rows - 1 - j).transpose());
    }
    // Y_{t+h} = Aʰ·s + Σ_{i<h} Aⁱ·c
    let mut power = DMatrix::<f64>::identity(dim, dim);
    let mut acc = DVector::zeros(dim);
    let mut out = DMatrix::zeros(horizon, k);
    for h in 0..horizon {
        acc += &power * &c;
        power = &a * power;
        let y = &power * &state + &acc;
        out.row_mut(h).copy_from(&y.rows(0, k).transpose());
    }
    out
}
