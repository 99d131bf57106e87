//! Recursive multi-step forecasts.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::benchmarks::{BenchmarkKind, BenchmarkModel};
use crate::design::ColumnLabel;
use crate::error::{Error, Result};
use crate::estimator::{expected_signed_shock, FittedModel};
use crate::panel::{format_timestamp, Panel, VariableKind, VariableRef, VARIABLES_PER_STATION};

/// Point forecasts and predictive standard deviations for horizons
/// `1..=horizon` from one origin. Row `o − 1` holds horizon `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub model: String,
    /// Panel row of the last observation used.
    pub origin: usize,
    pub variables: Vec<VariableRef>,
    pub point: DMatrix<f64>,
    pub sd: DMatrix<f64>,
}

impl ForecastResult {
    pub fn horizon(&self) -> usize {
        self.point.nrows()
    }

    pub fn column_of(&self, var: VariableRef) -> Option<usize> {
        self.variables.iter().position(|v| *v == var)
    }

    /// Wind-speed forecast for `station` at horizon `o`, as `(point, sd)`.
    pub fn wind(&self, station: usize, o: usize) -> Option<(f64, f64)> {
        let c = self.column_of(VariableRef::new(VariableKind::WindSpeed, station))?;
        Some((self.point[(o - 1, c)], self.sd[(o - 1, c)]))
    }
}

/// Anything that produces forecasts from a panel prefix.
pub trait Forecaster: Sync {
    fn tag(&self) -> String;

    /// Smallest origin row with enough history.
    fn min_origin(&self) -> usize;

    /// Forecasts from the observations in rows `0..=origin` of `panel`.
    fn forecast(&self, panel: &Panel, origin: usize, horizon: usize) -> Result<ForecastResult>;
}

fn check_origin(panel: &Panel, origin: usize, min_origin: usize, horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::Range("forecast horizon must be at least 1".into()));
    }
    if origin >= panel.len() || origin < min_origin {
        return Err(Error::Range(format!(
            "origin {origin} outside the forecastable rows {min_origin}..{}",
            panel.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastOptions {
    /// Hold `σ̂` at its horizon-1 value instead of iterating the scale
    /// equation.
    #[serde(default)]
    pub freeze_sigma: bool,
    /// Floor wind-speed point forecasts at zero after the recursion.
    #[serde(default)]
    pub floor_wind: bool,
}

/// A fitted model paired with forecast options.
#[derive(Debug, Clone)]
pub struct ModelForecaster<'a> {
    pub model: &'a FittedModel,
    pub options: ForecastOptions,
    pub tag: String,
}

impl<'a> ModelForecaster<'a> {
    pub fn new(model: &'a FittedModel) -> Self {
        Self {
            model,
            options: ForecastOptions::default(),
            tag: "svarx_tarchx".into(),
        }
    }

    pub fn with_options(mut self, options: ForecastOptions) -> Self {
        self.options = options;
        self
    }
}

impl Forecaster for ModelForecaster<'_> {
    fn tag(&self) -> String {
        self.tag.clone()
    }

    fn min_origin(&self) -> usize {
        // the oldest shock needs a full set of mean lags
        self.model.spec.first_usable_row().saturating_sub(1)
    }

    fn forecast(&self, panel: &Panel, origin: usize, horizon: usize) -> Result<ForecastResult> {
        forecast_model(self.model, panel, origin, horizon, self.options).map(|mut f| {
            f.model = self.tag.clone();
            f
        })
    }
}

/// Recursive forecast of every variable. Future lags use earlier point
/// forecasts, seasonal regressors are evaluated at the future instants,
/// and future shock terms in the scale equation are replaced by their
/// Gaussian expectations `E[ε·1(ε>0)] = σ/√(2π)` and `E[ε·1(ε≤0)] = −σ/√(2π)`.
pub fn forecast_model(
    model: &FittedModel,
    panel: &Panel,
    origin: usize,
    horizon: usize,
    options: ForecastOptions,
) -> Result<ForecastResult> {
    let m = model.station_count();
    if panel.station_count() != m {
        return Err(Error::Range(format!(
            "panel has {} stations, model has {m}",
            panel.station_count()
        )));
    }
    let min_origin = model.spec.first_usable_row().saturating_sub(1);
    check_origin(panel, origin, min_origin, horizon)?;
    let k = VARIABLES_PER_STATION * m;
    let spec = &model.spec;
    let bases = spec.bases()?;
    let values = panel.values();
    let shock_lags = spec.max_shock_lag();
    let t0 = panel.time_index(origin);

    // observed residuals at rows origin − shock_lags + 1 ..= origin
    let mut past_eps = DMatrix::zeros(shock_lags, k);
    for s in 0..shock_lags {
        let t = origin - s;
        let seasonal = bases.row(panel.time_index(t));
        for (c, eq) in model.equations.iter().enumerate() {
            let fit = eq.mean.evaluate(&seasonal, |lag, v| values[(t - lag, v.column(m))], |_, _| 0.0);
            past_eps[(s, c)] = values[(t, c)] - fit;
        }
    }

    let mut point = DMatrix::zeros(horizon, k);
    let mut sd = DMatrix::zeros(horizon, k);
    for o in 1..=horizon {
        let seasonal = bases.row(t0 + o as i64);
        // lag j at step o is observed when j ≥ o
        let lagged = |lag: usize, v: VariableRef| {
            let c = v.column(m);
            if lag >= o {
                values[(origin + o - lag, c)]
            } else {
                point[(o - lag - 1, c)]
            }
        };
        let row: Vec<f64> = model
            .equations
            .iter()
            .map(|eq| eq.mean.evaluate(&seasonal, lagged, |_, _| 0.0))
            .collect();
        for (c, eq) in model.equations.iter().enumerate() {
            point[(o - 1, c)] = row[c];
            sd[(o - 1, c)] = if options.freeze_sigma && o > 1 {
                sd[(0, c)]
            } else {
                let mut s = 0.0;
                for (label, coef) in &eq.variance.entries {
                    s += coef * scale_term(label, &seasonal, o, &past_eps, &sd, m);
                }
                s.max(eq.sigma_floor)
            };
        }
    }
    if options.floor_wind {
        for c in 0..m {
            for o in 0..horizon {
                point[(o, c)] = point[(o, c)].max(0.0);
            }
        }
    }
    Ok(ForecastResult {
        model: "svarx_tarchx".into(),
        origin,
        variables: VariableRef::all(m),
        point,
        sd,
    })
}

/// Value of one scale regressor at forecast step `o`.
fn scale_term(
    label: &ColumnLabel,
    seasonal: &crate::design::SeasonalRow,
    o: usize,
    past_eps: &DMatrix<f64>,
    sd: &DMatrix<f64>,
    m: usize,
) -> f64 {
    match *label {
        ColumnLabel::ShockPos { lag, var, diurnal } | ColumnLabel::ShockNeg { lag, var, diurnal } if lag < o => {
            let (pos, neg) = expected_signed_shock(sd[(o - lag - 1, var.column(m))]);
            let e = if matches!(label, ColumnLabel::ShockPos { .. }) { pos } else { neg };
            e * seasonal.shock_factor(diurnal)
        }
        _ => label.value(seasonal, |_, _| 0.0, |lag, v| past_eps[(lag - o, v.column(m))]),
    }
}

/// Benchmark forecasts of the stations' wind speeds.
impl Forecaster for BenchmarkModel {
    fn tag(&self) -> String {
        self.kind.name().into()
    }

    fn min_origin(&self) -> usize {
        self.history_needed() - 1
    }

    fn forecast(&self, panel: &Panel, origin: usize, horizon: usize) -> Result<ForecastResult> {
        check_origin(panel, origin, self.min_origin(), horizon)?;
        let m = panel.station_count();
        if self.series_count() != m {
            return Err(Error::Range(format!(
                "panel has {m} stations, {} model has {}",
                self.kind.name(),
                self.series_count()
            )));
        }
        let rows = self.history_needed();
        let start = origin + 1 - rows;
        let history = panel.values().view((start, 0), (rows, m)).into_owned();
        let point = self.recursive_forecast(&history, horizon)?;
        let sd = match self.kind {
            BenchmarkKind::Persistence if self.difference_sd.len() < horizon => {
                return Err(Error::Range(format!(
                    "persistence spread recorded for {} horizons, {horizon} requested",
                    self.difference_sd.len()
                )))
            }
            _ => self.forecast_sd(horizon),
        };
        Ok(ForecastResult {
            model: self.tag(),
            origin,
            variables: (0..m).map(|s| VariableRef::new(VariableKind::WindSpeed, s)).collect(),
            point,
            sd,
        })
    }
}

/// Long-format CSV `model,origin,timestamp,horizon,variable,point,sd`.
pub fn write_forecasts_csv<W: Write>(
    forecasts: &[ForecastResult],
    panel: &Panel,
    sink: W,
    comment: Option<&str>,
) -> Result<()> {
    let mut sink = sink;
    if let Some(c) = comment {
        writeln!(sink, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["model", "origin", "timestamp", "horizon", "variable", "point", "sd"])?;
    let names = panel.stations();
    for f in forecasts {
        let stamp = panel.timestamp(f.origin);
        let step = chrono::Duration::seconds(panel.step_seconds());
        for o in 1..=f.horizon() {
            let ts = format_timestamp(stamp + step * o as i32);
            for (c, var) in f.variables.iter().enumerate() {
                w.write_record([
                    f.model.clone(),
                    f.origin.to_string(),
                    ts.clone(),
                    o.to_string(),
                    format!("{}@{}", var.kind.name(), names[var.station]),
                    format!("{:e}", f.point[(o - 1, c)]),
                    format!("{:e}", f.sd[(o - 1, c)]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{fit_persistence, persistence_forecast};
    use crate::design::{ModelSpec, SparseCoefficients};
    use crate::estimator::{FittedEquation, Method};
    use crate::simulate::{simulate_panel, SimulationOptions, TruthPreset};

    fn small_spec() -> ModelSpec {
        ModelSpec {
            mean_lags: 1,
            positive_lags: 1,
            negative_lags: 1,
            diurnal_count: 4,
            annual_count: 4,
            ..Default::default()
        }
    }

    fn hand_model(spec: ModelSpec, m: usize, mean: impl Fn(VariableRef) -> Vec<(ColumnLabel, f64)>) -> FittedModel {
        let equations = VariableRef::all(m)
            .into_iter()
            .map(|target| FittedEquation {
                target,
                mean: SparseCoefficients { entries: mean(target) },
                variance: SparseCoefficients {
                    entries: vec![(ColumnLabel::Intercept, 0.5)],
                },
                mean_lambda: 0.0,
                variance_lambda: 0.0,
                sigma_path: Vec::new(),
                residual_path: Vec::new(),
                mean_path: Default::default(),
                variance_path: Default::default(),
                floored: 0,
                sigma_floor: 0.01,
            })
            .collect();
        FittedModel {
            spec,
            method: Method::Lasso,
            stations: (0..m).map(|i| format!("s{i}")).collect(),
            first_row: 2,
            equations,
            iterations_used: 1,
            final_delta: None,
            delta_history: Vec::new(),
            equation_deltas: Vec::new(),
            converged: true,
        }
    }

    fn panel(m: usize, seed: u64) -> Panel {
        let options = SimulationOptions {
            length: 2_000,
            burn_in: 200,
            ..Default::default()
        };
        simulate_panel(&small_spec(), &TruthPreset::DiurnalTarch.build(m), &options, seed)
            .unwrap()
            .panel
    }

    #[test]
    fn intercept_only_model_is_constant() {
        let model = hand_model(small_spec(), 2, |_| vec![(ColumnLabel::Intercept, 3.25)]);
        let p = panel(2, 1);
        let f = forecast_model(&model, &p, 500, 144, ForecastOptions::default()).unwrap();
        assert!(f.point.iter().all(|v| *v == 3.25));
        assert!(f.sd.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn unit_root_equals_persistence() {
        let model = hand_model(small_spec(), 1, |t| vec![(ColumnLabel::Lag { lag: 1, var: t }, 1.0)]);
        let p = panel(1, 2);
        let f = forecast_model(&model, &p, 900, 144, ForecastOptions::default()).unwrap();
        let wind: Vec<f64> = p.wind_speed().column(0).iter().copied().collect();
        let naive = persistence_forecast(&wind, 900, 144).unwrap();
        for o in 1..=144 {
            assert_eq!(f.wind(0, o).unwrap().0, naive[o - 1]);
        }
        let bench = fit_persistence(&p, 144).unwrap().forecast(&p, 900, 144).unwrap();
        assert_eq!(bench.point.column(0), f.point.column(0));
    }

    #[test]
    fn future_shocks_use_expected_values() {
        let s = small_spec();
        let mut model = hand_model(s, 1, |_| vec![(ColumnLabel::Intercept, 1.0)]);
        let wind = VariableRef::new(VariableKind::WindSpeed, 0);
        model.equations[0].variance.entries = vec![
            (ColumnLabel::Intercept, 0.4),
            (ColumnLabel::ShockPos { lag: 1, var: wind, diurnal: 0 }, 0.3),
            (ColumnLabel::ShockNeg { lag: 1, var: wind, diurnal: 0 }, -0.2),
        ];
        let p = panel(1, 3);
        let f = forecast_model(&model, &p, 700, 3, ForecastOptions::default()).unwrap();
        let k = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let s1 = f.sd[(0, 0)];
        let s2 = 0.4 + 0.3 * s1 * k + 0.2 * s1 * k;
        assert!((f.sd[(1, 0)] - s2).abs() < 1e-15);
        let frozen = forecast_model(
            &model,
            &p,
            700,
            3,
            ForecastOptions {
                freeze_sigma: true,
                floor_wind: false,
            },
        )
        .unwrap();
        assert_eq!(frozen.sd[(2, 0)], s1);
    }

    #[test]
    fn floor_only_touches_wind() {
        let model = hand_model(small_spec(), 1, |_| vec![(ColumnLabel::Intercept, -1.0)]);
        let p = panel(1, 4);
        let options = ForecastOptions {
            freeze_sigma: false,
            floor_wind: true,
        };
        let f = forecast_model(&model, &p, 700, 5, options).unwrap();
        assert!(f.point.column(0).iter().all(|v| *v == 0.0));
        assert!(f.point.column(1).iter().all(|v| *v == -1.0));
    }

    #[test]
    fn origin_bounds_are_checked() {
        let model = hand_model(small_spec(), 1, |_| vec![(ColumnLabel::Intercept, 1.0)]);
        let p = panel(1, 5);
        let opts = ForecastOptions::default();
        assert!(matches!(forecast_model(&model, &p, p.len(), 3, opts), Err(Error::Range(_))));
        assert!(matches!(forecast_model(&model, &p, 0, 3, opts), Err(Error::Range(_))));
        assert!(forecast_model(&model, &p, 1, 3, opts).is_ok());
    }
}
