//! Python bindings: panels, simulation, fitting, forecasting and a few
//! numerical building blocks. Matrices cross the boundary as lists of rows.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use windcast::forecast::{forecast_model, ForecastOptions};
use windcast::model_file::{ModelFile, StoredModel};
use windcast::simulate::{simulate_panel, SimulationOptions, TruthPreset};
use windcast::{FittedModel, Method, ModelSpec, Panel, PanelSchema};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_error(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn parse_spec(spec: Option<&str>) -> PyResult<ModelSpec> {
    match spec {
        Some(text) => serde_json::from_str(text).map_err(value_error),
        None => Ok(ModelSpec::default()),
    }
}

/// A station panel: wind speed, azimuth components, pressure and
/// temperature per station on a regular time grid.
#[pyclass(name = "Panel", module = "windcast")]
struct PyPanel {
    inner: Panel,
}

#[pymethods]
impl PyPanel {
    /// Reads a long-format CSV `timestamp,station,wind_speed,azimuth_deg,pressure,temperature`.
    #[staticmethod]
    #[pyo3(signature = (path, stations=None, step_seconds=600))]
    fn from_csv(path: PathBuf, stations: Option<Vec<String>>, step_seconds: i64) -> PyResult<Self> {
        let file = File::open(&path).map_err(io_error)?;
        let schema = PanelSchema {
            stations,
            step_seconds,
            ..Default::default()
        };
        let inner = windcast::load_panel(BufReader::new(file), &schema).map_err(value_error)?;
        Ok(Self { inner })
    }

    /// Simulates a panel from one of the built-in truths
    /// (`"diurnal_tarch"` or `"homoscedastic"`).
    #[staticmethod]
    #[pyo3(signature = (stations=3, length=20_000, seed=1, preset="diurnal_tarch"))]
    fn simulate(stations: usize, length: usize, seed: u64, preset: &str) -> PyResult<Self> {
        let preset: TruthPreset =
            serde_json::from_value(serde_json::Value::String(preset.into())).map_err(value_error)?;
        let spec = ModelSpec {
            mean_lags: 1,
            positive_lags: 1,
            negative_lags: 1,
            diurnal_count: 4,
            annual_count: 4,
            ..Default::default()
        };
        let options = SimulationOptions {
            length,
            ..Default::default()
        };
        let sim = simulate_panel(&spec, &preset.build(stations), &options, seed).map_err(value_error)?;
        Ok(Self { inner: sim.panel })
    }

    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        let file = File::create(&path).map_err(io_error)?;
        windcast::write_panel(&self.inner, BufWriter::new(file), None).map_err(value_error)
    }

    /// Rows `start..end` as a new panel.
    fn slice(&self, start: usize, end: usize) -> PyResult<Self> {
        let inner = self.inner.slice(start..end).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn stations(&self) -> Vec<String> {
        self.inner.stations().to_vec()
    }

    /// Column names in panel order, e.g. `wind_speed@0`.
    #[getter]
    fn columns(&self) -> Vec<String> {
        windcast::VariableRef::all(self.inner.station_count())
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    /// All values, one list per time step.
    fn values(&self) -> Vec<Vec<f64>> {
        rows(self.inner.values())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Panel(stations={}, rows={})",
            self.inner.station_count(),
            self.inner.len()
        )
    }
}

/// A fitted SVARX-TARCHX model.
#[pyclass(name = "Model", module = "windcast")]
struct PyModel {
    inner: FittedModel,
}

#[pymethods]
impl PyModel {
    /// Fits the model. `spec` is a JSON object of model settings; missing
    /// keys take their defaults. `method` is `"lasso"` or `"elastic_net"`.
    #[staticmethod]
    #[pyo3(signature = (panel, spec=None, method="lasso"))]
    fn fit(py: Python<'_>, panel: &PyPanel, spec: Option<&str>, method: &str) -> PyResult<Self> {
        let spec = parse_spec(spec)?;
        let method: Method =
            serde_json::from_value(serde_json::Value::String(method.into())).map_err(value_error)?;
        let inner = py
            .detach(|| windcast::fit_irw(&panel.inner, &spec, method))
            .map_err(value_error)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let file = File::open(&path).map_err(io_error)?;
        match ModelFile::read(BufReader::new(file)).map_err(value_error)?.model {
            StoredModel::SvarxTarchx(inner) => Ok(Self { inner }),
            StoredModel::Benchmark(_) => Err(value_error("file holds a benchmark model")),
        }
    }

    #[pyo3(signature = (path, config_hash=""))]
    fn save(&self, path: PathBuf, config_hash: &str) -> PyResult<()> {
        let file = File::create(&path).map_err(io_error)?;
        ModelFile::new(StoredModel::SvarxTarchx(self.inner.clone()), config_hash)
            .write(BufWriter::new(file))
            .map_err(value_error)
    }

    /// Point forecasts and predictive standard deviations for steps
    /// `origin+1 ..= origin+horizon`, one row per step and one column per
    /// panel variable.
    fn forecast(&self, panel: &PyPanel, origin: usize, horizon: usize) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let f = forecast_model(&self.inner, &panel.inner, origin, horizon, ForecastOptions::default())
            .map_err(value_error)?;
        Ok((rows(&f.point), rows(&f.sd)))
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations_used
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    /// The settings the model was fitted with, as JSON.
    fn spec_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.spec).map_err(value_error)
    }

    /// Fitted conditional scale path of one equation, e.g. `"wind_speed@0"`.
    fn sigma_path(&self, target: &str) -> PyResult<Vec<f64>> {
        self.inner
            .equations
            .iter()
            .find(|e| e.target.to_string() == target)
            .map(|e| e.sigma_path.clone())
            .ok_or_else(|| value_error(format!("no equation {target}")))
    }
}

/// Number of coefficient groups per equation for the given lag and basis sizes.
#[pyfunction]
fn parameter_count(mean_lags: usize, positive_lags: usize, negative_lags: usize, diurnal_count: usize, annual_count: usize) -> usize {
    windcast::parameter_count(&ModelSpec {
        mean_lags,
        positive_lags,
        negative_lags,
        diurnal_count,
        annual_count,
        ..Default::default()
    })
}

/// Periodic cubic B-spline values at steps `0..period`, one row per step.
#[pyfunction]
fn spline_basis(period: usize, count: usize) -> PyResult<Vec<Vec<f64>>> {
    let basis = windcast::make_basis(period, count).map_err(value_error)?;
    Ok((0..period as i64)
        .map(|t| basis.eval_row(t, false).to_vec())
        .collect())
}

#[pyfunction]
fn soft_threshold(z: f64, gamma: f64) -> f64 {
    windcast::soft_threshold(z, gamma)
}

#[pymodule]
#[pyo3(name = "windcast")]
fn windcast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPanel>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(parameter_count, m)?)?;
    m.add_function(wrap_pyfunction!(spline_basis, m)?)?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    Ok(())
}
