//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use windcast::benchmarks::BenchmarkKind;
use windcast::simulate::TruthPreset;
use windcast::{Method, ModelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub method: Method,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub out: PathBuf,
    /// Also write the training-row mean design with labelled columns.
    pub export_design: bool,
    pub data: DataConfig,
    pub simulate: SimulateConfig,
    pub model: ModelSpec,
    pub benchmarks: BenchmarkConfig,
    pub forecast: ForecastConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            method: Method::Lasso,
            workers: 0,
            out: PathBuf::from("out"),
            export_design: false,
            data: DataConfig::default(),
            simulate: SimulateConfig::default(),
            model: ModelSpec::default(),
            benchmarks: BenchmarkConfig::default(),
            forecast: ForecastConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Panel CSV; when absent the panel is simulated from `[simulate]`.
    pub panel: Option<PathBuf>,
    /// Declared station order for the CSV.
    pub stations: Option<Vec<String>>,
    pub step_seconds: i64,
    /// Leading share of rows used for fitting; the rest is the holdout.
    pub train_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            panel: None,
            stations: None,
            step_seconds: 600,
            train_fraction: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub stations: usize,
    pub length: usize,
    pub burn_in: usize,
    /// `YYYY-MM-DD HH:MM:SS` or `YYYY-MM-DDTHH:MM:SS`.
    pub start: String,
    pub preset: TruthPreset,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            stations: 3,
            length: 20_000,
            burn_in: 1_000,
            start: "2010-01-01 00:00:00".into(),
            preset: TruthPreset::DiurnalTarch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub models: Vec<BenchmarkKind>,
    /// Fixed AR/VAR order; AIC over 1..=12 when absent.
    pub order: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            models: vec![BenchmarkKind::Persistence, BenchmarkKind::Ar, BenchmarkKind::Var],
            order: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub horizon: usize,
    pub origins: usize,
    pub bins: usize,
    pub freeze_sigma: bool,
    pub floor_wind: bool,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            horizon: 144,
            origins: 200,
            bins: 20,
            freeze_sigma: false,
            floor_wind: false,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub method: Option<Method>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub horizon: Option<usize>,
    pub origins: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, String> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = overrides.seed {
            config.seed = v;
        }
        if let Some(v) = overrides.method {
            config.method = v;
        }
        if let Some(v) = &overrides.out {
            config.out = v.clone();
        }
        if let Some(v) = overrides.workers {
            config.workers = v;
        }
        if let Some(v) = overrides.horizon {
            config.forecast.horizon = v;
        }
        if let Some(v) = overrides.origins {
            config.forecast.origins = v;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.model.validate().map_err(|e| e.to_string())?;
        let d = &self.data;
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return Err(format!("data.train_fraction must lie in (0, 1), got {}", d.train_fraction));
        }
        if d.step_seconds <= 0 {
            return Err("data.step_seconds must be positive".into());
        }
        let s = &self.simulate;
        if s.stations == 0 || s.length == 0 {
            return Err("simulate.stations and simulate.length must be positive".into());
        }
        windcast::panel::parse_timestamp(&s.start)
            .ok_or_else(|| format!("simulate.start `{}` is not a timestamp", s.start))?;
        let f = &self.forecast;
        if f.horizon == 0 || f.origins == 0 || f.bins == 0 {
            return Err("forecast.horizon, forecast.origins and forecast.bins must be positive".into());
        }
        if self.benchmarks.order == Some(0) {
            return Err("benchmarks.order must be at least 1".into());
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration, independent of key order and
    /// formatting in the source file. The worker count and output directory
    /// are excluded since they never change results.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = 0;
        canonical.out = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
