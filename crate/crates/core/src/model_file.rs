//! Versioned, self-describing JSON model files.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! reloaded model reproduces forecasts bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::benchmarks::BenchmarkModel;
use crate::design::{mean_labels, variance_labels};
use crate::error::{Error, Result};
use crate::estimator::FittedModel;

pub const FORMAT: &str = "windcast-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum StoredModel {
    SvarxTarchx(FittedModel),
    Benchmark(BenchmarkModel),
}

/// Column labels of the full designs, stored for readers of the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignLabels {
    pub mean: Vec<String>,
    pub variance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    /// Hash of the configuration that produced the model.
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<DesignLabels>,
    pub model: StoredModel,
}

impl ModelFile {
    pub fn new(model: StoredModel, config_hash: impl Into<String>) -> Self {
        let labels = match &model {
            StoredModel::SvarxTarchx(m) => Some(DesignLabels {
                mean: mean_labels(&m.spec, m.station_count()).iter().map(|l| l.to_string()).collect(),
                variance: variance_labels(&m.spec, m.station_count())
                    .iter()
                    .map(|l| l.to_string())
                    .collect(),
            }),
            StoredModel::Benchmark(_) => None,
        };
        Self {
            format: FORMAT.into(),
            version: VERSION,
            config_hash: config_hash.into(),
            labels,
            model,
        }
    }

    pub fn write<W: Write>(&self, sink: W) -> Result<()> {
        serde_json::to_writer_pretty(sink, self)?;
        Ok(())
    }

    pub fn read<R: Read>(source: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(source)?;
        if file.format != FORMAT {
            return Err(Error::ModelFile(format!("unknown format `{}`", file.format)));
        }
        if file.version != VERSION {
            return Err(Error::ModelFile(format!(
                "version {} is not supported (expected {VERSION})",
                file.version
            )));
        }
        if let StoredModel::SvarxTarchx(m) = &file.model {
            m.spec.validate()?;
            let mean = mean_labels(&m.spec, m.station_count());
            let var = variance_labels(&m.spec, m.station_count());
            for eq in &m.equations {
                eq.mean.to_dense(&mean)?;
                eq.variance.to_dense(&var)?;
            }
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::fit_ar;

    #[test]
    fn benchmark_round_trip() {
        let x: Vec<f64> = (0..500).map(|t| ((t * 37 % 101) as f64).sin() / 3.0).collect();
        let model = fit_ar(&x, 2).unwrap();
        let file = ModelFile::new(StoredModel::Benchmark(model), "abc");
        let mut buf = Vec::new();
        file.write(&mut buf).unwrap();
        assert_eq!(ModelFile::read(buf.as_slice()).unwrap(), file);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let x: Vec<f64> = (0..500).map(|t| ((t * 13 % 7) as f64).cos()).collect();
        let mut file = ModelFile::new(StoredModel::Benchmark(fit_ar(&x, 1).unwrap()), "h");
        file.version = 99;
        let mut buf = Vec::new();
        file.write(&mut buf).unwrap();
        assert!(matches!(ModelFile::read(buf.as_slice()), Err(Error::ModelFile(_))));
    }
}
