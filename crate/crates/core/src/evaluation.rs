//! Forecast scoring over random origins: RMSE, MAE and PIT histograms.

use std::io::Write;
use std::ops::Range;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::forecast::{ForecastResult, Forecaster};
use crate::panel::{Panel, VariableKind, VariableRef};

/// Default PIT histogram resolution.
pub const DEFAULT_PIT_BINS: usize = 20;

/// Scores of one model. Index `o − 1` holds horizon `o`; RMSE and MAE pool
/// the wind-speed errors of all stations over all origins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub model: String,
    pub rmse: Vec<f64>,
    pub mae: Vec<f64>,
    /// `pit[o − 1][bin]`.
    pub pit: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub horizon: usize,
    pub bins: usize,
    pub origins: Vec<usize>,
    pub models: Vec<ModelScores>,
}

impl EvaluationReport {
    pub fn model(&self, tag: &str) -> Option<&ModelScores> {
        self.models.iter().find(|m| m.model == tag)
    }
}

/// `N` distinct origins drawn uniformly from `candidates`, sorted.
pub fn sample_origins(candidates: Range<usize>, count: usize, seed: u64) -> Result<Vec<usize>> {
    let available = candidates.len();
    if count > available || count == 0 {
        return Err(Error::Sampling {
            requested: count,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut origins: Vec<usize> = sample(&mut rng, available, count)
        .into_iter()
        .map(|i| candidates.start + i)
        .collect();
    origins.sort_unstable();
    Ok(origins)
}

/// Origins whose `horizon` targets all lie inside `holdout` and that every
/// model can forecast from.
pub fn valid_origins(models: &[&dyn Forecaster], holdout: &Range<usize>, horizon: usize) -> Range<usize> {
    let earliest = models.iter().map(|m| m.min_origin()).max().unwrap_or(0);
    let start = holdout.start.saturating_sub(1).max(earliest);
    let end = holdout.end.saturating_sub(horizon);
    start..end.max(start)
}

pub fn rmse(errors: &[f64]) -> f64 {
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

pub fn mae(errors: &[f64]) -> f64 {
    errors.iter().map(|e| e.abs()).sum::<f64>() / errors.len() as f64
}

/// Gaussian PIT `Φ((actual − point)/sd)`. A zero sd gives 0.5 when the
/// forecast is exact and an error otherwise.
pub fn pit_value(actual: f64, point: f64, sd: f64) -> Result<f64> {
    if sd == 0.0 {
        return if actual == point {
            Ok(0.5)
        } else {
            Err(Error::DegenerateDistribution {
                actual,
                forecast: point,
            })
        };
    }
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::InvalidValue(format!("predictive sd {sd}")));
    }
    let z = (actual - point) / sd;
    Ok(Normal::standard().cdf(z))
}

/// Counts over `bins` equal-width bins on `[0, 1]`; 1.0 lands in the last.
pub fn pit_histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for v in values {
        let b = ((v * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

/// Pearson chi-square p-value of `counts` against the uniform law.
pub fn uniformity_p_value(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    ChiSquared::new((counts.len() - 1) as f64)
        .map(|d| d.sf(stat))
        .unwrap_or(f64::NAN)
}

/// Scores every model on `N` seeded random origins in `holdout`.
///
/// Forecasts run in parallel per origin; the reduction walks origins in
/// sorted order so reports do not depend on scheduling.
pub fn evaluate(
    models: &[&dyn Forecaster],
    panel: &Panel,
    holdout: Range<usize>,
    origin_count: usize,
    horizon: usize,
    bins: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    if horizon == 0 || bins == 0 {
        return Err(Error::InvalidValue("horizon and bin count must be positive".into()));
    }
    if holdout.end > panel.len() || holdout.start >= holdout.end {
        return Err(Error::Range(format!(
            "holdout {holdout:?} outside panel of {} rows",
            panel.len()
        )));
    }
    let origins = sample_origins(valid_origins(models, &holdout, horizon), origin_count, seed)?;
    let m = panel.station_count();
    let mut scores = Vec::with_capacity(models.len());
    for model in models {
        let forecasts: Vec<ForecastResult> = origins
            .par_iter()
            .map(|&o| model.forecast(panel, o, horizon))
            .collect::<Result<_>>()?;
        let mut errors = vec![Vec::with_capacity(origins.len() * m); horizon];
        let mut pits = vec![Vec::with_capacity(origins.len() * m); horizon];
        for f in &forecasts {
            for o in 1..=horizon {
                for s in 0..m {
                    let (point, sd) = f.wind(s, o).ok_or_else(|| {
                        Error::Range(format!("{} does not forecast wind speed", f.model))
                    })?;
                    let actual = panel.value(f.origin + o, VariableRef::new(VariableKind::WindSpeed, s));
                    errors[o - 1].push(actual - point);
                    pits[o - 1].push(pit_value(actual, point, sd)?);
                }
            }
        }
        scores.push(ModelScores {
            model: model.tag(),
            rmse: errors.iter().map(|e| rmse(e)).collect(),
            mae: errors.iter().map(|e| mae(e)).collect(),
            pit: pits.iter().map(|p| pit_histogram(p, bins)).collect(),
        });
    }
    Ok(EvaluationReport {
        seed,
        horizon,
        bins,
        origins,
        models: scores,
    })
}

fn comment_line<W: Write>(sink: &mut W, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        writeln!(sink, "# {c}")?;
    }
    Ok(())
}

/// CSV `model,horizon,rmse,mae`.
pub fn write_scores_csv<W: Write>(report: &EvaluationReport, mut sink: W, comment: Option<&str>) -> Result<()> {
    comment_line(&mut sink, comment)?;
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["model", "horizon", "rmse", "mae"])?;
    for s in &report.models {
        for (o, (r, a)) in s.rmse.iter().zip(&s.mae).enumerate() {
            w.write_record([s.model.clone(), (o + 1).to_string(), format!("{r:e}"), format!("{a:e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// CSV `model,horizon,bin,count` with 1-based bins.
pub fn write_pit_csv<W: Write>(report: &EvaluationReport, mut sink: W, comment: Option<&str>) -> Result<()> {
    comment_line(&mut sink, comment)?;
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["model", "horizon", "bin", "count"])?;
    for s in &report.models {
        for (o, counts) in s.pit.iter().enumerate() {
            for (b, c) in counts.iter().enumerate() {
                w.write_record([s.model.clone(), (o + 1).to_string(), (b + 1).to_string(), c.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// CSV `origin,timestamp` recording the sampled origins.
pub fn write_origins_csv<W: Write>(report: &EvaluationReport, panel: &Panel, mut sink: W, comment: Option<&str>) -> Result<()> {
    comment_line(&mut sink, comment)?;
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["origin", "timestamp"])?;
    for &o in &report.origins {
        w.write_record([o.to_string(), crate::panel::format_timestamp(panel.timestamp(o))])?;
    }
    w.flush()?;
    Ok(())
}
