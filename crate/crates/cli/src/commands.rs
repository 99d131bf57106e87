//! Command implementations. Every output file carries the config hash.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use windcast::benchmarks::{fit_ar_panel, fit_persistence, fit_var_panel, BenchmarkKind, BenchmarkModel};
use windcast::estimator::{residual_diagnostics, FittedModel};
use windcast::evaluation::{
    evaluate, sample_origins, uniformity_p_value, valid_origins, write_origins_csv, write_pit_csv,
    write_scores_csv, EvaluationReport,
};
use windcast::forecast::{write_forecasts_csv, ForecastOptions, Forecaster, ModelForecaster};
use windcast::model_file::{ModelFile, StoredModel};
use windcast::panel::{load_panel, parse_timestamp, write_panel, Panel, PanelSchema};
use windcast::simulate::{simulate_panel, SimulationOptions};
use windcast::ModelSpec;

use crate::config::RunConfig;

pub type CmdResult<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub struct Context {
    pub config: RunConfig,
    pub hash: String,
}

impl Context {
    pub fn new(config: RunConfig) -> Self {
        let hash = config.hash();
        Self { config, hash }
    }

    fn comment(&self) -> String {
        format!("windcast config_hash={}", self.hash)
    }

    fn out(&self, name: impl AsRef<Path>) -> CmdResult<PathBuf> {
        let path = self.config.out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        }
        Ok(path)
    }

    fn create(&self, name: impl AsRef<Path>) -> CmdResult<BufWriter<File>> {
        let path = self.out(name)?;
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| format!("{}: {e}", path.display()))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CmdResult<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(err)?;
        writeln!(w).map_err(err)?;
        w.flush().map_err(err)
    }

    /// The configured panel: read from CSV, or simulated from the seed.
    pub fn panel(&self) -> CmdResult<Panel> {
        let c = &self.config;
        match &c.data.panel {
            Some(path) => {
                let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
                let schema = PanelSchema {
                    stations: c.data.stations.clone(),
                    step_seconds: c.data.step_seconds,
                    ..Default::default()
                };
                load_panel(BufReader::new(file), &schema).map_err(err)
            }
            None => Ok(self.simulate()?.0),
        }
    }

    fn simulate(&self) -> CmdResult<(Panel, usize, f64)> {
        let c = &self.config;
        let s = &c.simulate;
        // the truth presets use a four-function diurnal basis
        let truth_spec = ModelSpec {
            mean_lags: 1,
            positive_lags: 1,
            negative_lags: 1,
            diurnal_count: 4,
            annual_count: 4,
            diurnal_period: c.model.diurnal_period,
            annual_period: c.model.annual_period,
            ..Default::default()
        };
        let options = SimulationOptions {
            length: s.length,
            burn_in: s.burn_in,
            start: parse_timestamp(&s.start).ok_or("bad simulate.start")?,
            step_seconds: c.data.step_seconds,
        };
        let sim = simulate_panel(&truth_spec, &s.preset.build(s.stations), &options, c.seed).map_err(err)?;
        Ok((sim.panel, sim.clipped, sim.spectral_radius))
    }

    /// Training prefix length.
    pub fn train_rows(&self, panel: &Panel) -> usize {
        ((panel.len() as f64) * self.config.data.train_fraction).floor() as usize
    }

    fn forecast_options(&self) -> ForecastOptions {
        ForecastOptions {
            freeze_sigma: self.config.forecast.freeze_sigma,
            floor_wind: self.config.forecast.floor_wind,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SimulationSummary {
    config_hash: String,
    rows: usize,
    stations: usize,
    clipped: usize,
    spectral_radius: f64,
}

pub fn simulate(ctx: &Context) -> CmdResult<()> {
    let (panel, clipped, radius) = ctx.simulate()?;
    let mut w = ctx.create("panel.csv")?;
    write_panel(&panel, &mut w, Some(&ctx.comment())).map_err(err)?;
    w.flush().map_err(err)?;
    ctx.write_json(
        "simulation.json",
        &SimulationSummary {
            config_hash: ctx.hash.clone(),
            rows: panel.len(),
            stations: panel.station_count(),
            clipped,
            spectral_radius: radius,
        },
    )?;
    eprintln!("simulated {} rows x {} stations", panel.len(), panel.station_count());
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct FitSummary {
    config_hash: String,
    train_rows: usize,
    iterations_used: usize,
    converged: bool,
    final_delta: Option<f64>,
    delta_history: Vec<f64>,
    nonzero_mean: usize,
    nonzero_variance: usize,
}

fn fit_benchmark(kind: BenchmarkKind, train: &Panel, ctx: &Context) -> CmdResult<BenchmarkModel> {
    let order = ctx.config.benchmarks.order;
    match kind {
        BenchmarkKind::Persistence => fit_persistence(train, ctx.config.forecast.horizon),
        BenchmarkKind::Ar => fit_ar_panel(train, order),
        BenchmarkKind::Var => fit_var_panel(train, order),
    }
    .map_err(err)
}

fn benchmark_file(kind: BenchmarkKind) -> String {
    format!("benchmark_{}.json", kind.name())
}

pub fn fit(ctx: &Context) -> CmdResult<()> {
    let c = &ctx.config;
    let panel = ctx.panel()?;
    let train = panel.slice(0..ctx.train_rows(&panel)).map_err(err)?;
    let model = windcast::fit_irw(&train, &c.model, c.method).map_err(err)?;
    let file = ModelFile::new(StoredModel::SvarxTarchx(model.clone()), ctx.hash.clone());
    let mut w = ctx.create("model.json")?;
    file.write(&mut w).map_err(err)?;
    w.flush().map_err(err)?;

    for eq in &model.equations {
        let name = eq.target.to_string();
        let mut w = ctx.create(format!("paths/{name}_mean.csv"))?;
        eq.mean_path.write_csv(&mut w, Some(&ctx.comment())).map_err(err)?;
        let mut w = ctx.create(format!("paths/{name}_variance.csv"))?;
        eq.variance_path.write_csv(&mut w, Some(&ctx.comment())).map_err(err)?;
    }
    write_diagnostics(ctx, &model)?;
    write_bases(ctx)?;
    if c.export_design {
        let block = windcast::design::build_mean_regressors(&train, &c.model).map_err(err)?;
        let mut w = ctx.create("design/mean.csv")?;
        block.write_csv(&mut w, Some(&ctx.comment())).map_err(err)?;
    }

    for &kind in &c.benchmarks.models {
        let bench = fit_benchmark(kind, &train, ctx)?;
        let mut w = ctx.create(benchmark_file(kind))?;
        ModelFile::new(StoredModel::Benchmark(bench), ctx.hash.clone())
            .write(&mut w)
            .map_err(err)?;
        w.flush().map_err(err)?;
    }

    ctx.write_json(
        "fit_summary.json",
        &FitSummary {
            config_hash: ctx.hash.clone(),
            train_rows: train.len(),
            iterations_used: model.iterations_used,
            converged: model.converged,
            final_delta: model.final_delta,
            delta_history: model.delta_history.clone(),
            nonzero_mean: model.equations.iter().map(|e| e.mean.len()).sum(),
            nonzero_variance: model.equations.iter().map(|e| e.variance.len()).sum(),
        },
    )?;
    eprintln!(
        "fitted {} equations in {} iterations (converged: {})",
        model.equations.len(),
        model.iterations_used,
        model.converged
    );
    Ok(())
}

/// Diurnal and annual basis values over one period each, for plotting.
fn write_bases(ctx: &Context) -> CmdResult<()> {
    let bases = ctx.config.model.bases().map_err(err)?;
    for (name, basis) in [("diurnal", &bases.diurnal), ("annual", &bases.annual)] {
        let mut w = ctx.create(format!("basis/{name}.csv"))?;
        basis.write_csv(&mut w, Some(&ctx.comment())).map_err(err)?;
    }
    Ok(())
}

fn write_diagnostics(ctx: &Context, model: &FittedModel) -> CmdResult<()> {
    let lb_lags = [10, 20];
    let report = residual_diagnostics(model, 48, &lb_lags);
    let mut w = ctx.create("diagnostics.csv")?;
    writeln!(w, "# {}", ctx.comment()).map_err(err)?;
    writeln!(w, "target,series,lb_lags,lb_statistic,lb_p_value,spike_fraction").map_err(err)?;
    for eq in &report.equations {
        for (series, lbs, spikes) in [
            ("z", &eq.ljung_box, eq.spike_fraction),
            ("abs_z", &eq.abs_ljung_box, eq.abs_spike_fraction),
        ] {
            for lb in lbs {
                writeln!(
                    w,
                    "{},{series},{},{:e},{:e},{spikes}",
                    eq.target, lb.lags, lb.statistic, lb.p_value
                )
                .map_err(err)?;
            }
        }
    }
    w.flush().map_err(err)
}

/// A model loaded for forecasting.
pub enum Loaded {
    Fitted(FittedModel),
    Benchmark(BenchmarkModel),
}

/// Resolves model arguments: paths to model files, or benchmark names that
/// are fitted on the training rows. With no arguments, every model file in
/// the output directory is used, falling back to persistence.
pub fn resolve_models(ctx: &Context, args: &[String], panel: &Panel) -> CmdResult<Vec<Loaded>> {
    let mut names: Vec<String> = args.to_vec();
    if names.is_empty() {
        let candidates = std::iter::once("model.json".to_string()).chain(
            ctx.config.benchmarks.models.iter().map(|k| benchmark_file(*k)),
        );
        for name in candidates {
            let p = ctx.config.out.join(&name);
            if p.exists() {
                names.push(p.to_string_lossy().into_owned());
            }
        }
        if names.is_empty() {
            names.push("persistence".into());
        }
    }
    let train = panel.slice(0..ctx.train_rows(panel)).map_err(err)?;
    names
        .iter()
        .map(|name| {
            let kind = match name.as_str() {
                "persistence" => Some(BenchmarkKind::Persistence),
                "ar" => Some(BenchmarkKind::Ar),
                "var" => Some(BenchmarkKind::Var),
                _ => None,
            };
            if let Some(kind) = kind {
                return fit_benchmark(kind, &train, ctx).map(Loaded::Benchmark);
            }
            let file = File::open(name).map_err(|e| format!("{name}: {e}"))?;
            let stored = ModelFile::read(BufReader::new(file)).map_err(|e| format!("{name}: {e}"))?;
            if stored.config_hash != ctx.hash {
                eprintln!("note: {name} was produced under config hash {}", stored.config_hash);
            }
            Ok(match stored.model {
                StoredModel::SvarxTarchx(m) => Loaded::Fitted(m),
                StoredModel::Benchmark(b) => Loaded::Benchmark(b),
            })
        })
        .collect()
}

fn forecasters<'a>(ctx: &Context, loaded: &'a [Loaded]) -> Vec<Box<dyn Forecaster + 'a>> {
    loaded
        .iter()
        .map(|l| -> Box<dyn Forecaster + 'a> {
            match l {
                Loaded::Fitted(m) => Box::new(ModelForecaster::new(m).with_options(ctx.forecast_options())),
                Loaded::Benchmark(b) => Box::new(b.clone()),
            }
        })
        .collect()
}

pub fn forecast(ctx: &Context, models: &[String]) -> CmdResult<()> {
    let c = &ctx.config;
    let panel = ctx.panel()?;
    let loaded = resolve_models(ctx, models, &panel)?;
    let boxed = forecasters(ctx, &loaded);
    let refs: Vec<&dyn Forecaster> = boxed.iter().map(|b| b.as_ref()).collect();
    let holdout = ctx.train_rows(&panel)..panel.len();
    let candidates = valid_origins(&refs, &holdout, c.forecast.horizon);
    let origins = sample_origins(candidates, c.forecast.origins, c.seed).map_err(err)?;
    let mut results = Vec::new();
    for f in &refs {
        for &o in &origins {
            results.push(f.forecast(&panel, o, c.forecast.horizon).map_err(err)?);
        }
    }
    let mut w = ctx.create("forecasts.csv")?;
    write_forecasts_csv(&results, &panel, &mut w, Some(&ctx.comment())).map_err(err)?;
    w.flush().map_err(err)?;
    eprintln!("{} forecasts from {} origins", results.len(), origins.len());
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct StoredReport {
    config_hash: String,
    report: EvaluationReport,
}

pub fn evaluate_cmd(ctx: &Context, models: &[String]) -> CmdResult<()> {
    let c = &ctx.config;
    let panel = ctx.panel()?;
    let loaded = resolve_models(ctx, models, &panel)?;
    let boxed = forecasters(ctx, &loaded);
    let refs: Vec<&dyn Forecaster> = boxed.iter().map(|b| b.as_ref()).collect();
    let holdout = ctx.train_rows(&panel)..panel.len();
    let report = evaluate(
        &refs,
        &panel,
        holdout,
        c.forecast.origins,
        c.forecast.horizon,
        c.forecast.bins,
        c.seed,
    )
    .map_err(err)?;
    let comment = ctx.comment();
    let mut w = ctx.create("scores.csv")?;
    write_scores_csv(&report, &mut w, Some(&comment)).map_err(err)?;
    w.flush().map_err(err)?;
    let mut w = ctx.create("pit.csv")?;
    write_pit_csv(&report, &mut w, Some(&comment)).map_err(err)?;
    w.flush().map_err(err)?;
    let mut w = ctx.create("origins.csv")?;
    write_origins_csv(&report, &panel, &mut w, Some(&comment)).map_err(err)?;
    w.flush().map_err(err)?;
    ctx.write_json(
        "evaluation.json",
        &StoredReport {
            config_hash: ctx.hash.clone(),
            report,
        },
    )?;
    eprintln!("evaluated {} models", refs.len());
    Ok(())
}

/// Markdown summary of `evaluation.json`.
pub fn report(ctx: &Context) -> CmdResult<()> {
    let path = ctx.config.out.join("evaluation.json");
    let file = File::open(&path).map_err(|e| format!("{}: {e} (run `evaluate` first)", path.display()))?;
    let stored: StoredReport = serde_json::from_reader(BufReader::new(file)).map_err(err)?;
    let text = render_report(&stored.report, &stored.config_hash);
    let mut w = ctx.create("report.md")?;
    w.write_all(text.as_bytes()).map_err(err)?;
    w.flush().map_err(err)?;
    print!("{text}");
    Ok(())
}

fn render_report(r: &EvaluationReport, hash: &str) -> String {
    let mut s = String::new();
    s.push_str("# Forecast evaluation\n\n");
    s.push_str(&format!(
        "config_hash: `{hash}`  \norigins: {} (seed {}), horizons 1..={}\n\n",
        r.origins.len(),
        r.seed,
        r.horizon
    ));
    let shown: Vec<usize> = [1, 3, 6, 12, 36, 72, 144]
        .into_iter()
        .filter(|&o| o <= r.horizon)
        .collect();
    s.push_str("## RMSE\n\n| model |");
    for o in &shown {
        s.push_str(&format!(" o={o} |"));
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(shown.len()));
    s.push('\n');
    for m in &r.models {
        s.push_str(&format!("| {} |", m.model));
        for &o in &shown {
            s.push_str(&format!(" {:.4} |", m.rmse[o - 1]));
        }
        s.push('\n');
    }
    s.push_str("\n## Lowest RMSE by horizon\n\n");
    for m in &r.models {
        let wins = (0..r.horizon)
            .filter(|&o| r.models.iter().all(|other| m.rmse[o] <= other.rmse[o]))
            .count();
        s.push_str(&format!("- {}: {wins} of {} horizons\n", m.model, r.horizon));
    }
    s.push_str("\n## PIT uniformity (chi-square p-value)\n\n| model |");
    for o in &shown {
        s.push_str(&format!(" o={o} |"));
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(shown.len()));
    s.push('\n');
    for m in &r.models {
        s.push_str(&format!("| {} |", m.model));
        for &o in &shown {
            s.push_str(&format!(" {:.3} |", uniformity_p_value(&m.pit[o - 1])));
        }
        s.push('\n');
    }
    s
}
