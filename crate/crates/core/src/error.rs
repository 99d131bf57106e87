use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("panel has {} missing (station, timestamp) cells, first: {}", .missing.len(), format_missing(.missing))]
    Gap { missing: Vec<(String, String)> },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("cubic periodic basis needs at least 4 functions, got {0}")]
    Degree(usize),

    #[error("period {period} is shorter than basis count {count}")]
    Resolution { period: usize, count: usize },

    #[error("series too short: need more than {needed} observations, have {available}")]
    Length { needed: usize, available: usize },

    #[error("residual column {column} is identically zero")]
    DegenerateVariance { column: usize },

    #[error("coordinate descent did not converge within {sweeps} sweeps at lambda {lambda}")]
    Convergence {
        sweeps: usize,
        lambda: f64,
        last_iterate: Vec<f64>,
    },

    #[error("sigma floor active at {floored} of {total} points for target column {column}")]
    IllConditioned {
        column: usize,
        floored: usize,
        total: usize,
    },

    #[error("unstable truth model: spectral radius {0:.6} >= 1")]
    Unstable(f64),

    #[error("rank deficient normal equations: {0}")]
    Rank(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("cannot draw {requested} origins from {available} valid positions")]
    Sampling { requested: usize, available: usize },

    #[error("degenerate predictive distribution: sd = 0 but actual {actual} != forecast {forecast}")]
    DegenerateDistribution { actual: f64, forecast: f64 },

    #[error("model file: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_missing(missing: &[(String, String)]) -> String {
    missing
        .first()
        .map(|(s, t)| format!("station {s} at {t}"))
        .unwrap_or_default()
}
