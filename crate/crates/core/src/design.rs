//! Regression designs for the periodic mean and the threshold variance
//! equations.
//!
//! Spline indices follow the model notation: basis functions are numbered
//! from 1, function 1 is dropped, and an index of 1 in a seasonal pair means
//! "no factor from this basis". So `Spline { diurnal: 3, annual: 1 }` is the
//! third diurnal function alone and `Spline { diurnal: 3, annual: 2 }` its
//! product with the second annual function. Shock terms carry a diurnal
//! index where 0 denotes the plain (unmodulated) shock.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::panel::{Panel, VariableKind, VariableRef, VARIABLES_PER_STATION};
use crate::spline::{PeriodicSplineBasis, ANNUAL_PERIOD, DIURNAL_PERIOD};

/// How the penalty levels of a path are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaGrid {
    /// `count` log-spaced levels from `λ_max` down to `min_ratio · λ_max`.
    Relative { count: usize, min_ratio: f64 },
    /// Fixed levels, strictly descending.
    Explicit { values: Vec<f64> },
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Relative {
            count: 100,
            min_ratio: 1e-4,
        }
    }
}

impl LambdaGrid {
    pub fn resolve(&self, lambda_max: f64) -> Vec<f64> {
        match self {
            LambdaGrid::Explicit { values } => values.clone(),
            LambdaGrid::Relative { count, min_ratio } => {
                let top = if lambda_max > 0.0 { lambda_max } else { 1.0 };
                if *count == 1 {
                    return vec![top];
                }
                let ln_hi = top.ln();
                let ln_lo = (top * min_ratio).ln();
                (0..*count)
                    .map(|i| {
                        let f = i as f64 / (*count - 1) as f64;
                        (ln_hi + f * (ln_lo - ln_hi)).exp()
                    })
                    .collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LambdaGrid::Relative { count, min_ratio } => {
                if *count == 0 {
                    return Err(Error::InvalidSpec("lambda grid is empty".into()));
                }
                if !(*min_ratio > 0.0 && *min_ratio < 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "lambda min_ratio must lie in (0, 1), got {min_ratio}"
                    )));
                }
            }
            LambdaGrid::Explicit { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidSpec("lambda grid is empty".into()));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::InvalidSpec("lambda values must be positive".into()));
                }
                if values.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::InvalidSpec(
                        "lambda grid must be strictly descending".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Norm used for the sigma-path abort criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceNorm {
    /// Euclidean norm divided by the square root of the path length.
    #[default]
    Rms,
    /// Plain Euclidean norm.
    Raw,
}

/// Structural hyperparameters of the model and its estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    /// Mean lag count `J`.
    pub mean_lags: usize,
    /// Positive-shock lag count `P`.
    pub positive_lags: usize,
    /// Negative-shock lag count `Q`.
    pub negative_lags: usize,
    /// Diurnal basis size `k₁`.
    pub diurnal_count: usize,
    /// Annual basis size `k₂`.
    pub annual_count: usize,
    pub diurnal_period: usize,
    pub annual_period: usize,
    /// Elastic-net mixing; 1 is the lasso, 0 is ridge.
    pub alpha: f64,
    pub lambda_grid: LambdaGrid,
    pub cd_tol: f64,
    pub max_sweeps: usize,
    pub irw_tol: f64,
    pub irw_max_iter: usize,
    pub convergence_norm: ConvergenceNorm,
    /// Active mean lags; all of `1..=mean_lags` when absent.
    pub lag_subset: Option<Vec<usize>>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            mean_lags: 289,
            positive_lags: 289,
            negative_lags: 289,
            diurnal_count: 6,
            annual_count: 4,
            diurnal_period: DIURNAL_PERIOD,
            annual_period: ANNUAL_PERIOD,
            alpha: 1.0,
            lambda_grid: LambdaGrid::default(),
            cd_tol: 1e-7,
            max_sweeps: 10_000,
            irw_tol: 1e-3,
            irw_max_iter: 20,
            convergence_norm: ConvergenceNorm::Rms,
            lag_subset: None,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.mean_lags == 0 || self.positive_lags == 0 || self.negative_lags == 0 {
            return bad("lag counts J, P, Q must all be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.irw_tol > 0.0) {
            return bad(format!("irw_tol must be positive, got {}", self.irw_tol));
        }
        if !(self.cd_tol > 0.0) {
            return bad(format!("cd_tol must be positive, got {}", self.cd_tol));
        }
        if self.irw_max_iter == 0 {
            return bad("irw_max_iter must be at least 1".into());
        }
        if self.max_sweeps == 0 {
            return bad("max_sweeps must be at least 1".into());
        }
        if let Some(subset) = &self.lag_subset {
            if subset.is_empty() {
                return bad("lag_subset is empty".into());
            }
            if let Some(l) = subset.iter().find(|&&l| l == 0 || l > self.mean_lags) {
                return bad(format!("lag {l} outside 1..={}", self.mean_lags));
            }
            let unique: BTreeSet<_> = subset.iter().collect();
            if unique.len() != subset.len() {
                return bad("lag_subset contains duplicates".into());
            }
        }
        self.lambda_grid.validate()?;
        // basis constructors report the remaining size errors
        PeriodicSplineBasis::new(self.diurnal_period, self.diurnal_count)?;
        PeriodicSplineBasis::new(self.annual_period, self.annual_count)?;
        Ok(())
    }

    /// Active mean lags in ascending order.
    pub fn active_lags(&self) -> Vec<usize> {
        match &self.lag_subset {
            Some(s) => {
                let mut v = s.clone();
                v.sort_unstable();
                v
            }
            None => (1..=self.mean_lags).collect(),
        }
    }

    pub fn max_mean_lag(&self) -> usize {
        self.active_lags().last().copied().unwrap_or(0)
    }

    pub fn max_shock_lag(&self) -> usize {
        self.positive_lags.max(self.negative_lags)
    }

    /// First panel row with a complete mean and variance design. Residuals
    /// exist from row `max_mean_lag`, and the variance equation looks a
    /// further `max(P, Q)` rows back.
    pub fn first_usable_row(&self) -> usize {
        self.max_mean_lag() + self.max_shock_lag()
    }

    pub fn bases(&self) -> Result<SeasonalBases> {
        SeasonalBases::new(
            PeriodicSplineBasis::new(self.diurnal_period, self.diurnal_count)?,
            PeriodicSplineBasis::new(self.annual_period, self.annual_count)?,
        )
    }
}

/// The diurnal and annual bases used together.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalBases {
    pub diurnal: PeriodicSplineBasis,
    pub annual: PeriodicSplineBasis,
}

/// Seasonal factors `g_d(t)·h_a(t)` at one instant, where `g_1 = h_1 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalRow {
    annual_count: usize,
    values: Vec<f64>,
}

impl SeasonalRow {
    /// Factor for the 1-based pair `(diurnal, annual)`.
    #[inline]
    pub fn get(&self, diurnal: usize, annual: usize) -> f64 {
        self.values[(diurnal - 1) * self.annual_count + (annual - 1)]
    }

    /// Diurnal factor of a shock column, where index 0 means unmodulated.
    #[inline]
    pub fn shock_factor(&self, diurnal: usize) -> f64 {
        if diurnal == 0 {
            1.0
        } else {
            self.get(diurnal, 1)
        }
    }
}

impl SeasonalBases {
    pub fn new(diurnal: PeriodicSplineBasis, annual: PeriodicSplineBasis) -> Result<Self> {
        Ok(Self { diurnal, annual })
    }

    pub fn row(&self, t: i64) -> SeasonalRow {
        let k1 = self.diurnal.count();
        let k2 = self.annual.count();
        let d = self.diurnal.eval_row(t, false);
        let a = self.annual.eval_row(t, false);
        let mut values = Vec::with_capacity(k1 * k2);
        for i in 0..k1 {
            let gi = if i == 0 { 1.0 } else { d[i] };
            for j in 0..k2 {
                let hj = if j == 0 { 1.0 } else { a[j] };
                values.push(gi * hj);
            }
        }
        SeasonalRow {
            annual_count: k2,
            values,
        }
    }
}

/// Seasonal pairs in design order: diurnal alone, annual alone, then the
/// interactions with the diurnal index varying slowest.
pub fn seasonal_terms(diurnal_count: usize, annual_count: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    out.extend((2..=diurnal_count).map(|d| (d, 1)));
    out.extend((2..=annual_count).map(|a| (1, a)));
    for d in 2..=diurnal_count {
        for a in 2..=annual_count {
            out.push((d, a));
        }
    }
    out
}

/// Structured tag of one design column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColumnLabel {
    Intercept,
    Spline {
        diurnal: usize,
        annual: usize,
    },
    Lag {
        lag: usize,
        var: VariableRef,
    },
    LagSpline {
        lag: usize,
        var: VariableRef,
        diurnal: usize,
        annual: usize,
    },
    ShockPos {
        lag: usize,
        var: VariableRef,
        diurnal: usize,
    },
    ShockNeg {
        lag: usize,
        var: VariableRef,
        diurnal: usize,
    },
}

impl ColumnLabel {
    /// Evaluates the regressor. `lagged(j, v)` returns `Y_{v, t−j}` and
    /// `shock(j, v)` returns `ε_{v, t−j}`.
    #[inline]
    pub fn value<L, S>(&self, seasonal: &SeasonalRow, lagged: L, shock: S) -> f64
    where
        L: Fn(usize, VariableRef) -> f64,
        S: Fn(usize, VariableRef) -> f64,
    {
        match *self {
            ColumnLabel::Intercept => 1.0,
            ColumnLabel::Spline { diurnal, annual } => seasonal.get(diurnal, annual),
            ColumnLabel::Lag { lag, var } => lagged(lag, var),
            ColumnLabel::LagSpline {
                lag,
                var,
                diurnal,
                annual,
            } => lagged(lag, var) * seasonal.get(diurnal, annual),
            ColumnLabel::ShockPos { lag, var, diurnal } => {
                let e = shock(lag, var);
                if e > 0.0 {
                    e * seasonal.shock_factor(diurnal)
                } else {
                    0.0
                }
            }
            ColumnLabel::ShockNeg { lag, var, diurnal } => {
                let e = shock(lag, var);
                if e > 0.0 {
                    0.0
                } else {
                    e * seasonal.shock_factor(diurnal)
                }
            }
        }
    }

    /// Variable this column lags, if any.
    pub fn variable(&self) -> Option<VariableRef> {
        match *self {
            ColumnLabel::Lag { var, .. }
            | ColumnLabel::LagSpline { var, .. }
            | ColumnLabel::ShockPos { var, .. }
            | ColumnLabel::ShockNeg { var, .. } => Some(var),
            _ => None,
        }
    }

    pub fn lag(&self) -> Option<usize> {
        match *self {
            ColumnLabel::Lag { lag, .. }
            | ColumnLabel::LagSpline { lag, .. }
            | ColumnLabel::ShockPos { lag, .. }
            | ColumnLabel::ShockNeg { lag, .. } => Some(lag),
            _ => None,
        }
    }
}


impl fmt::Display for ColumnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnLabel::Intercept => write!(f, "intercept"),
            ColumnLabel::Spline { diurnal, annual } => write!(f, "spline({diurnal},{annual})"),
            ColumnLabel::Lag { lag, var } => write!(f, "lag({lag},{var})"),
            ColumnLabel::LagSpline {
                lag,
                var,
                diurnal,
                annual,
            } => write!(f, "lag_spline({lag},{var},{diurnal},{annual})"),
            ColumnLabel::ShockPos { lag, var, diurnal } => {
                write!(f, "shock_pos({lag},{var},{diurnal})")
            }
            ColumnLabel::ShockNeg { lag, var, diurnal } => {
                write!(f, "shock_neg({lag},{var},{diurnal})")
            }
        }
    }
}

fn parse_var(s: &str) -> Option<VariableRef> {
    let (kind, station) = s.split_once('@')?;
    Some(VariableRef::new(
        VariableKind::from_name(kind)?,
        station.parse().ok()?,
    ))
}

impl FromStr for ColumnLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::ModelFile(format!("unrecognised column label `{s}`"));
        if s == "intercept" {
            return Ok(ColumnLabel::Intercept);
        }
        let (name, rest) = s.split_once('(').ok_or_else(err)?;
        let args: Vec<&str> = rest.strip_suffix(')').ok_or_else(err)?.split(',').collect();
        let num = |i: usize| -> Result<usize> {
            args.get(i).and_then(|a| a.parse().ok()).ok_or_else(err)
        };
        let var = |i: usize| -> Result<VariableRef> {
            args.get(i).and_then(|a| parse_var(a)).ok_or_else(err)
        };
        let label = match (name, args.len()) {
            ("spline", 2) => ColumnLabel::Spline {
                diurnal: num(0)?,
                annual: num(1)?,
            },
            ("lag", 2) => ColumnLabel::Lag {
                lag: num(0)?,
                var: var(1)?,
            },
            ("lag_spline", 4) => ColumnLabel::LagSpline {
                lag: num(0)?,
                var: var(1)?,
                diurnal: num(2)?,
                annual: num(3)?,
            },
            ("shock_pos", 3) => ColumnLabel::ShockPos {
                lag: num(0)?,
                var: var(1)?,
                diurnal: num(2)?,
            },
            ("shock_neg", 3) => ColumnLabel::ShockNeg {
                lag: num(0)?,
                var: var(1)?,
                diurnal: num(2)?,
            },
            _ => return Err(err()),
        };
        Ok(label)
    }
}

impl Serialize for ColumnLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ColumnLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A labelled sparse coefficient vector, kept in design column order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseCoefficients {
    pub entries: Vec<(ColumnLabel, f64)>,
}

impl SparseCoefficients {
    /// Nonzero entries of `intercept` and `beta`, where `labels[0]` is the
    /// intercept and `beta` covers `labels[1..]`.
    pub fn from_dense(labels: &[ColumnLabel], intercept: f64, beta: &[f64]) -> Self {
        debug_assert_eq!(labels.len(), beta.len() + 1);
        let mut entries = Vec::new();
        if intercept != 0.0 {
            entries.push((labels[0], intercept));
        }
        entries.extend(
            labels[1..]
                .iter()
                .zip(beta)
                .filter(|(_, b)| **b != 0.0)
                .map(|(l, b)| (*l, *b)),
        );
        Self { entries }
    }

    pub fn get(&self, label: &ColumnLabel) -> f64 {
        self.entries
            .iter()
            .find(|(l, _)| l == label)
            .map_or(0.0, |(_, v)| *v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dense vector over `labels`; entries with labels outside the set are
    /// reported as an error.
    pub fn to_dense(&self, labels: &[ColumnLabel]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; labels.len()];
        for (label, value) in &self.entries {
            let idx = labels.iter().position(|l| l == label).ok_or_else(|| {
                Error::ModelFile(format!("coefficient `{label}` has no design column"))
            })?;
            out[idx] = *value;
        }
        Ok(out)
    }

    /// Linear predictor `Σ θ_label · value(label)`.
    #[inline]
    pub fn evaluate<L, S>(&self, seasonal: &SeasonalRow, lagged: L, shock: S) -> f64
    where
        L: Fn(usize, VariableRef) -> f64,
        S: Fn(usize, VariableRef) -> f64,
    {
        self.entries
            .iter()
            .map(|(label, coef)| coef * label.value(seasonal, &lagged, &shock))
            .sum()
    }
}

/// Column labels of the mean equation, identical for every target.
pub fn mean_labels(spec: &ModelSpec, stations: usize) -> Vec<ColumnLabel> {
    let terms = seasonal_terms(spec.diurnal_count, spec.annual_count);
    let mut labels = vec![ColumnLabel::Intercept];
    labels.extend(
        terms
            .iter()
            .map(|&(diurnal, annual)| ColumnLabel::Spline { diurnal, annual }),
    );
    for lag in spec.active_lags() {
        for var in VariableRef::all(stations) {
            labels.push(ColumnLabel::Lag { lag, var });
            labels.extend(terms.iter().map(|&(diurnal, annual)| ColumnLabel::LagSpline {
                lag,
                var,
                diurnal,
                annual,
            }));
        }
    }
    labels
}

/// Column labels of the variance equation, identical for every target.
pub fn variance_labels(spec: &ModelSpec, stations: usize) -> Vec<ColumnLabel> {
    let k1 = spec.diurnal_count;
    let mut labels = vec![ColumnLabel::Intercept];
    labels.extend((2..=k1).map(|diurnal| ColumnLabel::Spline { diurnal, annual: 1 }));
    let diurnal_idx: Vec<usize> = std::iter::once(0).chain(2..=k1).collect();
    for lag in 1..=spec.positive_lags {
        for var in VariableRef::all(stations) {
            labels.extend(
                diurnal_idx
                    .iter()
                    .map(|&diurnal| ColumnLabel::ShockPos { lag, var, diurnal }),
            );
        }
    }
    for lag in 1..=spec.negative_lags {
        for var in VariableRef::all(stations) {
            labels.extend(
                diurnal_idx
                    .iter()
                    .map(|&diurnal| ColumnLabel::ShockNeg { lag, var, diurnal }),
            );
        }
    }
    labels
}

/// A labelled design matrix. Matrix row `r` corresponds to panel row
/// `first_row + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBlock {
    pub matrix: DMatrix<f64>,
    pub labels: Vec<ColumnLabel>,
    pub first_row: usize,
    /// Columns that are identically zero over the sample.
    pub zero_columns: Vec<usize>,
}

impl DesignBlock {
    fn from_parts(matrix: DMatrix<f64>, labels: Vec<ColumnLabel>, first_row: usize) -> Self {
        let zero_columns = (0..matrix.ncols())
            .filter(|&c| matrix.column(c).iter().all(|v| *v == 0.0))
            .collect();
        Self {
            matrix,
            labels,
            first_row,
            zero_columns,
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// CSV with the labels as header, optionally after a `#` comment line.
    pub fn write_csv<W: Write>(&self, mut sink: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(sink, "# {c}")?;
        }
        let mut writer = csv::Writer::from_writer(sink);
        let mut header = vec!["row".to_string()];
        header.extend(self.labels.iter().map(|l| l.to_string()));
        writer.write_record(&header)?;
        for r in 0..self.rows() {
            let mut rec = vec![(self.first_row + r).to_string()];
            rec.extend(self.matrix.row(r).iter().map(|v| v.to_string()));
            writer.write_record(&rec)?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn check_length(spec: &ModelSpec, available: usize) -> Result<usize> {
    let first = spec.first_usable_row();
    if available <= first + 1 {
        return Err(Error::Length {
            needed: first + 1,
            available,
        });
    }
    Ok(first)
}

/// Mean-equation regressors for a panel (shared by all targets).
pub fn build_mean_regressors(panel: &Panel, spec: &ModelSpec) -> Result<DesignBlock> {
    spec.validate()?;
    let first = check_length(spec, panel.len())?;
    let bases = spec.bases()?;
    let labels = mean_labels(spec, panel.station_count());
    let values = panel.values();
    let m = panel.station_count();
    let n = panel.len() - first;
    let mut matrix = DMatrix::zeros(n, labels.len());
    for r in 0..n {
        let t = first + r;
        let seasonal = bases.row(panel.time_index(t));
        for (c, label) in labels.iter().enumerate() {
            matrix[(r, c)] = label.value(
                &seasonal,
                |lag, var| values[(t - lag, var.column(m))],
                |_, _| 0.0,
            );
        }
    }
    Ok(DesignBlock::from_parts(matrix, labels, first))
}

/// Target series aligned with the design rows.
pub fn mean_response(panel: &Panel, spec: &ModelSpec, target: VariableRef) -> Result<DVector<f64>> {
    let first = check_length(spec, panel.len())?;
    let col = panel.column_of(target);
    Ok(DVector::from_iterator(
        panel.len() - first,
        (first..panel.len()).map(|t| panel.values()[(t, col)]),
    ))
}

pub fn build_mean_design(
    panel: &Panel,
    spec: &ModelSpec,
    target: VariableRef,
) -> Result<(DesignBlock, DVector<f64>)> {
    if target.station >= panel.station_count() {
        return Err(Error::Range(format!("target {target} outside panel")));
    }
    let block = build_mean_regressors(panel, spec)?;
    let y = mean_response(panel, spec, target)?;
    Ok((block, y))
}

/// Variance-equation regressors from a `T × 5M` residual matrix whose rows
/// before `valid_from` are undefined. `time_index` maps a panel row to its
/// seasonal step.
pub fn build_variance_regressors(
    residuals: &DMatrix<f64>,
    valid_from: usize,
    spec: &ModelSpec,
    time_index: impl Fn(usize) -> i64,
) -> Result<DesignBlock> {
    spec.validate()?;
    let total = residuals.nrows();
    let first = check_length(spec, total)?;
    if valid_from + spec.max_shock_lag() > first {
        return Err(Error::Range(format!(
            "residuals valid from row {valid_from} but the design starts at {first}"
        )));
    }
    let vars = residuals.ncols();
    if vars % VARIABLES_PER_STATION != 0 {
        return Err(Error::InvalidPanel(format!(
            "residual matrix has {vars} columns, not a multiple of {VARIABLES_PER_STATION}"
        )));
    }
    let m = vars / VARIABLES_PER_STATION;
    let bases = spec.bases()?;
    let labels = variance_labels(spec, m);
    let n = total - first;
    let mut matrix = DMatrix::zeros(n, labels.len());
    for r in 0..n {
        let t = first + r;
        let seasonal = bases.row(time_index(t));
        for (c, label) in labels.iter().enumerate() {
            matrix[(r, c)] = label.value(
                &seasonal,
                |_, _| 0.0,
                |lag, var| residuals[(t - lag, var.column(m))],
            );
        }
    }
    Ok(DesignBlock::from_parts(matrix, labels, first))
}

/// `|ε_target,t|` aligned with the variance design rows.
pub fn variance_response(
    residuals: &DMatrix<f64>,
    spec: &ModelSpec,
    target: VariableRef,
) -> Result<DVector<f64>> {
    let total = residuals.nrows();
    let first = check_length(spec, total)?;
    let m = residuals.ncols() / VARIABLES_PER_STATION;
    let col = target.column(m);
    let y = DVector::from_iterator(
        total - first,
        (first..total).map(|t| residuals[(t, col)].abs()),
    );
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateVariance { column: col });
    }
    Ok(y)
}

pub fn build_variance_design(
    residuals: &DMatrix<f64>,
    valid_from: usize,
    spec: &ModelSpec,
    target: VariableRef,
    time_index: impl Fn(usize) -> i64,
) -> Result<(DesignBlock, DVector<f64>)> {
    let y = variance_response(residuals, spec, target)?;
    let block = build_variance_regressors(residuals, valid_from, spec, time_index)?;
    Ok((block, y))
}

/// Parameter count as printed for the model:
/// `2·(J + 2((k₁−1)+(k₂−1)+(k₁k₂−1)+1) + (k₁−1) + P + Q + 1 + 2k₁)`.
///
/// This counts coefficient groups per equation and does not scale with the
/// number of variables; see [`mean_labels`] and [`variance_labels`] for the
/// actual column counts.
pub fn parameter_count(spec: &ModelSpec) -> usize {
    let (j, p, q) = (spec.mean_lags, spec.positive_lags, spec.negative_lags);
    let (k1, k2) = (spec.diurnal_count, spec.annual_count);
    2 * (j + 2 * ((k1 - 1) + (k2 - 1) + (k1 * k2 - 1) + 1) + (k1 - 1) + p + q + 1 + 2 * k1)
}
