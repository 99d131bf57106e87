//! Synthetic panels from a known SVARX-TARCHX truth.
//!
//! Wind speed, pressure and temperature follow the mean and scale
//! recursions of the truth model with standard Gaussian innovations. Each
//! station's wind direction is a latent angle random walk; its sine and
//! cosine form the azimuth channels, which keeps them on the unit circle.
//! For a random walk with step deviation `κ` radians the components are
//! AR(1) in conditional mean with coefficient `exp(−κ²/2)`, and that
//! residual is what enters the scale recursion of other variables.

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::{ColumnLabel, ModelSpec, SeasonalBases, SparseCoefficients};
use crate::error::{Error, Result};
use crate::panel::{decompose_azimuth, Panel, VariableKind, VariableRef, VARIABLES_PER_STATION};

/// Coefficients of one equation of the data-generating model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TruthEquation {
    pub mean: SparseCoefficients,
    /// Conditional standard deviation `σ_t` as a linear function.
    pub scale: SparseCoefficients,
}

/// Data-generating model for [`simulate_panel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthModel {
    pub stations: usize,
    /// One entry per panel column; azimuth entries must be empty.
    pub equations: Vec<TruthEquation>,
    /// Step deviation of the wind direction random walk, degrees.
    pub azimuth_step_deg: f64,
    /// Lower bound applied to the simulated `σ_t`.
    pub sigma_floor: f64,
}

impl TruthModel {
    /// A model with every coefficient zero and `σ ≡ 1`.
    pub fn empty(stations: usize) -> Self {
        let mut equations = vec![TruthEquation::default(); VARIABLES_PER_STATION * stations];
        for var in VariableRef::all(stations) {
            if !var.kind.is_azimuth() {
                equations[var.column(stations)].scale = coefficients(&[(ColumnLabel::Intercept, 1.0)]);
            }
        }
        Self {
            stations,
            equations,
            azimuth_step_deg: 20.0,
            sigma_floor: 1e-3,
        }
    }

    pub fn equation_mut(&mut self, var: VariableRef) -> &mut TruthEquation {
        let m = self.stations;
        &mut self.equations[var.column(m)]
    }

    /// Lag-1 autocorrelation of the azimuth components, `exp(−κ²/2)`.
    pub fn azimuth_persistence(&self) -> f64 {
        let k = self.azimuth_step_deg.to_radians();
        (-0.5 * k * k).exp()
    }

    /// Largest lag referenced by any mean coefficient.
    pub fn max_mean_lag(&self) -> usize {
        self.equations
            .iter()
            .flat_map(|e| e.mean.entries.iter().filter_map(|(l, _)| l.lag()))
            .max()
            .unwrap_or(0)
            .max(1)
    }

    pub fn max_shock_lag(&self) -> usize {
        self.equations
            .iter()
            .flat_map(|e| e.scale.entries.iter().filter_map(|(l, _)| l.lag()))
            .max()
            .unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        let m = self.stations;
        if m == 0 || self.equations.len() != VARIABLES_PER_STATION * m {
            return Err(Error::InvalidSpec(format!(
                "truth has {} equations for {m} stations",
                self.equations.len()
            )));
        }
        for (c, eq) in self.equations.iter().enumerate() {
            let var = VariableRef::from_column(c, m);
            if var.kind.is_azimuth() && !(eq.mean.is_empty() && eq.scale.is_empty()) {
                return Err(Error::InvalidSpec(format!(
                    "{var} is generated by the angle process and takes no coefficients"
                )));
            }
            for (label, v) in eq.mean.entries.iter().chain(&eq.scale.entries) {
                if !v.is_finite() {
                    return Err(Error::InvalidSpec(format!("{label} = {v}")));
                }
                if label.variable().is_some_and(|r| r.station >= m) {
                    return Err(Error::InvalidSpec(format!("{label} refers to a missing station")));
                }
            }
            if eq
                .mean
                .entries
                .iter()
                .any(|(l, _)| matches!(l, ColumnLabel::ShockPos { .. } | ColumnLabel::ShockNeg { .. }))
            {
                return Err(Error::InvalidSpec(format!("{var}: shock terms in the mean")));
            }
            if eq
                .scale
                .entries
                .iter()
                .any(|(l, _)| matches!(l, ColumnLabel::Lag { .. } | ColumnLabel::LagSpline { .. }))
            {
                return Err(Error::InvalidSpec(format!("{var}: lag terms in the scale")));
            }
        }
        if !(self.azimuth_step_deg.is_finite() && self.azimuth_step_deg > 0.0) {
            return Err(Error::InvalidSpec("azimuth step must be positive".into()));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::InvalidSpec("sigma floor must be positive".into()));
        }
        Ok(())
    }
}

pub fn coefficients(entries: &[(ColumnLabel, f64)]) -> SparseCoefficients {
    SparseCoefficients {
        entries: entries.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationOptions {
    pub length: usize,
    pub burn_in: usize,
    pub start: NaiveDateTime,
    pub step_seconds: i64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            length: 20_000,
            burn_in: 1_000,
            start: NaiveDate::from_ymd_opt(2010, 1, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            step_seconds: 600,
        }
    }
}

/// A simulated panel together with the latent quantities behind it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub panel: Panel,
    /// True `σ_t`, `T × 5M`; azimuth columns hold the innovation deviation
    /// of the angle process.
    pub sigma: DMatrix<f64>,
    /// True innovations `ε_t`, `T × 5M`.
    pub innovations: DMatrix<f64>,
    /// Count of wind speed draws clipped at zero.
    pub clipped: usize,
    pub spectral_radius: f64,
}

/// Lag matrices `Φ_{t,j}` of the truth at seasonal step `t`, over the
/// non-azimuth mean equations plus the azimuth persistence.
fn lag_matrices(truth: &TruthModel, bases: &SeasonalBases, t: i64, max_lag: usize) -> Vec<DMatrix<f64>> {
    let m = truth.stations;
    let k = VARIABLES_PER_STATION * m;
    let seasonal = bases.row(t);
    let mut out = vec![DMatrix::zeros(k, k); max_lag];
    for (row, eq) in truth.equations.iter().enumerate() {
        for (label, coef) in &eq.mean.entries {
            let (lag, var, factor) = match *label {
                ColumnLabel::Lag { lag, var } => (lag, var, 1.0),
                ColumnLabel::LagSpline {
                    lag,
                    var,
                    diurnal,
                    annual,
                } => (lag, var, seasonal.get(diurnal, annual)),
                _ => continue,
            };
            out[lag - 1][(row, var.column(m))] += coef * factor;
        }
    }
    let rho = truth.azimuth_persistence();
    for var in VariableRef::all(m).into_iter().filter(|v| v.kind.is_azimuth()) {
        let c = var.column(m);
        out[0][(c, c)] = rho;
    }
    out
}

/// Spectral radius of the companion form of `Φ_1 … Φ_p`, estimated from
/// the asymptotic growth rate of repeated companion products.
pub fn companion_spectral_radius(lags: &[DMatrix<f64>]) -> f64 {
    let p = lags.len();
    if p == 0 {
        return 0.0;
    }
    let k = lags[0].nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    // state holds Y_t, Y_{t-1}, …, Y_{t-p+1}
    let mut state: Vec<DVector<f64>> = (0..p)
        .map(|_| DVector::from_fn(k, |_, _| rng.random::<f64>() - 0.5))
        .collect();
    let warm = 1000;
    let measure = 2000;
    let mut log_growth = 0.0;
    for step in 0..(warm + measure) {
        let mut next = DVector::zeros(k);
        for (j, phi) in lags.iter().enumerate() {
            next.gemv(1.0, phi, &state[j], 1.0);
        }
        state.rotate_right(1);
        state[0] = next;
        let norm = state.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for v in state.iter_mut() {
            *v /= norm;
        }
        if step >= warm {
            log_growth += norm.ln();
        }
    }
    (log_growth / measure as f64).exp()
}

/// Largest companion spectral radius over a grid of seasonal phases.
pub fn truth_spectral_radius(truth: &TruthModel, spec: &ModelSpec) -> Result<f64> {
    let bases = spec.bases()?;
    let max_lag = truth.max_mean_lag();
    let uses = |f: fn(&ColumnLabel) -> bool| {
        truth
            .equations
            .iter()
            .any(|e| e.mean.entries.iter().any(|(l, _)| f(l)))
    };
    let diurnal = uses(|l| matches!(l, ColumnLabel::LagSpline { diurnal, .. } if *diurnal > 1));
    let annual = uses(|l| matches!(l, ColumnLabel::LagSpline { annual, .. } if *annual > 1));
    let phases = |on: bool, period: usize, count: usize| -> Vec<i64> {
        if !on {
            return vec![0];
        }
        let n = 4 * count;
        (0..n).map(|i| (i * period / n) as i64).collect()
    };
    let mut radius = 0.0f64;
    for d in phases(diurnal, spec.diurnal_period, spec.diurnal_count) {
        for a in phases(annual, spec.annual_period, spec.annual_count) {
            // a step index with the requested phase in both bases
            let t = phase_step(d, a, spec);
            let mats = lag_matrices(truth, &bases, t, max_lag);
            radius = radius.max(companion_spectral_radius(&mats));
        }
    }
    Ok(radius)
}

// Both bases are periodic, so evaluating the two phases separately is
// equivalent to finding one step index carrying both.
fn phase_step(diurnal_phase: i64, annual_phase: i64, spec: &ModelSpec) -> i64 {
    if annual_phase == 0 {
        return diurnal_phase;
    }
    // step closest to the annual phase with the requested diurnal phase
    let period = spec.diurnal_period as i64;
    annual_phase - annual_phase.rem_euclid(period) + diurnal_phase
}

/// Unconditional level of the non-seasonal part, used to start the
/// recursion near its stationary mean.
fn initial_levels(truth: &TruthModel) -> DVector<f64> {
    let m = truth.stations;
    let k = VARIABLES_PER_STATION * m;
    let mut a = DMatrix::<f64>::identity(k, k);
    let mut b = DVector::zeros(k);
    for (row, eq) in truth.equations.iter().enumerate() {
        for (label, coef) in &eq.mean.entries {
            match *label {
                ColumnLabel::Intercept => b[row] += coef,
                ColumnLabel::Lag { var, .. } => a[(row, var.column(m))] -= coef,
                _ => {}
            }
        }
    }
    for var in VariableRef::all(m).into_iter().filter(|v| v.kind.is_azimuth()) {
        let c = var.column(m);
        for j in 0..k {
            a[(c, j)] = if j == c { 1.0 } else { 0.0 };
        }
        b[c] = 0.0;
    }
    a.lu().solve(&b).unwrap_or_else(|| DVector::zeros(k))
}

/// Generates a panel of `options.length` rows after discarding
/// `options.burn_in` rows. Deterministic for a given seed.
pub fn simulate_panel(
    spec: &ModelSpec,
    truth: &TruthModel,
    options: &SimulationOptions,
    seed: u64,
) -> Result<Simulation> {
    truth.validate()?;
    let radius = truth_spectral_radius(truth, spec)?;
    if !(radius < 1.0) {
        return Err(Error::Unstable(radius));
    }
    let bases = spec.bases()?;
    let m = truth.stations;
    let k = VARIABLES_PER_STATION * m;
    let total = options.length + options.burn_in;
    let step = options.step_seconds;
    let sim_start = options.start - TimeDelta::seconds(step * options.burn_in as i64);
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let offset = (sim_start - epoch).num_seconds().div_euclid(step);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };

    let mut y = DMatrix::<f64>::zeros(total, k);
    let mut eps = DMatrix::<f64>::zeros(total, k);
    let mut sigma = DMatrix::<f64>::zeros(total, k);
    let mut angle = DMatrix::<f64>::zeros(total, m);
    let levels = initial_levels(truth);
    let rho = truth.azimuth_persistence();
    let kappa = truth.azimuth_step_deg.to_radians();
    let azimuth_sd = (1.0 - rho * rho).sqrt() / std::f64::consts::SQRT_2;
    let mut clipped = 0;

    for t in 0..total {
        let seasonal = bases.row(offset + t as i64);
        // angle process first: its residuals feed the scale equations
        for s in 0..m {
            let prev = if t == 0 { 0.0 } else { angle[(t - 1, s)] };
            let raw = prev.to_radians() + kappa * normal();
            let deg = raw.to_degrees().rem_euclid(360.0);
            angle[(t, s)] = deg;
            let (sin_az, cos_az) = decompose_azimuth(deg)?;
            let sc = VariableRef::new(VariableKind::SinAz, s).column(m);
            let cc = VariableRef::new(VariableKind::CosAz, s).column(m);
            y[(t, sc)] = sin_az;
            y[(t, cc)] = cos_az;
            if t > 0 {
                eps[(t, sc)] = sin_az - rho * y[(t - 1, sc)];
                eps[(t, cc)] = cos_az - rho * y[(t - 1, cc)];
            }
            sigma[(t, sc)] = azimuth_sd;
            sigma[(t, cc)] = azimuth_sd;
        }
        for (c, eq) in truth.equations.iter().enumerate() {
            let var = VariableRef::from_column(c, m);
            if var.kind.is_azimuth() {
                continue;
            }
            let lagged = |lag: usize, v: VariableRef| {
                if lag <= t {
                    y[(t - lag, v.column(m))]
                } else {
                    levels[v.column(m)]
                }
            };
            let shock = |lag: usize, v: VariableRef| {
                if lag <= t {
                    eps[(t - lag, v.column(m))]
                } else {
                    0.0
                }
            };
            let mean = eq.mean.evaluate(&seasonal, lagged, |_, _| 0.0);
            let s = eq
                .scale
                .evaluate(&seasonal, |_, _| 0.0, shock)
                .max(truth.sigma_floor);
            let e = s * normal();
            let mut value = mean + e;
            if var.kind == VariableKind::WindSpeed && value < 0.0 {
                value = 0.0;
                if t >= options.burn_in {
                    clipped += 1;
                }
            }
            sigma[(t, c)] = s;
            eps[(t, c)] = e;
            y[(t, c)] = value;
        }
    }

    let keep = options.burn_in;
    let n = options.length;
    let select = |kind: VariableKind| {
        DMatrix::from_fn(n, m, |r, s| y[(keep + r, VariableRef::new(kind, s).column(m))])
    };
    let panel = Panel::from_station_series(
        (1..=m).map(|s| format!("S{s:02}")).collect(),
        options.start,
        step,
        &select(VariableKind::WindSpeed),
        &angle.rows(keep, n).into_owned(),
        &select(VariableKind::Pressure),
        &select(VariableKind::Temperature),
    )?;
    Ok(Simulation {
        panel,
        sigma: sigma.rows(keep, n).into_owned(),
        innovations: eps.rows(keep, n).into_owned(),
        clipped,
        spectral_radius: radius,
    })
}

/// Ready-made truths for desk-scale experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthPreset {
    /// Stable VAR(1) mean with diurnal terms and a constant scale in every
    /// channel, including the azimuth components.
    Homoscedastic,
    /// The same mean with a diurnal threshold-ARCH scale.
    DiurnalTarch,
}

impl TruthPreset {
    /// Builds the truth for `stations` stations. Spline indices stay within
    /// a diurnal basis of four functions.
    pub fn build(self, stations: usize) -> TruthModel {
        use ColumnLabel::*;
        use VariableKind::*;
        let m = stations;
        let mut truth = TruthModel::empty(m);
        for s in 0..m {
            let wind = VariableRef::new(WindSpeed, s);
            let east = VariableRef::new(SinAz, s);
            let mut mean = vec![
                (Intercept, 1.2),
                (Spline { diurnal: 2, annual: 1 }, 0.4),
                (Spline { diurnal: 3, annual: 1 }, -0.3),
                (Lag { lag: 1, var: wind }, 0.8),
                (LagSpline { lag: 1, var: wind, diurnal: 3, annual: 1 }, 0.05),
                (Lag { lag: 1, var: east }, 0.3),
            ];
            for other in (0..m).filter(|&o| o != s) {
                mean.push((Lag { lag: 1, var: VariableRef::new(WindSpeed, other) }, 0.04));
            }
            truth.equation_mut(wind).mean = coefficients(&mean);

            let pressure = VariableRef::new(Pressure, s);
            truth.equation_mut(pressure).mean = coefficients(&[
                (Intercept, 101.3),
                (Lag { lag: 1, var: pressure }, 0.9),
            ]);
            let temp = VariableRef::new(Temperature, s);
            truth.equation_mut(temp).mean = coefficients(&[
                (Intercept, 1.0),
                (Spline { diurnal: 2, annual: 1 }, 0.5),
                (Lag { lag: 1, var: temp }, 0.9),
                (Lag { lag: 1, var: wind }, -0.02),
            ]);

            for var in [wind, pressure, temp] {
                let scale = match self {
                    TruthPreset::Homoscedastic => vec![(Intercept, 0.5)],
                    TruthPreset::DiurnalTarch => vec![
                        (Intercept, 0.25),
                        (Spline { diurnal: 2, annual: 1 }, 0.3),
                        (Spline { diurnal: 4, annual: 1 }, -0.1),
                        (ShockPos { lag: 1, var, diurnal: 0 }, 0.25),
                        (ShockNeg { lag: 1, var, diurnal: 0 }, -0.15),
                        (ShockPos { lag: 1, var, diurnal: 2 }, 0.2),
                    ],
                };
                truth.equation_mut(var).scale = coefficients(&scale);
            }
        }
        if self == TruthPreset::Homoscedastic {
            // near-independent directions keep the azimuth residuals at a
            // constant conditional variance as well
            truth.azimuth_step_deg = 180.0;
        }
        truth
    }
}
