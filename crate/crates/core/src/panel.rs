//! Multi-station weather panels.
//!
//! A [`Panel`] holds `T` aligned observations of five variables at each of
//! `M` stations. Columns are variable-major: all wind speeds, then all
//! east-west azimuth components, all north-south components, all pressures,
//! and finally all temperatures.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of variables observed per station.
pub const VARIABLES_PER_STATION: usize = 5;

/// Default observation spacing: ten minutes.
pub const DEFAULT_STEP_SECONDS: i64 = 600;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    WindSpeed,
    SinAz,
    CosAz,
    Pressure,
    Temperature,
}

impl VariableKind {
    pub const ALL: [VariableKind; VARIABLES_PER_STATION] = [
        VariableKind::WindSpeed,
        VariableKind::SinAz,
        VariableKind::CosAz,
        VariableKind::Pressure,
        VariableKind::Temperature,
    ];

    /// Zero-based position of this kind in the column ordering.
    pub fn index(self) -> usize {
        match self {
            VariableKind::WindSpeed => 0,
            VariableKind::SinAz => 1,
            VariableKind::CosAz => 2,
            VariableKind::Pressure => 3,
            VariableKind::Temperature => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VariableKind::WindSpeed => "wind_speed",
            VariableKind::SinAz => "sin_az",
            VariableKind::CosAz => "cos_az",
            VariableKind::Pressure => "pressure",
            VariableKind::Temperature => "temperature",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Azimuth components are produced by the angle process, not by the
    /// linear recursion.
    pub fn is_azimuth(self) -> bool {
        matches!(self, VariableKind::SinAz | VariableKind::CosAz)
    }
}

/// A (variable kind, station) pair; `station` is a zero-based index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VariableRef {
    pub kind: VariableKind,
    pub station: usize,
}

impl VariableRef {
    pub fn new(kind: VariableKind, station: usize) -> Self {
        Self { kind, station }
    }

    pub fn column(self, stations: usize) -> usize {
        self.kind.index() * stations + self.station
    }

    pub fn from_column(column: usize, stations: usize) -> Self {
        Self {
            kind: VariableKind::ALL[column / stations],
            station: column % stations,
        }
    }

    /// Every variable of an `M`-station panel, in column order.
    pub fn all(stations: usize) -> Vec<VariableRef> {
        (0..stations * VARIABLES_PER_STATION)
            .map(|c| Self::from_column(c, stations))
            .collect()
    }
}

impl fmt::Display for VariableRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind.name(), self.station)
    }
}

/// Splits a wind direction in degrees into its (east-west, north-south)
/// components, i.e. `(sin az, cos az)`.
pub fn decompose_azimuth(azimuth_deg: f64) -> Result<(f64, f64)> {
    if !azimuth_deg.is_finite() {
        return Err(Error::InvalidValue(format!(
            "azimuth must be finite, got {azimuth_deg}"
        )));
    }
    let (s, c) = azimuth_deg.to_radians().sin_cos();
    Ok((s, c))
}

/// Anchor for the seasonal time index: step 0 is midnight, 1970-01-01.
fn epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(1970, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

/// Aligned multi-station observations at a fixed step.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    stations: Vec<String>,
    start: NaiveDateTime,
    step_seconds: i64,
    values: DMatrix<f64>,
    azimuth_deg: DMatrix<f64>,
}

impl Panel {
    /// Builds a panel from per-station series, each a `T × M` matrix.
    pub fn from_station_series(
        stations: Vec<String>,
        start: NaiveDateTime,
        step_seconds: i64,
        wind_speed: &DMatrix<f64>,
        azimuth_deg: &DMatrix<f64>,
        pressure: &DMatrix<f64>,
        temperature: &DMatrix<f64>,
    ) -> Result<Self> {
        let m = stations.len();
        let t = wind_speed.nrows();
        if m == 0 {
            return Err(Error::InvalidPanel("no stations".into()));
        }
        if step_seconds <= 0 {
            return Err(Error::InvalidPanel(format!(
                "step must be positive, got {step_seconds}"
            )));
        }
        for (name, mat) in [
            ("wind_speed", wind_speed),
            ("azimuth_deg", azimuth_deg),
            ("pressure", pressure),
            ("temperature", temperature),
        ] {
            if mat.shape() != (t, m) {
                return Err(Error::InvalidPanel(format!(
                    "{name} has shape {:?}, expected ({t}, {m})",
                    mat.shape()
                )));
            }
            if let Some(v) = mat.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidValue(format!("{name} contains {v}")));
            }
        }
        let mut sorted = stations.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != m {
            return Err(Error::InvalidPanel("duplicate station identifiers".into()));
        }
        if let Some(w) = wind_speed.iter().find(|w| **w < 0.0) {
            return Err(Error::InvalidPanel(format!("negative wind speed {w}")));
        }

        let mut values = DMatrix::zeros(t, VARIABLES_PER_STATION * m);
        for s in 0..m {
            for r in 0..t {
                let (sin_az, cos_az) = decompose_azimuth(azimuth_deg[(r, s)])?;
                values[(r, s)] = wind_speed[(r, s)];
                values[(r, m + s)] = sin_az;
                values[(r, 2 * m + s)] = cos_az;
                values[(r, 3 * m + s)] = pressure[(r, s)];
                values[(r, 4 * m + s)] = temperature[(r, s)];
            }
        }
        Ok(Self {
            stations,
            start,
            step_seconds,
            values,
            azimuth_deg: azimuth_deg.clone(),
        })
    }

    pub fn stations(&self) -> &[String] {
        &self.stations
    }

    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn variable_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn step_seconds(&self) -> i64 {
        self.step_seconds
    }

    /// The `T × 5M` observation matrix.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn azimuth_deg(&self) -> &DMatrix<f64> {
        &self.azimuth_deg
    }

    pub fn value(&self, row: usize, var: VariableRef) -> f64 {
        self.values[(row, var.column(self.station_count()))]
    }

    pub fn column_of(&self, var: VariableRef) -> usize {
        var.column(self.station_count())
    }

    pub fn timestamp(&self, row: usize) -> NaiveDateTime {
        self.start + TimeDelta::seconds(self.step_seconds * row as i64)
    }

    pub fn timestamps(&self) -> Vec<NaiveDateTime> {
        (0..self.len()).map(|r| self.timestamp(r)).collect()
    }

    /// Seasonal step index of the first row, counted from 1970-01-01T00:00.
    pub fn time_offset(&self) -> i64 {
        (self.start - epoch())
            .num_seconds()
            .div_euclid(self.step_seconds)
    }

    /// Seasonal step index of `row`, the argument fed to the spline bases.
    pub fn time_index(&self, row: usize) -> i64 {
        self.time_offset() + row as i64
    }

    /// Contiguous sub-panel over `rows`.
    pub fn slice(&self, rows: std::ops::Range<usize>) -> Result<Panel> {
        if rows.start > rows.end || rows.end > self.len() {
            return Err(Error::Range(format!(
                "rows {rows:?} outside panel of length {}",
                self.len()
            )));
        }
        let n = rows.end - rows.start;
        Ok(Panel {
            stations: self.stations.clone(),
            start: self.timestamp(rows.start),
            step_seconds: self.step_seconds,
            values: self.values.rows(rows.start, n).into_owned(),
            azimuth_deg: self.azimuth_deg.rows(rows.start, n).into_owned(),
        })
    }

    fn station_matrix(&self, kind: VariableKind) -> DMatrix<f64> {
        let m = self.station_count();
        let first = kind.index() * m;
        self.values.columns(first, m).into_owned()
    }

    pub fn wind_speed(&self) -> DMatrix<f64> {
        self.station_matrix(VariableKind::WindSpeed)
    }

    pub fn pressure(&self) -> DMatrix<f64> {
        self.station_matrix(VariableKind::Pressure)
    }

    pub fn temperature(&self) -> DMatrix<f64> {
        self.station_matrix(VariableKind::Temperature)
    }
}

/// Header names used for each input field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub timestamp: String,
    pub station: String,
    pub wind_speed: String,
    pub azimuth_deg: String,
    pub pressure: String,
    pub temperature: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            station: "station".into(),
            wind_speed: "wind_speed".into(),
            azimuth_deg: "azimuth_deg".into(),
            pressure: "pressure".into(),
            temperature: "temperature".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelSchema {
    pub columns: ColumnMapping,
    /// Declared station order; when absent, order of first appearance.
    pub stations: Option<Vec<String>>,
    pub step_seconds: i64,
}

impl Default for PanelSchema {
    fn default() -> Self {
        Self {
            columns: ColumnMapping::default(),
            stations: None,
            step_seconds: DEFAULT_STEP_SECONDS,
        }
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim().trim_end_matches('Z');
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f"))
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M"))
        .ok()
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

struct Record {
    ts: NaiveDateTime,
    wind: f64,
    az: f64,
    pressure: f64,
    temperature: f64,
}

/// Reads a long-format CSV (one row per station and timestamp) into a panel.
/// Lines starting with `#` are ignored.
pub fn load_panel<R: Read>(source: R, schema: &PanelSchema) -> Result<Panel> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                row: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let cols = &schema.columns;
    let idx_ts = find(&cols.timestamp)?;
    let idx_station = find(&cols.station)?;
    let idx_wind = find(&cols.wind_speed)?;
    let idx_az = find(&cols.azimuth_deg)?;
    let idx_p = find(&cols.pressure)?;
    let idx_c = find(&cols.temperature)?;

    let mut order: Vec<String> = schema.stations.clone().unwrap_or_default();
    let declared = schema.stations.is_some();
    let mut per_station: HashMap<String, Vec<Record>> = HashMap::new();

    for (i, rec) in reader.records().enumerate() {
        // Header is line 1.
        let row = i + 2;
        let rec = rec?;
        let field = |idx: usize| rec.get(idx).unwrap_or("");
        let number = |idx: usize, what: &str| -> Result<f64> {
            let raw = field(idx);
            raw.parse::<f64>().map_err(|_| Error::Parse {
                row,
                message: format!("{what} `{raw}` is not numeric"),
            })
        };
        let ts = parse_timestamp(field(idx_ts)).ok_or_else(|| Error::Parse {
            row,
            message: format!("timestamp `{}` is not ISO-8601", field(idx_ts)),
        })?;
        let station = field(idx_station).to_string();
        let record = Record {
            ts,
            wind: number(idx_wind, "wind_speed")?,
            az: number(idx_az, "azimuth_deg")?,
            pressure: number(idx_p, "pressure")?,
            temperature: number(idx_c, "temperature")?,
        };
        if !declared && !order.contains(&station) {
            order.push(station.clone());
        } else if declared && !order.contains(&station) {
            return Err(Error::Parse {
                row,
                message: format!("station `{station}` not in declared station list"),
            });
        }
        per_station.entry(station).or_default().push(record);
    }

    if order.is_empty() || per_station.is_empty() {
        return Err(Error::InvalidPanel("no data rows".into()));
    }

    let step = schema.step_seconds;
    let first = per_station
        .values()
        .flat_map(|v| v.iter().map(|r| r.ts))
        .min()
        .unwrap();
    let last = per_station
        .values()
        .flat_map(|v| v.iter().map(|r| r.ts))
        .max()
        .unwrap();
    let span = (last - first).num_seconds();
    if span % step != 0 {
        return Err(Error::InvalidPanel(format!(
            "timestamps are not on a {step}-second grid"
        )));
    }
    let t = (span / step) as usize + 1;
    let m = order.len();

    let nan = f64::NAN;
    let mut wind = DMatrix::from_element(t, m, nan);
    let mut az = DMatrix::from_element(t, m, nan);
    let mut pressure = DMatrix::from_element(t, m, nan);
    let mut temperature = DMatrix::from_element(t, m, nan);
    let mut seen = vec![false; t * m];

    for (s, name) in order.iter().enumerate() {
        for rec in per_station.get(name).map(Vec::as_slice).unwrap_or(&[]) {
            let offset = (rec.ts - first).num_seconds();
            if offset % step != 0 {
                return Err(Error::InvalidPanel(format!(
                    "timestamp {} for station {name} is off the {step}-second grid",
                    format_timestamp(rec.ts)
                )));
            }
            let r = (offset / step) as usize;
            if seen[r * m + s] {
                return Err(Error::InvalidPanel(format!(
                    "duplicate row for station {name} at {}",
                    format_timestamp(rec.ts)
                )));
            }
            seen[r * m + s] = true;
            wind[(r, s)] = rec.wind;
            az[(r, s)] = rec.az;
            pressure[(r, s)] = rec.pressure;
            temperature[(r, s)] = rec.temperature;
        }
    }

    let missing: Vec<(String, String)> = (0..t)
        .flat_map(|r| (0..m).map(move |s| (r, s)))
        .filter(|&(r, s)| !seen[r * m + s])
        .map(|(r, s)| {
            let ts = first + TimeDelta::seconds(step * r as i64);
            (order[s].clone(), format_timestamp(ts))
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::Gap { missing });
    }

    Panel::from_station_series(order, first, step, &wind, &az, &pressure, &temperature)
}

/// Writes a panel in the same long format [`load_panel`] reads. An optional
/// comment is emitted as a leading `#` line.
pub fn write_panel<W: Write>(panel: &Panel, sink: W, comment: Option<&str>) -> Result<()> {
    let mut sink = sink;
    if let Some(c) = comment {
        writeln!(sink, "# {c}")?;
    }
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record([
        "timestamp",
        "station",
        "wind_speed",
        "azimuth_deg",
        "pressure",
        "temperature",
    ])?;
    let m = panel.station_count();
    for r in 0..panel.len() {
        let ts = format_timestamp(panel.timestamp(r));
        for (s, name) in panel.stations.iter().enumerate() {
            writer.write_record([
                ts.clone(),
                name.clone(),
                panel.values[(r, s)].to_string(),
                panel.azimuth_deg[(r, s)].to_string(),
                panel.values[(r, 3 * m + s)].to_string(),
                panel.values[(r, 4 * m + s)].to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}
