//! Periodic cubic B-spline bases.
//!
//! A basis of `k` functions over a period of `s` steps places `k`
//! equidistant knots `h = s / k` apart and wraps around modulo `s`. Function
//! `i` is the cardinal cubic B-spline shifted by `i·h`, so each has support
//! over four knot intervals and the full basis sums to one everywhere.

use std::io::Write;

use crate::error::{Error, Result};

/// Steps per day at a ten-minute resolution.
pub const DIURNAL_PERIOD: usize = 144;
/// Steps per (365-day) year at a ten-minute resolution.
pub const ANNUAL_PERIOD: usize = 52_560;

/// Cardinal cubic B-spline on `[0, 4)`.
fn cardinal_cubic(u: f64) -> f64 {
    if !(0.0..4.0).contains(&u) {
        return 0.0;
    }
    let seg = u.floor();
    let x = u - seg;
    match seg as u8 {
        0 => x * x * x / 6.0,
        1 => (((-3.0 * x + 3.0) * x + 3.0) * x + 1.0) / 6.0,
        2 => (((3.0 * x - 6.0) * x) * x + 4.0) / 6.0,
        _ => {
            let y = 1.0 - x;
            y * y * y / 6.0
        }
    }
}

/// Cyclic cubic B-spline basis with `count` functions over `period` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSplineBasis {
    period: usize,
    count: usize,
    // Values at integer steps, `period × count`, row-major.
    table: Vec<f64>,
}

impl PeriodicSplineBasis {
    pub fn new(period: usize, count: usize) -> Result<Self> {
        if count < 4 {
            return Err(Error::Degree(count));
        }
        if period < count {
            return Err(Error::Resolution { period, count });
        }
        let mut basis = Self {
            period,
            count,
            table: Vec::new(),
        };
        let mut table = Vec::with_capacity(period * count);
        for t in 0..period {
            for i in 0..count {
                table.push(basis.eval_continuous(i, t as f64));
            }
        }
        basis.table = table;
        Ok(basis)
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Distance between consecutive knots, in steps.
    pub fn knot_spacing(&self) -> f64 {
        self.period as f64 / self.count as f64
    }

    /// Length of each function's support, in steps.
    pub fn support_width(&self) -> f64 {
        4.0 * self.knot_spacing()
    }

    /// Position (in `[0, period)`) where function `i` peaks.
    pub fn center(&self, i: usize) -> f64 {
        ((i as f64 + 2.0) * self.knot_spacing()).rem_euclid(self.period as f64)
    }

    /// Value of function `i` (zero-based) at a real-valued time.
    pub fn eval_continuous(&self, i: usize, t: f64) -> f64 {
        let k = self.count as f64;
        let u = t.rem_euclid(self.period as f64) / self.knot_spacing();
        // shift into function i's local coordinate, wrapping modulo k
        let local = (u - i as f64).rem_euclid(k);
        cardinal_cubic(local)
    }

    /// Value of function `i` (zero-based) at an integer step.
    pub fn eval(&self, i: usize, t: i64) -> f64 {
        let phase = t.rem_euclid(self.period as i64) as usize;
        self.table[phase * self.count + i]
    }

    /// All `count` values at step `t`; with `drop_first` the first function
    /// is omitted and `count − 1` values are returned.
    pub fn eval_row(&self, t: i64, drop_first: bool) -> &[f64] {
        let phase = t.rem_euclid(self.period as i64) as usize;
        let row = &self.table[phase * self.count..(phase + 1) * self.count];
        if drop_first {
            &row[1..]
        } else {
            row
        }
    }

    /// Writes `t, f_1, …, f_k` for one full period, optionally after a `#`
    /// comment line.
    pub fn write_csv<W: Write>(&self, mut sink: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(sink, "# {c}")?;
        }
        let mut writer = csv::Writer::from_writer(sink);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.count).map(|i| format!("f_{i}")));
        writer.write_record(&header)?;
        for t in 0..self.period as i64 {
            let mut rec = vec![t.to_string()];
            rec.extend(self.eval_row(t, false).iter().map(|v| v.to_string()));
            writer.write_record(&rec)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Outer product of the two dropped-first rows, flattened with the first
/// basis index varying slowest. Length `(k₁−1)(k₂−1)`.
pub fn eval_interaction_row(
    first: &PeriodicSplineBasis,
    second: &PeriodicSplineBasis,
    t: i64,
) -> Vec<f64> {
    let a = first.eval_row(t, true);
    let b = second.eval_row(t, true);
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x * y))
        .collect()
}

pub fn make_basis(period: usize, count: usize) -> Result<PeriodicSplineBasis> {
    PeriodicSplineBasis::new(period, count)
}
