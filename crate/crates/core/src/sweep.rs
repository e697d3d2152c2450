//! Bound sweeps over one distribution or profile parameter, with CSV/JSON
//! result files and a gnuplot script for plotting them.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fim::{crib_model, CribSetup, ModelKind};
use crate::ggd::GgdParams;

/// Version of the JSON result layout. The CSV layout is fixed by its header.
pub const SCHEMA_VERSION: u32 = 1;

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 13] =
    ["model", "axis", "value", "d", "N", "T", "alpha", "gamma", "tau", "isr", "isr_db", "identifiable", "rcond"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Alpha,
    Gamma,
    Tau,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Alpha => "alpha",
            Axis::Gamma => "gamma",
            Axis::Tau => "tau",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alpha" => Ok(Axis::Alpha),
            "gamma" => Ok(Axis::Gamma),
            "tau" => Ok(Axis::Tau),
            other => Err(Error::InvalidConfig(format!("axis: unknown axis '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

/// `points` values from `min` to `max` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

/// Rounds to 12 significant digits so grid values print the same way they
/// would be typed.
fn tidy(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    format!("{v:.11e}").parse().expect("formatted float parses")
}

impl Grid {
    pub fn linear(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points, spacing: Spacing::Linear }
    }

    pub fn log(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points, spacing: Spacing::Log }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("grid: {msg}")));
        if self.points == 0 {
            return bad("needs at least one point".into());
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return bad(format!("invalid range {}..{}", self.min, self.max));
        }
        if self.points == 1 && self.min != self.max {
            return bad("a single point needs min == max".into());
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return bad("log spacing needs a positive minimum".into());
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![tidy(self.min)];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let f = i as f64 / last;
                let v = match self.spacing {
                    Spacing::Linear => self.min + f * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + f * (self.max / self.min).ln()).exp(),
                };
                tidy(v)
            })
            .collect()
    }
}

/// Parses `min:max:points` with an optional `:lin` or `:log` suffix.
impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidConfig(format!("grid: expected min:max:points[:lin|log], got '{s}'"));
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let min = parts[0].trim().parse().map_err(|_| bad())?;
        let max = parts[1].trim().parse().map_err(|_| bad())?;
        let points = parts[2].trim().parse().map_err(|_| bad())?;
        let spacing = match parts.get(3).map(|p| p.trim()) {
            None | Some("lin") | Some("linear") => Spacing::Linear,
            Some("log") => Spacing::Log,
            Some(_) => return Err(bad()),
        };
        let g = Grid { min, max, points, spacing };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Linear,
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ScheduleKind::Linear),
            other => Err(Error::InvalidConfig(format!("schedule: unknown schedule '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Chart1,
    Chart2,
    Chart3,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "chart1" => Ok(Preset::Chart1),
            "chart2" => Ok(Preset::Chart2),
            "chart3" => Ok(Preset::Chart3),
            other => Err(Error::InvalidConfig(format!("preset: unknown preset '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub blocks: usize,
    pub schedule: ScheduleKind,
    /// Fixed values; the swept one is ignored.
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub axis: Axis,
    pub grid: Grid,
    pub models: Vec<ModelKind>,
}

impl SweepSpec {
    /// Chart presets: 5 sensors, 5000 samples in 10 blocks.
    /// - `Chart1`: alpha on `[0.25, 4]`, log-spaced, 21 points (alpha = 1 is
    ///   the middle point); gamma = 0, tau = 0.
    /// - `Chart2`: gamma on `[0, 0.95]`, 20 points; alpha = 1, tau = 0.
    /// - `Chart3`: tau on `[0, 1]`, 21 points; alpha = 1, gamma = 0.
    pub fn preset(p: Preset) -> Self {
        let (axis, grid) = match p {
            Preset::Chart1 => (Axis::Alpha, Grid::log(0.25, 4.0, 21)),
            Preset::Chart2 => (Axis::Gamma, Grid::linear(0.0, 0.95, 20)),
            Preset::Chart3 => (Axis::Tau, Grid::linear(0.0, 1.0, 21)),
        };
        Self {
            d: 5,
            n: 5000,
            blocks: 10,
            schedule: ScheduleKind::Linear,
            alpha: 1.0,
            gamma: 0.0,
            tau: 0.0,
            axis,
            grid,
            models: ModelKind::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.d < 2 {
            return bad(format!("d: need at least 2 sensors, got {}", self.d));
        }
        if self.blocks == 0 {
            return bad("T: need at least one block".into());
        }
        if self.n == 0 || self.n % self.blocks != 0 {
            return bad(format!("N: {} is not a positive multiple of T = {}", self.n, self.blocks));
        }
        if self.models.is_empty() {
            return bad("models: empty model list".into());
        }
        self.grid.validate()?;
        let field = |axis: Axis| if self.axis == axis { "grid" } else { axis.name() };
        for v in self.grid.values() {
            let (alpha, gamma, tau) = self.point(v);
            if !(alpha.is_finite() && alpha > 0.0) {
                return bad(format!("{}: alpha must be positive, got {alpha}", field(Axis::Alpha)));
            }
            if !(0.0..1.0).contains(&gamma) {
                return bad(format!("{}: gamma must lie in [0, 1), got {gamma}", field(Axis::Gamma)));
            }
            if !(0.0..=1.0).contains(&tau) {
                return bad(format!("{}: tau must lie in [0, 1], got {tau}", field(Axis::Tau)));
            }
        }
        Ok(())
    }

    /// `(alpha, gamma, tau)` at a value of the swept axis.
    pub fn point(&self, v: f64) -> (f64, f64, f64) {
        match self.axis {
            Axis::Alpha => (v, self.gamma, self.tau),
            Axis::Gamma => (self.alpha, v, self.tau),
            Axis::Tau => (self.alpha, self.gamma, v),
        }
    }
}

/// One model at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: ModelKind,
    pub axis: Axis,
    pub value: f64,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub blocks: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub isr: f64,
    pub isr_db: f64,
    pub identifiable: bool,
    pub rcond: f64,
}

/// Evaluates every model at every grid point. Rows are ordered by grid point,
/// then by the order of `spec.models`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let rows: Vec<Vec<ResultRow>> = spec
        .grid
        .values()
        .into_par_iter()
        .map(|v| {
            let (alpha, gamma, tau) = spec.point(v);
            let setup = CribSetup::linear(spec.d, spec.n, spec.blocks, GgdParams::new(alpha, gamma)?, tau)?;
            spec.models
                .iter()
                .map(|&m| {
                    let r = crib_model(m, &setup)?;
                    Ok(ResultRow {
                        model: m,
                        axis: spec.axis,
                        value: v,
                        d: spec.d,
                        n: spec.n,
                        blocks: spec.blocks,
                        alpha,
                        gamma,
                        tau,
                        isr: r.isr,
                        isr_db: r.isr_db,
                        identifiable: r.identifiable,
                        rcond: r.rcond,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Infinite bounds are written as `inf`.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Format(format!("unexpected CSV header {header:?}")));
    }
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// JSON row: non-finite bounds become `null`.
#[derive(Serialize, Deserialize)]
struct JsonRow {
    model: ModelKind,
    axis: Axis,
    value: f64,
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    blocks: usize,
    alpha: f64,
    gamma: f64,
    tau: f64,
    isr: Option<f64>,
    isr_db: Option<f64>,
    identifiable: bool,
    rcond: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonFile {
    schema_version: u32,
    rows: Vec<JsonRow>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn write_json<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    let file = JsonFile {
        schema_version: SCHEMA_VERSION,
        rows: rows
            .iter()
            .map(|r| JsonRow {
                model: r.model,
                axis: r.axis,
                value: r.value,
                d: r.d,
                n: r.n,
                blocks: r.blocks,
                alpha: r.alpha,
                gamma: r.gamma,
                tau: r.tau,
                isr: finite(r.isr),
                isr_db: finite(r.isr_db),
                identifiable: r.identifiable,
                rcond: r.rcond,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut out, &file)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let file: JsonFile = serde_json::from_reader(input)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!("unsupported schema version {}", file.schema_version)));
    }
    Ok(file
        .rows
        .into_iter()
        .map(|r| ResultRow {
            model: r.model,
            axis: r.axis,
            value: r.value,
            d: r.d,
            n: r.n,
            blocks: r.blocks,
            alpha: r.alpha,
            gamma: r.gamma,
            tau: r.tau,
            isr: r.isr.unwrap_or(f64::INFINITY),
            isr_db: r.isr_db.unwrap_or(f64::INFINITY),
            identifiable: r.identifiable,
            rcond: r.rcond,
        })
        .collect())
}

/// Gnuplot script plotting `isr_db` against the swept value, one curve per
/// model, from the CSV at `csv_path` (relative to the script). Unidentifiable
/// points are left out of the curves.
pub fn gnuplot_script(spec: &SweepSpec, csv_path: &str) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str(&format!("set xlabel '{}'\n", spec.axis));
    s.push_str("set ylabel 'ISR bound [dB]'\n");
    s.push_str("set key top right\nset grid\n");
    if spec.grid.spacing == Spacing::Log {
        s.push_str("set logscale x\n");
    }
    let curves: Vec<String> = spec
        .models
        .iter()
        .map(|m| {
            format!(
                "'{csv_path}' every ::1 using (strcol(1) eq '{m}' && strcol(11) ne 'inf' ? $3 : 1/0):11 \
                 with linespoints title '{m}'"
            )
        })
        .collect();
    s.push_str("plot ");
    s.push_str(&curves.join(", \\\n     "));
    s.push('\n');
    s
}
