use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::DEFAULT_PEAKS;

pub const STATUS_OK: &str = "ok";

/// One grid point and repetition of a sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultRow {
    pub run_id: String,
    pub task: String,
    pub config: String,
    pub amplitude: Option<f64>,
    pub frequency: Option<f64>,
    pub order: Option<usize>,
    /// grams
    pub mass: Option<f64>,
    pub variant: String,
    pub repetition: usize,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
    pub nmse: Option<f64>,
    pub baseline_nmse: Option<f64>,
    pub psi: Option<f64>,
    pub occupancy: Vec<f64>,
    pub mse: Option<f64>,
    pub avg_ci: Option<f64>,
    pub avg_ci_normalized: Option<f64>,
    /// grams
    pub estimate: Option<f64>,
    pub orientation: Option<String>,
    pub predicted_orientation: Option<String>,
}

fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(&y),
    }
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    pub fn key_cmp(&self, other: &Self) -> Ordering {
        self.task
            .cmp(&other.task)
            .then_with(|| self.config.cmp(&other.config))
            .then_with(|| cmp_opt(self.amplitude, other.amplitude))
            .then_with(|| cmp_opt(self.frequency, other.frequency))
            .then_with(|| self.order.cmp(&other.order))
            .then_with(|| cmp_opt(self.mass, other.mass))
            .then_with(|| self.variant.cmp(&other.variant))
            .then_with(|| self.repetition.cmp(&other.repetition))
    }

    pub fn failed(mut self, reason: impl std::fmt::Display) -> Self {
        self.status = format!("failed: {reason}");
        self
    }
}

pub const COLUMNS: [&str; 19] = [
    "run_id",
    "task",
    "config",
    "amplitude",
    "frequency",
    "order",
    "mass",
    "variant",
    "repetition",
    "status",
    "nmse",
    "baseline_nmse",
    "psi",
    "mse",
    "avg_ci",
    "avg_ci_normalized",
    "estimate",
    "orientation",
    "predicted_orientation",
];

fn header() -> Vec<String> {
    let mut h: Vec<String> = COLUMNS[..13].iter().map(|s| s.to_string()).collect();
    h.extend((1..=DEFAULT_PEAKS).map(|i| format!("occ_{i}")));
    h.extend(COLUMNS[13..].iter().map(|s| s.to_string()));
    h
}

fn fmt_opt<V: ToString>(v: &Option<V>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn parse_opt<V: std::str::FromStr>(text: &str, row: usize, column: usize) -> Result<Option<V>> {
    if text.is_empty() {
        return Ok(None);
    }
    text.parse().map(Some).map_err(|_| Error::ParseValue {
        row,
        column,
        text: text.to_string(),
    })
}

/// Rows of a sweep, kept sorted by key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(mut rows: Vec<ResultRow>) -> Self {
        rows.sort_by(ResultRow::key_cmp);
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn failures(&self) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| !r.is_ok()).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(header())?;
        for r in &self.rows {
            let mut rec = vec![
                r.run_id.clone(),
                r.task.clone(),
                r.config.clone(),
                fmt_opt(&r.amplitude),
                fmt_opt(&r.frequency),
                fmt_opt(&r.order),
                fmt_opt(&r.mass),
                r.variant.clone(),
                r.repetition.to_string(),
                r.status.clone(),
                fmt_opt(&r.nmse),
                fmt_opt(&r.baseline_nmse),
                fmt_opt(&r.psi),
            ];
            rec.extend((0..DEFAULT_PEAKS).map(|i| fmt_opt(&r.occupancy.get(i))));
            rec.extend([
                fmt_opt(&r.mse),
                fmt_opt(&r.avg_ci),
                fmt_opt(&r.avg_ci_normalized),
                fmt_opt(&r.estimate),
                fmt_opt(&r.orientation),
                fmt_opt(&r.predicted_orientation),
            ]);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let expected = header();
        let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if found != expected {
            return Err(Error::MalformedHeader(format!(
                "expected `{}`",
                expected.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = k + 1;
            if rec.len() != expected.len() {
                return Err(Error::RowLength {
                    row,
                    expected: expected.len(),
                    found: rec.len(),
                });
            }
            let f = |c: usize| rec[c].to_string();
            let occ_start = 13;
            let mut occupancy = Vec::new();
            for c in occ_start..occ_start + DEFAULT_PEAKS {
                if let Some(v) = parse_opt::<f64>(&rec[c], row, c)? {
                    occupancy.push(v);
                }
            }
            let tail = occ_start + DEFAULT_PEAKS;
            let opt_text = |c: usize| (!rec[c].is_empty()).then(|| rec[c].to_string());
            rows.push(ResultRow {
                run_id: f(0),
                task: f(1),
                config: f(2),
                amplitude: parse_opt(&rec[3], row, 3)?,
                frequency: parse_opt(&rec[4], row, 4)?,
                order: parse_opt(&rec[5], row, 5)?,
                mass: parse_opt(&rec[6], row, 6)?,
                variant: f(7),
                repetition: parse_opt(&rec[8], row, 8)?.ok_or(Error::ParseValue {
                    row,
                    column: 8,
                    text: String::new(),
                })?,
                status: f(9),
                nmse: parse_opt(&rec[10], row, 10)?,
                baseline_nmse: parse_opt(&rec[11], row, 11)?,
                psi: parse_opt(&rec[12], row, 12)?,
                occupancy,
                mse: parse_opt(&rec[tail], row, tail)?,
                avg_ci: parse_opt(&rec[tail + 1], row, tail + 1)?,
                avg_ci_normalized: parse_opt(&rec[tail + 2], row, tail + 2)?,
                estimate: parse_opt(&rec[tail + 3], row, tail + 3)?,
                orientation: opt_text(tail + 4),
                predicted_orientation: opt_text(tail + 5),
            });
        }
        Ok(Self::new(rows))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Repetition-averaged values of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub task: String,
    pub config: String,
    pub amplitude: Option<f64>,
    pub frequency: Option<f64>,
    pub order: Option<usize>,
    pub mass: Option<f64>,
    pub variant: String,
    pub ok: usize,
    pub failed: usize,
    pub mean_nmse: Option<f64>,
    pub mean_baseline_nmse: Option<f64>,
    pub mean_psi: Option<f64>,
    pub mean_mse: Option<f64>,
    pub mean_avg_ci_normalized: Option<f64>,
    pub mean_abs_error: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Averages every metric over the successful repetitions of each cell.
pub fn summarize(table: &ResultTable) -> Vec<CellSummary> {
    let mut groups: Vec<(ResultRow, Vec<&ResultRow>)> = Vec::new();
    for r in &table.rows {
        let same_cell = |g: &ResultRow| {
            let mut a = g.clone();
            a.repetition = r.repetition;
            a.key_cmp(r) == Ordering::Equal
        };
        match groups.last_mut() {
            Some((head, members)) if same_cell(head) => members.push(r),
            _ => groups.push((r.clone(), vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(head, members)| {
            let ok: Vec<&&ResultRow> = members.iter().filter(|r| r.is_ok()).collect();
            CellSummary {
                task: head.task,
                config: head.config,
                amplitude: head.amplitude,
                frequency: head.frequency,
                order: head.order,
                mass: head.mass,
                variant: head.variant,
                ok: ok.len(),
                failed: members.len() - ok.len(),
                mean_nmse: mean_of(ok.iter().map(|r| r.nmse)),
                mean_baseline_nmse: mean_of(ok.iter().map(|r| r.baseline_nmse)),
                mean_psi: mean_of(ok.iter().map(|r| r.psi)),
                mean_mse: mean_of(ok.iter().map(|r| r.mse)),
                mean_avg_ci_normalized: mean_of(ok.iter().map(|r| r.avg_ci_normalized)),
                mean_abs_error: mean_of(
                    ok.iter()
                        .map(|r| r.estimate.zip(r.mass).map(|(e, m)| (e - m).abs())),
                ),
            }
        })
        .collect()
}

/// Best configuration of one (amplitude, order) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalCell {
    pub amplitude: f64,
    pub order: usize,
    pub best_config: String,
    pub best_nmse: f64,
    pub baseline_config: String,
    pub baseline_nmse: f64,
    /// `100 (NMSE_base - NMSE_best) / NMSE_base`
    pub reduction_percent: f64,
}

/// Per (amplitude, order) cell, the configuration with the lowest mean NMSE
/// and its improvement over `baseline_config`.
pub fn optimal_config_matrix(table: &ResultTable, baseline_config: &str) -> Result<Vec<OptimalCell>> {
    // (amplitude bits, order) -> config -> mean nmse
    let mut cells: BTreeMap<(u64, usize), BTreeMap<String, f64>> = BTreeMap::new();
    for s in summarize(table) {
        let (Some(a), Some(n), Some(nmse)) = (s.amplitude, s.order, s.mean_nmse) else {
            continue;
        };
        cells
            .entry((a.to_bits(), n))
            .or_default()
            .insert(s.config, nmse);
    }
    let mut out = Vec::with_capacity(cells.len());
    for ((bits, order), configs) in cells {
        let amplitude = f64::from_bits(bits);
        let &baseline_nmse = configs.get(baseline_config).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "baseline `{baseline_config}` has no successful rows at amplitude {amplitude}, order {order}"
            ))
        })?;
        let (best_config, &best_nmse) = configs
            .iter()
            .min_by(|a, b| a.1.total_cmp(b.1).then_with(|| a.0.cmp(b.0)))
            .expect("cell holds the baseline");
        let reduction_percent = if baseline_nmse > 0.0 {
            100.0 * (baseline_nmse - best_nmse) / baseline_nmse
        } else {
            0.0
        };
        out.push(OptimalCell {
            amplitude,
            order,
            best_config: best_config.clone(),
            best_nmse,
            baseline_config: baseline_config.to_string(),
            baseline_nmse,
            reduction_percent,
        });
    }
    out.sort_by(|a, b| a.order.cmp(&b.order).then(a.amplitude.total_cmp(&b.amplitude)));
    Ok(out)
}

pub fn write_optimal_csv<W: Write>(cells: &[OptimalCell], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record([
        "amplitude",
        "order",
        "best_config",
        "best_nmse",
        "baseline_config",
        "baseline_nmse",
        "reduction_percent",
    ])?;
    for c in cells {
        w.write_record([
            c.amplitude.to_string(),
            c.order.to_string(),
            c.best_config.clone(),
            c.best_nmse.to_string(),
            c.baseline_config.clone(),
            c.baseline_nmse.to_string(),
            c.reduction_percent.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(cells: &[CellSummary], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record([
        "task",
        "config",
        "amplitude",
        "frequency",
        "order",
        "mass",
        "variant",
        "ok",
        "failed",
        "mean_nmse",
        "mean_baseline_nmse",
        "mean_psi",
        "mean_mse",
        "mean_avg_ci_normalized",
        "mean_abs_error",
    ])?;
    for c in cells {
        w.write_record([
            c.task.clone(),
            c.config.clone(),
            fmt_opt(&c.amplitude),
            fmt_opt(&c.frequency),
            fmt_opt(&c.order),
            fmt_opt(&c.mass),
            c.variant.clone(),
            c.ok.to_string(),
            c.failed.to_string(),
            fmt_opt(&c.mean_nmse),
            fmt_opt(&c.mean_baseline_nmse),
            fmt_opt(&c.mean_psi),
            fmt_opt(&c.mean_mse),
            fmt_opt(&c.mean_avg_ci_normalized),
            fmt_opt(&c.mean_abs_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes any of the CSV reports to `path`.
pub fn export_csv(report: &Report<'_>, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    match report {
        Report::Table(t) => t.write_csv(&mut buf)?,
        Report::Optimal(c) => write_optimal_csv(c, &mut buf)?,
        Report::Summary(s) => write_summary_csv(s, &mut buf)?,
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub enum Report<'a> {
    Table(&'a ResultTable),
    Optimal(&'a [OptimalCell]),
    Summary(&'a [CellSummary]),
}
