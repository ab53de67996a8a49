use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Supported on-disk layouts for trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrajectoryFormat {
    /// `time,<node_0>,<node_1>,...` header followed by one row per sample.
    #[default]
    Csv,
}

/// Nodal displacement matrix, one row per node and one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory<T> {
    times: Vec<T>,
    rows: Vec<Vec<T>>,
    labels: Vec<String>,
}

/// Spacing slack at time `t`: relative to the step, plus rounding of `t` itself.
fn uniform_tolerance<T: Scalar>(step: T, t: T) -> T {
    step * T::lit(1e-6).max(T::epsilon() * T::lit(64.0)) + t.abs() * T::epsilon() * T::lit(4.0)
}

impl<T: Scalar> StateTrajectory<T> {
    pub fn new(times: Vec<T>, rows: Vec<Vec<T>>, labels: Vec<String>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                what: "node labels",
                expected: rows.len(),
                found: labels.len(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != times.len() {
                return Err(Error::DimensionMismatch {
                    what: "samples per node",
                    expected: times.len(),
                    found: row.len(),
                });
            }
            if let Some(k) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    row: k,
                    column: i + 1,
                });
            }
        }
        if let Some(k) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFiniteValue { row: k, column: 0 });
        }
        for k in 1..times.len() {
            if times[k] <= times[k - 1] {
                return Err(Error::NonMonotonicTime { row: k });
            }
        }
        if times.len() > 2 {
            let step = times[1] - times[0];
            for k in 2..times.len() {
                if ((times[k] - times[k - 1]) - step).abs() > uniform_tolerance(step, times[k]) {
                    return Err(Error::NonUniformTime { row: k });
                }
            }
        }
        Ok(Self {
            times,
            rows,
            labels,
        })
    }

    /// Builds a trajectory with times `k / sample_rate` and labels `node_i`.
    pub fn from_rows(rows: Vec<Vec<T>>, sample_rate: T) -> Result<Self> {
        let len = rows.first().map_or(0, Vec::len);
        let times = (0..len)
            .map(|k| T::from_usize_lossy(k) / sample_rate)
            .collect();
        let labels = (0..rows.len()).map(|i| format!("node_{i}")).collect();
        Self::new(times, rows, labels)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn row(&self, node: usize) -> &[T] {
        &self.rows[node]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn n_samples(&self) -> usize {
        self.times.len()
    }

    /// Sampling rate inferred from the first interval.
    pub fn sample_rate(&self) -> Option<T> {
        (self.times.len() >= 2).then(|| T::one() / (self.times[1] - self.times[0]))
    }

    /// States of every node at sample `k`.
    pub fn column(&self, k: usize) -> Vec<T> {
        self.rows.iter().map(|r| r[k]).collect()
    }

    /// Samples `start..start + len`, keeping original timestamps.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        let end = start + len;
        if end > self.n_samples() {
            return Err(Error::DimensionMismatch {
                what: "window end",
                expected: self.n_samples(),
                found: end,
            });
        }
        Ok(Self {
            times: self.times[start..end].to_vec(),
            rows: self.rows.iter().map(|r| r[start..end].to_vec()).collect(),
            labels: self.labels.clone(),
        })
    }

    pub fn select_nodes(&self, nodes: &[usize]) -> Result<Self> {
        if let Some(&bad) = nodes.iter().find(|&&i| i >= self.n_nodes()) {
            return Err(Error::DimensionMismatch {
                what: "node index",
                expected: self.n_nodes(),
                found: bad,
            });
        }
        Ok(Self {
            times: self.times.clone(),
            rows: nodes.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: nodes.iter().map(|&i| self.labels[i].clone()).collect(),
        })
    }

    /// Joins trajectories end to end; the result is re-timed from zero at `sample_rate`.
    pub fn concat(parts: &[Self], sample_rate: T) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidSignal("nothing to concatenate".into()))?;
        let n = first.n_nodes();
        let mut rows = vec![Vec::new(); n];
        for part in parts {
            if part.n_nodes() != n {
                return Err(Error::DimensionMismatch {
                    what: "nodes in concatenated trajectory",
                    expected: n,
                    found: part.n_nodes(),
                });
            }
            for (dst, src) in rows.iter_mut().zip(&part.rows) {
                dst.extend_from_slice(src);
            }
        }
        let len = rows[0].len();
        let times = (0..len)
            .map(|k| T::from_usize_lossy(k) / sample_rate)
            .collect();
        Self::new(times, rows, first.labels.clone())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            times: self.times.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&v| v * factor).collect())
                .collect(),
            labels: self.labels.clone(),
        }
    }

    /// Adds independent zero-mean Gaussian noise of standard deviation `sigma` to every value.
    pub fn with_tracking_noise(&self, sigma: T, seed: u64) -> Self {
        if sigma <= T::zero() {
            return self.clone();
        }
        let normal = Normal::new(0.0, sigma.as_f64()).expect("positive finite sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            times: self.times.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|&v| v + T::lit(normal.sample(&mut rng)))
                        .collect()
                })
                .collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = Vec::with_capacity(self.labels.len() + 1);
        header.push("time".to_string());
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for k in 0..self.n_samples() {
            record.clear();
            record.push(self.times[k].to_string());
            record.extend(self.rows.iter().map(|r| r[k].to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = r.records();
        let header = records
            .next()
            .ok_or_else(|| Error::MalformedHeader("file is empty".into()))??;
        if header.get(0).map(str::trim) != Some("time") {
            return Err(Error::MalformedHeader(
                "first column must be named `time`".into(),
            ));
        }
        if header.len() < 2 {
            return Err(Error::MalformedHeader("no node columns".into()));
        }
        let labels: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        if labels.iter().any(String::is_empty) {
            return Err(Error::MalformedHeader("empty node label".into()));
        }
        let width = header.len();
        let mut times = Vec::new();
        let mut rows = vec![Vec::new(); labels.len()];
        for (k, record) in records.enumerate() {
            let record = record?;
            let row = k + 1;
            if record.len() != width {
                return Err(Error::RowLength {
                    row,
                    expected: width,
                    found: record.len(),
                });
            }
            for (column, text) in record.iter().enumerate() {
                let value: T = text.trim().parse().map_err(|_| Error::ParseValue {
                    row,
                    column,
                    text: text.to_string(),
                })?;
                if !value.is_finite() {
                    return Err(Error::NonFiniteValue { row, column });
                }
                if column == 0 {
                    times.push(value);
                } else {
                    rows[column - 1].push(value);
                }
            }
        }
        // Row numbers in errors count the header as row 0.
        Self::new(times, rows, labels).map_err(|e| match e {
            Error::NonMonotonicTime { row } => Error::NonMonotonicTime { row: row + 1 },
            Error::NonUniformTime { row } => Error::NonUniformTime { row: row + 1 },
            other => other,
        })
    }
}

pub fn import_trajectory<T: Scalar>(
    path: impl AsRef<Path>,
    format: TrajectoryFormat,
) -> Result<StateTrajectory<T>> {
    match format {
        TrajectoryFormat::Csv => {
            let file = std::fs::File::open(path)?;
            StateTrajectory::read_csv(std::io::BufReader::new(file))
        }
    }
}
