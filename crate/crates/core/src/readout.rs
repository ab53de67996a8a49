//! Affine readout `O(t) = w0 + Σ w_i s_i(t)` trained by least squares.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::substrate::StateTrajectory;
use crate::tasks::SampledSignal;

/// Relative singular-value cutoff of the pseudo-inverse.
pub const DEFAULT_RCOND: f64 = 1e-10;

/// Washout / train / test lengths in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SplitSpec {
    pub washout: usize,
    pub train: usize,
    pub test: usize,
}

impl Default for SplitSpec {
    /// 10 s washout, 5 s train, 5 s test at 60 Hz.
    fn default() -> Self {
        Self {
            washout: 600,
            train: 300,
            test: 300,
        }
    }
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.washout + self.train + self.test
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        if self.train == 0 {
            return Err(Error::InvalidConfig("train window must be non-empty".into()));
        }
        if self.total() > len {
            return Err(Error::DimensionMismatch {
                what: "split length",
                expected: len,
                found: self.total(),
            });
        }
        Ok(())
    }
}

/// Training settings of the readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutOptions<T> {
    /// Tikhonov penalty on the node weights (the bias is never penalized).
    pub ridge: T,
    pub rcond: T,
}

impl<T: Scalar> Default for ReadoutOptions<T> {
    fn default() -> Self {
        Self {
            ridge: T::zero(),
            rcond: T::lit(DEFAULT_RCOND),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutWeights<T> {
    pub bias: T,
    pub weights: Vec<T>,
    pub ridge: T,
    pub provenance: String,
    /// Set when the unregularized design matrix lost rank and the minimum-norm solution was used.
    pub rank_deficient: bool,
}

impl<T: Scalar> ReadoutWeights<T> {
    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn with_provenance(mut self, label: impl Into<String>) -> Self {
        self.provenance = label.into();
        self
    }

    /// Bias first, then node weights.
    pub fn coefficients(&self) -> Vec<T> {
        std::iter::once(self.bias)
            .chain(self.weights.iter().copied())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["index", "weight"])?;
        for (i, c) in self.coefficients().iter().enumerate() {
            w.write_record([i.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().map(str::trim).ne(["index", "weight"]) {
            return Err(Error::MalformedHeader("expected `index,weight`".into()));
        }
        let mut coefficients = Vec::new();
        for (k, record) in r.records().enumerate() {
            let record = record?;
            let row = k + 1;
            if record.len() != 2 {
                return Err(Error::RowLength {
                    row,
                    expected: 2,
                    found: record.len(),
                });
            }
            let index: usize = record[0].trim().parse().map_err(|_| Error::ParseValue {
                row,
                column: 0,
                text: record[0].to_string(),
            })?;
            if index != k {
                return Err(Error::ParseValue {
                    row,
                    column: 0,
                    text: record[0].to_string(),
                });
            }
            let value: T = record[1].trim().parse().map_err(|_| Error::ParseValue {
                row,
                column: 1,
                text: record[1].to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteValue { row, column: 1 });
            }
            coefficients.push(value);
        }
        let (&bias, weights) = coefficients
            .split_first()
            .ok_or_else(|| Error::InvalidConfig("weights file has no bias".into()))?;
        Ok(Self {
            bias,
            weights: weights.to_vec(),
            ridge: T::zero(),
            provenance: String::new(),
            rank_deficient: false,
        })
    }
}

/// Fits `target ≈ w0 + Σ w_i rows[i]` over all samples.
pub fn fit_affine<T: Scalar>(
    rows: &[Vec<T>],
    target: &[T],
    options: ReadoutOptions<T>,
) -> Result<ReadoutWeights<T>> {
    let samples = target.len();
    for row in rows {
        if row.len() != samples {
            return Err(Error::DimensionMismatch {
                what: "target length",
                expected: row.len(),
                found: samples,
            });
        }
    }
    if samples == 0 {
        return Err(Error::InvalidSignal("no training samples".into()));
    }
    if !(options.ridge >= T::zero()) || !options.ridge.is_finite() {
        return Err(Error::InvalidConfig("ridge must be a finite non-negative number".into()));
    }
    let cols = rows.len() + 1;
    let penalized = options.ridge > T::zero();
    let extra = if penalized { rows.len() } else { 0 };
    let total_rows = samples + extra;
    let mut design = Vec::with_capacity(total_rows * cols);
    for k in 0..samples {
        design.push(T::one());
        design.extend(rows.iter().map(|r| r[k]));
    }
    let mut rhs = target.to_vec();
    if penalized {
        let root = options.ridge.sqrt();
        for j in 0..rows.len() {
            design.push(T::zero());
            design.extend((0..rows.len()).map(|i| if i == j { root } else { T::zero() }));
            rhs.push(T::zero());
        }
    }
    let solution = T::solve_least_squares(&design, total_rows, cols, &rhs, options.rcond);
    let coefficients = solution.coefficients;
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidSignal("readout solution is not finite".into()));
    }
    Ok(ReadoutWeights {
        bias: coefficients[0],
        weights: coefficients[1..].to_vec(),
        ridge: options.ridge,
        provenance: String::new(),
        rank_deficient: solution.rank < cols,
    })
}

pub fn train_readout<T: Scalar>(
    states: &StateTrajectory<T>,
    target: &[T],
    ridge: T,
) -> Result<ReadoutWeights<T>> {
    train_readout_with(
        states,
        target,
        ReadoutOptions {
            ridge,
            ..ReadoutOptions::default()
        },
    )
}

pub fn train_readout_with<T: Scalar>(
    states: &StateTrajectory<T>,
    target: &[T],
    options: ReadoutOptions<T>,
) -> Result<ReadoutWeights<T>> {
    if target.len() != states.n_samples() {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: states.n_samples(),
            found: target.len(),
        });
    }
    fit_affine(states.rows(), target, options)
}

fn apply<T: Scalar>(weights: &ReadoutWeights<T>, rows: &[Vec<T>], len: usize) -> Result<Vec<T>> {
    if rows.len() != weights.n_nodes() {
        return Err(Error::DimensionMismatch {
            what: "readout nodes",
            expected: weights.n_nodes(),
            found: rows.len(),
        });
    }
    let mut out = vec![weights.bias; len];
    for (row, &w) in rows.iter().zip(&weights.weights) {
        for (o, &s) in out.iter_mut().zip(row) {
            *o += w * s;
        }
    }
    Ok(out)
}

pub fn predict<T: Scalar>(weights: &ReadoutWeights<T>, states: &StateTrajectory<T>) -> Result<Vec<T>> {
    apply(weights, states.rows(), states.n_samples())
}

/// Applies a readout to the channels of a signal treated as node states.
pub fn predict_signal<T: Scalar>(weights: &ReadoutWeights<T>, input: &SampledSignal<T>) -> Result<Vec<T>> {
    apply(weights, input.channels(), input.len())
}

/// States and target restricted to one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair<T> {
    pub states: StateTrajectory<T>,
    pub target: Vec<T>,
}

/// Cuts washout, train and test windows in order; the washout is dropped.
pub fn split<T: Scalar>(
    trajectory: &StateTrajectory<T>,
    target: &[T],
    spec: SplitSpec,
) -> Result<(WindowPair<T>, WindowPair<T>)> {
    if target.len() != trajectory.n_samples() {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: trajectory.n_samples(),
            found: target.len(),
        });
    }
    spec.validate(trajectory.n_samples())?;
    let train_start = spec.washout;
    let test_start = spec.washout + spec.train;
    let train = WindowPair {
        states: trajectory.window(train_start, spec.train)?,
        target: target[train_start..test_start].to_vec(),
    };
    let test = WindowPair {
        states: trajectory.window(test_start, spec.test)?,
        target: target[test_start..test_start + spec.test].to_vec(),
    };
    Ok((train, test))
}

/// One-feature regression `y ≈ w0 + w1 u(t)` on the first input channel.
pub fn baseline_input_regression<T: Scalar>(
    input: &SampledSignal<T>,
    target: &[T],
) -> Result<ReadoutWeights<T>> {
    if input.len() != target.len() {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: input.len(),
            found: target.len(),
        });
    }
    let rows = vec![input.channel(0).to_vec()];
    Ok(fit_affine(&rows, target, ReadoutOptions::default())?.with_provenance("baseline"))
}
