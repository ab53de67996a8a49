//! Payload weight estimation, input-command reconstruction and two-stage
//! weight/orientation classification from recorded runs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::mse;
use crate::readout::{predict, train_readout, ReadoutWeights};
use crate::scalar::Scalar;
use crate::substrate::StateTrajectory;
use crate::tasks::SampledSignal;

/// Payload masses of the weight-estimation task, grams.
pub const PAYLOAD_MASSES: [f64; 5] = [0.0, 50.0, 90.0, 130.0, 170.0];

/// Items of the classification task, grams; the fourth is the eccentric hammer.
pub const ITEM_MASSES: [f64; 4] = [61.90, 100.64, 213.95, 161.25];

/// Weight band that routes an estimate to the orientation readout, grams.
pub const HAMMER_BAND: (f64, f64) = (140.0, 180.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Left,
    Front,
    Right,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [Orientation::Left, Orientation::Front, Orientation::Right];

    pub fn label(self) -> i8 {
        match self {
            Orientation::Left => -1,
            Orientation::Front => 0,
            Orientation::Right => 1,
        }
    }

    pub fn from_label(label: i8) -> Option<Self> {
        match label {
            -1 => Some(Orientation::Left),
            0 => Some(Orientation::Front),
            1 => Some(Orientation::Right),
            _ => None,
        }
    }

    /// Nearest label to `value`; midpoints go to `Front`.
    pub fn snap<T: Scalar>(value: T) -> Self {
        let half = T::lit(0.5);
        if value < -half {
            Orientation::Left
        } else if value > half {
            Orientation::Right
        } else {
            Orientation::Front
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Left => "left",
            Orientation::Front => "front",
            Orientation::Right => "right",
        })
    }
}

/// One recorded run with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRun<T> {
    pub trajectory: StateTrajectory<T>,
    /// grams
    pub payload_mass: T,
    pub orientation: Option<Orientation>,
    pub input: SampledSignal<T>,
    pub repetition: usize,
}

impl<T: Scalar> LabeledRun<T> {
    fn sample_rate(&self) -> Result<T> {
        self.trajectory
            .sample_rate()
            .ok_or_else(|| Error::InvalidSignal("run has fewer than two samples".into()))
    }
}

/// Time windows and regularization used by the estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions<T> {
    /// s discarded at the start of every run.
    pub washout: T,
    /// s of each run used for training and for evaluation.
    pub window: T,
    pub ridge: T,
}

impl<T: Scalar> Default for EstimatorOptions<T> {
    fn default() -> Self {
        Self {
            washout: T::lit(10.0),
            window: T::lit(5.0),
            ridge: T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorBundle<T> {
    pub weights: ReadoutWeights<T>,
    /// grams, sorted and distinct.
    pub training_masses: Vec<T>,
    /// s, evaluation window after the washout.
    pub window: T,
    /// s
    pub washout: T,
}

fn seconds_to_samples<T: Scalar>(seconds: T, rate: T) -> usize {
    (seconds * rate).round().to_usize().unwrap_or(0)
}

fn run_window<T: Scalar>(run: &LabeledRun<T>, washout: T, window: T) -> Result<StateTrajectory<T>> {
    let rate = run.sample_rate()?;
    let start = seconds_to_samples(washout, rate);
    let len = seconds_to_samples(window, rate);
    if len == 0 {
        return Err(Error::InvalidConfig("estimator window is shorter than one sample".into()));
    }
    run.trajectory.window(start, len)
}

/// Trains one readout over the concatenated windows of `runs`, each labeled by a constant.
pub fn train_on_runs<T: Scalar>(
    runs: &[&LabeledRun<T>],
    labels: &[T],
    options: EstimatorOptions<T>,
) -> Result<ReadoutWeights<T>> {
    if runs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "run labels",
            expected: runs.len(),
            found: labels.len(),
        });
    }
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidConfig("no training runs".into()))?;
    let rate = first.sample_rate()?;
    let mut parts = Vec::with_capacity(runs.len());
    let mut target = Vec::new();
    for (run, &label) in runs.iter().zip(labels) {
        if run.trajectory.n_nodes() != first.trajectory.n_nodes() {
            return Err(Error::DimensionMismatch {
                what: "nodes across runs",
                expected: first.trajectory.n_nodes(),
                found: run.trajectory.n_nodes(),
            });
        }
        let part = run_window(run, options.washout, options.window)?;
        target.extend(std::iter::repeat_n(label, part.n_samples()));
        parts.push(part);
    }
    let states = StateTrajectory::concat(&parts, rate)?;
    train_readout(&states, &target, options.ridge)
}

pub fn train_weight_estimator<T: Scalar>(
    runs: &[LabeledRun<T>],
    masses_used: &[T],
    segment: T,
) -> Result<EstimatorBundle<T>> {
    train_weight_estimator_with(
        runs,
        masses_used,
        EstimatorOptions {
            window: segment,
            ..EstimatorOptions::default()
        },
    )
}

/// Concatenates one segment per requested mass, in ascending mass order, and
/// fits a readout to the resulting staircase.
pub fn train_weight_estimator_with<T: Scalar>(
    runs: &[LabeledRun<T>],
    masses_used: &[T],
    options: EstimatorOptions<T>,
) -> Result<EstimatorBundle<T>> {
    if masses_used.is_empty() {
        return Err(Error::InvalidConfig("no training masses".into()));
    }
    let mut masses = masses_used.to_vec();
    masses.sort_by(|a, b| a.partial_cmp(b).expect("finite masses"));
    masses.dedup();
    let tol = T::lit(1e-9);
    let mut chosen = Vec::with_capacity(masses.len());
    for &m in &masses {
        let run = runs
            .iter()
            .find(|r| (r.payload_mass - m).abs() <= tol)
            .ok_or(Error::MissingMass(m.as_f64()))?;
        chosen.push(run);
    }
    let weights = train_on_runs(&chosen, &masses, options)?.with_provenance("payload weight");
    Ok(EstimatorBundle {
        weights,
        training_masses: masses,
        window: options.window,
        washout: options.washout,
    })
}

/// Time-mean of the readout output over the bundle's evaluation window.
pub fn mean_output<T: Scalar>(
    weights: &ReadoutWeights<T>,
    run: &LabeledRun<T>,
    washout: T,
    window: T,
) -> Result<T> {
    let states = run_window(run, washout, window)?;
    let out = predict(weights, &states)?;
    Ok(out.iter().copied().sum::<T>() / T::from_usize_lossy(out.len()))
}

/// grams
pub fn estimate_weight<T: Scalar>(bundle: &EstimatorBundle<T>, run: &LabeledRun<T>) -> Result<T> {
    mean_output(&bundle.weights, run, bundle.washout, bundle.window)
}

/// Per-channel reconstructions of the actuation command.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction<T> {
    pub weights: Vec<ReadoutWeights<T>>,
    /// Test-window command per channel, sampled at the trajectory times.
    pub targets: Vec<Vec<T>>,
    pub predictions: Vec<Vec<T>>,
    pub mse: Vec<T>,
    /// MSE of predicting each channel's test-window mean, for reference.
    pub mean_baseline_mse: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionOptions<T> {
    /// s
    pub train: T,
    /// s
    pub test: T,
    pub ridge: T,
}

impl<T: Scalar> Default for ReconstructionOptions<T> {
    fn default() -> Self {
        Self {
            train: T::lit(15.0),
            test: T::lit(15.0),
            ridge: T::zero(),
        }
    }
}

pub fn reconstruct_inputs<T: Scalar>(run: &LabeledRun<T>) -> Result<Reconstruction<T>> {
    reconstruct_inputs_with(run, ReconstructionOptions::default())
}

/// Trains one readout per input channel on the first `train` seconds and
/// evaluates it on the following `test` seconds.
pub fn reconstruct_inputs_with<T: Scalar>(
    run: &LabeledRun<T>,
    options: ReconstructionOptions<T>,
) -> Result<Reconstruction<T>> {
    if run.input.n_channels() != 3 {
        return Err(Error::DimensionMismatch {
            what: "command channels",
            expected: 3,
            found: run.input.n_channels(),
        });
    }
    let rate = run.sample_rate()?;
    let n_train = seconds_to_samples(options.train, rate);
    let n_test = seconds_to_samples(options.test, rate);
    if n_train == 0 || n_test == 0 || n_train + n_test > run.trajectory.n_samples() {
        return Err(Error::DimensionMismatch {
            what: "run samples for reconstruction",
            expected: n_train + n_test,
            found: run.trajectory.n_samples(),
        });
    }
    let train_states = run.trajectory.window(0, n_train)?;
    let test_states = run.trajectory.window(n_train, n_test)?;
    let times = run.trajectory.times();
    let mut out = Reconstruction {
        weights: Vec::with_capacity(3),
        targets: Vec::with_capacity(3),
        predictions: Vec::with_capacity(3),
        mse: Vec::with_capacity(3),
        mean_baseline_mse: Vec::with_capacity(3),
    };
    for c in 0..3 {
        let command: Vec<T> = times[..n_train + n_test]
            .iter()
            .map(|&t| run.input.interpolate(c, t))
            .collect();
        let w = train_readout(&train_states, &command[..n_train], options.ridge)?
            .with_provenance(format!("command channel {}", c + 1));
        let prediction = predict(&w, &test_states)?;
        let target = command[n_train..].to_vec();
        let m = target.iter().copied().sum::<T>() / T::from_usize_lossy(target.len());
        out.mse.push(mse(&target, &prediction)?);
        out.mean_baseline_mse.push(mse(&target, &vec![m; target.len()])?);
        out.weights.push(w);
        out.targets.push(target);
        out.predictions.push(prediction);
    }
    Ok(out)
}

/// Estimates the item weight and, inside the hammer band, its orientation.
pub fn classify_payload<T: Scalar>(
    bundle: &EstimatorBundle<T>,
    orientation_weights: &ReadoutWeights<T>,
    run: &LabeledRun<T>,
) -> Result<(T, Option<Orientation>)> {
    let weight = estimate_weight(bundle, run)?;
    let (lo, hi) = (T::lit(HAMMER_BAND.0), T::lit(HAMMER_BAND.1));
    if weight < lo || weight > hi {
        return Ok((weight, None));
    }
    let score = mean_output(orientation_weights, run, bundle.washout, bundle.window)?;
    Ok((weight, Some(Orientation::snap(score))))
}
