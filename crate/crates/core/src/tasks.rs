//! Input signals and target series for the benchmark tasks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Frequencies of the three multiplied harmonics in the NARMA input, Hz.
pub const TRIPLE_HARMONIC_FREQUENCIES: [f64; 3] = [2.11, 3.73, 4.33];

/// Uniformly sampled multichannel signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal<T> {
    times: Vec<T>,
    values: Vec<Vec<T>>,
    max_frequency: Option<T>,
}

impl<T: Scalar> SampledSignal<T> {
    /// Builds a signal sampled at `k / sample_rate` from per-channel values.
    pub fn from_channels(values: Vec<Vec<T>>, sample_rate: T) -> Result<Self> {
        if !(sample_rate > T::zero()) || !sample_rate.is_finite() {
            return Err(Error::InvalidSignal("sample_rate must be positive".into()));
        }
        let len = values.first().map_or(0, Vec::len);
        if values.is_empty() {
            return Err(Error::InvalidSignal("signal has no channels".into()));
        }
        for ch in &values {
            if ch.len() != len {
                return Err(Error::DimensionMismatch {
                    what: "samples per channel",
                    expected: len,
                    found: ch.len(),
                });
            }
            if ch.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSignal("non-finite sample".into()));
            }
        }
        let times = (0..len)
            .map(|k| T::from_usize_lossy(k) / sample_rate)
            .collect();
        Ok(Self {
            times,
            values,
            max_frequency: None,
        })
    }

    /// Records the highest spectral component, used to check simulator sampling.
    pub fn with_max_frequency(mut self, f: T) -> Self {
        self.max_frequency = Some(f);
        self
    }

    pub fn max_frequency(&self) -> Option<T> {
        self.max_frequency
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.values[c]
    }

    pub fn channels(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn n_channels(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sample_rate(&self) -> T {
        if self.times.len() < 2 {
            T::infinity()
        } else {
            T::one() / (self.times[1] - self.times[0])
        }
    }

    /// Linear interpolation of channel `c` at time `t`, clamped at both ends.
    pub fn interpolate(&self, c: usize, t: T) -> T {
        let values = &self.values[c];
        let n = values.len();
        if n == 1 {
            return values[0];
        }
        let pos = (t - self.times[0]) * self.sample_rate();
        if !(pos > T::zero()) {
            return values[0];
        }
        let k = pos.floor().to_usize().unwrap_or(usize::MAX);
        if k >= n - 1 {
            return values[n - 1];
        }
        let frac = pos - T::from_usize_lossy(k);
        if frac == T::zero() {
            return values[k];
        }
        values[k] + frac * (values[k + 1] - values[k])
    }

    /// First `len` samples.
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len());
        Self {
            times: self.times[..len].to_vec(),
            values: self.values.iter().map(|v| v[..len].to_vec()).collect(),
            max_frequency: self.max_frequency,
        }
    }
}

fn sample_count<T: Scalar>(duration: T, sample_rate: T) -> Result<usize> {
    if !(duration > T::zero()) || !duration.is_finite() {
        return Err(Error::InvalidSignal("duration must be positive".into()));
    }
    if !(sample_rate > T::zero()) || !sample_rate.is_finite() {
        return Err(Error::InvalidSignal("sample_rate must be positive".into()));
    }
    (duration * sample_rate)
        .round()
        .to_usize()
        .map(|n| n + 1)
        .ok_or_else(|| Error::InvalidSignal("too many samples".into()))
}

fn two_pi<T: Scalar>() -> T {
    T::lit(std::f64::consts::TAU)
}

/// `A sin(2π 2.11 t) sin(2π 3.73 t) sin(2π 4.33 t)`.
pub fn triple_harmonic<T: Scalar>(amplitude: T, duration: T, sample_rate: T) -> Result<SampledSignal<T>> {
    let n = sample_count(duration, sample_rate)?;
    let top = T::lit(TRIPLE_HARMONIC_FREQUENCIES[2]);
    if sample_rate < T::lit(2.0) * top {
        return Err(Error::InvalidSignal(format!(
            "sample_rate {sample_rate} Hz cannot represent {top} Hz"
        )));
    }
    let f = TRIPLE_HARMONIC_FREQUENCIES.map(T::lit);
    let values = (0..n)
        .map(|k| {
            let t = T::from_usize_lossy(k) / sample_rate;
            f.iter()
                .fold(amplitude, |acc, &fi| acc * (two_pi::<T>() * fi * t).sin())
        })
        .collect();
    // The product expands into components up to the sum of the three frequencies.
    let bandwidth = f.iter().copied().sum::<T>();
    Ok(SampledSignal::from_channels(vec![values], sample_rate)?.with_max_frequency(bandwidth))
}

/// `A sin(2π f t)`.
pub fn single_harmonic<T: Scalar>(
    amplitude: T,
    frequency: T,
    duration: T,
    sample_rate: T,
) -> Result<SampledSignal<T>> {
    let n = sample_count(duration, sample_rate)?;
    if !(frequency > T::zero()) || !frequency.is_finite() {
        return Err(Error::InvalidSignal("frequency must be positive".into()));
    }
    if sample_rate < T::lit(2.0) * frequency {
        return Err(Error::InvalidSignal(format!(
            "sample_rate {sample_rate} Hz cannot represent {frequency} Hz"
        )));
    }
    let values = (0..n)
        .map(|k| {
            let t = T::from_usize_lossy(k) / sample_rate;
            amplitude * (two_pi::<T>() * frequency * t).sin()
        })
        .collect();
    Ok(SampledSignal::from_channels(vec![values], sample_rate)?.with_max_frequency(frequency))
}

/// Three sequentially fired square waves.
///
/// Each cycle lasts `3 (on + off)`; channel `c` is at `amplitude` during
/// `[c (on + off), c (on + off) + on)` and zero otherwise.
pub fn pwm3<T: Scalar>(
    on: T,
    off: T,
    amplitude: T,
    duration: T,
    sample_rate: T,
) -> Result<SampledSignal<T>> {
    let n = sample_count(duration, sample_rate)?;
    if !(on > T::zero()) || !(off >= T::zero()) || !on.is_finite() || !off.is_finite() {
        return Err(Error::InvalidSignal("pwm needs on > 0 and off >= 0".into()));
    }
    if sample_rate * on < T::lit(2.0) - T::lit(1e-9) {
        return Err(Error::InvalidSignal(format!(
            "a {on} s pulse is not representable at {sample_rate} Hz"
        )));
    }
    let slot = on + off;
    let cycle = T::lit(3.0) * slot;

    // Exact integer arithmetic when slot lengths land on sample boundaries.
    let as_samples = |d: T| {
        let s = d * sample_rate;
        let r = s.round();
        ((s - r).abs() < T::lit(1e-9)).then(|| r.to_usize()).flatten()
    };
    let mut values = vec![vec![T::zero(); n]; 3];
    match (as_samples(on), as_samples(off)) {
        (Some(on_n), Some(off_n)) => {
            let slot_n = on_n + off_n;
            for k in 0..n {
                let phase = k % (3 * slot_n);
                let c = phase / slot_n;
                if phase % slot_n < on_n {
                    values[c][k] = amplitude;
                }
            }
        }
        _ => {
            for k in 0..n {
                let t = T::from_usize_lossy(k) / sample_rate;
                let phase = t - (t / cycle).floor() * cycle;
                let c = (phase / slot).floor().to_usize().unwrap_or(0).min(2);
                if phase - T::from_usize_lossy(c) * slot < on {
                    values[c][k] = amplitude;
                }
            }
        }
    }
    Ok(SampledSignal::from_channels(values, sample_rate)?.with_max_frequency(T::one() / cycle))
}

/// Step function holding each `(value, duration)` for `round(duration * sample_rate)` samples.
pub fn piecewise_constant_target<T: Scalar>(segments: &[(T, T)], sample_rate: T) -> Result<Vec<T>> {
    if segments.is_empty() {
        return Err(Error::InvalidSignal("no segments".into()));
    }
    let mut out = Vec::new();
    for &(value, duration) in segments {
        if !(duration > T::zero()) || !duration.is_finite() {
            return Err(Error::InvalidSignal("segment durations must be positive".into()));
        }
        let count = (duration * sample_rate).round().to_usize().unwrap_or(0);
        out.extend(std::iter::repeat_n(value, count));
    }
    Ok(out)
}

/// Signal family selector used by plan files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    TripleHarmonic,
    SingleHarmonic,
    Pwm3,
}

/// Parametric description of an input stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec<T> {
    pub kind: SignalKind,
    pub amplitude: T,
    #[serde(default)]
    pub frequencies: Vec<T>,
    #[serde(default)]
    pub pwm_on: T,
    #[serde(default)]
    pub pwm_off: T,
    pub duration: T,
    pub sample_rate: T,
}

impl<T: Scalar> SignalSpec<T> {
    pub fn generate(&self) -> Result<SampledSignal<T>> {
        if self.frequencies.iter().any(|&f| !(f > T::zero())) {
            return Err(Error::InvalidSignal("frequencies must be positive".into()));
        }
        match self.kind {
            SignalKind::TripleHarmonic => {
                triple_harmonic(self.amplitude, self.duration, self.sample_rate)
            }
            SignalKind::SingleHarmonic => {
                let f = *self.frequencies.first().ok_or_else(|| {
                    Error::InvalidSignal("single harmonic needs a frequency".into())
                })?;
                single_harmonic(self.amplitude, f, self.duration, self.sample_rate)
            }
            SignalKind::Pwm3 => pwm3(
                self.pwm_on,
                self.pwm_off,
                self.amplitude,
                self.duration,
                self.sample_rate,
            ),
        }
    }
}

/// Coefficients of the NARMA-N recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NarmaParams<T> {
    pub order: usize,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub delta: T,
    /// Sum the lagged outputs instead of the lagged inputs (N > 2 only).
    #[serde(default)]
    pub classic: bool,
    /// Raw input range mapped affinely onto `[0, 0.5]`; `None` uses the input as given.
    #[serde(default)]
    pub input_range: Option<(T, T)>,
}

impl<T: Scalar> NarmaParams<T> {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            alpha: T::lit(0.3),
            beta: T::lit(0.05),
            gamma: T::lit(1.5),
            delta: T::lit(0.1),
            classic: false,
            input_range: None,
        }
    }

    /// Maps inputs in `[-amplitude, amplitude]` onto `[0, 0.5]`.
    pub fn for_amplitude(order: usize, amplitude: T) -> Self {
        Self {
            input_range: Some((-amplitude, amplitude)),
            ..Self::new(order)
        }
    }
}

/// Limit on |y| past which the recursion counts as diverged.
pub const NARMA_DIVERGENCE_BOUND: f64 = 1e6;

/// Affine map of `[lo, hi]` onto `[0, 0.5]`.
pub fn rescale_to_narma_range<T: Scalar>(values: &[T], lo: T, hi: T) -> Vec<T> {
    let span = hi - lo;
    values
        .iter()
        .map(|&v| T::lit(0.5) * (v - lo) / span)
        .collect()
}

/// Runs the recursion on an already rescaled input `u`.
pub fn narma_recursion<T: Scalar>(u: &[T], params: &NarmaParams<T>) -> Result<Vec<T>> {
    let n = params.order;
    if n < 2 {
        return Err(Error::InvalidConfig("NARMA order must be at least 2".into()));
    }
    let mut y = vec![T::zero(); u.len()];
    if u.len() <= n {
        return Ok(y);
    }
    let bound = T::lit(NARMA_DIVERGENCE_BOUND);
    let (c04, c06, c01) = (T::lit(0.4), T::lit(0.6), T::lit(0.1));
    let five = T::lit(5.0);
    for t in (n - 1)..(u.len() - 1) {
        let next = if n == 2 {
            c04 * y[t] + c04 * y[t] * y[t - 1] + c06 * u[t] * u[t] * u[t] + c01
        } else if params.classic {
            let sum: T = y[t + 1 - n..=t].iter().copied().sum();
            params.alpha * y[t]
                + params.beta * y[t] * sum
                + params.gamma * u[t + 1 - n] * u[t]
                + params.delta
        } else {
            let window: T = u[t + 1 - n..=t].iter().copied().sum();
            params.alpha * y[t]
                + five * params.beta * y[t] * window
                + params.gamma * u[t + 1 - n] * u[t]
                + params.delta
        };
        if !(next.abs() <= bound) {
            return Err(Error::NarmaDiverged {
                order: n,
                step: t + 1,
            });
        }
        y[t + 1] = next;
    }
    Ok(y)
}

/// NARMA-N target for a single-channel input, same length as the input.
pub fn narma_target<T: Scalar>(input: &SampledSignal<T>, params: &NarmaParams<T>) -> Result<Vec<T>> {
    if input.n_channels() != 1 {
        return Err(Error::DimensionMismatch {
            what: "NARMA input channels",
            expected: 1,
            found: input.n_channels(),
        });
    }
    let raw = input.channel(0);
    match params.input_range {
        Some((lo, hi)) => {
            if !(hi > lo) {
                return Err(Error::InvalidConfig("NARMA input range is empty".into()));
            }
            narma_recursion(&rescale_to_narma_range(raw, lo, hi), params)
        }
        None => narma_recursion(raw, params),
    }
}
