//! NMSE, MSE, peak similarity index and spatial correlation.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::substrate::StateTrajectory;

pub const DEFAULT_PEAKS: usize = 8;

/// Two chosen peaks must have more than this many bins between their indices.
pub const PEAK_SEPARATION: usize = 2;

fn check_pair<T>(target: &[T], predicted: &[T], min_len: usize) -> Result<()> {
    if target.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            what: "predicted length",
            expected: target.len(),
            found: predicted.len(),
        });
    }
    if target.len() < min_len {
        return Err(Error::DimensionMismatch {
            what: "series length (minimum)",
            expected: min_len,
            found: target.len(),
        });
    }
    Ok(())
}

fn mean<T: Scalar>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::from_usize_lossy(x.len())
}

/// `Σ(y - ŷ)² / Σ(y - ȳ)²`.
pub fn nmse<T: Scalar>(target: &[T], predicted: &[T]) -> Result<T> {
    check_pair(target, predicted, 2)?;
    let m = mean(target);
    let mut residual = T::zero();
    let mut spread = T::zero();
    for (&y, &p) in target.iter().zip(predicted) {
        residual += (y - p) * (y - p);
        spread += (y - m) * (y - m);
    }
    if spread == T::zero() {
        return Err(Error::ConstantTarget);
    }
    Ok(residual / spread)
}

/// `(1/T) Σ(ŷ - y)²`.
pub fn mse<T: Scalar>(target: &[T], predicted: &[T]) -> Result<T> {
    check_pair(target, predicted, 1)?;
    let sum: T = target
        .iter()
        .zip(predicted)
        .map(|(&y, &p)| (p - y) * (p - y))
        .sum();
    Ok(sum / T::from_usize_lossy(target.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsiOptions {
    pub n_peaks: usize,
    /// Cap each occupancy ratio at 1 so that psi stays within `[0, n_peaks]`.
    pub clamp: bool,
}

impl Default for PsiOptions {
    fn default() -> Self {
        Self {
            n_peaks: DEFAULT_PEAKS,
            clamp: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiReport<T> {
    pub peak_bins: Vec<usize>,
    pub peak_frequencies: Vec<T>,
    pub target_magnitudes: Vec<T>,
    pub predicted_magnitudes: Vec<T>,
    pub occupancy: Vec<T>,
    pub psi: T,
    /// The target spectrum had fewer separated local maxima than requested peaks.
    pub degenerate: bool,
}

/// Hann-windowed one-sided magnitude spectrum of the mean-removed series.
pub fn hann_spectrum<T: Scalar>(x: &[T]) -> Vec<T> {
    let n = x.len();
    let m = mean(x);
    let denom = T::from_usize_lossy(n.saturating_sub(1).max(1));
    let tau = T::lit(std::f64::consts::TAU);
    let windowed: Vec<T> = x
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let w = T::lit(0.5) * (T::one() - (tau * T::from_usize_lossy(k) / denom).cos());
            (v - m) * w
        })
        .collect();
    T::magnitude_spectrum(&windowed)
}

fn by_magnitude_desc<T: Scalar>(mag: &[T]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        mag[b]
            .partial_cmp(&mag[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

/// Picks up to `n_peaks` bins: separated local maxima first, then the largest leftover bins.
///
/// DC is excluded. Returns the bins in descending target magnitude and whether
/// padding was needed.
pub fn pick_peaks<T: Scalar>(mag: &[T], n_peaks: usize) -> (Vec<usize>, bool) {
    let len = mag.len();
    let mut maxima: Vec<usize> = (1..len.saturating_sub(1))
        .filter(|&i| mag[i] >= mag[i - 1] && mag[i] > mag[i + 1])
        .collect();
    maxima.sort_by(by_magnitude_desc(mag));
    let mut chosen: Vec<usize> = Vec::with_capacity(n_peaks);
    for i in maxima {
        if chosen.len() == n_peaks {
            break;
        }
        if chosen.iter().all(|&c| c.abs_diff(i) > PEAK_SEPARATION) {
            chosen.push(i);
        }
    }
    let degenerate = chosen.len() < n_peaks;
    if degenerate {
        let mut rest: Vec<usize> = (1..len).filter(|i| !chosen.contains(i)).collect();
        rest.sort_by(by_magnitude_desc(mag));
        chosen.extend(rest.into_iter().take(n_peaks - chosen.len()));
    }
    (chosen, degenerate)
}

pub fn psi<T: Scalar>(
    target: &[T],
    predicted: &[T],
    sample_rate: T,
    n_peaks: usize,
) -> Result<PsiReport<T>> {
    psi_with(
        target,
        predicted,
        sample_rate,
        PsiOptions {
            n_peaks,
            ..PsiOptions::default()
        },
    )
}

pub fn psi_with<T: Scalar>(
    target: &[T],
    predicted: &[T],
    sample_rate: T,
    options: PsiOptions,
) -> Result<PsiReport<T>> {
    check_pair(target, predicted, 2)?;
    let n = target.len();
    let bins = n / 2 + 1;
    if bins - 1 < 2 * options.n_peaks {
        return Err(Error::DimensionMismatch {
            what: "non-DC spectral bins (minimum)",
            expected: 2 * options.n_peaks,
            found: bins - 1,
        });
    }
    let target_spec = hann_spectrum(target);
    let predicted_spec = hann_spectrum(predicted);
    let (peak_bins, degenerate) = pick_peaks(&target_spec, options.n_peaks);
    let resolution = sample_rate / T::from_usize_lossy(n);
    let mut report = PsiReport {
        peak_frequencies: peak_bins
            .iter()
            .map(|&b| T::from_usize_lossy(b) * resolution)
            .collect(),
        target_magnitudes: peak_bins.iter().map(|&b| target_spec[b]).collect(),
        predicted_magnitudes: peak_bins.iter().map(|&b| predicted_spec[b]).collect(),
        occupancy: Vec::with_capacity(options.n_peaks),
        psi: T::zero(),
        degenerate,
        peak_bins,
    };
    for (&a_t, &a_p) in report
        .target_magnitudes
        .iter()
        .zip(&report.predicted_magnitudes)
    {
        let mut ratio = if a_t > T::zero() { a_p / a_t } else { T::zero() };
        if options.clamp {
            ratio = ratio.min(T::one());
        }
        report.occupancy.push(ratio);
    }
    report.psi = report.occupancy.iter().copied().sum();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport<T> {
    pub matrix: Vec<Vec<T>>,
    /// Row sums `R_i`.
    pub node_index: Vec<T>,
    /// `Σ R_i / n`.
    pub avg_ci: T,
    /// `avg_ci / n`, within `[-1, 1]`.
    pub avg_ci_normalized: T,
}

/// Pearson correlation between every pair of node series.
pub fn correlation_matrix<T: Scalar>(states: &StateTrajectory<T>) -> Result<CorrelationReport<T>> {
    let n = states.n_nodes();
    let len = states.n_samples();
    if len < 2 {
        return Err(Error::DimensionMismatch {
            what: "samples (minimum)",
            expected: 2,
            found: len,
        });
    }
    if n == 0 {
        return Err(Error::DimensionMismatch {
            what: "nodes (minimum)",
            expected: 1,
            found: 0,
        });
    }
    let mut centered = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    for (i, row) in states.rows().iter().enumerate() {
        let m = mean(row);
        let c: Vec<T> = row.iter().map(|&v| v - m).collect();
        let norm = c.iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(Error::ZeroVarianceNode {
                node: i,
                label: states.labels()[i].clone(),
            });
        }
        centered.push(c);
        norms.push(norm);
    }
    let mut matrix = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        matrix[i][i] = T::one();
        for j in (i + 1)..n {
            let dot: T = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(&a, &b)| a * b)
                .sum();
            let r = (dot / (norms[i] * norms[j])).max(-T::one()).min(T::one());
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    let node_index: Vec<T> = matrix.iter().map(|r| r.iter().copied().sum()).collect();
    let nf = T::from_usize_lossy(n);
    let avg_ci = node_index.iter().copied().sum::<T>() / nf;
    Ok(CorrelationReport {
        matrix,
        node_index,
        avg_ci,
        avg_ci_normalized: avg_ci / nf,
    })
}

/// Ranks starting at 1, ties sharing their mean rank.
pub fn average_ranks<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![T::zero(); x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = T::from_usize_lossy(i + j + 2) / T::lit(2.0);
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson coefficient of two series; `None` when either is constant.
pub fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Option<T> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = T::zero();
    let mut saa = T::zero();
    let mut sbb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > T::zero() && sbb > T::zero()).then(|| sab / (saa * sbb).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman<T: Scalar>(a: &[T], b: &[T]) -> Option<T> {
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Error and spectral scores of one prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport<T> {
    pub nmse: T,
    pub mse: T,
    pub psi: PsiReport<T>,
}

pub fn evaluate<T: Scalar>(target: &[T], predicted: &[T], sample_rate: T) -> Result<MetricReport<T>> {
    Ok(MetricReport {
        nmse: nmse(target, predicted)?,
        mse: mse(target, predicted)?,
        psi: psi(target, predicted, sample_rate, DEFAULT_PEAKS)?,
    })
}
