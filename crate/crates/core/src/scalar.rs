//! Floating-point abstraction shared by every numeric routine in the crate.
//!
//! All simulation, regression and metric code is written against [`Scalar`]
//! rather than a concrete float. The two operations that need a dense linear
//! algebra or FFT backend are routed through trait methods so the generic code
//! never has to name backend-specific bounds.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Minimum-norm least-squares solution returned by [`Scalar::solve_least_squares`].
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares<T> {
    pub coefficients: Vec<T>,
    /// Numerical rank after truncating small singular values.
    pub rank: usize,
    pub singular_values: Vec<T>,
}

impl<T> LeastSquares<T> {
    pub fn is_rank_deficient(&self, cols: usize) -> bool {
        self.rank < cols
    }
}

/// f32 or f64.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; exact for f64, rounded for f32.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Solves `design * x = rhs` in the least-squares sense through an SVD.
    ///
    /// `design` is row-major with `rows * cols` entries. Singular values below
    /// `rcond * sigma_max` are treated as zero, which yields the minimum-norm
    /// (pseudo-inverse) solution for rank-deficient systems.
    fn solve_least_squares(
        design: &[Self],
        rows: usize,
        cols: usize,
        rhs: &[Self],
        rcond: Self,
    ) -> LeastSquares<Self>;

    /// One-sided magnitude spectrum `|DFT(x)|` for bins `0..=n/2`.
    fn magnitude_spectrum(samples: &[Self]) -> Vec<Self>;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn solve_least_squares(
                design: &[$t],
                rows: usize,
                cols: usize,
                rhs: &[$t],
                rcond: $t,
            ) -> LeastSquares<$t> {
                assert_eq!(design.len(), rows * cols, "design shape");
                assert_eq!(rhs.len(), rows, "rhs length");
                if rows == 0 || cols == 0 {
                    return LeastSquares {
                        coefficients: vec![0.0; cols],
                        rank: 0,
                        singular_values: Vec::new(),
                    };
                }
                let a = DMatrix::<$t>::from_row_slice(rows, cols, design);
                let b = DVector::<$t>::from_column_slice(rhs);
                let svd = a.svd(true, true);
                let sigma_max = svd.singular_values.iter().cloned().fold(0.0, <$t>::max);
                let eps = rcond * sigma_max;
                let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
                let singular_values = svd.singular_values.iter().cloned().collect();
                let coefficients = if sigma_max == 0.0 {
                    vec![0.0; cols]
                } else {
                    svd.solve(&b, eps)
                        .expect("u and v_t were requested")
                        .iter()
                        .cloned()
                        .collect()
                };
                LeastSquares {
                    coefficients,
                    rank,
                    singular_values,
                }
            }

            fn magnitude_spectrum(samples: &[$t]) -> Vec<$t> {
                let n = samples.len();
                if n == 0 {
                    return Vec::new();
                }
                let mut buffer: Vec<Complex<$t>> =
                    samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
                let fft = FftPlanner::<$t>::new().plan_fft_forward(n);
                fft.process(&mut buffer);
                buffer[..=n / 2].iter().map(|c| c.norm()).collect()
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);
