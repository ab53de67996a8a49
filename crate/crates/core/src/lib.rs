//! Physical reservoir computing on a simulated multistable module chain.
//!
//! The chain ([`substrate`]) turns an input stream ([`tasks`]) into nodal
//! displacement trajectories; a linear [`readout`] is trained on them and
//! scored with [`metrics`]. [`perception`] holds the payload and actuation
//! protocols, and [`harness`] runs whole experiment grids.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common `f64` choice.

pub mod error;
pub mod harness;
pub mod metrics;
pub mod perception;
pub mod readout;
pub mod scalar;
pub mod substrate;
pub mod tasks;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ChainConfig = substrate::ChainConfig<f64>;
pub type ChainModel = substrate::ChainModel<f64>;
pub type StateTrajectory = substrate::StateTrajectory<f64>;
pub type SimOutcome = substrate::SimOutcome<f64>;
pub type SampledSignal = tasks::SampledSignal<f64>;
pub type SignalSpec = tasks::SignalSpec<f64>;
pub type NarmaParams = tasks::NarmaParams<f64>;
pub type ReadoutWeights = readout::ReadoutWeights<f64>;
pub type PsiReport = metrics::PsiReport<f64>;
pub type CorrelationReport = metrics::CorrelationReport<f64>;
pub type LabeledRun = perception::LabeledRun<f64>;
pub type EstimatorBundle = perception::EstimatorBundle<f64>;

pub type ChainConfigF32 = substrate::ChainConfig<f32>;
pub type StateTrajectoryF32 = substrate::StateTrajectory<f32>;
pub type SampledSignalF32 = tasks::SampledSignal<f32>;
pub type ReadoutWeightsF32 = readout::ReadoutWeights<f32>;
