//! Lumped multistable chain: configuration, model assembly, RK4 simulation
//! and trajectory I/O.

mod config;
mod model;
mod sim;
mod trajectory;

pub use config::{preset_modules, ChainConfig, DriveMode, ModuleState};
pub use model::{build_chain, segment_stretch, ChainModel};
pub use sim::{simulate, simulate_from, steps_per_sample, InitialState, SimOutcome};
pub use trajectory::{import_trajectory, StateTrajectory, TrajectoryFormat};
