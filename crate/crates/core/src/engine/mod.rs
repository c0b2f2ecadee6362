//! The KAM engine: jet fields on an angle grid, the homological solve, the parameter
//! schedule, the step and the iteration, and the torus read-out.

pub mod field;
pub mod homological;
pub mod iterate;
pub mod schedule;
pub mod step;
pub mod system;
pub mod torus;

pub use iterate::{run_iteration, slope_fit, DecayRow, IterationResult, KamState, RunOptions, SlopeFit, StopReason};
pub use schedule::{build_schedule, KamSchedule, ScheduleInputs};
pub use step::{Engine, EngineConfig, StepRecord};
pub use system::{pendulum2d, HamiltonianSystem};
