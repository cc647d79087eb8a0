//! Makespan minimization for unit jobs with precedence constraints on `m`
//! identical machines (`Pm | prec, p_j = 1 | C_max`).
//!
//! The crate contains
//! * [`instance`]: instances, schedules, generators, validation and file I/O;
//! * [`exact`]: an exact optimal-makespan search over down-sets;
//! * [`baselines`]: Graham list scheduling and Coffman–Graham;
//! * [`lpcore`]: an exact rational simplex with Farkas certificates;
//! * [`relax`]: the time-indexed LP `K(T)` and its horizon search;
//! * [`lift`]: Sherali–Adams lifts of `K(T)`, conditioning and moment-matrix checks;
//! * [`rounding`]: the recursive interval rounding with chain breaking,
//!   top-job matching and earliest-deadline-first reinsertion.

pub mod baselines;
pub mod bitset;
pub mod exact;
pub mod instance;
pub mod lift;
pub mod lpcore;
pub mod relax;
pub mod rounding;

pub use bitset::JobSet;
pub use instance::{Instance, InstanceError, PartialSchedule, Placement};
