//! Approximation-free tracking control for unknown pure-feedback systems
//! under prescribed performance and input constraints.
//!
//! The crate is organised bottom-up:
//!
//! * [`funnel`]: exponential performance funnels `psi(t) = (p - q) e^{-mu t} + q`.
//! * [`controller`]: the per-stage arctan/tan control law, its gain and the
//!   backstepping cascade that turns a state into virtual and actual inputs.
//! * [`plant`]: pure-feedback dynamics, references, and the two built-in
//!   example systems.
//! * [`feasibility`]: the analytical feasibility conditions and the
//!   initial-state region sweep.
//! * [`simulator`]: fixed-step RK4 closed-loop integration and runtime
//!   monitoring of every theoretical bound.
//! * [`export`]: CSV writers for trajectories, event logs, monitor summaries
//!   and region masks.

pub mod controller;
pub mod error;
pub mod export;
pub mod feasibility;
pub mod funnel;
pub mod plant;
pub mod simulator;

pub use controller::{
    cascade, gain_range, stage_control, stage_gain, CascadeConfig, CascadeDecision,
    StageControllerParams, THETA_CLAMP_EPS,
};
pub use error::{Error, Result};
pub use feasibility::{
    check_feasibility, delta_offset_config, delta_vector, feasible_region, rate_bound, rate_bounds,
    varphi, BoundsSpec, FeasibilityReport, Grid, RegionCell, RegionMap, RegionTemplate,
    StageMargin, StageTemplate,
};
pub use funnel::FunnelParams;
pub use plant::{
    builtin_system, eval_dynamics, BuiltinScenario, BuiltinSystem, ReferenceSpec, SystemSpec,
};
pub use simulator::{
    monitor, simulate, BoundCheck, BoundFamily, Event, EventKind, MonitorReport, Sample, Scenario,
    Trajectory,
};
