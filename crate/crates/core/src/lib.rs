//! Simulation, design and identification toolkit for viscoelastic robotic
//! finger joints.
//!
//! The crate is organised by subsystem:
//!
//! * [`damper`] evaluates the Couette-flow model of a concentric-fin rotary
//!   damper (geometry factor, torque, required fluid viscosity, sweeps).
//! * [`pendulum`] and [`metrics`] simulate the drop-test pendulum with
//!   Coulomb/viscous friction and a damper, and extract oscillation counts
//!   and settling times.
//! * [`fit`] and [`band`] identify friction and damping coefficients from
//!   trajectories, bootstrap their uncertainty and propagate it into
//!   Monte-Carlo envelopes.
//! * [`finger`] models the tendon-driven three-joint finger.
//! * [`catching`] simulates the closed-loop ball-catching task.
//! * [`config`] and [`tracker`] handle configuration files and tracker
//!   exports.
//!
//! All quantities are SI internally; angles are radians measured from the
//! positive vertical (up) axis.

pub mod band;
pub mod catching;
pub mod config;
pub mod damper;
pub mod finger;
pub mod fit;
pub mod metrics;
pub mod optim;
pub mod pendulum;
pub mod rng;
pub mod stats;
pub mod tracker;
pub mod trajectory;
pub mod units;

pub use band::{monte_carlo_band, Band, ParamSource};
pub use catching::{
    controller_target, motor_step, run_campaign, run_trial, CampaignResult, CatchConfig,
    TrialResult,
};
pub use config::{Provenance, ToolConfig};
pub use tracker::{ingest_tracker, ColumnMap};
pub use damper::{
    damper_torque, fin_g_factor, required_viscosity, sweep_g, total_g_factor, DamperGeometry,
    Feasibility, FluidSpec, SweepGrid,
};
pub use finger::{
    correlation_matrix, dynamic_close, fingertip_distance, quasi_static_sweep, FingerChain,
    FlexionRecord, TendonDrive,
};
pub use fit::{bootstrap, fit, loss, FitMode, FitParam, FitResult, FitSpec, ParamDistribution};
pub use metrics::{metrics, OscillationMetrics};
pub use pendulum::{acceleration, simulate, total_inertia, PendulumParams};
pub use trajectory::Trajectory;
