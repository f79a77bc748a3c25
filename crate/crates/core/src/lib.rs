//! State-space to ARX model transformations and the matching constrained
//! MPC tracking problems.
//!
//! The crate converts a discrete linear state-space model into an ARX model
//! by one of three routes (Cayley–Hamilton, observer gain, steady-state
//! Kalman gain), builds condensed QPs for SS-based and ARX-based MPC, solves
//! them with an in-crate ADMM solver, and runs seeded closed-loop
//! experiments on a noisy plant.

pub mod afti16;
pub mod error;
pub mod files;
pub mod linalg;
pub mod model;
pub mod mpc;
pub mod sim;
pub mod transforms;

pub use error::{Error, Result};
pub use model::{
    char_poly, discretize_exact, simulate_arx, simulate_ss, ArxModel, CharPolyCoefficients,
    ContinuousStateSpace, DiscreteStateSpace, IoHistory, SsTrajectory,
};
pub use mpc::{
    build_arx_mpc_qp, build_ss_mpc_qp, kalman_filter_step, mpc_step_arx, mpc_step_ss, solve_qp,
    EstimatorState, MpcConfig, QpProblem, QpSettings, QpSolution, QpStatus, ReferenceSignal,
    StepDiagnostics, StepOutput,
};
pub use sim::{
    average_tracking_cost, compare_controllers, run_closed_loop, ComparisonReport, ControllerKind,
    ControllerParams, NoiseSpec, Scenario, SimResult,
};
pub use transforms::{
    kalman_gain, place_observer_poles, solve_dare, ss_to_arx_ch, ss_to_arx_kf, ss_to_arx_ot,
    ss_to_arx_with_gain, KalmanDesign, ObserverGain, DEFAULT_MAX_ORDER, DEFAULT_TRUNC_TOL,
};
