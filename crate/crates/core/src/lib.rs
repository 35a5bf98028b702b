//! Optimal two-vaccine campaign planning on an SEIRV compartment model.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the dynamics, the adjoint system and the Hamiltonian.
//! * [`integrate`] provides the fixed-step RK4 passes on a shared grid.
//! * [`sweep`] is the forward-backward sweep optimizer.
//! * [`analysis`] runs scenario studies on top of the optimizer.

pub mod analysis;
pub mod error;
pub mod integrate;
pub mod model;
pub mod sweep;

pub use analysis::{
    classify_control, efficacy_sensitivity_sweep, infected_comparison, policy_run,
    procurement_split, rate_sensitivity_grid, reduction_threshold_probe, AnalysisOptions,
    Classification, ControlShape, EfficacySweep, FixedEfficacy, InfectedComparison, Policy,
    PolicyRun, ProcurementSplit, RatePattern, RATE_CHANGES, Scenario, SensitivityCell,
};
pub use error::{Error, Result};
pub use integrate::{
    integrate_backward, integrate_forward, rk4_step, trapezoid, AdjointTrajectory, ControlSchedule,
    StateTrajectory, TimeGrid, Trajectory,
};
pub use model::{
    adjoint_rhs, derived_transmission_rate, hamiltonian, objective_integrand, state_rhs,
    AdjointPoint, ControlPoint, ModelParams, StatePoint, TransmissionRule,
};
pub use sweep::{
    evaluate_objective, evaluate_schedule, optimality_update, run_sweep, Availability, SweepConfig, SweepResult,
};
