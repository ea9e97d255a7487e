//! Linearised cavity + three-mode dynamics: model assembly, steady-state
//! covariance, stochastic integration and analytic spectra.

pub mod heating;
pub mod lyapunov;
pub mod model;
pub mod nonlinear;
pub mod propagator;
pub mod spectrum;
pub mod trace;

pub use heating::{heating_trajectory, HeatingCurve};
pub use lyapunov::{
    solve_continuous_lyapunov, steady_state_covariance, steady_state_temperatures,
    temperature_from_covariance,
};
pub use model::{build_linear_model, p_index, q_index, LinearModel, MechanicalAxis, StateMatrix, StateVector};
pub use nonlinear::{simulate_nonlinear, simulate_nonlinear_from, NonlinearTrapModel};
pub use propagator::{
    sample_gaussian, simulate, simulate_with, stream_rng, ExactPropagator, MomentAccumulator, SimulationOptions,
};
pub use spectrum::{analytic_psd, effective_damping, PeakShape};
pub use trace::TimeTrace;
