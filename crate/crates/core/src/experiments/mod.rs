//! Figure-level virtual experiments: sweeps, relaxation ensembles, reports.

pub mod plan;
pub mod relaxation;
pub mod report;
pub mod sweeps;

pub use plan::{AxisOutcome, Mode, Provenance, SweepPlan, SweepPoint, SweepResult, SweepVariable, TrajectorySettings};
pub use relaxation::{run_relaxation_ensemble, AxisRelaxation, Direction, RelaxationPlan, RelaxationResult};
pub use report::{emit_report, fit_sweep_phase, Manifest, Report, MANIFEST_FILE};
pub use sweeps::{
    best_cooling_phase, default_detuning_grid, default_power_grid, default_pressure_grid, evaluate_point,
    paper_phases, run_detuning_sweep, run_power_sweep, run_pressure_sweep, run_sweep,
};
