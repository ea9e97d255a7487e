use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Axis, PositionPhase, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Temperatures from the steady-state covariance; no trajectories.
    #[default]
    Oracle,
    /// Linear stochastic trajectories analysed like measured data.
    Trajectory,
    /// Gaussian-trap trajectories (nonlinear broadening).
    Nonlinear,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Oracle => "oracle",
            Mode::Trajectory => "trajectory",
            Mode::Nonlinear => "nonlinear",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    Pressure,
    Detuning,
    Power,
    Phase,
}

impl SweepVariable {
    /// Column name and conversion factor from SI/rad-s to the report unit.
    pub fn column(self) -> (&'static str, f64) {
        match self {
            SweepVariable::Pressure => ("pressure_mbar", 1.0 / crate::constants::PA_PER_MBAR),
            SweepVariable::Detuning => ("detuning_hz", 1.0 / crate::constants::TWO_PI),
            SweepVariable::Power => ("power_w", 1.0),
            SweepVariable::Phase => ("phase_rad", 1.0),
        }
    }

    pub fn apply(self, sys: &SystemParams, value: f64) -> Result<SystemParams> {
        let s = sys.clone();
        Ok(match self {
            SweepVariable::Pressure => s.with_pressure_pa(value),
            SweepVariable::Detuning => s.with_detuning(value),
            SweepVariable::Power => s.with_power(value),
            SweepVariable::Phase => s.with_phase(PositionPhase::new(value)?),
        })
    }
}

/// Settings of trajectory-based estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySettings {
    pub duration: f64,
    pub dt: f64,
    pub ensemble: usize,
}

impl Default for TrajectorySettings {
    fn default() -> Self {
        Self {
            duration: 0.5,
            dt: 1e-6,
            ensemble: 1,
        }
    }
}

/// A one-dimensional sweep. Values are in internal units (Pa, rad/s, W, rad).
/// Every grid value is evaluated at each of `phases`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub phases: Vec<PositionPhase>,
    pub system: SystemParams,
    pub mode: Mode,
    pub trajectory: TrajectorySettings,
    pub seed: u64,
}

impl SweepPlan {
    pub fn new(variable: SweepVariable, values: Vec<f64>, system: SystemParams) -> Self {
        let phases = vec![system.phase];
        Self {
            variable,
            values,
            phases,
            system,
            mode: Mode::Oracle,
            trajectory: TrajectorySettings::default(),
            seed: 0,
        }
    }

    pub fn with_phases(mut self, phases: Vec<PositionPhase>) -> Self {
        self.phases = phases;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = self.values.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::Config {
                key: "sweep".into(),
                reason: "grid must be strictly monotone".into(),
            });
        }
        if self.phases.is_empty() {
            return Err(Error::Config {
                key: "sweep.phases_rad".into(),
                reason: "at least one phase is required".into(),
            });
        }
        if self.trajectory.ensemble == 0 {
            return Err(Error::Config {
                key: "sweep.ensemble".into(),
                reason: "ensemble size must be ≥ 1".into(),
            });
        }
        for &v in &self.values {
            self.variable.apply(&self.system, v)?.validate()?;
        }
        Ok(())
    }
}

/// Outcome on one axis at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisOutcome {
    pub axis: Axis,
    /// Temperature (K); absent when the point is unstable or analysis failed.
    pub temperature: Option<f64>,
    /// Linewidth (rad/s).
    pub damping: Option<f64>,
    /// Weak-coupling sideband rate γ_c (rad/s).
    pub cooling_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    /// Swept value in internal units.
    pub value: f64,
    pub phase: f64,
    pub gas_damping: f64,
    /// Eigenvalue-based stability of the linear model.
    pub stable: bool,
    /// Closed-form criterion g² < |Δ|Ω.
    pub predicate_stable: bool,
    pub axes: Vec<AxisOutcome>,
    pub notes: Vec<String>,
}

impl SweepPoint {
    pub fn temperature(&self, axis: Axis) -> Option<f64> {
        self.axes[axis.index()].temperature
    }

    pub fn damping(&self, axis: Axis) -> Option<f64> {
        self.axes[axis.index()].damping
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub mode: Mode,
    pub trajectory: TrajectorySettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub points: Vec<SweepPoint>,
    pub provenance: Provenance,
}

impl SweepResult {
    /// Points evaluated at `phase` (compared to 1e-12 rad).
    pub fn at_phase(&self, phase: PositionPhase) -> impl Iterator<Item = &SweepPoint> {
        let target = phase.radians();
        self.points.iter().filter(move |p| (p.phase - target).abs() < 1e-12)
    }
}
