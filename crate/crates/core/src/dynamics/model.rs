use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

use crate::constants::{BOLTZMANN, HBAR};
use crate::error::{Error, Result};
use crate::params::{Axis, SystemParams};

pub const STATE_DIM: usize = 8;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type StateVector = SVector<f64, STATE_DIM>;

/// State layout: cavity quadratures first, then (q, p) per mechanical axis.
pub const STATE_LABELS: [&str; STATE_DIM] = ["X", "Y", "q_x", "p_x", "q_y", "p_y", "q_z", "p_z"];
pub const CAVITY_X: usize = 0;
pub const CAVITY_Y: usize = 1;

pub fn q_index(axis: Axis) -> usize {
    2 + 2 * axis.index()
}

pub fn p_index(axis: Axis) -> usize {
    3 + 2 * axis.index()
}

/// Per-axis mechanical data carried alongside the matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalAxis {
    pub trap_frequency: f64,
    pub coupling: f64,
    pub gas_damping: f64,
    /// k_B T_gas / (ħΩ).
    pub gas_occupation: f64,
    /// Displacement-noise heating rate (K/s).
    pub noise_heating: f64,
    /// √(ħ/(2mΩ)) in metres.
    pub zero_point_motion: f64,
}

impl MechanicalAxis {
    /// Metres per unit of the dimensionless position quadrature, √2·x_zp.
    pub fn metres_per_quadrature(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.zero_point_motion
    }
}

/// Linearised drift/diffusion model of one cavity mode and three mechanical
/// modes in zero-point units: dx = M x dt + dW with ⟨dW dWᵀ⟩ = D dt.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub drift: StateMatrix,
    pub diffusion: StateMatrix,
    pub linewidth: f64,
    pub detuning: f64,
    pub gas_temperature: f64,
    pub mass: f64,
    pub axes: [MechanicalAxis; 3],
}

/// Momentum diffusion (1/s) that heats a mode of frequency `trap_frequency` at
/// `rate` kelvin per second.
pub fn noise_diffusion(rate: f64, trap_frequency: f64) -> f64 {
    2.0 * BOLTZMANN * rate / (HBAR * trap_frequency)
}

/// Assembles the drift and diffusion matrices:
///
/// ```text
/// Ẋ   = −κ/2 X + Δ Y
/// Ẏ   = −κ/2 Y − Δ X − Σ 2g_i q_i
/// q̇_i = Ω_i p_i
/// ṗ_i = −Ω_i q_i − γ_gas p_i − 2g_i X + noise
/// ```
///
/// The cavity sees vacuum noise (κ/2 per quadrature), each mechanical momentum
/// sees thermal gas noise 2γ_gas(n_gas + ½) plus a white displacement-noise
/// term calibrated to the configured heating rate. Instability is not checked.
pub fn build_linear_model(sys: &SystemParams) -> Result<LinearModel> {
    sys.validate()?;
    let kappa = sys.cavity.linewidth;
    let delta = sys.tweezer.detuning;
    let omega = sys.trap_frequencies();
    let g = sys.coupling_rates().rates;
    let gamma = sys.gas_damping();
    let occupation = sys.gas_occupations();
    let heating = sys.noise_heating_rates();
    let xzp = sys.zero_point_motion();

    let axes = [0, 1, 2].map(|i| MechanicalAxis {
        trap_frequency: omega[i],
        coupling: g[i],
        gas_damping: gamma,
        gas_occupation: occupation[i],
        noise_heating: heating[i],
        zero_point_motion: xzp[i],
    });
    Ok(LinearModel::from_parts(
        kappa,
        delta,
        sys.environment.gas_temperature,
        sys.particle.mass,
        axes,
    ))
}

impl LinearModel {
    /// Builds the matrices from already-derived rates.
    pub fn from_parts(
        linewidth: f64,
        detuning: f64,
        gas_temperature: f64,
        mass: f64,
        axes: [MechanicalAxis; 3],
    ) -> Self {
        let mut m = StateMatrix::zeros();
        let mut d = StateMatrix::zeros();
        m[(CAVITY_X, CAVITY_X)] = -0.5 * linewidth;
        m[(CAVITY_X, CAVITY_Y)] = detuning;
        m[(CAVITY_Y, CAVITY_Y)] = -0.5 * linewidth;
        m[(CAVITY_Y, CAVITY_X)] = -detuning;
        d[(CAVITY_X, CAVITY_X)] = 0.5 * linewidth;
        d[(CAVITY_Y, CAVITY_Y)] = 0.5 * linewidth;
        for (axis, mech) in Axis::ALL.iter().zip(axes.iter()) {
            let (q, p) = (q_index(*axis), p_index(*axis));
            m[(CAVITY_Y, q)] = -2.0 * mech.coupling;
            m[(q, p)] = mech.trap_frequency;
            m[(p, q)] = -mech.trap_frequency;
            m[(p, p)] = -mech.gas_damping;
            m[(p, CAVITY_X)] = -2.0 * mech.coupling;
            d[(p, p)] = 2.0 * mech.gas_damping * (mech.gas_occupation + 0.5)
                + noise_diffusion(mech.noise_heating, mech.trap_frequency);
        }
        Self {
            drift: m,
            diffusion: d,
            linewidth,
            detuning,
            gas_temperature,
            mass,
            axes,
        }
    }

    pub fn axis(&self, axis: Axis) -> &MechanicalAxis {
        &self.axes[axis.index()]
    }

    /// Same model with the detuning replaced (used for switching protocols).
    pub fn with_detuning(&self, detuning: f64) -> Self {
        Self::from_parts(self.linewidth, detuning, self.gas_temperature, self.mass, self.axes)
    }

    /// Same drift with a replaced diffusion matrix.
    pub fn with_diffusion(mut self, diffusion: StateMatrix) -> Self {
        self.diffusion = diffusion;
        self
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.drift.complex_eigenvalues().iter().copied().collect()
    }

    pub fn max_real_eigenvalue(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when every eigenvalue of the drift has a negative real part,
    /// beyond the round-off level of the eigenvalue solver.
    pub fn is_stable(&self) -> bool {
        self.max_real_eigenvalue() < -1e-13 * self.drift.amax()
    }

    /// Checks that D is symmetric positive semidefinite (to 1e-12 relative).
    pub fn validate(&self) -> Result<()> {
        let d = &self.diffusion;
        let scale = d.amax().max(1.0);
        if (d - d.transpose()).amax() > 1e-12 * scale {
            return Err(Error::domain("diffusion", "matrix is not symmetric"));
        }
        let eig = d.symmetric_eigenvalues();
        if let Some(min) = eig.iter().copied().reduce(f64::min) {
            if min < -1e-12 * scale {
                return Err(Error::domain(
                    "diffusion",
                    format!("matrix is not positive semidefinite (eigenvalue {min:e})"),
                ));
            }
        }
        Ok(())
    }
}
