use nalgebra::{DMatrix, DVector};

use super::model::{p_index, q_index, LinearModel, StateMatrix, STATE_DIM};
use crate::constants::{BOLTZMANN, HBAR};
use crate::error::{Error, Result};
use crate::params::Axis;

/// Solves M·C + C·Mᵀ + D = 0 for C through the Kronecker-sum form
/// (I⊗M + M⊗I)·vec(C) = −vec(D). One step of iterative refinement is applied
/// and the result is symmetrised. Stability is not checked here.
pub fn solve_continuous_lyapunov(m: &StateMatrix, d: &StateMatrix) -> Result<StateMatrix> {
    let n = STATE_DIM;
    let mut a = DMatrix::<f64>::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for k in 0..n {
                // (I ⊗ M): C[k, j] contributes M[i, k]
                a[(row, k + n * j)] += m[(i, k)];
                // (M ⊗ I): C[i, k] contributes M[j, k]
                a[(row, i + n * k)] += m[(j, k)];
            }
        }
    }
    let rhs = DVector::from_iterator(n * n, d.iter().map(|v| -v));
    let lu = a.clone().lu();
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Unstable("Lyapunov operator is singular".into()))?;
    let residual = &rhs - &a * &x;
    if let Some(dx) = lu.solve(&residual) {
        x += dx;
    }
    let c = StateMatrix::from_iterator(x.iter().copied());
    Ok((c + c.transpose()) * 0.5)
}

/// Stationary covariance of the linear model. Fails with [`Error::Unstable`]
/// when the drift has an eigenvalue with non-negative real part.
pub fn steady_state_covariance(model: &LinearModel) -> Result<StateMatrix> {
    let re = model.max_real_eigenvalue();
    if !model.is_stable() {
        return Err(Error::Unstable(format!(
            "drift matrix has an eigenvalue with real part {re:.3e} 1/s"
        )));
    }
    solve_continuous_lyapunov(&model.drift, &model.diffusion)
}

/// T = ħΩ(⟨q²⟩ + ⟨p²⟩)/(2k_B) for the quadratures of `axis`.
pub fn temperature_from_covariance(c: &StateMatrix, axis: Axis, trap_frequency: f64) -> f64 {
    let (q, p) = (q_index(axis), p_index(axis));
    HBAR * trap_frequency * (c[(q, q)] + c[(p, p)]) / (2.0 * BOLTZMANN)
}

/// Per-axis stationary temperatures of a stable model.
pub fn steady_state_temperatures(model: &LinearModel) -> Result<[f64; 3]> {
    let c = steady_state_covariance(model)?;
    Ok(Axis::ALL.map(|a| temperature_from_covariance(&c, a, model.axis(a).trap_frequency)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::build_linear_model;
    use crate::params::{PositionPhase, SystemParams};
    use approx::assert_relative_eq;

    fn decoupled() -> LinearModel {
        let sys = SystemParams::paper_defaults()
            .with_g0(0.0)
            .with_pressure_pa(0.1);
        let mut model = build_linear_model(&sys).unwrap();
        for ax in model.axes.iter_mut() {
            ax.noise_heating = 0.0;
        }
        LinearModel::from_parts(model.linewidth, model.detuning, model.gas_temperature, model.mass, model.axes)
    }

    #[test]
    fn residual_is_small() {
        let model = build_linear_model(&SystemParams::paper_defaults()).unwrap();
        let c = steady_state_covariance(&model).unwrap();
        let r = model.drift * c + c * model.drift.transpose() + model.diffusion;
        assert!(r.amax() < 1e-9 * model.diffusion.amax());
        assert!(c.symmetric_eigenvalues().iter().all(|&e| e > -1e-9 * c.amax()));
    }

    #[test]
    fn decoupled_oscillators_reach_equipartition() {
        let model = decoupled();
        let c = steady_state_covariance(&model).unwrap();
        for axis in Axis::ALL {
            let n = model.axis(axis).gas_occupation + 0.5;
            assert_relative_eq!(c[(q_index(axis), q_index(axis))], n, max_relative = 1e-8);
            assert_relative_eq!(c[(p_index(axis), p_index(axis))], n, max_relative = 1e-8);
            let t = temperature_from_covariance(&c, axis, model.axis(axis).trap_frequency);
            let half_quantum = HBAR * model.axis(axis).trap_frequency / (2.0 * BOLTZMANN);
            assert!((t - 300.0).abs() <= half_quantum * 1.0001);
        }
        assert_relative_eq!(c[(0, 0)], 0.5, max_relative = 1e-10);
    }

    #[test]
    fn zero_diffusion_gives_zero_covariance() {
        let model = build_linear_model(&SystemParams::paper_defaults()).unwrap();
        let c = solve_continuous_lyapunov(&model.drift, &StateMatrix::zeros()).unwrap();
        assert!(c.amax() == 0.0);
    }

    #[test]
    fn resonant_drive_has_no_cooling() {
        let sys = SystemParams::paper_defaults().with_detuning(0.0).with_pressure_pa(0.3);
        let mut model = build_linear_model(&sys).unwrap();
        for ax in model.axes.iter_mut() {
            ax.noise_heating = 0.0;
        }
        let model = LinearModel::from_parts(model.linewidth, 0.0, model.gas_temperature, model.mass, model.axes);
        // The cavity still adds backaction heating, so the temperature only rises.
        let t = steady_state_temperatures(&model).unwrap();
        assert!(t[1] >= 300.0 * 0.999);
    }

    #[test]
    fn ground_state_temperature() {
        let mut c = StateMatrix::zeros();
        c[(4, 4)] = 0.5;
        c[(5, 5)] = 0.5;
        let w = 2.0 * std::f64::consts::PI * 0.14e6;
        assert_relative_eq!(temperature_from_covariance(&c, Axis::Y, w), 3.36e-6, max_relative = 2e-3);
        c[(4, 4)] = 2.5;
        c[(5, 5)] = 2.5;
        assert_relative_eq!(temperature_from_covariance(&c, Axis::Y, w), 16.8e-6, max_relative = 2e-3);
    }

    #[test]
    fn unstable_model_is_rejected() {
        let sys = SystemParams::paper_defaults()
            .with_detuning(-2.0 * std::f64::consts::PI * 400e3)
            .with_phase(PositionPhase::NODE);
        let model = build_linear_model(&sys).unwrap();
        assert!(matches!(steady_state_covariance(&model), Err(Error::Unstable(_))));
    }
}
