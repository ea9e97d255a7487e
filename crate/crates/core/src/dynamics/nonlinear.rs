use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{build_linear_model, p_index, q_index, LinearModel, StateVector, STATE_DIM, STATE_LABELS};
use super::propagator::{ExactPropagator, DIVERGENCE_BOUND};
use super::trace::TimeTrace;
use crate::constants::BOLTZMANN;
use crate::error::{Error, Result};
use crate::params::{Axis, SystemParams};

/// Gaussian optical trap. Along each axis the restoring force is
/// F = −mΩ²x·exp(−x²/s²), i.e. the potential mΩ²s²/2·(1 − exp(−x²/s²)),
/// which softens at amplitudes comparable to the length scale s.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearTrapModel {
    pub linear: LinearModel,
    /// Length scales s_i (m).
    pub length_scales: [f64; 3],
}

/// Focal waist λ/(πNA) and Rayleigh range πw²/λ of the tweezer.
pub fn focus_geometry(wavelength: f64, numerical_aperture: f64) -> (f64, f64) {
    let waist = wavelength / (std::f64::consts::PI * numerical_aperture);
    let rayleigh = std::f64::consts::PI * waist * waist / wavelength;
    (waist, rayleigh)
}

/// Length scales matched to a Gaussian focus: the transverse intensity
/// e^{−2r²/w²} gives s = w/√2, and the axial Lorentzian 1/(1 + z²/z_R²) is
/// approximated by e^{−z²/z_R²}.
pub fn trap_length_scales(sys: &SystemParams) -> [f64; 3] {
    let (w, zr) = focus_geometry(sys.cavity.wavelength, sys.tweezer.numerical_aperture);
    let s = w / std::f64::consts::SQRT_2;
    [s, s, zr]
}

/// Thermal frequency pull per kelvin, 3k_B/(4mΩs²) (rad/s/K): the mean
/// frequency shift of a thermal Duffing oscillator at first order in T.
pub fn nonlinear_broadening_coefficient(mass: f64, trap_frequency: f64, length_scale: f64) -> f64 {
    3.0 * BOLTZMANN / (4.0 * mass * trap_frequency * length_scale * length_scale)
}

impl NonlinearTrapModel {
    pub fn new(linear: LinearModel, length_scales: [f64; 3]) -> Result<Self> {
        if length_scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::domain("length_scales", "must all be positive"));
        }
        Ok(Self { linear, length_scales })
    }

    pub fn from_params(sys: &SystemParams) -> Result<Self> {
        Self::new(build_linear_model(sys)?, trap_length_scales(sys))
    }

    /// Coefficient a_i with x²/s² = a_i·q² in zero-point units (x = √2·x_zp·q).
    pub fn quartic_scale(&self, axis: Axis) -> f64 {
        let xzp = self.linear.axis(axis).zero_point_motion;
        let s = self.length_scales[axis.index()];
        2.0 * xzp * xzp / (s * s)
    }

    /// Dimensionless momentum force −Ω q e^{−a q²} on `axis`.
    pub fn restoring_force(&self, axis: Axis, q: f64) -> f64 {
        let a = self.quartic_scale(axis);
        -self.linear.axis(axis).trap_frequency * q * (-a * q * q).exp()
    }

    pub fn broadening_coefficients(&self) -> [f64; 3] {
        Axis::ALL.map(|a| {
            nonlinear_broadening_coefficient(
                self.linear.mass,
                self.linear.axis(a).trap_frequency,
                self.length_scales[a.index()],
            )
        })
    }

    fn max_trap_frequency(&self) -> f64 {
        self.linear
            .axes
            .iter()
            .map(|a| a.trap_frequency)
            .fold(0.0, f64::max)
    }

    /// Internal step count per output sample, so that h ≤ 1/(50·max Ω).
    pub fn substeps(&self, dt: f64) -> usize {
        (dt * 50.0 * self.max_trap_frequency()).ceil().max(1.0) as usize
    }

    fn kick(&self, x: &mut StateVector, tau: f64, a: &[f64; 3]) {
        for axis in Axis::ALL {
            let q = x[q_index(axis)];
            let aq2 = a[axis.index()] * q * q;
            // anharmonic remainder beyond the linear −Ωq already in the drift
            let extra = self.linear.axis(axis).trap_frequency * q * (-(-aq2).exp_m1());
            x[p_index(axis)] += tau * extra;
        }
    }
}

/// Simulates the Gaussian-trap dynamics with output interval `dt`, starting
/// from `initial`.
///
/// Each internal step is a symmetric splitting: half a kick of the anharmonic
/// force remainder, an exact stochastic step of the linear model, and another
/// half kick.
pub fn simulate_nonlinear_from(
    model: &NonlinearTrapModel,
    initial: StateVector,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<TimeTrace> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain("dt", format!("must be positive and finite, got {dt}")));
    }
    let n = (duration / dt).round();
    if !(n >= 100.0) {
        return Err(Error::domain(
            "duration",
            format!("must cover at least 100 steps of dt = {dt:e} s, got {duration:e} s"),
        ));
    }
    let n = n as usize;
    let sub = model.substeps(dt);
    let h = dt / sub as f64;
    let prop = ExactPropagator::new(&model.linear, h)?;
    let a = Axis::ALL.map(|ax| model.quartic_scale(ax));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![Vec::with_capacity(n); STATE_DIM];
    let mut x = initial;
    for i in 0..n {
        for _ in 0..sub {
            model.kick(&mut x, 0.5 * h, &a);
            x = prop.step(&x, &mut rng);
            model.kick(&mut x, 0.5 * h, &a);
        }
        let norm = x.norm();
        if !(norm <= DIVERGENCE_BOUND) {
            return Err(Error::Unstable(format!(
                "state norm {norm:.3e} exceeded {DIVERGENCE_BOUND:.1e} after {:.3e} s (particle lost)",
                (i + 1) as f64 * dt
            )));
        }
        for (col, v) in columns.iter_mut().zip(x.iter()) {
            col.push(*v);
        }
    }
    TimeTrace::new(dt, STATE_LABELS.iter().map(|s| s.to_string()).collect(), columns, seed)
}

pub fn simulate_nonlinear(model: &NonlinearTrapModel, duration: f64, dt: f64, seed: u64) -> Result<TimeTrace> {
    simulate_nonlinear_from(model, StateVector::zeros(), duration, dt, seed)
}
