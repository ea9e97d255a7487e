use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::model::{LinearModel, StateMatrix, StateVector, STATE_DIM, STATE_LABELS};
use super::trace::TimeTrace;
use crate::error::{Error, Result};

/// Default state-norm bound (zero-point units) beyond which a trajectory is
/// declared lost.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Default output interval: 5 MHz sampling.
pub const DEFAULT_DT: f64 = 0.2e-6;

/// RNG for one member of an ensemble: an independent ChaCha stream per
/// (point, member) pair under a master seed.
pub fn stream_rng(master_seed: u64, point: u64, member: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((point << 32) | (member & 0xffff_ffff));
    rng
}

pub fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R) -> StateVector {
    StateVector::from_fn(|_, _| rng.sample(StandardNormal))
}

/// Symmetric square-root-like factor F with F·Fᵀ = C, clipping tiny negative
/// eigenvalues produced by round-off.
pub fn covariance_factor(c: &StateMatrix) -> StateMatrix {
    let sym = (c + c.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut f = eig.eigenvectors;
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        for i in 0..STATE_DIM {
            f[(i, j)] *= s;
        }
    }
    f
}

/// Draws one sample of a zero-mean Gaussian with covariance `c`.
pub fn sample_gaussian<R: Rng + ?Sized>(c: &StateMatrix, rng: &mut R) -> StateVector {
    covariance_factor(c) * standard_normal_vector(rng)
}

/// Exact one-step map of dx = M x dt + dW:
/// x(t + dt) = Φ x(t) + ξ with Φ = e^{M dt} and Cov ξ = ∫₀^dt e^{Ms} D e^{Mᵀs} ds.
///
/// Both are computed by Taylor series on a short sub-interval followed by
/// repeated doubling, which avoids the overflow of block-exponential methods at
/// large ‖M‖ dt.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    pub dt: f64,
    pub transition: StateMatrix,
    pub noise_covariance: StateMatrix,
    noise_factor: StateMatrix,
}

impl ExactPropagator {
    pub fn new(model: &LinearModel, dt: f64) -> Result<Self> {
        Self::from_matrices(&model.drift, &model.diffusion, dt)
    }

    pub fn from_matrices(m: &StateMatrix, d: &StateMatrix, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain("dt", format!("must be positive and finite, got {dt}")));
        }
        let norm = m.abs().row_sum().max();
        let mut doublings = 0u32;
        let mut h = dt;
        while norm * h > 0.25 {
            h *= 0.5;
            doublings += 1;
        }

        let mh = m * h;
        let mut phi = StateMatrix::identity();
        let mut term = StateMatrix::identity();
        // Q(h) = Σ h^{n+1}/(n+1)! Lⁿ(D), L(X) = M X + X Mᵀ
        let mut lterm = *d;
        let mut q = d * h;
        let mut coeff = h;
        for n in 1..40 {
            term = term * mh / n as f64;
            phi += term;
            lterm = m * lterm + lterm * m.transpose();
            coeff *= h / (n + 1) as f64;
            let dq = lterm * coeff;
            q += dq;
            if term.amax() < 1e-18 && dq.amax() <= 1e-18 * q.amax() {
                break;
            }
        }
        for _ in 0..doublings {
            q += phi * q * phi.transpose();
            phi = phi * phi;
        }
        let q = (q + q.transpose()) * 0.5;
        Ok(Self {
            dt,
            transition: phi,
            noise_covariance: q,
            noise_factor: covariance_factor(&q),
        })
    }

    pub fn step<R: Rng + ?Sized>(&self, x: &StateVector, rng: &mut R) -> StateVector {
        self.transition * x + self.noise_factor * standard_normal_vector(rng)
    }

    /// Deterministic part only (no noise).
    pub fn step_mean(&self, x: &StateVector) -> StateVector {
        self.transition * x
    }
}

/// Advances `x` through `n_steps` steps, calling `observe(step_index, &x)`
/// after each one. Fails as soon as ‖x‖ exceeds `bound`.
pub fn run_steps<R: Rng + ?Sized>(
    prop: &ExactPropagator,
    x: &mut StateVector,
    n_steps: usize,
    bound: f64,
    rng: &mut R,
    mut observe: impl FnMut(usize, &StateVector),
) -> Result<()> {
    for i in 0..n_steps {
        *x = prop.step(x, rng);
        let norm = x.norm();
        if !(norm <= bound) {
            return Err(Error::Unstable(format!(
                "state norm {norm:.3e} exceeded {bound:.1e} after {:.3e} s (particle lost)",
                (i + 1) as f64 * prop.dt
            )));
        }
        observe(i, x);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    pub initial_state: StateVector,
    pub divergence_bound: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            initial_state: StateVector::zeros(),
            divergence_bound: DIVERGENCE_BOUND,
        }
    }
}

fn sample_count(duration: f64, dt: f64) -> Result<usize> {
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
    Ok(n as usize)
}

/// Simulates the linear model from the zero state. The trace holds all eight
/// state channels; sample k is the state at time (k + 1)·dt.
pub fn simulate(model: &LinearModel, duration: f64, dt: f64, seed: u64) -> Result<TimeTrace> {
    simulate_with(model, duration, dt, seed, &SimulationOptions::default())
}

pub fn simulate_with(
    model: &LinearModel,
    duration: f64,
    dt: f64,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<TimeTrace> {
    let n = sample_count(duration, dt)?;
    let prop = ExactPropagator::new(model, dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![Vec::with_capacity(n); STATE_DIM];
    let mut x = opts.initial_state;
    run_steps(&prop, &mut x, n, opts.divergence_bound, &mut rng, |_, x| {
        for (col, v) in columns.iter_mut().zip(x.iter()) {
            col.push(*v);
        }
    })?;
    TimeTrace::new(dt, STATE_LABELS.iter().map(|s| s.to_string()).collect(), columns, seed)
}

/// Streaming mean and covariance of state vectors.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    count: u64,
    mean: StateVector,
    m2: StateMatrix,
}

impl Default for MomentAccumulator {
    fn default() -> Self {
        Self {
            count: 0,
            mean: StateVector::zeros(),
            m2: StateMatrix::zeros(),
        }
    }
}

impl MomentAccumulator {
    pub fn push(&mut self, x: &StateVector) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        let delta2 = x - self.mean;
        self.m2 += delta * delta2.transpose();
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> StateVector {
        self.mean
    }

    /// Population covariance about the sample mean.
    pub fn covariance(&self) -> StateMatrix {
        if self.count == 0 {
            return StateMatrix::zeros();
        }
        self.m2 / self.count as f64
    }

    /// Second moments ⟨x xᵀ⟩ about zero.
    pub fn second_moment(&self) -> StateMatrix {
        self.covariance() + self.mean * self.mean.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::lyapunov::steady_state_covariance;
    use crate::dynamics::model::build_linear_model;
    use crate::params::SystemParams;

    fn default_model() -> LinearModel {
        build_linear_model(&SystemParams::paper_defaults()).unwrap()
    }

    #[test]
    fn noise_covariance_is_stationary_increment() {
        // For a stable model, C = Φ C Φᵀ + Q exactly.
        let model = default_model();
        let c = steady_state_covariance(&model).unwrap();
        for dt in [1e-8, 1e-6, 1e-4] {
            let prop = ExactPropagator::new(&model, dt).unwrap();
            let lhs = prop.transition * c * prop.transition.transpose() + prop.noise_covariance;
            let err = (lhs - c).amax() / c.amax();
            assert!(err < 1e-8, "dt = {dt}: {err:e}");
        }
    }

    #[test]
    fn cavity_decays_deterministically() {
        let sys = SystemParams::paper_defaults().with_g0(0.0);
        let model = build_linear_model(&sys).unwrap();
        let dt = 1e-7;
        let prop = ExactPropagator::new(&model, dt).unwrap();
        let mut x = StateVector::zeros();
        x[0] = 1.0;
        for k in 1..=50 {
            x = prop.step_mean(&x);
            let t = k as f64 * dt;
            let env = (-0.5 * model.linewidth * t).exp();
            let expect = env * (model.detuning * t).cos();
            assert!((x[0] - expect).abs() < 1e-12, "{} vs {}", x[0], expect);
            assert!((x[1] + env * (model.detuning * t).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn simulation_is_bit_reproducible() {
        let model = default_model();
        let a = simulate(&model, 2e-4, 1e-6, 11).unwrap();
        let b = simulate(&model, 2e-4, 1e-6, 11).unwrap();
        let c = simulate(&model, 2e-4, 1e-6, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn too_short_duration_is_rejected() {
        let model = default_model();
        assert!(simulate(&model, 50e-6, 1e-6, 0).is_err());
    }

    #[test]
    fn unstable_model_diverges() {
        let sys = SystemParams::paper_defaults()
            .with_detuning(-2.0 * std::f64::consts::PI * 400e3)
            .with_pressure_pa(1e-3);
        let model = build_linear_model(&sys).unwrap();
        let err = simulate(&model, 1.0, 1e-4, 1).unwrap_err();
        assert!(matches!(err, Error::Unstable(_)));
    }

    #[test]
    fn thermal_oscillator_variance_matches_equipartition() {
        let sys = SystemParams::paper_defaults().with_g0(0.0).with_pressure_pa(300.0);
        let model = build_linear_model(&sys).unwrap();
        let c = steady_state_covariance(&model).unwrap();
        let prop = ExactPropagator::new(&model, 2e-5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = sample_gaussian(&c, &mut rng);
        let mut acc = MomentAccumulator::default();
        run_steps(&prop, &mut x, 200_000, DIVERGENCE_BOUND, &mut rng, |_, x| acc.push(x)).unwrap();
        let s = acc.second_moment();
        // γ_gas·T ≈ 8e4, so the relative scatter is about 0.5%.
        for i in 2..8 {
            let rel = s[(i, i)] / c[(i, i)] - 1.0;
            assert!(rel.abs() < 0.03, "channel {i}: {rel}");
        }
    }

    #[test]
    fn streams_are_distinct() {
        let mut a = stream_rng(1, 0, 0);
        let mut b = stream_rng(1, 0, 1);
        let mut c = stream_rng(1, 1, 0);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert!(x != y && y != z && x != z);
    }
}
