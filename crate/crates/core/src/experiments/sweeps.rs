use rayon::prelude::*;

use super::plan::{AxisOutcome, Mode, Provenance, SweepPlan, SweepPoint, SweepResult, SweepVariable, TrajectorySettings};
use crate::analysis::{damping_model, fwhm_damping, welch_psd_samples, WelchParams};
use crate::constants::{BOLTZMANN, HBAR, TWO_PI};
use crate::dynamics::nonlinear::{simulate_nonlinear_from, trap_length_scales, NonlinearTrapModel};
use crate::dynamics::propagator::{run_steps, sample_gaussian, stream_rng, ExactPropagator, DIVERGENCE_BOUND};
use crate::dynamics::{
    build_linear_model, effective_damping, p_index, q_index, steady_state_covariance, temperature_from_covariance,
    LinearModel, StateVector,
};
use crate::error::{Error, Result};
use crate::params::{Axis, PositionPhase, SystemParams};

/// Pressures 10⁻⁵…10 mbar at half-decade spacing (Pa).
pub fn default_pressure_grid() -> Vec<f64> {
    (0..=12)
        .map(|k| 1e-5 * 10f64.powf(0.5 * k as f64) * crate::constants::PA_PER_MBAR)
        .collect()
}

/// Detunings 2π×{0.3, 0.4, 0.6, 1, 2, 5, 10, 20} MHz (rad/s).
pub fn default_detuning_grid() -> Vec<f64> {
    [0.3, 0.4, 0.6, 1.0, 2.0, 5.0, 10.0, 20.0].map(|f| TWO_PI * f * 1e6).to_vec()
}

/// Tweezer powers 0.24…0.5 W (W).
pub fn default_power_grid() -> Vec<f64> {
    vec![0.24, 0.29, 0.34, 0.39, 0.45, 0.5]
}

pub fn paper_phases() -> Vec<PositionPhase> {
    vec![PositionPhase::NODE, PositionPhase::SLOPE, PositionPhase::ANTINODE]
}

/// Temperatures and linewidths from trajectories started in the stationary
/// state of the linear model.
struct TrajectoryEstimate {
    temperature: [f64; 3],
    damping: [Option<f64>; 3],
    notes: Vec<String>,
}

fn segment_length(n: usize) -> usize {
    let mut seg = 256;
    while seg * 8 <= n {
        seg *= 2;
    }
    seg.min(n)
}

fn trajectory_estimate(
    model: &LinearModel,
    nonlinear: Option<&NonlinearTrapModel>,
    settings: &TrajectorySettings,
    seed: u64,
    point: u64,
) -> Result<TrajectoryEstimate> {
    let c = steady_state_covariance(model)?;
    let n = (settings.duration / settings.dt).round() as usize;
    if n < 512 {
        return Err(Error::Config {
            key: "sweep.duration_s".into(),
            reason: format!("trajectory needs ≥512 samples of dt, got {n}"),
        });
    }
    let prop = ExactPropagator::new(model, settings.dt)?;
    let members: Vec<Result<([f64; 3], [Vec<f64>; 3])>> = (0..settings.ensemble)
        .into_par_iter()
        .map(|m| {
            let mut rng = stream_rng(seed, point, m as u64);
            let x0 = sample_gaussian(&c, &mut rng);
            let mut sums = [[0.0; 2]; 3];
            let mut cols: [Vec<f64>; 3] = Default::default();
            let mut push = |x: &StateVector| {
                for axis in Axis::ALL {
                    let (q, p) = (x[q_index(axis)], x[p_index(axis)]);
                    sums[axis.index()][0] += q * q;
                    sums[axis.index()][1] += p * p;
                    cols[axis.index()].push(q);
                }
            };
            match nonlinear {
                None => {
                    let mut x = x0;
                    run_steps(&prop, &mut x, n, DIVERGENCE_BOUND, &mut rng, |_, x| push(x))?;
                }
                Some(nl) => {
                    let member_seed = rand::Rng::random::<u64>(&mut rng);
                    let trace = simulate_nonlinear_from(nl, x0, settings.duration, settings.dt, member_seed)?;
                    for i in 0..trace.n_samples() {
                        let x = StateVector::from_fn(|k, _| trace.column(k)[i]);
                        push(&x);
                    }
                }
            }
            let temps = Axis::ALL.map(|a| {
                let w = model.axis(a).trap_frequency;
                let [q2, p2] = sums[a.index()];
                HBAR * w * (q2 + p2) / (2.0 * BOLTZMANN * n as f64)
            });
            Ok((temps, cols))
        })
        .collect();

    let mut temperature = [0.0; 3];
    let mut spectra: [Option<crate::analysis::Spectrum>; 3] = Default::default();
    let seg = segment_length(n);
    for member in members {
        let (temps, cols) = member?;
        for axis in Axis::ALL {
            let i = axis.index();
            temperature[i] += temps[i] / settings.ensemble as f64;
            let s = welch_psd_samples(&cols[i], settings.dt, &WelchParams::new(seg))?;
            match &mut spectra[i] {
                Some(acc) => acc.psd.iter_mut().zip(&s.psd).for_each(|(a, b)| *a += b),
                slot => *slot = Some(s),
            }
        }
    }
    let mut notes = Vec::new();
    let damping = Axis::ALL.map(|axis| {
        let spec = spectra[axis.index()].as_ref()?;
        let f0 = model.axis(axis).trap_frequency / TWO_PI;
        match fwhm_damping(spec, Some((0.7 * f0, (1.3 * f0).min(spec.max_frequency())))) {
            Ok(est) => Some(est.damping),
            Err(e) => {
                notes.push(format!("{axis}: {e}"));
                None
            }
        }
    });
    Ok(TrajectoryEstimate {
        temperature,
        damping,
        notes,
    })
}

/// Evaluates one parameter point. Instability is recorded, not raised.
pub fn evaluate_point(
    sys: &SystemParams,
    mode: Mode,
    settings: &TrajectorySettings,
    seed: u64,
    index: usize,
    value: f64,
) -> Result<SweepPoint> {
    let model = build_linear_model(sys)?;
    let cooling = sys.cooling_rates();
    let stable = model.is_stable();
    let mut point = SweepPoint {
        index,
        value,
        phase: sys.phase.radians(),
        gas_damping: sys.gas_damping(),
        stable,
        predicate_stable: sys.is_dynamically_stable(),
        axes: Axis::ALL
            .iter()
            .map(|&axis| AxisOutcome {
                axis,
                temperature: None,
                damping: None,
                cooling_rate: cooling[axis.index()],
            })
            .collect(),
        notes: Vec::new(),
    };
    if !stable {
        point.notes.push(format!(
            "unstable: max Re λ = {:.3e} 1/s (particle lost)",
            model.max_real_eigenvalue()
        ));
        return Ok(point);
    }
    match mode {
        Mode::Oracle => {
            let c = steady_state_covariance(&model)?;
            let nl = NonlinearTrapModel::new(model.clone(), trap_length_scales(sys))?;
            let coeff = nl.broadening_coefficients();
            for axis in Axis::ALL {
                let i = axis.index();
                let t = temperature_from_covariance(&c, axis, model.axis(axis).trap_frequency);
                point.axes[i].temperature = Some(t);
                match effective_damping(&model, axis) {
                    Ok(shape) => point.axes[i].damping = Some(damping_model(coeff[i] * t, shape.fwhm, 0.0)),
                    Err(e) => point.notes.push(format!("{axis}: {e}")),
                }
            }
        }
        Mode::Trajectory | Mode::Nonlinear => {
            let nl = match mode {
                Mode::Nonlinear => Some(NonlinearTrapModel::new(model.clone(), trap_length_scales(sys))?),
                _ => None,
            };
            match trajectory_estimate(&model, nl.as_ref(), settings, seed, index as u64) {
                Ok(est) => {
                    for axis in Axis::ALL {
                        point.axes[axis.index()].temperature = Some(est.temperature[axis.index()]);
                        point.axes[axis.index()].damping = est.damping[axis.index()];
                    }
                    point.notes.extend(est.notes);
                }
                Err(Error::Unstable(msg)) => {
                    point.stable = false;
                    point.notes.push(format!("unstable: {msg}"));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(point)
}

/// Runs every (grid value, phase) combination of the plan in parallel and
/// returns points ordered by grid index, then phase.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let jobs: Vec<(usize, f64, PositionPhase)> = plan
        .values
        .iter()
        .flat_map(|&v| plan.phases.iter().map(move |&p| (v, p)))
        .enumerate()
        .map(|(i, (v, p))| (i, v, p))
        .collect();
    let points: Vec<Result<SweepPoint>> = jobs
        .par_iter()
        .map(|&(index, value, phase)| {
            let sys = plan.variable.apply(&plan.system, value)?.with_phase(phase);
            evaluate_point(&sys, plan.mode, &plan.trajectory, plan.seed, index, value)
        })
        .collect();
    Ok(SweepResult {
        variable: plan.variable,
        points: points.into_iter().collect::<Result<_>>()?,
        provenance: Provenance {
            seed: plan.seed,
            mode: plan.mode,
            trajectory: plan.trajectory,
        },
    })
}

/// Pressure sweep over node, slope and antinode (unless the plan already
/// lists phases).
pub fn run_pressure_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    if plan.variable != SweepVariable::Pressure {
        return Err(Error::Config {
            key: "sweep".into(),
            reason: "pressure sweep requires a pressure grid".into(),
        });
    }
    run_sweep(plan)
}

pub fn run_detuning_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    if plan.variable != SweepVariable::Detuning {
        return Err(Error::Config {
            key: "sweep".into(),
            reason: "detuning sweep requires a detuning grid".into(),
        });
    }
    run_sweep(plan)
}

/// Power sweep evaluated at each axis' best cooling position: the node for
/// x and y, the antinode for z.
pub fn run_power_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    if plan.variable != SweepVariable::Power {
        return Err(Error::Config {
            key: "sweep".into(),
            reason: "power sweep requires a power grid".into(),
        });
    }
    let plan = plan
        .clone()
        .with_phases(vec![PositionPhase::NODE, PositionPhase::ANTINODE]);
    run_sweep(&plan)
}

/// Best-position phase of each axis in a power sweep.
pub fn best_cooling_phase(axis: Axis) -> PositionPhase {
    match axis {
        Axis::X | Axis::Y => PositionPhase::NODE,
        Axis::Z => PositionPhase::ANTINODE,
    }
}
