use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_bounded_exponential, fit_bounded_exponential_weighted, sliding_temperature, FitResult, SlidingParams};
use crate::constants::TWO_PI;
use crate::dynamics::propagator::{run_steps, sample_gaussian, stream_rng, ExactPropagator, DIVERGENCE_BOUND};
use crate::dynamics::{build_linear_model, effective_damping, q_index, steady_state_temperatures, steady_state_covariance};
use crate::error::{Error, Result};
use crate::params::{Axis, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Switch from the far detuning to the cooling detuning at t = 0.
    CoolingOn,
    /// Switch from the cooling detuning to the far detuning at t = 0.
    CoolingOff,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::CoolingOn => "cooling_on",
            Direction::CoolingOff => "cooling_off",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationPlan {
    /// System at the cooling detuning (its `tweezer.detuning`).
    pub system: SystemParams,
    /// Detuning with no cavity effect (rad/s).
    pub far_detuning: f64,
    pub ensemble: usize,
    /// Simulated time after the switch (s).
    pub duration: f64,
    /// Simulated time before the switch (s).
    pub pre_duration: f64,
    pub dt: f64,
    pub seed: u64,
    /// Snapshot length in oscillation periods.
    pub window_periods: f64,
    /// Hop as a fraction of the window.
    pub hop_fraction: f64,
    /// Integration half-band in units of the peak FWHM...
    pub band_fwhm: f64,
    /// ...but never narrower than this many resolution bandwidths.
    pub band_min_rbw: f64,
}

impl RelaxationPlan {
    pub fn new(system: SystemParams) -> Self {
        Self {
            system,
            far_detuning: TWO_PI * 20e6,
            ensemble: 150,
            duration: 0.2,
            pre_duration: 0.01,
            dt: 1e-6,
            seed: 0,
            window_periods: 20.0,
            hop_fraction: 0.5,
            band_fwhm: 5.0,
            band_min_rbw: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::Config {
                key: key.into(),
                reason: reason.into(),
            })
        };
        if self.ensemble == 0 {
            return bad("sweep.ensemble", "must be ≥ 1");
        }
        if !(self.dt > 0.0) || !(self.duration > 0.0) || !(self.pre_duration >= 0.0) {
            return bad("sweep.relaxation", "durations must be positive");
        }
        if !(self.hop_fraction > 0.0 && self.hop_fraction <= 1.0) {
            return bad("sweep.hop_fraction", "must lie in (0, 1]");
        }
        if self.window_periods < crate::analysis::sliding::MIN_WINDOW_PERIODS {
            return bad("sweep.window_periods", "must be ≥ 20");
        }
        self.system.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisRelaxation {
    pub axis: Axis,
    pub coupling: f64,
    /// Window-centre times (s); the switch happens at t = 0.
    pub times: Vec<f64>,
    /// Ensemble-mean temperatures (K).
    pub temperatures: Vec<f64>,
    /// Standard errors of the ensemble means (K); zero for a single member.
    pub standard_errors: Vec<f64>,
    pub window_samples: usize,
    pub band_half_width_hz: f64,
    /// Stationary temperatures before and after the switch.
    pub initial_steady_state: f64,
    pub final_steady_state: f64,
    /// γ_c at the cooling detuning for switch-on, γ_gas for switch-off.
    pub reference_rate: f64,
    pub fit: Option<FitResult>,
    pub fit_error: Option<String>,
}

impl AxisRelaxation {
    pub fn fitted_rate(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.value("rate"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationResult {
    pub direction: Direction,
    pub phase: f64,
    pub ensemble: usize,
    pub seed: u64,
    pub gas_damping: f64,
    pub axes: Vec<AxisRelaxation>,
}

/// Simulates the switching protocol for an ensemble and fits each axis'
/// ensemble-averaged snapshot temperatures with a bounded exponential,
/// weighted by the standard error of each ensemble mean. Only windows that
/// start at or after the switch enter the fit.
pub fn run_relaxation_ensemble(plan: &RelaxationPlan, direction: Direction) -> Result<RelaxationResult> {
    plan.validate()?;
    let near = plan.system.clone();
    let far = plan.system.clone().with_detuning(plan.far_detuning);
    let (before, after) = match direction {
        Direction::CoolingOn => (far, near.clone()),
        Direction::CoolingOff => (near.clone(), far),
    };
    let m_before = build_linear_model(&before)?;
    let m_after = build_linear_model(&after)?;
    let c_before = steady_state_covariance(&m_before)?;
    let t_before = steady_state_temperatures(&m_before)?;
    let t_after = steady_state_temperatures(&m_after)?;
    let p_before = ExactPropagator::new(&m_before, plan.dt)?;
    let p_after = ExactPropagator::new(&m_after, plan.dt)?;
    let n_pre = (plan.pre_duration / plan.dt).round() as usize;
    let n_post = (plan.duration / plan.dt).round() as usize;
    let start_time = -(n_pre as f64) * plan.dt + plan.dt;

    let settings: Vec<SlidingParams> = Axis::ALL
        .iter()
        .map(|&axis| {
            let w = m_after.axis(axis).trap_frequency;
            let window = (plan.window_periods * TWO_PI / w / plan.dt).ceil() as usize;
            let rbw = 1.5 / (window as f64 * plan.dt);
            let fwhm_hz = [&m_before, &m_after]
                .iter()
                .filter_map(|m| effective_damping(m, axis).ok())
                .map(|s| s.fwhm / TWO_PI)
                .fold(0.0, f64::max);
            let half = (plan.band_fwhm * fwhm_hz).max(plan.band_min_rbw * rbw);
            let half = half.min(0.9 * w / TWO_PI);
            Ok(SlidingParams {
                window,
                hop: ((window as f64 * plan.hop_fraction).round() as usize).max(1),
                mass: plan.system.particle.mass,
                trap_frequency: w,
                band_half_width: half,
                start_time,
            })
        })
        .collect::<Result<_>>()?;

    let point = match direction {
        Direction::CoolingOn => 0,
        Direction::CoolingOff => 1,
    };
    let members: Vec<Result<Vec<Vec<(f64, f64)>>>> = (0..plan.ensemble)
        .into_par_iter()
        .map(|m| {
            let mut rng = stream_rng(plan.seed, point, m as u64);
            let mut x = sample_gaussian(&c_before, &mut rng);
            let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n_pre + n_post); 3];
            let scale = Axis::ALL.map(|a| m_before.axis(a).metres_per_quadrature());
            let mut record = |x: &crate::dynamics::StateVector| {
                for axis in Axis::ALL {
                    cols[axis.index()].push(scale[axis.index()] * x[q_index(axis)]);
                }
            };
            run_steps(&p_before, &mut x, n_pre, DIVERGENCE_BOUND, &mut rng, |_, x| record(x))?;
            run_steps(&p_after, &mut x, n_post, DIVERGENCE_BOUND, &mut rng, |_, x| record(x))?;
            Axis::ALL
                .iter()
                .map(|&axis| sliding_temperature(&cols[axis.index()], plan.dt, &settings[axis.index()]))
                .collect()
        })
        .collect();

    // per window: (time, Σ T, Σ T²)
    let mut sums: Vec<Vec<(f64, f64, f64)>> = Vec::new();
    for member in members {
        let series = member?;
        if sums.is_empty() {
            sums = series.iter().map(|s| s.iter().map(|&(t, _)| (t, 0.0, 0.0)).collect()).collect();
        }
        for (acc, s) in sums.iter_mut().zip(&series) {
            for (a, (_, temp)) in acc.iter_mut().zip(s) {
                a.1 += temp;
                a.2 += temp * temp;
            }
        }
    }
    let n_members = plan.ensemble as f64;

    let couplings = plan.system.coupling_rates().rates;
    let cooling = plan.system.cooling_rates();
    let gas = plan.system.gas_damping();
    let axes = Axis::ALL
        .iter()
        .map(|&axis| {
            let i = axis.index();
            let s = &settings[i];
            let half_window = 0.5 * s.window as f64 * plan.dt;
            let times: Vec<f64> = sums[i].iter().map(|p| p.0).collect();
            let temps: Vec<f64> = sums[i].iter().map(|p| p.1 / n_members).collect();
            let errors: Vec<f64> = sums[i]
                .iter()
                .map(|p| {
                    let mean = p.1 / n_members;
                    let var = (p.2 / n_members - mean * mean).max(0.0) * n_members / (n_members - 1.0);
                    (var / n_members).sqrt()
                })
                .collect();
            let keep: Vec<usize> = (0..times.len())
                .filter(|&k| times[k] - half_window >= -0.5 * plan.dt)
                .collect();
            let ft: Vec<f64> = keep.iter().map(|&k| times[k]).collect();
            let fy: Vec<f64> = keep.iter().map(|&k| temps[k]).collect();
            let fs: Vec<f64> = keep.iter().map(|&k| errors[k]).collect();
            let weighted = plan.ensemble > 1 && fs.iter().all(|s| *s > 0.0 && s.is_finite());
            let fitted = if weighted {
                fit_bounded_exponential_weighted(&ft, &fy, &fs)
            } else {
                fit_bounded_exponential(&ft, &fy)
            };
            let (fit, fit_error) = match fitted {
                Ok(f) if f.converged => (Some(f), None),
                Ok(f) => (None, Some(format!("fit did not converge: {}", f.message))),
                Err(e) => (None, Some(e.to_string())),
            };
            AxisRelaxation {
                axis,
                coupling: couplings[i],
                times,
                temperatures: temps,
                standard_errors: errors,
                window_samples: s.window,
                band_half_width_hz: s.band_half_width,
                initial_steady_state: t_before[i],
                final_steady_state: t_after[i],
                reference_rate: match direction {
                    Direction::CoolingOn => cooling[i],
                    Direction::CoolingOff => gas,
                },
                fit,
                fit_error,
            }
        })
        .collect();
    Ok(RelaxationResult {
        direction,
        phase: plan.system.phase.radians(),
        ensemble: plan.ensemble,
        seed: plan.seed,
        gas_damping: gas,
        axes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::PositionPhase;

    #[test]
    fn small_switch_off_ensemble_reheats() {
        let sys = SystemParams::paper_defaults().with_phase(PositionPhase::NODE).with_pressure_pa(30.0);
        let mut plan = RelaxationPlan::new(sys);
        plan.ensemble = 256;
        plan.duration = 0.002;
        plan.pre_duration = 0.0005;
        plan.dt = 2e-6;
        let res = run_relaxation_ensemble(&plan, Direction::CoolingOff).unwrap();
        let y = &res.axes[1];
        assert!(y.initial_steady_state < y.final_steady_state);
        let first = y.temperatures[0];
        let last = *y.temperatures.last().unwrap();
        assert!(last > first, "{first} → {last}");
        let rate = y.fitted_rate().expect("fit");
        assert!(rate > 0.6 * res.gas_damping && rate < 1.5 * res.gas_damping, "{rate} vs {}", res.gas_damping);
    }
}
