use super::model::LinearModel;
use crate::error::{Error, Result};
use crate::params::Axis;

/// Expected mode temperature of an uncoupled oscillator relaxing towards its
/// gas bath (plus technical heating).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatingCurve {
    pub gas_damping: f64,
    pub gas_temperature: f64,
    pub noise_heating: f64,
    pub start_temperature: f64,
}

impl HeatingCurve {
    /// Reads the bath parameters of `axis` from a model whose couplings all
    /// vanish.
    pub fn from_model(model: &LinearModel, axis: Axis, start_temperature: f64) -> Result<Self> {
        if model.axes.iter().any(|a| a.coupling != 0.0) {
            return Err(Error::domain("coupling", "heating curve requires a decoupled model (g = 0)"));
        }
        let mech = model.axis(axis);
        Ok(Self {
            gas_damping: mech.gas_damping,
            gas_temperature: model.gas_temperature,
            noise_heating: mech.noise_heating,
            start_temperature,
        })
    }

    /// Asymptotic temperature (γT_gas + Ṫ)/γ; infinite without gas damping
    /// unless there is no heating at all.
    pub fn final_temperature(&self) -> f64 {
        if self.gas_damping > 0.0 {
            (self.gas_damping * self.gas_temperature + self.noise_heating) / self.gas_damping
        } else if self.noise_heating > 0.0 {
            f64::INFINITY
        } else {
            self.start_temperature
        }
    }

    pub fn temperature_at(&self, t: f64) -> f64 {
        if self.gas_damping > 0.0 {
            let t_inf = self.final_temperature();
            let x = -self.gas_damping * t;
            self.start_temperature * x.exp() - t_inf * x.exp_m1()
        } else {
            self.start_temperature + self.noise_heating * t
        }
    }
}

/// Samples the heating curve at `n` equally spaced times over `[0, duration]`.
pub fn heating_trajectory(curve: &HeatingCurve, duration: f64, n: usize) -> Vec<(f64, f64)> {
    let steps = n.max(2) - 1;
    (0..=steps)
        .map(|k| {
            let t = duration * k as f64 / steps as f64;
            (t, curve.temperature_at(t))
        })
        .collect()
}
