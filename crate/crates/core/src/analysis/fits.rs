use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lm::{build_result, levenberg_marquardt, FitResult, Transform};
use crate::error::{Error, Result};
use crate::params::Axis;

/// Temperatures and linewidths of one axis measured across pressures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSweepData {
    pub axis: Axis,
    /// Gas pressure (Pa).
    pub pressure: Vec<f64>,
    /// Temperature (K).
    pub temperature: Vec<f64>,
    /// Linewidth (rad/s).
    pub damping: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureSweepData {
    pub gas_temperature: f64,
    pub axes: Vec<AxisSweepData>,
}

/// Per-axis model of a pressure sweep with γ_gas = s·p:
/// T = (s·p·T_gas + Ṫ)/(s·p + γ_c) and γ = √((c_NL·T)² + (s·p + γ_c)²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureSweepModel {
    pub gas_slope: f64,
    pub cooling_rate: f64,
    pub noise_heating: f64,
    pub nonlinear_coefficient: f64,
}

impl PressureSweepModel {
    pub fn temperature(&self, pressure: f64, gas_temperature: f64) -> f64 {
        let g = self.gas_slope * pressure;
        (g * gas_temperature + self.noise_heating) / (g + self.cooling_rate)
    }

    pub fn damping(&self, pressure: f64, gas_temperature: f64) -> f64 {
        let t = self.temperature(pressure, gas_temperature);
        (self.nonlinear_coefficient * t).hypot(self.gas_slope * pressure + self.cooling_rate)
    }
}

fn validate_sweep(data: &PressureSweepData) -> Result<()> {
    if data.axes.is_empty() {
        return Err(Error::Fit("pressure sweep has no axes".into()));
    }
    for a in &data.axes {
        let n = a.pressure.len();
        if a.temperature.len() != n || a.damping.len() != n {
            return Err(Error::Fit(format!("axis {}: mismatched series lengths", a.axis)));
        }
        if n < 6 {
            return Err(Error::Fit(format!("axis {}: need ≥6 pressure points, got {n}", a.axis)));
        }
        let all = a.pressure.iter().chain(&a.temperature).chain(&a.damping);
        if all.clone().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Fit(format!("axis {}: values must be positive and finite", a.axis)));
        }
        let (pmin, pmax) = a
            .pressure
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        if pmax / pmin < 1e3 * (1.0 - 1e-9) {
            return Err(Error::Fit(format!("axis {}: pressures must span ≥3 decades", a.axis)));
        }
    }
    Ok(())
}

/// Joint log-space least-squares fit of the two-bath and damping models.
///
/// Parameters: a shared gas-damping slope `gas_slope` (rad/s/Pa) and per axis
/// `cooling_rate_<axis>` (rad/s), `noise_heating_<axis>` (K/s) and
/// `nonlinear_coefficient_<axis>` (rad/s/K).
pub fn fit_pressure_sweep(data: &PressureSweepData) -> Result<FitResult> {
    validate_sweep(data)?;
    let tg = data.gas_temperature;
    let n_axes = data.axes.len();
    let n_res: usize = data.axes.iter().map(|a| 2 * a.pressure.len()).sum();

    // starting point
    let mut slopes = Vec::new();
    for a in &data.axes {
        let imax = (0..a.pressure.len()).max_by(|&i, &j| a.pressure[i].total_cmp(&a.pressure[j])).unwrap();
        slopes.push(a.damping[imax] / a.pressure[imax]);
    }
    slopes.sort_by(f64::total_cmp);
    let slope0 = slopes[slopes.len() / 2];
    let mut p0 = vec![slope0.ln()];
    for a in &data.axes {
        let imin = (0..a.pressure.len()).min_by(|&i, &j| a.pressure[i].total_cmp(&a.pressure[j])).unwrap();
        let gc0 = (a.damping[imin] - slope0 * a.pressure[imin]).max(1e-3 * a.damping[imin]);
        let tdot0 = (a.temperature[imin] * (gc0 + slope0 * a.pressure[imin]) - slope0 * a.pressure[imin] * tg).max(0.0);
        p0.extend([gc0.ln(), tdot0, 0.0]);
    }
    // seed c_NL from the excess width at the hottest narrow point
    for (k, a) in data.axes.iter().enumerate() {
        let gc = p0[1 + 3 * k].exp();
        let c = a
            .pressure
            .iter()
            .zip(&a.temperature)
            .zip(&a.damping)
            .map(|((p, t), g)| {
                let lin = slope0 * p + gc;
                (g * g - lin * lin).max(0.0).sqrt() / t
            })
            .fold(0.0, f64::max);
        p0[3 + 3 * k] = c.max(1e-9);
    }

    let eval = |p: &DVector<f64>| {
        let s = p[0].exp();
        let mut r = DVector::zeros(n_res);
        let mut j = DMatrix::zeros(n_res, 1 + 3 * n_axes);
        let mut row = 0;
        for (k, a) in data.axes.iter().enumerate() {
            let col = 1 + 3 * k;
            let gc = p[col].exp();
            let tdot = p[col + 1];
            let c = p[col + 2];
            for i in 0..a.pressure.len() {
                let pr = a.pressure[i];
                let u = s * pr + gc;
                let num = s * pr * tg + tdot;
                let t = num / u;
                let cnl = c * t;
                let gamma2 = cnl * cnl + u * u;
                // temperature residual
                r[row] = t.ln() - a.temperature[i].ln();
                let dlt_ds = pr * tg / num - pr / u;
                let dlt_dlns = s * dlt_ds;
                let dlt_dlngc = -gc / u;
                let dlt_dtdot = 1.0 / num;
                j[(row, 0)] = dlt_dlns;
                j[(row, col)] = dlt_dlngc;
                j[(row, col + 1)] = dlt_dtdot;
                // damping residual
                r[row + 1] = 0.5 * gamma2.ln() - a.damping[i].ln();
                let c2t2 = cnl * cnl;
                j[(row + 1, 0)] = (c2t2 * dlt_dlns + u * pr * s) / gamma2;
                j[(row + 1, col)] = (c2t2 * dlt_dlngc + u * gc) / gamma2;
                j[(row + 1, col + 1)] = c2t2 * dlt_dtdot / gamma2;
                j[(row + 1, col + 2)] = c * t * t / gamma2;
                row += 2;
            }
        }
        (r, j)
    };
    let out = levenberg_marquardt(eval, DVector::from_vec(p0));
    let mut spec = vec![("gas_slope".to_string(), "rad/s/Pa", Transform::Log)];
    for a in &data.axes {
        spec.push((format!("cooling_rate_{}", a.axis), "rad/s", Transform::Log));
        spec.push((format!("noise_heating_{}", a.axis), "K/s", Transform::Identity));
        spec.push((format!("nonlinear_coefficient_{}", a.axis), "rad/s/K", Transform::Abs));
    }
    Ok(build_result(&out, &spec))
}

/// Extracts the per-axis model from a pressure-sweep fit.
pub fn pressure_sweep_model(fit: &FitResult, axis: Axis) -> Option<PressureSweepModel> {
    Some(PressureSweepModel {
        gas_slope: fit.get("gas_slope")?.estimate,
        cooling_rate: fit.get(&format!("cooling_rate_{axis}"))?.estimate,
        noise_heating: fit.get(&format!("noise_heating_{axis}"))?.estimate,
        nonlinear_coefficient: fit.get(&format!("nonlinear_coefficient_{axis}"))?.estimate,
    })
}

/// Fits T(t) = T_∞ + (T_0 − T_∞)·e^{−rate·t}. Parameters: `t0` (K),
/// `t_inf` (K) and `rate` (1/s, positive by construction).
pub fn fit_bounded_exponential(times: &[f64], temps: &[f64]) -> Result<FitResult> {
    fit_bounded_exponential_weighted(times, temps, &vec![1.0; temps.len()])
}

/// As [`fit_bounded_exponential`], with residuals divided by the
/// per-point standard errors `sigma`.
pub fn fit_bounded_exponential_weighted(times: &[f64], temps: &[f64], sigma: &[f64]) -> Result<FitResult> {
    let n = times.len();
    if temps.len() != n || sigma.len() != n {
        return Err(Error::Fit("time, temperature and sigma series differ in length".into()));
    }
    if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::Fit("standard errors must be positive and finite".into()));
    }
    let wt: Vec<f64> = sigma.iter().map(|s| 1.0 / s).collect();
    if n < 10 {
        return Err(Error::Fit(format!("need ≥10 time points, got {n}")));
    }
    if times.iter().chain(temps).any(|v| !v.is_finite()) {
        return Err(Error::Fit("series contains non-finite values".into()));
    }
    let (tmin, tmax) = temps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = temps.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if tmax - tmin <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Fit("constant series: relaxation rate is unidentifiable".into()));
    }
    let t_start = times.iter().copied().fold(f64::INFINITY, f64::min);
    let span = times.iter().copied().fold(f64::NEG_INFINITY, f64::max) - t_start;
    if !(span > 0.0) {
        return Err(Error::Fit("time points must span a positive interval".into()));
    }

    // profile the rate on a log grid with (T_0, T_∞) solved linearly
    let linear_fit = |rate: f64| -> Option<(f64, f64, f64)> {
        let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((&t, &y), &w) in times.iter().zip(temps).zip(&wt) {
            let e = (-rate * t).exp();
            let (a1, a2, y) = (w * e, w * (1.0 - e), w * y);
            s11 += a1 * a1;
            s12 += a1 * a2;
            s22 += a2 * a2;
            b1 += a1 * y;
            b2 += a2 * y;
        }
        let det = s11 * s22 - s12 * s12;
        if det.abs() <= 1e-14 * s11 * s22 {
            return None;
        }
        let t0 = (s22 * b1 - s12 * b2) / det;
        let tinf = (s11 * b2 - s12 * b1) / det;
        let rss = times
            .iter()
            .zip(temps)
            .zip(&wt)
            .map(|((&t, &y), &w)| {
                let e = (-rate * t).exp();
                (w * (tinf + (t0 - tinf) * e - y)).powi(2)
            })
            .sum();
        Some((t0, tinf, rss))
    };
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for k in 0..=120 {
        let rate = 0.01 / span * 10f64.powf(k as f64 / 30.0);
        if let Some((t0, tinf, rss)) = linear_fit(rate) {
            if best.is_none_or(|b| rss < b.3) {
                best = Some((t0, tinf, rate, rss));
            }
        }
    }
    let (t0, tinf, rate, _) = best.ok_or_else(|| Error::Fit("no usable starting point".into()))?;

    let out = levenberg_marquardt(
        |p| {
            let (a, b, k) = (p[0], p[1], p[2].exp());
            let mut r = DVector::zeros(n);
            let mut j = DMatrix::zeros(n, 3);
            for (i, ((&t, &y), &w)) in times.iter().zip(temps).zip(&wt).enumerate() {
                let e = (-k * t).exp();
                r[i] = w * (b + (a - b) * e - y);
                j[(i, 0)] = w * e;
                j[(i, 1)] = w * (1.0 - e);
                j[(i, 2)] = -w * (a - b) * k * t * e;
            }
            (r, j)
        },
        DVector::from_vec(vec![t0, tinf, rate.ln()]),
    );
    let result = build_result(
        &out,
        &[
            ("t0".into(), "K", Transform::Identity),
            ("t_inf".into(), "K", Transform::Identity),
            ("rate".into(), "1/s", Transform::Log),
        ],
    );
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::TWO_PI;
    use approx::assert_relative_eq;

    pub(crate) fn synthetic_sweep(truth: &[(Axis, PressureSweepModel)], tg: f64) -> PressureSweepData {
        let pressures: Vec<f64> = (0..13).map(|k| 1e-3 * 10f64.powf(k as f64 * 0.5)).collect();
        PressureSweepData {
            gas_temperature: tg,
            axes: truth
                .iter()
                .map(|(axis, m)| AxisSweepData {
                    axis: *axis,
                    pressure: pressures.clone(),
                    temperature: pressures.iter().map(|&p| m.temperature(p, tg)).collect(),
                    damping: pressures.iter().map(|&p| m.damping(p, tg)).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn noiseless_pressure_sweep_is_recovered() {
        let slope = TWO_PI * 3.057 / 0.3;
        let truth = [
            (Axis::X, PressureSweepModel { gas_slope: slope, cooling_rate: TWO_PI * 90.0, noise_heating: 33.0, nonlinear_coefficient: 20.0 }),
            (Axis::Y, PressureSweepModel { gas_slope: slope, cooling_rate: TWO_PI * 1.3e3, noise_heating: 33.0, nonlinear_coefficient: 27.0 }),
            (Axis::Z, PressureSweepModel { gas_slope: slope, cooling_rate: TWO_PI * 10.0, noise_heating: 330.0, nonlinear_coefficient: 5.0 }),
        ];
        let data = synthetic_sweep(&truth, 300.0);
        let fit = fit_pressure_sweep(&data).unwrap();
        assert!(fit.converged, "{}", fit.message);
        for (axis, m) in truth {
            let got = pressure_sweep_model(&fit, axis).unwrap();
            assert_relative_eq!(got.gas_slope, m.gas_slope, max_relative = 1e-3);
            assert_relative_eq!(got.cooling_rate, m.cooling_rate, max_relative = 1e-3);
            assert_relative_eq!(got.noise_heating, m.noise_heating, max_relative = 1e-3);
            assert_relative_eq!(got.nonlinear_coefficient, m.nonlinear_coefficient, max_relative = 1e-3);
        }
    }

    #[test]
    fn sweep_preconditions() {
        let m = PressureSweepModel { gas_slope: 60.0, cooling_rate: 8e3, noise_heating: 33.0, nonlinear_coefficient: 10.0 };
        let mut data = synthetic_sweep(&[(Axis::Y, m)], 300.0);
        data.axes[0].pressure.truncate(5);
        data.axes[0].temperature.truncate(5);
        data.axes[0].damping.truncate(5);
        assert!(matches!(fit_pressure_sweep(&data), Err(Error::Fit(_))));
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let times: Vec<f64> = (0..40).map(|i| i as f64 * 5e-3).collect();
        let rate = TWO_PI * 3.0;
        let temps: Vec<f64> = times.iter().map(|t| 300.0 + (0.7 - 300.0) * (-rate * t).exp()).collect();
        let fit = fit_bounded_exponential(&times, &temps).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.value("rate"), rate, max_relative = 1e-9);
        assert_relative_eq!(fit.value("t0"), 0.7, max_relative = 1e-9);
        assert_relative_eq!(fit.value("t_inf"), 300.0, max_relative = 1e-9);
    }

    #[test]
    fn constant_series_is_an_error() {
        let times: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(matches!(fit_bounded_exponential(&times, &[4.0; 20]), Err(Error::Fit(_))));
        assert!(fit_bounded_exponential(&times[..5], &[1.0, 2.0, 3.0, 4.0, 5.0]).is_err());
    }
}
