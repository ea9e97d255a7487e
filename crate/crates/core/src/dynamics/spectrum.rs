use nalgebra::SMatrix;
use num_complex::Complex64;

use super::model::{q_index, LinearModel, STATE_DIM};
use crate::constants::TWO_PI;
use crate::error::{Error, Result};
use crate::params::Axis;

type ComplexMatrix = SMatrix<Complex64, STATE_DIM, STATE_DIM>;

/// One-sided PSD (per Hz) of state component `index` at ordinary frequency
/// `f_hz`: P(f) = 2·[H D H†]_jj with H = (M + iωI)⁻¹ and ω = 2πf.
pub fn analytic_psd_at(model: &LinearModel, index: usize, f_hz: f64) -> Result<f64> {
    let omega = TWO_PI * f_hz;
    let a = ComplexMatrix::from_fn(|i, j| {
        let re = model.drift[(i, j)];
        Complex64::new(re, if i == j { omega } else { 0.0 })
    });
    let h = a
        .try_inverse()
        .ok_or_else(|| Error::Analysis(format!("resolvent is singular at {f_hz} Hz")))?;
    let row = h.row(index);
    let mut s = 0.0;
    for k in 0..STATE_DIM {
        for l in 0..STATE_DIM {
            let d = model.diffusion[(k, l)];
            if d != 0.0 {
                s += (row[k] * row[l].conj()).re * d;
            }
        }
    }
    Ok(2.0 * s)
}

pub fn analytic_psd(model: &LinearModel, index: usize, freqs_hz: &[f64]) -> Result<Vec<f64>> {
    freqs_hz.iter().map(|&f| analytic_psd_at(model, index, f)).collect()
}

/// Peak frequency (Hz) and full width at half maximum (rad/s) of the analytic
/// position spectrum of `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakShape {
    pub peak_hz: f64,
    pub peak_psd: f64,
    pub fwhm: f64,
}

/// Effective damping of `axis` read off as the FWHM of the analytic spectrum.
pub fn effective_damping(model: &LinearModel, axis: Axis) -> Result<PeakShape> {
    if !model.is_stable() {
        return Err(Error::Unstable("spectrum of an unstable model is undefined".into()));
    }
    let idx = q_index(axis);
    let f0 = model.axis(axis).trap_frequency / TWO_PI;
    let psd = |f: f64| analytic_psd_at(model, idx, f);

    // coarse scan then golden-section refinement
    let (lo, hi) = (0.5 * f0, 1.5 * f0);
    let n = 2001;
    let mut best = (f0, psd(f0)?);
    for k in 0..n {
        let f = lo + (hi - lo) * k as f64 / (n - 1) as f64;
        let v = psd(f)?;
        if v > best.1 {
            best = (f, v);
        }
    }
    let step = (hi - lo) / (n - 1) as f64;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (psd(c)?, psd(d)?);
    for _ in 0..200 {
        if (b - a) < 1e-12 * f0 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = psd(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = psd(d)?;
        }
    }
    let peak_hz = 0.5 * (a + b);
    let peak = psd(peak_hz)?;
    let half = 0.5 * peak;

    let crossing = |dir: f64| -> Result<f64> {
        let mut inner = peak_hz;
        let mut width = 1e-6 * f0;
        let mut outer = peak_hz + dir * width;
        while psd(outer)? > half {
            inner = outer;
            width *= 2.0;
            outer = peak_hz + dir * width;
            if outer <= 0.0 || width > 10.0 * f0 {
                return Err(Error::Analysis(format!("no half-maximum crossing for axis {axis}")));
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (inner + outer);
            if psd(mid)? > half {
                inner = mid;
            } else {
                outer = mid;
            }
            if (outer - inner).abs() < 1e-13 * f0 {
                break;
            }
        }
        Ok(0.5 * (inner + outer))
    };
    let upper = crossing(1.0)?;
    let lower = crossing(-1.0)?;
    Ok(PeakShape {
        peak_hz,
        peak_psd: peak,
        fwhm: TWO_PI * (upper - lower),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::lyapunov::steady_state_covariance;
    use crate::dynamics::model::build_linear_model;
    use crate::params::SystemParams;
    use approx::assert_relative_eq;

    #[test]
    fn area_matches_stationary_variance() {
        let model = build_linear_model(&SystemParams::paper_defaults()).unwrap();
        let c = steady_state_covariance(&model).unwrap();
        let idx = q_index(Axis::Y);
        let f0 = model.axis(Axis::Y).trap_frequency / TWO_PI;
        // trapezoid over a wide band; the peak is ~1 kHz wide
        let (lo, hi, n) = (f0 - 100e3, f0 + 100e3, 400_001);
        let df = (hi - lo) / (n - 1) as f64;
        let mut area = 0.0;
        for k in 0..n {
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            area += w * analytic_psd_at(&model, idx, lo + k as f64 * df).unwrap() * df;
        }
        assert_relative_eq!(area, c[(idx, idx)], max_relative = 0.02);
    }

    #[test]
    fn decoupled_width_is_gas_damping() {
        let sys = SystemParams::paper_defaults().with_g0(0.0).with_pressure_pa(100.0);
        let model = build_linear_model(&sys).unwrap();
        let shape = effective_damping(&model, Axis::X).unwrap();
        assert_relative_eq!(shape.fwhm, sys.gas_damping(), max_relative = 1e-4);
    }
}
