use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lm::levenberg_marquardt;
use super::welch::Spectrum;
use crate::constants::TWO_PI;
use crate::error::{Error, Result};

/// Peak linewidth read two ways: direct half-maximum crossings and a
/// Lorentzian fit seeded by them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinewidthEstimate {
    /// Lorentzian FWHM as an angular rate (rad/s).
    pub damping: f64,
    /// Half-maximum crossing width (rad/s).
    pub damping_direct: f64,
    pub center_hz: f64,
    pub peak_psd: f64,
    pub background: f64,
    pub fit_converged: bool,
}

/// Minimum number of bins above half maximum.
const MIN_BINS_ABOVE_HALF: usize = 5;

/// Linewidth of the dominant peak inside `band` (Hz), or of the whole
/// spectrum excluding the DC bin.
pub fn fwhm_damping(spectrum: &Spectrum, band: Option<(f64, f64)>) -> Result<LinewidthEstimate> {
    let (lo, hi) = band.unwrap_or((spectrum.frequencies[0] + 0.5 * spectrum.bin_width, spectrum.max_frequency()));
    let range = spectrum.band_indices(lo, hi);
    let peak = spectrum
        .peak_index(lo, hi)
        .ok_or_else(|| Error::Analysis("no spectral bins in the requested band".into()))?;
    let psd = &spectrum.psd;
    let f = &spectrum.frequencies;
    let half = 0.5 * psd[peak];

    let mut left = peak;
    while left > range.start && psd[left - 1] > half {
        left -= 1;
    }
    let mut right = peak;
    while right + 1 < range.end && psd[right + 1] > half {
        right += 1;
    }
    if left == range.start || right + 1 == range.end {
        return Err(Error::Analysis("peak clipped: no half-maximum crossing inside the band".into()));
    }
    let above = right - left + 1;
    let interp = |i: usize, j: usize| f[i] + (half - psd[i]) * (f[j] - f[i]) / (psd[j] - psd[i]);
    let f_lo = interp(left - 1, left);
    let f_hi = interp(right, right + 1);
    let direct = f_hi - f_lo;
    if above < MIN_BINS_ABOVE_HALF || direct < 3.0 * spectrum.resolution_bandwidth {
        return Err(Error::Analysis(format!(
            "peak under-resolved: FWHM {direct:.3} Hz over {above} bins with resolution bandwidth {:.3} Hz; use a longer trace",
            spectrum.resolution_bandwidth
        )));
    }

    // Lorentzian A·(w/2)²/((f − f0)² + (w/2)²) + B over ±5 widths
    let lo_fit = (f[peak] - 5.0 * direct).max(lo);
    let hi_fit = (f[peak] + 5.0 * direct).min(hi);
    let fit_range = spectrum.band_indices(lo_fit, hi_fit);
    let xs = &f[fit_range.clone()];
    let ys = &psd[fit_range];
    let scale = psd[peak];
    let p0 = DVector::from_vec(vec![f[peak], direct, 1.0, 0.0]);
    let out = levenberg_marquardt(
        |p| {
            let (f0, w, a, b) = (p[0], p[1], p[2], p[3]);
            let hw2 = 0.25 * w * w;
            let mut r = DVector::zeros(xs.len());
            let mut j = DMatrix::zeros(xs.len(), 4);
            for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
                let d = x - f0;
                let den = d * d + hw2;
                let l = hw2 / den;
                r[i] = a * l + b - y / scale;
                j[(i, 0)] = a * hw2 * 2.0 * d / (den * den);
                j[(i, 1)] = a * 0.5 * w * d * d / (den * den);
                j[(i, 2)] = l;
                j[(i, 3)] = 1.0;
            }
            (r, j)
        },
        p0,
    );
    let width = out.params[1].abs();
    let usable = width.is_finite() && width > 0.0 && (out.params[0] - f[peak]).abs() < direct;
    Ok(LinewidthEstimate {
        damping: TWO_PI * if usable { width } else { direct },
        damping_direct: TWO_PI * direct,
        center_hz: if usable { out.params[0] } else { f[peak] },
        peak_psd: psd[peak],
        background: out.params[3] * scale,
        fit_converged: out.converged && usable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lorentzian(gamma_hz: f64, f0: f64, df: f64, n: usize) -> Spectrum {
        let f: Vec<f64> = (0..n).map(|k| k as f64 * df).collect();
        let hw = 0.5 * gamma_hz;
        let p = f.iter().map(|x| 3.0 * hw * hw / ((x - f0).powi(2) + hw * hw)).collect();
        Spectrum::from_samples(f, p, "m^2/Hz").unwrap()
    }

    #[test]
    fn recovers_analytic_width() {
        let s = lorentzian(1.3e3, 140e3, 50.0, 6000);
        let est = fwhm_damping(&s, Some((100e3, 180e3))).unwrap();
        assert_relative_eq!(est.damping, TWO_PI * 1.3e3, max_relative = 0.02);
        assert_relative_eq!(est.damping_direct, TWO_PI * 1.3e3, max_relative = 0.02);
        let s2 = lorentzian(2.6e3, 140e3, 50.0, 6000);
        let est2 = fwhm_damping(&s2, Some((100e3, 180e3))).unwrap();
        assert_relative_eq!(est2.damping / est.damping, 2.0, max_relative = 0.01);
    }

    #[test]
    fn under_resolved_peak_is_rejected() {
        let s = lorentzian(100.0, 140e3, 50.0, 6000);
        let err = fwhm_damping(&s, Some((100e3, 180e3))).unwrap_err();
        assert!(err.to_string().contains("under-resolved"));
    }
}
