use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::calibration::temperature_from_variance;
use super::welch::{welch_psd_samples, WelchParams, Window};
use crate::constants::TWO_PI;
use crate::error::{Error, Result};

/// Minimum window length in oscillation periods.
pub const MIN_WINDOW_PERIODS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlidingParams {
    /// Window length (samples).
    pub window: usize,
    /// Hop between window starts (samples).
    pub hop: usize,
    pub mass: f64,
    pub trap_frequency: f64,
    /// Half width of the integration band around Ω/2π (Hz).
    pub band_half_width: f64,
    /// Time of the first sample (s).
    pub start_time: f64,
}

/// Temperature series from band-limited PSD areas of short snapshots of a
/// displacement record (metres). Each window is a single Hann periodogram and
/// the timestamp is the window centre.
pub fn sliding_temperature(samples: &[f64], dt: f64, params: &SlidingParams) -> Result<Vec<(f64, f64)>> {
    let period = TWO_PI / params.trap_frequency;
    let min_window = (MIN_WINDOW_PERIODS * period / dt).ceil() as usize;
    if params.window < min_window {
        return Err(Error::Analysis(format!(
            "window of {} samples is shorter than {MIN_WINDOW_PERIODS} oscillation periods ({min_window} samples)",
            params.window
        )));
    }
    if params.hop == 0 {
        return Err(Error::Analysis("hop must be positive".into()));
    }
    if samples.len() < params.window {
        return Err(Error::TraceTooShort {
            required: params.window,
            got: samples.len(),
        });
    }
    let f0 = params.trap_frequency / TWO_PI;
    let (lo, hi) = (f0 - params.band_half_width, f0 + params.band_half_width);
    let welch = WelchParams {
        segment_length: params.window,
        overlap: 0.0,
        window: Window::Hann,
    };
    let count = 1 + (samples.len() - params.window) / params.hop;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let start = k * params.hop;
            let spec = welch_psd_samples(&samples[start..start + params.window], dt, &welch)?;
            if hi > spec.max_frequency() || lo < 0.0 {
                return Err(Error::Analysis("integration band exceeds the Nyquist range".into()));
            }
            let t = params.start_time + (start as f64 + 0.5 * params.window as f64) * dt;
            let temp = temperature_from_variance(spec.band_area(lo, hi), params.mass, params.trap_frequency);
            Ok((t, temp))
        })
        .collect()
}
