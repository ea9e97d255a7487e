use serde::{Deserialize, Serialize};

use super::welch::Spectrum;
use crate::constants::BOLTZMANN;
use crate::error::{Error, Result};

/// Metres per signal unit, fixed by equipartition at a known temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFactor {
    pub metres_per_unit: f64,
    pub reference_temperature: f64,
}

impl CalibrationFactor {
    pub fn apply(&self, samples: &[f64]) -> Vec<f64> {
        samples.iter().map(|v| v * self.metres_per_unit).collect()
    }
}

fn rms_about_mean(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// c = √(k_B T_ref/(mΩ²)) / rms(signal).
pub fn calibrate_equipartition(
    samples: &[f64],
    reference_temperature: f64,
    mass: f64,
    trap_frequency: f64,
) -> Result<CalibrationFactor> {
    if samples.len() < 2 {
        return Err(Error::TraceTooShort {
            required: 2,
            got: samples.len(),
        });
    }
    if !(reference_temperature > 0.0 && mass > 0.0 && trap_frequency > 0.0) {
        return Err(Error::Analysis("calibration needs positive T_ref, m and Ω".into()));
    }
    let rms = rms_about_mean(samples);
    if !(rms > 0.0) {
        return Err(Error::Analysis("cannot calibrate a zero-variance signal".into()));
    }
    let expected = (BOLTZMANN * reference_temperature / (mass * trap_frequency * trap_frequency)).sqrt();
    Ok(CalibrationFactor {
        metres_per_unit: expected / rms,
        reference_temperature,
    })
}

/// T = mΩ²·(area)/k_B for a displacement variance in m².
pub fn temperature_from_variance(variance: f64, mass: f64, trap_frequency: f64) -> f64 {
    mass * trap_frequency * trap_frequency * variance / BOLTZMANN
}

/// Temperature from the PSD area (spectrum in m²/Hz) within `band` (Hz).
/// The band must lie inside the grid and the peak must not sit on its edge.
pub fn temperature_from_area(spectrum: &Spectrum, mass: f64, trap_frequency: f64, band: (f64, f64)) -> Result<f64> {
    let (lo, hi) = band;
    let f_min = spectrum.frequencies[0];
    let f_max = spectrum.max_frequency();
    if lo < f_min - 0.5 * spectrum.bin_width || hi > f_max + 0.5 * spectrum.bin_width || !(hi > lo) {
        return Err(Error::Analysis(format!(
            "integration band [{lo:.1}, {hi:.1}] Hz clipped by the grid [{f_min:.1}, {f_max:.1}] Hz"
        )));
    }
    let range = spectrum.band_indices(lo, hi);
    if range.len() < 3 {
        return Err(Error::Analysis("integration band contains fewer than 3 bins".into()));
    }
    let peak = spectrum
        .peak_index(lo, hi)
        .ok_or_else(|| Error::Analysis("empty integration band".into()))?;
    if peak == range.start || peak + 1 == range.end {
        return Err(Error::Analysis(format!(
            "peak at {:.1} Hz lies on the edge of the integration band",
            spectrum.frequencies[peak]
        )));
    }
    Ok(temperature_from_variance(spectrum.band_area(lo, hi), mass, trap_frequency))
}
