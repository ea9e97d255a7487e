//! Measurement pipeline: spectra, calibration, temperatures, linewidths and
//! model fits.

pub mod calibration;
pub mod fits;
pub mod linewidth;
pub mod lm;
pub mod models;
pub mod sliding;
pub mod welch;

pub use calibration::{calibrate_equipartition, temperature_from_area, temperature_from_variance, CalibrationFactor};
pub use fits::{
    fit_bounded_exponential, fit_bounded_exponential_weighted, fit_pressure_sweep, pressure_sweep_model, AxisSweepData, PressureSweepData,
    PressureSweepModel,
};
pub use linewidth::{fwhm_damping, LinewidthEstimate};
pub use lm::{levenberg_marquardt, FitParameter, FitResult};
pub use models::{damping_model, two_bath_temperature};
pub use sliding::{sliding_temperature, SlidingParams};
pub use welch::{welch_psd, welch_psd_samples, Spectrum, WelchParams, Window};
