//! Three-dimensional cavity cooling of an optically levitated nanoparticle by
//! coherent scattering.
//!
//! The crate is organised around four layers:
//!
//! - [`params`]: physical configuration and every closed-form derived quantity
//!   (linewidth, Purcell factor, gas damping, sideband cooling rates, ...).
//! - [`dynamics`]: the linearised 8-dimensional cavity + 3-mode model, its exact
//!   steady-state covariance, an exact-discretisation stochastic integrator and a
//!   Gaussian-trap nonlinear integrator.
//! - [`analysis`]: the measurement pipeline (Welch spectra, equipartition
//!   calibration, PSD-area temperatures, linewidths and model fits).
//! - [`experiments`]: figure-level virtual experiments (pressure, relaxation,
//!   detuning and power sweeps) and their CSV/JSON reports.
//!
//! [`config`] holds the strict JSON run-configuration schema shared with the
//! command-line driver.

pub mod analysis;
pub mod config;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod params;

pub use error::{Error, Result};
pub use params::{Axis, SystemParams};
