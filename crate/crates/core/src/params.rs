//! Physical configuration of the experiment and its closed-form consequences.
//!
//! All quantities are SI internally: lengths in metres, pressures in pascal,
//! frequencies as angular frequencies in rad/s. Conversion to Hz / mbar / nm
//! happens only at the configuration and report boundary.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::constants::{
    hz_to_rad, AIR_MOLECULAR_MASS_AMU, ATOMIC_MASS_UNIT, BOLTZMANN, EPSTEIN_PREFACTOR, HBAR,
    PA_PER_MBAR, SPEED_OF_LIGHT,
};
use crate::error::{Error, Result};

/// Mechanical axis. `y` is the cavity axis, `z` the tweezer axis, `x` the
/// (nominal) tweezer polarisation direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(name, format!("must be finite and > 0, got {value}")))
    }
}

fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(name, format!("must be finite and >= 0, got {value}")))
    }
}

// ---------------------------------------------------------------------------
// Cavity
// ---------------------------------------------------------------------------

/// Cavity energy linewidth κ (rad/s) from finesse and length: κ = πc/(F·L).
pub fn linewidth_from_finesse(finesse: f64, length: f64) -> Result<f64> {
    if !(finesse.is_finite() && finesse > 1.0) {
        return Err(Error::domain("finesse", format!("must be > 1, got {finesse}")));
    }
    require_positive("length", length)?;
    Ok(PI * SPEED_OF_LIGHT / (finesse * length))
}

/// Inverse of [`linewidth_from_finesse`].
pub fn finesse_from_linewidth(linewidth: f64, length: f64) -> Result<f64> {
    require_positive("linewidth", linewidth)?;
    require_positive("length", length)?;
    Ok(PI * SPEED_OF_LIGHT / (linewidth * length))
}

/// Purcell factor η = 6Fλ²/(π³w0²).
pub fn purcell_factor(finesse: f64, wavelength: f64, waist: f64) -> Result<f64> {
    require_positive("finesse", finesse)?;
    require_positive("wavelength", wavelength)?;
    require_positive("waist", waist)?;
    Ok(6.0 * finesse * wavelength * wavelength / (PI.powi(3) * waist * waist))
}

/// Fraction of the scattered power emitted into the cavity mode, η/(η+1).
pub fn scattered_fraction(purcell: f64) -> Result<f64> {
    require_non_negative("purcell_factor", purcell)?;
    Ok(purcell / (purcell + 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityParams {
    pub wavelength: f64,
    pub length: f64,
    pub finesse: f64,
    pub waist: f64,
    /// Energy decay rate κ (rad/s).
    pub linewidth: f64,
    /// Mirror metadata; no equation uses these.
    pub absorption: f64,
    pub transmission: f64,
    pub radius_of_curvature: f64,
}

impl CavityParams {
    /// Builds the cavity from its finesse; the linewidth is derived.
    pub fn from_finesse(wavelength: f64, length: f64, finesse: f64, waist: f64) -> Result<Self> {
        require_positive("wavelength", wavelength)?;
        require_positive("waist", waist)?;
        let linewidth = linewidth_from_finesse(finesse, length)?;
        Ok(Self {
            wavelength,
            length,
            finesse,
            waist,
            linewidth,
            absorption: 0.0,
            transmission: 0.0,
            radius_of_curvature: 0.0,
        })
    }

    /// Builds the cavity from its linewidth; the finesse is derived.
    pub fn from_linewidth(wavelength: f64, length: f64, linewidth: f64, waist: f64) -> Result<Self> {
        let finesse = finesse_from_linewidth(linewidth, length)?;
        let mut cavity = Self::from_finesse(wavelength, length, finesse, waist)?;
        cavity.linewidth = linewidth;
        Ok(cavity)
    }

    pub fn with_mirrors(mut self, absorption: f64, transmission: f64, radius_of_curvature: f64) -> Self {
        self.absorption = absorption;
        self.transmission = transmission;
        self.radius_of_curvature = radius_of_curvature;
        self
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("cavity.wavelength", self.wavelength)?;
        require_positive("cavity.waist", self.waist)?;
        let kappa = linewidth_from_finesse(self.finesse, self.length)?;
        require_positive("cavity.linewidth", self.linewidth)?;
        if ((kappa - self.linewidth) / self.linewidth).abs() >= 1e-6 {
            return Err(Error::domain(
                "cavity.linewidth",
                format!(
                    "inconsistent with finesse and length: {} vs πc/(F·L) = {kappa}",
                    self.linewidth
                ),
            ));
        }
        Ok(())
    }

    pub fn purcell_factor(&self) -> f64 {
        6.0 * self.finesse * self.wavelength.powi(2) / (PI.powi(3) * self.waist.powi(2))
    }
}

// ---------------------------------------------------------------------------
// Tweezer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct TweezerParams {
    pub power: f64,
    pub reference_power: f64,
    pub numerical_aperture: f64,
    /// Δ = ω_c − ω_L (rad/s); positive when the cavity is blue of the tweezer.
    pub detuning: f64,
    /// Polarisation misalignment ε that leaks cavity coupling into `x`.
    pub polarization_misalignment: f64,
    /// Trap frequencies (rad/s) at `reference_power`.
    pub reference_trap_frequencies: [f64; 3],
}

impl TweezerParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("tweezer.power", self.power)?;
        require_positive("tweezer.reference_power", self.reference_power)?;
        if !(self.numerical_aperture > 0.0 && self.numerical_aperture < 1.0) {
            return Err(Error::domain(
                "tweezer.numerical_aperture",
                format!("must lie in (0, 1), got {}", self.numerical_aperture),
            ));
        }
        if !self.detuning.is_finite() {
            return Err(Error::domain("tweezer.detuning", "must be finite"));
        }
        let eps = self.polarization_misalignment;
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::domain(
                "tweezer.polarization_misalignment",
                format!("must lie in [0, 1), got {eps}"),
            ));
        }
        for w in self.reference_trap_frequencies {
            require_positive("tweezer.reference_trap_frequencies", w)?;
        }
        Ok(())
    }

    pub fn trap_frequencies(&self) -> [f64; 3] {
        let s = (self.power / self.reference_power).sqrt();
        self.reference_trap_frequencies.map(|w| w * s)
    }
}

/// Trap frequencies at tweezer power `power`: Ω_i = Ω_ref,i·√(P/P_ref).
pub fn trap_frequencies(power: f64, tweezer: &TweezerParams) -> Result<[f64; 3]> {
    require_positive("power", power)?;
    require_positive("reference_power", tweezer.reference_power)?;
    let s = (power / tweezer.reference_power).sqrt();
    Ok(tweezer.reference_trap_frequencies.map(|w| w * s))
}

/// Displacement-noise heating rate at power `power`: Ṫ = Ṫ_ref·(P/P_ref)².
pub fn noise_heating_rate(power: f64, reference_power: f64, reference_rate: f64) -> Result<f64> {
    require_non_negative("power", power)?;
    require_positive("reference_power", reference_power)?;
    require_non_negative("noise_heating_rate", reference_rate)?;
    Ok(reference_rate * (power / reference_power).powi(2))
}

// ---------------------------------------------------------------------------
// Particle and environment
// ---------------------------------------------------------------------------

/// Mass of a homogeneous sphere, m = ρπd³/6.
pub fn particle_mass(diameter: f64, density: f64) -> Result<f64> {
    require_positive("diameter", diameter)?;
    require_positive("density", density)?;
    Ok(density * PI * diameter.powi(3) / 6.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleParams {
    pub diameter: f64,
    pub density: f64,
    pub mass: f64,
}

impl ParticleParams {
    pub fn new(diameter: f64, density: f64) -> Result<Self> {
        let mass = particle_mass(diameter, density)?;
        Ok(Self {
            diameter,
            density,
            mass,
        })
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentParams {
    /// Gas pressure (Pa).
    pub pressure: f64,
    pub gas_temperature: f64,
    /// Mean molecular mass of the residual gas (kg).
    pub gas_molecular_mass: f64,
    /// Displacement-noise heating rates (K/s) at the reference tweezer power.
    pub noise_heating_ref: [f64; 3],
}

impl EnvironmentParams {
    pub fn air(pressure: f64, gas_temperature: f64, noise_heating_ref: [f64; 3]) -> Self {
        Self {
            pressure,
            gas_temperature,
            gas_molecular_mass: AIR_MOLECULAR_MASS_AMU * ATOMIC_MASS_UNIT,
            noise_heating_ref,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_non_negative("environment.pressure", self.pressure)?;
        require_positive("environment.gas_temperature", self.gas_temperature)?;
        require_positive("environment.gas_molecular_mass", self.gas_molecular_mass)?;
        for r in self.noise_heating_ref {
            require_non_negative("environment.noise_heating", r)?;
        }
        Ok(())
    }

    /// Mean thermal speed of the gas molecules, √(8k_BT/(πm_gas)).
    pub fn mean_molecular_speed(&self) -> f64 {
        (8.0 * BOLTZMANN * self.gas_temperature / (PI * self.gas_molecular_mass)).sqrt()
    }
}

/// Free-molecular (Epstein) gas damping rate γ_gas = 15.8·r²·p/(m·v̄) in rad/s.
pub fn gas_damping(env: &EnvironmentParams, particle: &ParticleParams) -> f64 {
    let r = particle.radius();
    EPSTEIN_PREFACTOR * r * r * env.pressure / (particle.mass * env.mean_molecular_speed())
}

// ---------------------------------------------------------------------------
// Position phase and coupling
// ---------------------------------------------------------------------------

/// Phase φ of the particle's equilibrium position in the intracavity standing
/// wave, stored modulo π in [0, π). Node: π/2, antinode: 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionPhase(f64);

impl PositionPhase {
    pub const NODE: PositionPhase = PositionPhase(FRAC_PI_2);
    pub const SLOPE: PositionPhase = PositionPhase(FRAC_PI_4);
    pub const ANTINODE: PositionPhase = PositionPhase(0.0);

    pub fn new(phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::domain("phase", "must be finite"));
        }
        let mut p = phi.rem_euclid(PI);
        if p >= PI {
            p = 0.0;
        }
        Ok(Self(p))
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

/// Bare coupling configuration; the per-axis rates follow from the phase,
/// polarisation misalignment and tweezer power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConfig {
    /// Bare coupling scale g0 at the reference power (rad/s).
    pub g0: f64,
    /// Ratio r_z of the z-coupling scale to the y-coupling scale.
    pub z_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    pub g0: f64,
    /// Effective per-axis couplings (g_x, g_y, g_z) in rad/s.
    pub rates: [f64; 3],
}

/// Per-axis light-enhanced coupling rates:
/// g_y = g0 sin φ·s, g_z = r_z g0 cos φ·s, g_x = ε g0 sin φ·s with s = √(P/P_ref).
pub fn coupling_rates(
    g0: f64,
    phase: PositionPhase,
    misalignment: f64,
    z_ratio: f64,
    power: f64,
    reference_power: f64,
) -> Result<[f64; 3]> {
    require_non_negative("g0", g0)?;
    require_non_negative("z_ratio", z_ratio)?;
    require_non_negative("power", power)?;
    require_positive("reference_power", reference_power)?;
    let s = (power / reference_power).sqrt();
    let (sin, cos) = phase.radians().sin_cos();
    Ok([
        misalignment * g0 * sin * s,
        g0 * sin * s,
        z_ratio * g0 * cos * s,
    ])
}

/// Approximate dynamical-stability criterion: unstable once g² ≥ |Δ|·Ω.
/// A vanishing coupling is always stable.
pub fn is_dynamically_stable(coupling: f64, detuning: f64, trap_frequency: f64) -> bool {
    if coupling == 0.0 {
        return true;
    }
    coupling * coupling < detuning.abs() * trap_frequency
}

/// Multi-axis form of [`is_dynamically_stable`]: the strongest coupling is
/// compared against the smallest trap frequency.
pub fn is_dynamically_stable_axes(couplings: [f64; 3], detuning: f64, trap_frequencies: [f64; 3]) -> bool {
    let g = couplings.iter().fold(0.0_f64, |a, &g| a.max(g.abs()));
    let w = trap_frequencies.iter().fold(f64::INFINITY, |a, &w| a.min(w));
    is_dynamically_stable(g, detuning, w)
}

/// Bad-cavity phonon floor n̄ = κ/(4Ω).
pub fn min_phonon_number(linewidth: f64, trap_frequency: f64) -> Result<f64> {
    require_positive("trap_frequency", trap_frequency)?;
    require_non_negative("linewidth", linewidth)?;
    Ok(linewidth / (4.0 * trap_frequency))
}

/// Weak-coupling sideband cooling rate
/// γ_c = g²κ[((Δ−Ω)² + κ²/4)⁻¹ − ((Δ+Ω)² + κ²/4)⁻¹], with no stability check.
pub fn sideband_cooling_rate(coupling: f64, detuning: f64, linewidth: f64, trap_frequency: f64) -> f64 {
    let k2 = 0.25 * linewidth * linewidth;
    let anti_stokes = 1.0 / ((detuning - trap_frequency).powi(2) + k2);
    let stokes = 1.0 / ((detuning + trap_frequency).powi(2) + k2);
    coupling * coupling * linewidth * (anti_stokes - stokes)
}

/// [`sideband_cooling_rate`] guarded by [`is_dynamically_stable`].
pub fn cavity_cooling_rate(coupling: f64, detuning: f64, linewidth: f64, trap_frequency: f64) -> Result<f64> {
    require_positive("trap_frequency", trap_frequency)?;
    require_positive("linewidth", linewidth)?;
    if !is_dynamically_stable(coupling, detuning, trap_frequency) {
        return Err(Error::Unstable(format!(
            "g² = {:.4e} ≥ |Δ|Ω = {:.4e} (rad/s)²",
            coupling * coupling,
            detuning.abs() * trap_frequency
        )));
    }
    Ok(sideband_cooling_rate(coupling, detuning, linewidth, trap_frequency))
}

// ---------------------------------------------------------------------------
// Full system
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub cavity: CavityParams,
    pub tweezer: TweezerParams,
    pub particle: ParticleParams,
    pub environment: EnvironmentParams,
    pub phase: PositionPhase,
    pub coupling: CouplingConfig,
}

impl SystemParams {
    /// Laboratory parameter set: 1550 nm, 6.46 mm, F = 22×10³ cavity with a
    /// 48 µm waist; 0.5 W tweezer at NA 0.83 detuned by 2π×400 kHz; 136 nm
    /// silica sphere in air at 3×10⁻³ mbar; particle at the node.
    pub fn paper_defaults() -> Self {
        let cavity = CavityParams::from_finesse(1550e-9, 6.46e-3, 22e3, 48e-6)
            .expect("default cavity is valid")
            .with_mirrors(45e-6, 99e-6, 10.0e-3);
        let tweezer = TweezerParams {
            power: 0.5,
            reference_power: 0.5,
            numerical_aperture: 0.83,
            detuning: hz_to_rad(400e3),
            polarization_misalignment: 0.15,
            reference_trap_frequencies: [hz_to_rad(120e3), hz_to_rad(140e3), hz_to_rad(40e3)],
        };
        let particle = ParticleParams::new(136e-9, 1850.0).expect("default particle is valid");
        let environment = EnvironmentParams::air(3e-3 * PA_PER_MBAR, 300.0, [33.0, 33.0, 330.0]);
        Self {
            cavity,
            tweezer,
            particle,
            environment,
            phase: PositionPhase::NODE,
            coupling: CouplingConfig {
                g0: hz_to_rad(33e3),
                z_ratio: 1.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        self.tweezer.validate()?;
        require_positive("particle.diameter", self.particle.diameter)?;
        require_positive("particle.density", self.particle.density)?;
        let mass = particle_mass(self.particle.diameter, self.particle.density)?;
        if ((mass - self.particle.mass) / mass).abs() > 1e-12 {
            return Err(Error::domain("particle.mass", "inconsistent with diameter and density"));
        }
        self.environment.validate()?;
        require_non_negative("coupling.g0", self.coupling.g0)?;
        require_non_negative("coupling.z_ratio", self.coupling.z_ratio)?;
        Ok(())
    }

    pub fn trap_frequencies(&self) -> [f64; 3] {
        self.tweezer.trap_frequencies()
    }

    pub fn coupling_rates(&self) -> CouplingParams {
        let s = (self.tweezer.power / self.tweezer.reference_power).sqrt();
        let (sin, cos) = self.phase.radians().sin_cos();
        let g0 = self.coupling.g0;
        CouplingParams {
            g0,
            rates: [
                self.tweezer.polarization_misalignment * g0 * sin * s,
                g0 * sin * s,
                self.coupling.z_ratio * g0 * cos * s,
            ],
        }
    }

    pub fn gas_damping(&self) -> f64 {
        gas_damping(&self.environment, &self.particle)
    }

    /// Per-axis displacement-noise heating rates (K/s) at the current power.
    pub fn noise_heating_rates(&self) -> [f64; 3] {
        let r = self.tweezer.power / self.tweezer.reference_power;
        self.environment.noise_heating_ref.map(|t| t * r * r)
    }

    /// Per-axis weak-coupling cooling rates γ_c,i (rad/s), unchecked.
    pub fn cooling_rates(&self) -> [f64; 3] {
        let g = self.coupling_rates().rates;
        let w = self.trap_frequencies();
        let (delta, kappa) = (self.tweezer.detuning, self.cavity.linewidth);
        [0, 1, 2].map(|i| sideband_cooling_rate(g[i], delta, kappa, w[i]))
    }

    /// Thermal occupation of the gas bath for each axis, k_BT_gas/(ħΩ_i).
    pub fn gas_occupations(&self) -> [f64; 3] {
        let t = self.environment.gas_temperature;
        self.trap_frequencies().map(|w| BOLTZMANN * t / (HBAR * w))
    }

    /// Approximate stability criterion over all axes.
    pub fn is_dynamically_stable(&self) -> bool {
        is_dynamically_stable_axes(
            self.coupling_rates().rates,
            self.tweezer.detuning,
            self.trap_frequencies(),
        )
    }

    /// Zero-point motion x_zp = √(ħ/(2mΩ_i)) per axis (m).
    pub fn zero_point_motion(&self) -> [f64; 3] {
        let m = self.particle.mass;
        self.trap_frequencies().map(|w| (HBAR / (2.0 * m * w)).sqrt())
    }

    /// The bare coupling g0 for which `axis` cools at `target_rate` (rad/s)
    /// under the current phase, detuning and power.
    pub fn calibrated_g0(&self, axis: Axis, target_rate: f64) -> Result<f64> {
        require_positive("target_rate", target_rate)?;
        let mut unit = self.clone();
        unit.coupling.g0 = 1.0;
        let g_unit = unit.coupling_rates().rates[axis.index()];
        let w = self.trap_frequencies()[axis.index()];
        let per_g2 = sideband_cooling_rate(g_unit, self.tweezer.detuning, self.cavity.linewidth, w);
        if !(per_g2 > 0.0) {
            return Err(Error::domain(
                "coupling.g0",
                format!("axis {axis} does not cool at this phase/detuning"),
            ));
        }
        Ok((target_rate / per_g2).sqrt())
    }

    pub fn with_pressure_pa(mut self, pressure: f64) -> Self {
        self.environment.pressure = pressure;
        self
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.tweezer.detuning = detuning;
        self
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.tweezer.power = power;
        self
    }

    pub fn with_phase(mut self, phase: PositionPhase) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_g0(mut self, g0: f64) -> Self {
        self.coupling.g0 = g0;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const KHZ: f64 = 2.0 * PI * 1e3;

    #[test]
    fn linewidth_examples() {
        let kappa = linewidth_from_finesse(22e3, 6.46e-3).unwrap();
        assert_relative_eq!(kappa / (2.0 * PI * 1e6), 1.0547, max_relative = 1e-3);
        let half = linewidth_from_finesse(22e3, 2.0 * 6.46e-3).unwrap();
        assert_relative_eq!(half, kappa / 2.0, max_relative = 1e-14);
        let k = linewidth_from_finesse(1e4, 1e-2).unwrap();
        assert_relative_eq!(k, 9.4182e6, max_relative = 1e-4);
        assert!(linewidth_from_finesse(0.5, 1.0).is_err());
        assert!(linewidth_from_finesse(10.0, -1.0).is_err());
    }

    #[test]
    fn cavity_consistency_is_enforced() {
        let c = CavityParams::from_linewidth(1550e-9, 6.46e-3, hz_to_rad(1.06e6), 48e-6).unwrap();
        c.validate().unwrap();
        let mut bad = c.clone();
        bad.linewidth *= 1.01;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn purcell_and_fraction() {
        let eta = purcell_factor(22e3, 1550e-9, 48e-6).unwrap();
        assert_relative_eq!(eta, 4.44, max_relative = 2e-3);
        let sixth = purcell_factor(22e3, 1550e-9, 48e-6 * 6f64.sqrt()).unwrap();
        assert_relative_eq!(sixth, eta / 6.0, max_relative = 1e-12);
        assert_relative_eq!(purcell_factor(11e3, 1550e-9, 48e-6).unwrap(), eta / 2.0, max_relative = 1e-12);
        assert_relative_eq!(scattered_fraction(4.44).unwrap(), 0.816, max_relative = 1e-3);
        assert_eq!(scattered_fraction(0.0).unwrap(), 0.0);
        assert_eq!(scattered_fraction(1.0).unwrap(), 0.5);
        assert!(scattered_fraction(-1.0).is_err());
    }

    #[test]
    fn mass_examples() {
        let m = particle_mass(136e-9, 1850.0).unwrap();
        assert_relative_eq!(m, 2.44e-18, max_relative = 2e-3);
        assert_relative_eq!(particle_mass(272e-9, 1850.0).unwrap(), 8.0 * m, max_relative = 1e-12);
        assert_relative_eq!(particle_mass(1.0, 6.0 / PI).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn trap_frequency_examples() {
        let tw = SystemParams::paper_defaults().tweezer;
        let w = trap_frequencies(0.5, &tw).unwrap();
        assert_relative_eq!(w[0], 120.0 * KHZ, max_relative = 1e-12);
        assert_relative_eq!(w[1], 140.0 * KHZ, max_relative = 1e-12);
        assert_relative_eq!(w[2], 40.0 * KHZ, max_relative = 1e-12);
        let q = trap_frequencies(0.125, &tw).unwrap();
        for i in 0..3 {
            assert_relative_eq!(q[i], w[i] / 2.0, max_relative = 1e-12);
        }
        let w = trap_frequencies(0.25, &tw).unwrap();
        assert_relative_eq!(w[0], 84.853 * KHZ, max_relative = 1e-4);
    }

    #[test]
    fn gas_damping_examples() {
        let p = SystemParams::paper_defaults();
        let g = p.gas_damping();
        // Direct evaluation: v̄ = 468.2 m/s, γ = 15.8 r² p / (m v̄) = 19.21 s⁻¹.
        assert_relative_eq!(g / (2.0 * PI), 3.057, max_relative = 2e-3);
        assert_eq!(p.clone().with_pressure_pa(0.0).gas_damping(), 0.0);
        let ten = p.clone().with_pressure_pa(10.0 * p.environment.pressure).gas_damping();
        assert_relative_eq!(ten, 10.0 * g, max_relative = 1e-12);
    }

    #[test]
    fn coupling_examples() {
        let node = coupling_rates(10.0 * KHZ, PositionPhase::NODE, 0.1, 1.0, 0.5, 0.5).unwrap();
        assert!(node[2].abs() < 1e-9 * KHZ);
        assert_relative_eq!(node[1], 10.0 * KHZ, max_relative = 1e-12);
        let anti = coupling_rates(10.0 * KHZ, PositionPhase::ANTINODE, 0.1, 1.0, 0.5, 0.5).unwrap();
        assert_eq!(anti[0], 0.0);
        assert_eq!(anti[1], 0.0);
        assert_relative_eq!(anti[2], 10.0 * KHZ, max_relative = 1e-12);
        let slope = coupling_rates(10.0 * KHZ, PositionPhase::SLOPE, 0.1, 0.8, 0.5, 0.5).unwrap();
        assert_relative_eq!(slope[0], 0.70711 * KHZ, max_relative = 1e-5);
        assert_relative_eq!(slope[1], 7.0711 * KHZ, max_relative = 1e-5);
        assert_relative_eq!(slope[2], 0.8 * 7.0711 * KHZ, max_relative = 1e-5);
    }

    #[test]
    fn phase_is_canonicalised() {
        assert_relative_eq!(PositionPhase::new(PI + 0.3).unwrap().radians(), 0.3, max_relative = 1e-12);
        assert_relative_eq!(PositionPhase::new(-0.3).unwrap().radians(), PI - 0.3, max_relative = 1e-12);
        assert_eq!(PositionPhase::new(PI).unwrap().radians(), 0.0);
        assert!(PositionPhase::new(f64::NAN).is_err());
    }

    #[test]
    fn stability_examples() {
        assert!(is_dynamically_stable(10.0 * KHZ, 400.0 * KHZ, 40.0 * KHZ));
        assert!(!is_dynamically_stable(1.0, 0.0, 40.0 * KHZ));
        assert!(is_dynamically_stable(0.0, 0.0, 40.0 * KHZ));
        assert!(!is_dynamically_stable(200.0 * KHZ, 400.0 * KHZ, 40.0 * KHZ));
    }

    #[test]
    fn phonon_floor_examples() {
        assert_relative_eq!(min_phonon_number(1060.0 * KHZ, 140.0 * KHZ).unwrap(), 1.893, max_relative = 1e-3);
        assert_eq!(min_phonon_number(4.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(min_phonon_number(1060.0 * KHZ, 40.0 * KHZ).unwrap(), 6.625, max_relative = 1e-12);
    }

    #[test]
    fn cooling_rate_examples() {
        let g = cavity_cooling_rate(10.0 * KHZ, 400.0 * KHZ, 1060.0 * KHZ, 140.0 * KHZ).unwrap();
        assert_relative_eq!(g / (2.0 * PI), 119.01, max_relative = 1e-3);
        assert_eq!(sideband_cooling_rate(10.0 * KHZ, 0.0, 1060.0 * KHZ, 140.0 * KHZ), 0.0);
        let g2 = cavity_cooling_rate(20.0 * KHZ, 400.0 * KHZ, 1060.0 * KHZ, 140.0 * KHZ).unwrap();
        assert_relative_eq!(g2, 4.0 * g, max_relative = 1e-12);
        assert!(matches!(
            cavity_cooling_rate(10.0 * KHZ, 0.0, 1060.0 * KHZ, 140.0 * KHZ),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn noise_heating_examples() {
        assert_eq!(noise_heating_rate(0.5, 0.5, 33.0).unwrap(), 33.0);
        assert_relative_eq!(noise_heating_rate(0.25, 0.5, 33.0).unwrap(), 8.25, max_relative = 1e-15);
        assert_eq!(noise_heating_rate(0.0, 0.5, 33.0).unwrap(), 0.0);
    }

    #[test]
    fn calibration_hits_target_rate() {
        let p = SystemParams::paper_defaults();
        let g0 = p.calibrated_g0(Axis::Y, 2.0 * PI * 1.3e3).unwrap();
        assert_relative_eq!(g0 / KHZ, 32.92, max_relative = 1e-3);
        let rates = p.with_g0(g0).cooling_rates();
        assert_relative_eq!(rates[1], 2.0 * PI * 1.3e3, max_relative = 1e-12);
        let anti = SystemParams::paper_defaults().with_phase(PositionPhase::ANTINODE);
        assert!(anti.calibrated_g0(Axis::Y, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn finesse_round_trip(f in 1.5f64..1e6, l in 1e-4f64..1.0) {
            let k = linewidth_from_finesse(f, l).unwrap();
            prop_assert!((k * f * l / (PI * SPEED_OF_LIGHT) - 1.0).abs() < 1e-14);
        }

        #[test]
        fn fraction_is_increasing_and_bounded(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            let (fa, fb) = (scattered_fraction(a).unwrap(), scattered_fraction(b).unwrap());
            prop_assert!((0.0..1.0).contains(&fa));
            if a < b { prop_assert!(fa < fb); }
        }

        #[test]
        fn coupling_pythagoras(phi in 0.0f64..PI, g0 in 0.0f64..1e6, rz in 0.1f64..3.0, p in 0.05f64..1.0) {
            let g = coupling_rates(g0, PositionPhase::new(phi).unwrap(), 0.0, rz, p, 0.5).unwrap();
            let lhs = g[1] * g[1] + (g[2] / rz).powi(2);
            let rhs = g0 * g0 * p / 0.5;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
            prop_assert_eq!(g[0], 0.0);
        }

        #[test]
        fn cooling_rate_is_antisymmetric(g in 0.0f64..1e5, d in -1e7f64..1e7, k in 1e5f64..1e7, w in 1e3f64..1e6) {
            let a = sideband_cooling_rate(g, d, k, w);
            let b = sideband_cooling_rate(g, -d, k, w);
            prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1e-300));
            prop_assert_eq!(sideband_cooling_rate(g, d, k, 0.0), 0.0);
        }

        #[test]
        fn gas_damping_is_linear(a in 0.0f64..1e4, p in 1e-6f64..1e3) {
            let base = SystemParams::paper_defaults().with_pressure_pa(p);
            let scaled = base.clone().with_pressure_pa(a * p);
            let (g, ga) = (base.gas_damping(), scaled.gas_damping());
            prop_assert!((ga - a * g).abs() <= 1e-12 * (a * g).max(1e-300));
        }

        #[test]
        fn noise_scaling_is_power_independent(p in 0.01f64..2.0) {
            let tw = SystemParams::paper_defaults().tweezer;
            let w = trap_frequencies(p, &tw).unwrap();
            let w0 = trap_frequencies(0.5, &tw).unwrap();
            for i in 0..3 {
                let r = (w[i].powi(4) / (p * p)) / (w0[i].powi(4) / 0.25);
                prop_assert!((r - 1.0).abs() < 1e-12);
            }
        }
    }
}
