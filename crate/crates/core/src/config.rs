//! Strict JSON run configuration. Files use laboratory units (Hz, mbar, W,
//! nm/mm/µm); conversion to internal SI/rad-s units happens here only.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constants::{ATOMIC_MASS_UNIT, PA_PER_MBAR, TWO_PI};
use crate::error::{Error, Result};
use crate::experiments::{Mode, RelaxationPlan, SweepPlan, SweepVariable, TrajectorySettings};
use crate::params::{CavityParams, CouplingConfig, EnvironmentParams, ParticleParams, PositionPhase, SystemParams, TweezerParams};

pub const SECTIONS: [&str; 6] = ["cavity", "tweezer", "particle", "environment", "coupling", "sweep"];

/// The bundled laboratory parameter set.
pub const PAPER_DEFAULTS_JSON: &str = include_str!("../paper_defaults.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub wavelength_nm: f64,
    pub length_mm: f64,
    pub finesse: f64,
    pub waist_um: f64,
    pub mirror_absorption_ppm: f64,
    pub mirror_transmission_ppm: f64,
    pub radius_of_curvature_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TweezerSection {
    pub power_w: f64,
    pub reference_power_w: f64,
    pub numerical_aperture: f64,
    pub detuning_hz: f64,
    pub polarization_misalignment: f64,
    pub trap_frequencies_hz: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSection {
    pub diameter_nm: f64,
    pub density_kg_m3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub pressure_mbar: f64,
    pub gas_temperature_k: f64,
    pub gas_molecular_mass_amu: f64,
    pub noise_heating_k_per_s: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub g0_hz: f64,
    pub z_ratio: f64,
    pub phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub mode: Mode,
    pub seed: u64,
    pub pressures_mbar: Vec<f64>,
    pub phases_rad: Vec<f64>,
    pub detunings_hz: Vec<f64>,
    pub powers_w: Vec<f64>,
    pub duration_s: f64,
    pub dt_s: f64,
    pub trajectory_ensemble: usize,
    pub relaxation_ensemble: usize,
    pub relaxation_duration_s: f64,
    pub relaxation_pre_s: f64,
    pub far_detuning_hz: f64,
    pub window_periods: f64,
    pub band_fwhm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cavity: CavitySection,
    pub tweezer: TweezerSection,
    pub particle: ParticleSection,
    pub environment: EnvironmentSection,
    pub coupling: CouplingSection,
    pub sweep: SweepSection,
}

fn err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

fn positive(key: &str, v: f64, unit: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(err(key, format!("must be > 0 {unit}, got {v}")))
    }
}

fn non_negative(key: &str, v: f64, unit: &str) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(err(key, format!("must be ≥ 0 {unit}, got {v}")))
    }
}

fn finite(key: &str, v: f64, unit: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(err(key, format!("must be a finite number of {unit}")))
    }
}

fn monotone(key: &str, values: &[f64]) -> Result<()> {
    let inc = values.windows(2).all(|w| w[1] > w[0]);
    let dec = values.windows(2).all(|w| w[1] < w[0]);
    if inc || dec {
        Ok(())
    } else {
        Err(err(key, "grid must be strictly monotone"))
    }
}

/// Sets `path` (dot separated) in a JSON object tree. The value is parsed as
/// JSON when possible, otherwise taken as a string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| err(assignment, "override must look like section.key=value"))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| err(path, "override path does not name an object field"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

impl RunConfig {
    pub fn paper_defaults() -> Self {
        Self::from_json_str(PAPER_DEFAULTS_JSON, &[]).expect("bundled defaults are valid")
    }

    /// Parses and validates a config document, applying `overrides`
    /// (`section.key=value`) first. Missing sections are reported together;
    /// unknown keys and out-of-domain values name the offending key.
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut root: Value = if text.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(text).map_err(|e| err("<root>", format!("invalid JSON: {e}")))?
        };
        if !root.is_object() {
            return Err(err("<root>", "config must be a JSON object"));
        }
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let obj = root.as_object().expect("checked above");
        let missing: Vec<&str> = SECTIONS.iter().copied().filter(|s| !obj.contains_key(*s)).collect();
        if !missing.is_empty() {
            return Err(err("<root>", format!("missing required sections: {}", missing.join(", "))));
        }
        if let Some(extra) = obj.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(err(extra, format!("unknown section; expected one of {}", SECTIONS.join(", "))));
        }
        fn section<T: for<'de> Deserialize<'de>>(obj: &serde_json::Map<String, Value>, name: &str) -> Result<T> {
            serde_json::from_value(obj[name].clone()).map_err(|e| err(name, e.to_string()))
        }
        let cfg = RunConfig {
            cavity: section(obj, "cavity")?,
            tweezer: section(obj, "tweezer")?,
            particle: section(obj, "particle")?,
            environment: section(obj, "environment")?,
            coupling: section(obj, "coupling")?,
            sweep: section(obj, "sweep")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, overrides)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.cavity;
        positive("cavity.wavelength_nm", c.wavelength_nm, "nm")?;
        positive("cavity.length_mm", c.length_mm, "mm")?;
        if !(c.finesse > 1.0 && c.finesse.is_finite()) {
            return Err(err("cavity.finesse", format!("must be > 1, got {}", c.finesse)));
        }
        positive("cavity.waist_um", c.waist_um, "µm")?;
        non_negative("cavity.mirror_absorption_ppm", c.mirror_absorption_ppm, "ppm")?;
        non_negative("cavity.mirror_transmission_ppm", c.mirror_transmission_ppm, "ppm")?;
        positive("cavity.radius_of_curvature_mm", c.radius_of_curvature_mm, "mm")?;

        let t = &self.tweezer;
        positive("tweezer.power_w", t.power_w, "W")?;
        positive("tweezer.reference_power_w", t.reference_power_w, "W")?;
        if !(t.numerical_aperture > 0.0 && t.numerical_aperture < 1.0) {
            return Err(err("tweezer.numerical_aperture", format!("must lie in (0, 1), got {}", t.numerical_aperture)));
        }
        finite("tweezer.detuning_hz", t.detuning_hz, "Hz")?;
        if !(t.polarization_misalignment >= 0.0 && t.polarization_misalignment < 1.0) {
            return Err(err(
                "tweezer.polarization_misalignment",
                format!("must lie in [0, 1), got {}", t.polarization_misalignment),
            ));
        }
        for f in t.trap_frequencies_hz {
            positive("tweezer.trap_frequencies_hz", f, "Hz")?;
        }

        positive("particle.diameter_nm", self.particle.diameter_nm, "nm")?;
        positive("particle.density_kg_m3", self.particle.density_kg_m3, "kg/m³")?;

        let e = &self.environment;
        non_negative("environment.pressure_mbar", e.pressure_mbar, "mbar")?;
        positive("environment.gas_temperature_k", e.gas_temperature_k, "K")?;
        positive("environment.gas_molecular_mass_amu", e.gas_molecular_mass_amu, "u")?;
        for r in e.noise_heating_k_per_s {
            non_negative("environment.noise_heating_k_per_s", r, "K/s")?;
        }

        non_negative("coupling.g0_hz", self.coupling.g0_hz, "Hz")?;
        non_negative("coupling.z_ratio", self.coupling.z_ratio, "")?;
        finite("coupling.phase_rad", self.coupling.phase_rad, "rad")?;

        let s = &self.sweep;
        for &p in &s.pressures_mbar {
            non_negative("sweep.pressures_mbar", p, "mbar")?;
        }
        monotone("sweep.pressures_mbar", &s.pressures_mbar)?;
        for &p in &s.phases_rad {
            finite("sweep.phases_rad", p, "rad")?;
        }
        for &d in &s.detunings_hz {
            finite("sweep.detunings_hz", d, "Hz")?;
        }
        monotone("sweep.detunings_hz", &s.detunings_hz)?;
        for &p in &s.powers_w {
            positive("sweep.powers_w", p, "W")?;
        }
        monotone("sweep.powers_w", &s.powers_w)?;
        positive("sweep.duration_s", s.duration_s, "s")?;
        positive("sweep.dt_s", s.dt_s, "s")?;
        if s.trajectory_ensemble == 0 {
            return Err(err("sweep.trajectory_ensemble", "must be ≥ 1"));
        }
        if s.relaxation_ensemble == 0 {
            return Err(err("sweep.relaxation_ensemble", "must be ≥ 1"));
        }
        positive("sweep.relaxation_duration_s", s.relaxation_duration_s, "s")?;
        non_negative("sweep.relaxation_pre_s", s.relaxation_pre_s, "s")?;
        finite("sweep.far_detuning_hz", s.far_detuning_hz, "Hz")?;
        if !(s.window_periods >= crate::analysis::sliding::MIN_WINDOW_PERIODS) {
            return Err(err("sweep.window_periods", format!("must be ≥ 20 periods, got {}", s.window_periods)));
        }
        positive("sweep.band_fwhm", s.band_fwhm, "FWHM")?;
        self.system().map(|_| ())
    }

    /// Physical parameters in internal units.
    pub fn system(&self) -> Result<SystemParams> {
        let c = &self.cavity;
        let cavity = CavityParams::from_finesse(c.wavelength_nm * 1e-9, c.length_mm * 1e-3, c.finesse, c.waist_um * 1e-6)?
            .with_mirrors(
                c.mirror_absorption_ppm * 1e-6,
                c.mirror_transmission_ppm * 1e-6,
                c.radius_of_curvature_mm * 1e-3,
            );
        let t = &self.tweezer;
        let tweezer = TweezerParams {
            power: t.power_w,
            reference_power: t.reference_power_w,
            numerical_aperture: t.numerical_aperture,
            detuning: TWO_PI * t.detuning_hz,
            polarization_misalignment: t.polarization_misalignment,
            reference_trap_frequencies: t.trap_frequencies_hz.map(|f| TWO_PI * f),
        };
        let particle = ParticleParams::new(self.particle.diameter_nm * 1e-9, self.particle.density_kg_m3)?;
        let e = &self.environment;
        let environment = EnvironmentParams {
            pressure: e.pressure_mbar * PA_PER_MBAR,
            gas_temperature: e.gas_temperature_k,
            gas_molecular_mass: e.gas_molecular_mass_amu * ATOMIC_MASS_UNIT,
            noise_heating_ref: e.noise_heating_k_per_s,
        };
        let sys = SystemParams {
            cavity,
            tweezer,
            particle,
            environment,
            phase: PositionPhase::new(self.coupling.phase_rad)?,
            coupling: CouplingConfig {
                g0: TWO_PI * self.coupling.g0_hz,
                z_ratio: self.coupling.z_ratio,
            },
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn trajectory_settings(&self) -> TrajectorySettings {
        TrajectorySettings {
            duration: self.sweep.duration_s,
            dt: self.sweep.dt_s,
            ensemble: self.sweep.trajectory_ensemble,
        }
    }

    fn plan(&self, variable: SweepVariable, values: Vec<f64>) -> Result<SweepPlan> {
        let phases = self
            .sweep
            .phases_rad
            .iter()
            .map(|&p| PositionPhase::new(p))
            .collect::<Result<Vec<_>>>()?;
        let mut plan = SweepPlan::new(variable, values, self.system()?);
        if !phases.is_empty() {
            plan.phases = phases;
        }
        plan.mode = self.sweep.mode;
        plan.trajectory = self.trajectory_settings();
        plan.seed = self.sweep.seed;
        Ok(plan)
    }

    pub fn pressure_plan(&self) -> Result<SweepPlan> {
        self.plan(
            SweepVariable::Pressure,
            self.sweep.pressures_mbar.iter().map(|p| p * PA_PER_MBAR).collect(),
        )
    }

    /// Detuning sweep at the configured particle phase.
    pub fn detuning_plan(&self) -> Result<SweepPlan> {
        let mut plan = self.plan(
            SweepVariable::Detuning,
            self.sweep.detunings_hz.iter().map(|d| TWO_PI * d).collect(),
        )?;
        plan.phases = vec![plan.system.phase];
        Ok(plan)
    }

    pub fn power_plan(&self) -> Result<SweepPlan> {
        self.plan(SweepVariable::Power, self.sweep.powers_w.clone())
    }

    pub fn relaxation_plan(&self) -> Result<RelaxationPlan> {
        let mut plan = RelaxationPlan::new(self.system()?);
        plan.far_detuning = TWO_PI * self.sweep.far_detuning_hz;
        plan.ensemble = self.sweep.relaxation_ensemble;
        plan.duration = self.sweep.relaxation_duration_s;
        plan.pre_duration = self.sweep.relaxation_pre_s;
        plan.dt = self.sweep.dt_s;
        plan.seed = self.sweep.seed;
        plan.window_periods = self.sweep.window_periods;
        plan.band_fwhm = self.sweep.band_fwhm;
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bundled_defaults_match_system_defaults() {
        let cfg = RunConfig::paper_defaults();
        let sys = cfg.system().unwrap();
        let reference = SystemParams::paper_defaults();
        assert_relative_eq!(sys.cavity.linewidth, reference.cavity.linewidth, max_relative = 1e-12);
        assert_relative_eq!(sys.cavity.wavelength, 1550e-9, max_relative = 1e-12);
        assert_relative_eq!(sys.cavity.length, 6.46e-3, max_relative = 1e-12);
        assert_relative_eq!(sys.cavity.waist, 48e-6, max_relative = 1e-12);
        assert_relative_eq!(sys.tweezer.power, 0.5);
        assert_relative_eq!(sys.particle.diameter, 136e-9, max_relative = 1e-12);
        assert_relative_eq!(sys.particle.mass, reference.particle.mass, max_relative = 1e-12);
        assert_relative_eq!(sys.environment.pressure, reference.environment.pressure, max_relative = 1e-12);
        assert_relative_eq!(sys.coupling.g0, reference.coupling.g0, max_relative = 1e-12);
        assert_relative_eq!(sys.tweezer.detuning, reference.tweezer.detuning, max_relative = 1e-12);
        assert_eq!(sys.phase, reference.phase);
    }

    #[test]
    fn round_trip_is_a_fixpoint() {
        let cfg = RunConfig::paper_defaults();
        let again = RunConfig::from_json_str(&cfg.to_json(), &[]).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_json(), again.to_json());
    }

    #[test]
    fn empty_document_lists_sections() {
        let e = RunConfig::from_json_str("", &[]).unwrap_err().to_string();
        for s in SECTIONS {
            assert!(e.contains(s), "{e}");
        }
        assert!(RunConfig::from_json_str("{}", &[]).is_err());
    }

    #[test]
    fn negative_pressure_names_key() {
        let e = RunConfig::from_json_str(PAPER_DEFAULTS_JSON, &["environment.pressure_mbar=-1".into()]).unwrap_err();
        assert!(e.to_string().contains("environment.pressure_mbar"), "{e}");
        assert!(e.to_string().contains("mbar"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_json_str(PAPER_DEFAULTS_JSON, &["cavity.colour=\"red\"".into()]).unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
        assert!(RunConfig::from_json_str(PAPER_DEFAULTS_JSON, &["extra.x=1".into()]).is_err());
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_json_str(PAPER_DEFAULTS_JSON, &["tweezer.detuning_hz=1e6".into(), "sweep.mode=trajectory".into()]).unwrap();
        assert_eq!(cfg.tweezer.detuning_hz, 1e6);
        assert_eq!(cfg.sweep.mode, Mode::Trajectory);
    }
}
