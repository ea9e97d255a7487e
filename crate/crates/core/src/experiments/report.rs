use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::plan::{SweepPoint, SweepResult, SweepVariable};
use super::relaxation::RelaxationResult;
use crate::analysis::{fit_pressure_sweep, AxisSweepData, FitResult, PressureSweepData};
use crate::config::RunConfig;
use crate::constants::{PA_PER_MBAR, TWO_PI};
use crate::error::{Error, Result};
use crate::params::Axis;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to rerun an experiment bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Subcommand that produced the outputs.
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: "levicav".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.sweep.seed,
            config: config.clone(),
            files: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serialises") + "\n";
        write_file(&path, &text)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        m.config.validate()?;
        Ok(m)
    }
}

/// Results that `emit_report` knows how to tabulate.
#[derive(Debug, Clone)]
pub enum Report<'a> {
    Pressure(&'a SweepResult),
    Relaxation(&'a [RelaxationResult]),
    Detuning(&'a SweepResult),
    Power(&'a SweepResult),
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn num(v: f64) -> String {
    format!("{v:.10e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn swept(point: &SweepPoint, variable: SweepVariable) -> String {
    num(point.value * variable.column().1)
}

/// Writes the CSV tables (and fit JSON where applicable) for `report` into
/// `dir` and returns the file names in writing order.
pub fn emit_report(report: &Report<'_>, dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match report {
        Report::Pressure(r) => pressure_report(r, dir),
        Report::Relaxation(r) => relaxation_report(r, dir),
        Report::Detuning(r) => detuning_report(r, dir),
        Report::Power(r) => power_report(r, dir),
    }
}

#[derive(Serialize)]
struct PhaseFit {
    phase_rad: f64,
    fit: Option<FitResult>,
    error: Option<String>,
}

/// Fits the two-bath/damping model to the stable points at one phase.
pub fn fit_sweep_phase(result: &SweepResult, phase: f64, gas_temperature: f64) -> Result<FitResult> {
    let points: Vec<&SweepPoint> = result
        .points
        .iter()
        .filter(|p| (p.phase - phase).abs() < 1e-12 && p.stable && p.value > 0.0)
        .collect();
    let axes = Axis::ALL
        .iter()
        .map(|&axis| {
            let mut d = AxisSweepData {
                axis,
                pressure: Vec::new(),
                temperature: Vec::new(),
                damping: Vec::new(),
            };
            for p in &points {
                if let (Some(t), Some(g)) = (p.temperature(axis), p.damping(axis)) {
                    d.pressure.push(p.value);
                    d.temperature.push(t);
                    d.damping.push(g);
                }
            }
            d
        })
        .collect();
    fit_pressure_sweep(&PressureSweepData { gas_temperature, axes })
}

fn phases_of(result: &SweepResult) -> Vec<f64> {
    let mut phases: Vec<f64> = Vec::new();
    for p in &result.points {
        if !phases.iter().any(|&q| (q - p.phase).abs() < 1e-12) {
            phases.push(p.phase);
        }
    }
    phases
}

fn pressure_report(result: &SweepResult, dir: &Path) -> Result<Vec<String>> {
    let mut temps = String::from("pressure_mbar,phase_rad,axis,temperature_K\n");
    let mut damp = String::from("pressure_mbar,phase_rad,axis,damping_rad_s,cooling_rate_rad_s,gas_damping_rad_s,stable\n");
    for p in &result.points {
        for a in &p.axes {
            let x = num(p.value / PA_PER_MBAR);
            let _ = writeln!(temps, "{x},{},{},{}", num(p.phase), a.axis, opt(a.temperature));
            let _ = writeln!(
                damp,
                "{x},{},{},{},{},{},{}",
                num(p.phase),
                a.axis,
                opt(a.damping),
                num(a.cooling_rate),
                num(p.gas_damping),
                p.stable
            );
        }
    }
    write_file(&dir.join("fig2_temperatures.csv"), &temps)?;
    write_file(&dir.join("fig2_damping.csv"), &damp)?;
    let gas_temperature = 300.0;
    let fits: Vec<PhaseFit> = phases_of(result)
        .into_iter()
        .map(|phase| match fit_sweep_phase(result, phase, gas_temperature) {
            Ok(fit) => PhaseFit {
                phase_rad: phase,
                fit: Some(fit),
                error: None,
            },
            Err(e) => PhaseFit {
                phase_rad: phase,
                fit: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let json = serde_json::to_string_pretty(&fits).expect("fits serialise") + "\n";
    write_file(&dir.join("fig2_fits.json"), &json)?;
    Ok(vec!["fig2_temperatures.csv".into(), "fig2_damping.csv".into(), "fig2_fits.json".into()])
}

#[derive(Serialize)]
struct RelaxationFit<'a> {
    direction: String,
    phase_rad: f64,
    axis: Axis,
    fitted_rate_rad_s: Option<f64>,
    reference_rate_rad_s: f64,
    initial_steady_state_k: f64,
    final_steady_state_k: f64,
    fit: Option<&'a FitResult>,
    error: Option<&'a str>,
}

fn relaxation_report(results: &[RelaxationResult], dir: &Path) -> Result<Vec<String>> {
    let mut csv = String::from("direction,phase_rad,axis,time_s,temperature_K\n");
    let mut fits = Vec::new();
    for r in results {
        for a in &r.axes {
            for (t, temp) in a.times.iter().zip(&a.temperatures) {
                let _ = writeln!(csv, "{},{},{},{},{}", r.direction, num(r.phase), a.axis, num(*t), num(*temp));
            }
            fits.push(RelaxationFit {
                direction: r.direction.to_string(),
                phase_rad: r.phase,
                axis: a.axis,
                fitted_rate_rad_s: a.fitted_rate(),
                reference_rate_rad_s: a.reference_rate,
                initial_steady_state_k: a.initial_steady_state,
                final_steady_state_k: a.final_steady_state,
                fit: a.fit.as_ref(),
                error: a.fit_error.as_deref(),
            });
        }
    }
    write_file(&dir.join("fig3_relaxation.csv"), &csv)?;
    let json = serde_json::to_string_pretty(&fits).expect("fits serialise") + "\n";
    write_file(&dir.join("fig3_fits.json"), &json)?;
    Ok(vec!["fig3_relaxation.csv".into(), "fig3_fits.json".into()])
}

fn detuning_report(result: &SweepResult, dir: &Path) -> Result<Vec<String>> {
    let mut csv = String::from("detuning_hz,phase_rad,axis,temperature_K,damping_rad_s,cooling_rate_rad_s,stable,predicate_stable\n");
    for p in &result.points {
        for a in &p.axes {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                num(p.value / TWO_PI),
                num(p.phase),
                a.axis,
                opt(a.temperature),
                opt(a.damping),
                num(a.cooling_rate),
                p.stable,
                p.predicate_stable
            );
        }
    }
    write_file(&dir.join("fig4_detuning.csv"), &csv)?;
    Ok(vec!["fig4_detuning.csv".into()])
}

fn power_report(result: &SweepResult, dir: &Path) -> Result<Vec<String>> {
    let mut csv = String::from("power_w,phase_rad,axis,temperature_K,damping_rad_s,cooling_rate_rad_s,stable\n");
    for p in &result.points {
        for a in &p.axes {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                swept(p, result.variable),
                num(p.phase),
                a.axis,
                opt(a.temperature),
                opt(a.damping),
                num(a.cooling_rate),
                p.stable
            );
        }
    }
    write_file(&dir.join("fig4_power.csv"), &csv)?;
    Ok(vec!["fig4_power.csv".into()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run_pressure_sweep, SweepPlan};
    use crate::params::SystemParams;

    #[test]
    fn empty_grid_gives_header_only() {
        let plan = SweepPlan::new(SweepVariable::Pressure, vec![], SystemParams::paper_defaults());
        let res = run_pressure_sweep(&plan).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&Report::Pressure(&res), dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("fig2_temperatures.csv")).unwrap();
        assert_eq!(text, "pressure_mbar,phase_rad,axis,temperature_K\n");
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let plan = SweepPlan::new(SweepVariable::Power, vec![0.5], SystemParams::paper_defaults());
        let res = crate::experiments::run_sweep(&plan).unwrap();
        let e = emit_report(&Report::Power(&res), &blocker.join("sub")).unwrap_err();
        assert!(e.to_string().contains("file"), "{e}");
    }

    #[test]
    fn manifest_round_trip() {
        let cfg = RunConfig::paper_defaults();
        let mut m = Manifest::new("sweep-pressure", &cfg);
        m.files.push("fig2_temperatures.csv".into());
        let dir = tempfile::tempdir().unwrap();
        let path = m.write(dir.path()).unwrap();
        assert_eq!(Manifest::read(&path).unwrap(), m);
    }
}
