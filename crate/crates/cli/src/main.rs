use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use levicav::analysis::{fwhm_damping, welch_psd, WelchParams};
use levicav::config::{RunConfig, PAPER_DEFAULTS_JSON};
use levicav::constants::TWO_PI;
use levicav::dynamics::propagator::{sample_gaussian, simulate_with, stream_rng, SimulationOptions};
use levicav::dynamics::{build_linear_model, simulate_nonlinear_from, steady_state_covariance, steady_state_temperatures, NonlinearTrapModel, TimeTrace};
use levicav::experiments::{
    emit_report, run_detuning_sweep, run_power_sweep, run_pressure_sweep, run_relaxation_ensemble, Direction, Manifest,
    Mode, Report, SweepResult,
};
use levicav::{Axis, Error, Result};

/// Virtual experiments on a levitated nanoparticle coupled to an optical
/// cavity by coherent scattering.
#[derive(Debug, Parser)]
#[command(name = "levicav", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print per-axis steady-state temperatures and cooling rates.
    SteadyState(RunArgs),
    /// Temperature and damping against gas pressure at each phase.
    SweepPressure(RunArgs),
    /// Switch-on and switch-off relaxation ensembles.
    Relaxation(RunArgs),
    /// Temperatures against cavity detuning.
    SweepDetuning(RunArgs),
    /// Temperatures against tweezer power at the best-cooling positions.
    SweepPower(RunArgs),
    /// Power spectral density of one channel of a trace file.
    Psd(PsdArgs),
    /// Write a simulated state trace (binary, optionally CSV).
    Simulate(SimulateArgs),
    /// Repeat a run from its manifest into a new run directory.
    Rerun(RerunArgs),
    /// Print the bundled default configuration.
    Defaults,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON configuration; the bundled defaults when omitted.
    config: Option<PathBuf>,
    /// Particle position: node, slope, antinode, or a phase in radians.
    #[arg(long)]
    phase: Option<String>,
    /// Override a config entry, e.g. `--set environment.pressure_mbar=1e-3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Oracle, trajectory or nonlinear.
    #[arg(long)]
    mode: Option<String>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Parent directory of the timestamped run directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Print machine-readable JSON instead of a table (steady-state).
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct PsdArgs {
    /// Trace file (`.csv` or the binary trace format).
    trace: PathBuf,
    #[arg(long, default_value = "q_y")]
    channel: String,
    /// Welch segment length in samples.
    #[arg(long, default_value_t = 4096)]
    segment: usize,
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    /// Trap frequency in Hz; enables the linewidth estimate.
    #[arg(long)]
    trap_frequency_hz: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Also write the trace as CSV.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct RerunArgs {
    manifest: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::ParameterDomain { .. } => 2,
        Error::Unstable(_) => 3,
        Error::Analysis(_) | Error::Fit(_) | Error::TraceTooShort { .. } | Error::Format(_) => 4,
        Error::Io { .. } => 5,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config { .. } => "config",
        Error::ParameterDomain { .. } => "parameter_domain",
        Error::Unstable(_) => "unstable",
        Error::TraceTooShort { .. } => "trace_too_short",
        Error::Analysis(_) => "analysis",
        Error::Fit(_) => "fit",
        Error::Format(_) => "format",
        Error::Io { .. } => "io",
    }
}

fn report_error(e: &Error) -> ExitCode {
    let code = exit_code(e);
    let mut obj = json!({"error": error_kind(e), "message": e.to_string(), "exit_code": code});
    match e {
        Error::Config { key, .. } => obj["key"] = json!(key),
        Error::ParameterDomain { name, .. } => obj["key"] = json!(name),
        Error::Io { path, .. } => obj["path"] = json!(path.display().to_string()),
        _ => {}
    }
    eprintln!("{obj}");
    ExitCode::from(code)
}

fn parse_phase(text: &str) -> Result<f64> {
    match text.to_ascii_lowercase().as_str() {
        "node" => Ok(std::f64::consts::FRAC_PI_2),
        "slope" => Ok(std::f64::consts::FRAC_PI_4),
        "antinode" => Ok(0.0),
        other => other.parse::<f64>().map_err(|_| Error::Config {
            key: "--phase".into(),
            reason: format!("expected node, slope, antinode or radians, got `{text}`"),
        }),
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut overrides = Vec::new();
    if let Ok(seed) = std::env::var("LEVICAV_SEED") {
        let seed: u64 = seed.trim().parse().map_err(|_| Error::Config {
            key: "LEVICAV_SEED".into(),
            reason: format!("must be an unsigned integer, got `{seed}`"),
        })?;
        overrides.push(format!("sweep.seed={seed}"));
    }
    if let Some(p) = &args.phase {
        let phi = parse_phase(p)?;
        overrides.push(format!("coupling.phase_rad={phi}"));
        overrides.push(format!("sweep.phases_rad=[{phi}]"));
    }
    if let Some(m) = &args.mode {
        let mode: Mode = serde_json::from_value(json!(m)).map_err(|_| Error::Config {
            key: "--mode".into(),
            reason: format!("expected oracle, trajectory or nonlinear, got `{m}`"),
        })?;
        overrides.push(format!("sweep.mode=\"{mode}\""));
    }
    overrides.extend(args.overrides.iter().cloned());
    match &args.config {
        Some(path) => RunConfig::from_path(path, &overrides),
        None => RunConfig::from_json_str(PAPER_DEFAULTS_JSON, &overrides),
    }
}

fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Config {
                key: "--jobs".into(),
                reason: "must be ≥ 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config {
                key: "--jobs".into(),
                reason: e.to_string(),
            })?;
    }
    Ok(())
}

/// Creates `<out>/<command>-<UTC timestamp>[-k]`.
fn run_directory(out: &Path, command: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.into(),
        source: e,
    })?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    for k in 0.. {
        let name = if k == 0 {
            format!("{command}-{stamp}")
        } else {
            format!("{command}-{stamp}-{k}")
        };
        let dir = out.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::Io { path: dir, source: e }),
        }
    }
    unreachable!()
}

fn log_sweep(result: &SweepResult) {
    let (name, factor) = result.variable.column();
    for p in &result.points {
        let temps: Vec<String> = p
            .axes
            .iter()
            .map(|a| match a.temperature {
                Some(t) => format!("T_{}={t:.4e} K", a.axis),
                None => format!("T_{}=lost", a.axis),
            })
            .collect();
        eprintln!(
            "point {} {name}={:.6e} phase={:.4} {} {}",
            p.index,
            p.value * factor,
            p.phase,
            temps.join(" "),
            if p.stable { "stable" } else { "UNSTABLE" }
        );
    }
}

fn steady_state(args: &RunArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let sys = cfg.system()?;
    let model = build_linear_model(&sys)?;
    let temps = steady_state_temperatures(&model)?;
    let cooling = sys.cooling_rates();
    let trap = sys.trap_frequencies();
    let coupling = sys.coupling_rates().rates;
    if args.json {
        let axes: Vec<_> = Axis::ALL
            .iter()
            .map(|&a| {
                let i = a.index();
                json!({
                    "axis": a,
                    "temperature_k": temps[i],
                    "cooling_rate_hz": cooling[i] / TWO_PI,
                    "coupling_hz": coupling[i] / TWO_PI,
                    "trap_frequency_hz": trap[i] / TWO_PI,
                })
            })
            .collect();
        let out = json!({
            "phase_rad": sys.phase.radians(),
            "pressure_mbar": cfg.environment.pressure_mbar,
            "gas_damping_hz": sys.gas_damping() / TWO_PI,
            "axes": axes,
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    } else {
        println!(
            "phase {:.4} rad, pressure {:e} mbar, gas damping {:.4e} Hz",
            sys.phase.radians(),
            cfg.environment.pressure_mbar,
            sys.gas_damping() / TWO_PI
        );
        println!("axis  temperature_K  cooling_rate_Hz  coupling_Hz  trap_frequency_Hz");
        for a in Axis::ALL {
            let i = a.index();
            println!(
                "{:<4}  {:<13.6e}  {:<15.6e}  {:<11.4e}  {:.4e}",
                a.label(),
                temps[i],
                cooling[i] / TWO_PI,
                coupling[i] / TWO_PI,
                trap[i] / TWO_PI
            );
        }
    }
    Ok(())
}

/// Runs `command` for `cfg` into `dir` and returns the written file names.
fn execute(command: &str, cfg: &RunConfig, dir: &Path) -> Result<Vec<String>> {
    match command {
        "sweep-pressure" => {
            let r = run_pressure_sweep(&cfg.pressure_plan()?)?;
            log_sweep(&r);
            emit_report(&Report::Pressure(&r), dir)
        }
        "sweep-detuning" => {
            let r = run_detuning_sweep(&cfg.detuning_plan()?)?;
            log_sweep(&r);
            emit_report(&Report::Detuning(&r), dir)
        }
        "sweep-power" => {
            let r = run_power_sweep(&cfg.power_plan()?)?;
            log_sweep(&r);
            emit_report(&Report::Power(&r), dir)
        }
        "relaxation" => {
            let base = cfg.relaxation_plan()?;
            let mut results = Vec::new();
            for &phi in &cfg.sweep.phases_rad {
                let mut plan = base.clone();
                plan.system = plan.system.with_phase(levicav::params::PositionPhase::new(phi)?);
                for direction in [Direction::CoolingOn, Direction::CoolingOff] {
                    let r = run_relaxation_ensemble(&plan, direction)?;
                    for a in &r.axes {
                        eprintln!(
                            "relaxation {direction} phase={phi:.4} axis={} rate={} reference={:.4e} 1/s",
                            a.axis,
                            a.fitted_rate().map(|k| format!("{k:.4e}")).unwrap_or_else(|| "n/a".into()),
                            a.reference_rate
                        );
                    }
                    results.push(r);
                }
            }
            emit_report(&Report::Relaxation(&results), dir)
        }
        "simulate" => {
            let sys = cfg.system()?;
            let model = build_linear_model(&sys)?;
            let c = steady_state_covariance(&model)?;
            let seed = cfg.sweep.seed;
            let x0 = sample_gaussian(&c, &mut stream_rng(seed, u64::from(u32::MAX), 0));
            let (duration, dt) = (cfg.sweep.duration_s, cfg.sweep.dt_s);
            let trace: TimeTrace = match cfg.sweep.mode {
                Mode::Nonlinear => simulate_nonlinear_from(&NonlinearTrapModel::from_params(&sys)?, x0, duration, dt, seed)?,
                _ => simulate_with(
                    &model,
                    duration,
                    dt,
                    seed,
                    &SimulationOptions {
                        initial_state: x0,
                        ..Default::default()
                    },
                )?,
            };
            trace.write_binary(&dir.join("trace.bin"))?;
            Ok(vec!["trace.bin".into()])
        }
        other => Err(Error::Config {
            key: "command".into(),
            reason: format!("`{other}` cannot be rerun"),
        }),
    }
}

fn run_with_manifest(command: &str, cfg: &RunConfig, out: &Path, csv_trace: bool) -> Result<PathBuf> {
    let dir = run_directory(out, command)?;
    let mut files = execute(command, cfg, &dir)?;
    if csv_trace {
        TimeTrace::read_binary(&dir.join("trace.bin"))?.write_csv(&dir.join("trace.csv"))?;
        files.push("trace.csv".into());
    }
    let mut manifest = Manifest::new(command, cfg);
    manifest.files = files;
    manifest.write(&dir)?;
    println!("{}", dir.display());
    Ok(dir)
}

fn psd(args: &PsdArgs) -> Result<()> {
    set_jobs(args.jobs)?;
    if !(0.0..1.0).contains(&args.overlap) {
        return Err(Error::Config {
            key: "--overlap".into(),
            reason: format!("must lie in [0, 1), got {}", args.overlap),
        });
    }
    let trace = TimeTrace::read(&args.trace)?;
    let params = WelchParams {
        segment_length: args.segment,
        overlap: args.overlap,
        ..WelchParams::new(args.segment)
    };
    let spectrum = welch_psd(&trace, &args.channel, &params)?;
    let dir = run_directory(&args.out, "psd")?;
    let name = format!("psd_{}.csv", args.channel);
    spectrum.write_csv(&dir.join(&name))?;
    let mut summary = json!({
        "trace": args.trace.display().to_string(),
        "channel": args.channel,
        "segment_length": args.segment,
        "overlap": args.overlap,
        "bin_width_hz": spectrum.bin_width,
        "resolution_bandwidth_hz": spectrum.resolution_bandwidth,
        "segments": spectrum.segments,
        "variance": spectrum.area(),
        "files": [name],
    });
    if let Some(f0) = args.trap_frequency_hz {
        let band = (0.7 * f0, (1.3 * f0).min(spectrum.max_frequency()));
        match fwhm_damping(&spectrum, Some(band)) {
            Ok(est) => {
                summary["center_hz"] = json!(est.center_hz);
                summary["damping_rad_s"] = json!(est.damping);
                summary["damping_direct_rad_s"] = json!(est.damping_direct);
            }
            Err(e) => summary["linewidth_error"] = json!(e.to_string()),
        }
    }
    let text = serde_json::to_string_pretty(&summary).expect("json") + "\n";
    let path = dir.join("psd_summary.json");
    std::fs::write(&path, &text).map_err(|e| Error::Io { path, source: e })?;
    println!("{}", dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SteadyState(args) => steady_state(&args),
        Command::SweepPressure(args) => sweep_command("sweep-pressure", &args, false),
        Command::Relaxation(args) => sweep_command("relaxation", &args, false),
        Command::SweepDetuning(args) => sweep_command("sweep-detuning", &args, false),
        Command::SweepPower(args) => sweep_command("sweep-power", &args, false),
        Command::Simulate(args) => sweep_command("simulate", &args.run, args.csv),
        Command::Psd(args) => psd(&args),
        Command::Rerun(args) => {
            set_jobs(args.jobs)?;
            let manifest = Manifest::read(&args.manifest)?;
            let csv = manifest.files.iter().any(|f| f == "trace.csv");
            run_with_manifest(&manifest.command, &manifest.config, &args.out, csv).map(|_| ())
        }
        Command::Defaults => {
            print!("{PAPER_DEFAULTS_JSON}");
            Ok(())
        }
    }
}

fn sweep_command(command: &str, args: &RunArgs, csv: bool) -> Result<()> {
    set_jobs(args.jobs)?;
    let cfg = load_config(args)?;
    run_with_manifest(command, &cfg, &args.out, csv).map(|_| ())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}
