//! Command-line front end. Each subcommand loads a scenario, runs one
//! experiment and writes CSV tables plus a `key: value` report into the
//! output directory.
//!
//! Exit codes: 0 success, 1 usage, 2 configuration, 3 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::actuator::{
    frequency_response, log_frequencies, minus_3db_crossing, resonance_peak, simulate, ActuatorMode, ActuatorState,
};
use crate::config::{ConfigError, ScenarioConfig};
use crate::mechanisms::MechanismModel;
use crate::metrics::{min_of_samples, sweep_workspace, FIGURE_DENSITY_SCALE};
use crate::output::{fmt_bool, fmt_num, read_trace, trace_fields, Csv, OutputError, Report, TRACE_HEADER};
use crate::rendering::{simulate_interaction, stiffness_render_limit, RenderLimit};
use crate::stiffness::{min_stiffness, stiffness_map};
use crate::sysid::{
    differentiate, generate_dynamics_trace, generate_motor_trace, identify_dynamics, identify_motor_constant,
    validation_stats, DiffOptions, IdentifiedParams, SimTrace,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "haptica", version, about = "Planar haptic interface analysis and simulation")]
pub struct Cli {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output_dir` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed, overriding `seed` from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Restrict mechanism commands to one named mechanism.
    #[arg(long, global = true, value_name = "NAME")]
    pub mechanism: Option<String>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Force capability, reflected inertia and force density maps.
    Analyze,
    /// Locked structural stiffness maps.
    Stiffness,
    /// Linear actuator responses.
    Actuator {
        #[command(subcommand)]
        which: ActuatorCommand,
    },
    /// Synthetic identification experiments.
    Sysid {
        #[command(subcommand)]
        which: SysidCommand,
    },
    /// Sampled-data virtual fixture rendering.
    Render {
        #[command(subcommand)]
        which: RenderCommand,
    },
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum ActuatorCommand {
    /// Free-rod response to a commanded force step.
    StepResponse,
    /// Clamped-rod frequency response of the transmitted force.
    FreqResponse,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum SysidCommand {
    /// Simulate the unpowered chirp run and the motor-constant run.
    Generate,
    /// Least-squares fit of mass, friction and motor constant.
    Fit,
    /// Fit, then score the model on the held-out trace.
    Validate,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum RenderCommand {
    /// Slide along the edge of a virtual box.
    Vbox,
    /// Press-and-release wall sweep for the largest stable stiffness.
    StiffnessLimit,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<OutputError> for CliError {
    fn from(e: OutputError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var("HAPTICA_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError::Invalid(format!("HAPTICA_THREADS must be a positive integer, got '{v}'")).into()),
        },
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(runtime)?;
    let ctx = Context { cfg, mechanism: cli.mechanism.clone(), quiet: cli.quiet };
    pool.install(|| match &cli.command {
        Command::Analyze => analyze(&ctx),
        Command::Stiffness => stiffness(&ctx),
        Command::Actuator { which: ActuatorCommand::StepResponse } => step_response(&ctx),
        Command::Actuator { which: ActuatorCommand::FreqResponse } => freq_response(&ctx),
        Command::Sysid { which: SysidCommand::Generate } => sysid_generate(&ctx),
        Command::Sysid { which: SysidCommand::Fit } => sysid_fit(&ctx).map(|_| ()),
        Command::Sysid { which: SysidCommand::Validate } => sysid_validate(&ctx),
        Command::Render { which: RenderCommand::Vbox } => render_vbox(&ctx),
        Command::Render { which: RenderCommand::StiffnessLimit } => render_limit(&ctx),
    })
}

struct Context {
    cfg: ScenarioConfig,
    mechanism: Option<String>,
    quiet: bool,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn write_csv(&self, name: &str, csv: &Csv) -> Result<(), CliError> {
        let p = self.path(name);
        csv.write(&p)?;
        self.note(format!("wrote {}", p.display()));
        Ok(())
    }

    fn write_report(&self, name: &str, r: &Report) -> Result<(), CliError> {
        let p = self.path(name);
        r.write(&p)?;
        self.note(format!("wrote {}", p.display()));
        Ok(())
    }

    fn mechanisms(&self) -> Result<Vec<(String, MechanismModel)>, CliError> {
        let m = self.cfg.mechanisms(self.mechanism.as_deref())?;
        if m.is_empty() {
            return Err(ConfigError::Invalid("no mechanisms defined".into()).into());
        }
        Ok(m)
    }
}

fn analyze(ctx: &Context) -> Result<(), CliError> {
    let sweep = ctx.cfg.direction_sweep()?;
    let mut report = Report::new();
    report.num("figure_density_scale", FIGURE_DENSITY_SCALE);
    for (name, model) in ctx.mechanisms()? {
        let grid = ctx.cfg.grid_for(&name)?;
        ctx.note(format!("analyze {name}: {}x{} cells, {} directions", grid.resolution, grid.resolution, sweep.angles().len()));
        let samples = sweep_workspace(&model, &grid, &sweep);
        let mut csv = Csv::new(&["x_m", "y_m", "theta_rad", "reachable", "force_N", "inertial_force_N", "density"]);
        for s in &samples {
            csv.row(&[
                fmt_num(s.position.x),
                fmt_num(s.position.y),
                fmt_num(s.direction),
                fmt_bool(s.reachable).to_string(),
                fmt_num(s.force_capability),
                fmt_num(s.reflected_inertial_force),
                fmt_num(s.density),
            ]);
        }
        ctx.write_csv(&format!("metrics_{name}.csv"), &csv)?;
        let min = min_of_samples(&samples)
            .ok_or_else(|| CliError::Runtime(format!("{name}: no reachable, nonsingular cell in the grid")))?;
        let cells = samples.len() / sweep.angles().len();
        let reachable = samples.iter().step_by(sweep.angles().len()).filter(|s| s.reachable).count();
        report
            .line(&format!("{name}.kind"), model.kind_name())
            .num(&format!("{name}.min_density"), min.value)
            .num(&format!("{name}.min_density_figure_scale"), min.figure_scale())
            .num(&format!("{name}.min_x_m"), min.position.x)
            .num(&format!("{name}.min_y_m"), min.position.y)
            .num(&format!("{name}.min_theta_rad"), min.direction)
            .line(&format!("{name}.reachable_cells"), reachable)
            .line(&format!("{name}.cells"), cells);
    }
    ctx.write_report("analysis_summary.txt", &report)
}

fn stiffness(ctx: &Context) -> Result<(), CliError> {
    let sweep = ctx.cfg.direction_sweep()?;
    let params = ctx.cfg.stiffness_params();
    let mut report = Report::new();
    let (mut linear, mut rotational): (Option<f64>, Option<f64>) = (None, None);
    for (name, model) in ctx.mechanisms()? {
        let grid = ctx.cfg.grid_for(&name)?;
        ctx.note(format!("stiffness {name}: {}x{} cells", grid.resolution, grid.resolution));
        let samples = stiffness_map(&model, &grid, &sweep, &params);
        let mut csv = Csv::new(&["x_m", "y_m", "theta_rad", "mechanism", "force_per_mm_N", "min_eig_N_per_mm"]);
        for s in &samples {
            csv.row(&[
                fmt_num(s.position.x),
                fmt_num(s.position.y),
                fmt_num(s.direction),
                name.clone(),
                fmt_num(s.force_per_mm),
                fmt_num(s.min_eig),
            ]);
        }
        ctx.write_csv(&format!("stiffness_{name}.csv"), &csv)?;
        let (k, at) = min_stiffness(&model, &grid, &params).map_err(|e| runtime(format!("{name}: {e}")))?;
        report
            .line(&format!("{name}.kind"), model.kind_name())
            .num(&format!("{name}.min_stiffness_N_per_mm"), k)
            .num(&format!("{name}.min_x_m"), at.x)
            .num(&format!("{name}.min_y_m"), at.y);
        let slot = if matches!(model, MechanismModel::ParallelLinear(_)) { &mut linear } else { &mut rotational };
        *slot = Some(slot.map_or(k, |m: f64| m.min(k)));
    }
    if let (Some(l), Some(r)) = (linear, rotational) {
        report.num("linear_to_rotational_ratio", l / r);
    }
    ctx.write_report("stiffness_summary.txt", &report)
}

fn step_response(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let s = cfg.step_response;
    let p = cfg.actuator;
    let u = s.force / p.motor_constant;
    let rows = simulate(
        &p,
        s.mode,
        cfg.sim,
        s.duration,
        ActuatorState::default(),
        |t, _| if t >= s.step_time { u } else { 0.0 },
        |_, _| 0.0,
    )
    .map_err(runtime)?;
    let mut csv = Csv::new(&TRACE_HEADER);
    for r in &rows {
        csv.row(&trace_fields(r.t, r.x, r.v, r.current, r.motor_force, -r.external_force, r.saturated));
    }
    ctx.write_csv("step_response.csv", &csv)?;
    let last = rows.last().expect("simulate records the initial state");
    let peak_v = rows.iter().map(|r| r.v.abs()).fold(0.0, f64::max);
    let mut report = Report::new();
    report
        .line("mode", mode_name(s.mode))
        .num("force_N", s.force)
        .num("step_time_s", s.step_time)
        .num("final_position_m", last.x)
        .num("final_velocity_mps", last.v)
        .num("peak_velocity_mps", peak_v)
        .line("rows", rows.len());
    ctx.write_report("step_response.txt", &report)
}

fn mode_name(m: ActuatorMode) -> &'static str {
    match m {
        ActuatorMode::Lumped => "lumped",
        ActuatorMode::TwoMass => "two_mass",
    }
}

fn freq_response(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let f = cfg.freq_response;
    let freqs = log_frequencies(f.f_min, f.f_max, f.points);
    ctx.note(format!("freq-response: {} frequencies {}..{} Hz", freqs.len(), f.f_min, f.f_max));
    let pts = frequency_response(&cfg.actuator, f.mode, f.amplitude, &freqs, &cfg.freq_settings()).map_err(runtime)?;
    let mut csv = Csv::new(&["f_Hz", "gain_dB", "phase_deg"]);
    for p in &pts {
        csv.row(&[fmt_num(p.frequency_hz), fmt_num(p.gain_db), fmt_num(p.phase_deg)]);
    }
    ctx.write_csv("freq_response.csv", &csv)?;
    let peak = resonance_peak(&pts).expect("at least two frequencies");
    let a = &cfg.actuator;
    let mut report = Report::new();
    report
        .line("mode", mode_name(f.mode))
        .num("amplitude_N", f.amplitude)
        .num("peak_Hz", peak.frequency_hz)
        .num("peak_gain_dB", peak.gain_db)
        .num("rotor_resonance_Hz", (a.belt_k() / a.rotor_mass).sqrt() / std::f64::consts::TAU);
    match minus_3db_crossing(&pts) {
        Some(x) => report.num("minus_3dB_Hz", x),
        None => report.line("minus_3dB_Hz", "none"),
    };
    match a.driver_pole_hz {
        Some(p) => report.num("driver_pole_Hz", p),
        None => report.line("driver_pole_Hz", "none"),
    };
    ctx.write_report("freq_response.txt", &report)
}

fn trace_csv(trace: &SimTrace, motor_constant: f64, force_limit: f64) -> Result<Csv, CliError> {
    let (v, _) = differentiate(trace, &DiffOptions::default()).map_err(runtime)?;
    let mut csv = Csv::new(&TRACE_HEADER);
    for i in 0..trace.len() {
        let fm = (motor_constant * trace.current[i]).clamp(-force_limit, force_limit);
        csv.row(&trace_fields(trace.t[i], trace.x[i], v[i], trace.current[i], fm, trace.force[i], trace.saturated[i]));
    }
    Ok(csv)
}

const DYNAMICS_TRACE: &str = "sysid_dynamics.csv";
const MOTOR_TRACE: &str = "sysid_motor.csv";

fn generated_traces(ctx: &Context) -> Result<(SimTrace, SimTrace), CliError> {
    let cfg = &ctx.cfg;
    let settings = cfg.experiment_settings();
    let dynamics = generate_dynamics_trace(&cfg.actuator, &cfg.sysid.chirp, &settings, cfg.seed).map_err(runtime)?;
    // Independent noise stream for the second run.
    let motor = generate_motor_trace(&cfg.actuator, &cfg.sysid.chirp, &settings, cfg.seed.wrapping_add(1)).map_err(runtime)?;
    Ok((dynamics, motor))
}

fn sysid_generate(ctx: &Context) -> Result<(), CliError> {
    let (dynamics, motor) = generated_traces(ctx)?;
    let a = &ctx.cfg.actuator;
    ctx.write_csv(DYNAMICS_TRACE, &trace_csv(&dynamics, a.motor_constant, a.force_limit)?)?;
    ctx.write_csv(MOTOR_TRACE, &trace_csv(&motor, a.motor_constant, a.force_limit)?)?;
    let mut report = Report::new();
    report
        .line("seed", ctx.cfg.seed)
        .line("mode", mode_name(ctx.cfg.sysid.mode))
        .num("noise_sigma_N", ctx.cfg.sysid.noise_sigma)
        .num("sample_rate_Hz", dynamics.sample_rate)
        .line("dynamics_samples", dynamics.len())
        .line("motor_samples", motor.len());
    ctx.write_report("sysid_generate.txt", &report)
}

/// Explicit path from the config, else the file in the output directory,
/// else `None` (caller generates in memory).
fn locate(ctx: &Context, configured: &Option<PathBuf>, default_name: &str) -> Result<Option<SimTrace>, CliError> {
    let path: Option<PathBuf> = match configured {
        Some(p) => Some(p.clone()),
        None => Some(ctx.path(default_name)).filter(|p| p.exists()),
    };
    match path {
        Some(p) => {
            ctx.note(format!("reading {}", p.display()));
            Ok(Some(read_trace(&p)?))
        }
        None => Ok(None),
    }
}

fn input_traces(ctx: &Context) -> Result<(SimTrace, SimTrace), CliError> {
    let dynamics = locate(ctx, &ctx.cfg.sysid.trace, DYNAMICS_TRACE)?;
    let motor = locate(ctx, &ctx.cfg.sysid.validation_trace, MOTOR_TRACE)?;
    match (dynamics, motor) {
        (Some(d), Some(m)) => Ok((d, m)),
        (d, m) => {
            ctx.note("no recorded traces found; generating them");
            let (gd, gm) = generated_traces(ctx)?;
            Ok((d.unwrap_or(gd), m.unwrap_or(gm)))
        }
    }
}

fn fit_report(p: &IdentifiedParams) -> Report {
    let mut r = Report::new();
    r.num("mass_kg", p.mass).num("static_friction_N", p.static_friction).num("viscous_coeff_Nspm", p.viscous_coeff);
    match p.motor_constant {
        Some(k) => r.num("motor_constant_NpA", k),
        None => r.line("motor_constant_NpA", "none"),
    };
    r.num("rms_error_N", p.rms_error)
        .num("max_error_N", p.max_error)
        .num("condition_number", p.condition_number)
        .line("samples_used", p.samples_used);
    r
}

fn sysid_fit(ctx: &Context) -> Result<(IdentifiedParams, SimTrace), CliError> {
    let opts = ctx.cfg.identify_options();
    let (dynamics, motor) = input_traces(ctx)?;
    let dyn_fit = identify_dynamics(&dynamics, &opts).map_err(runtime)?;
    let full = identify_motor_constant(&motor, &dyn_fit, &opts).map_err(runtime)?;
    // Residuals of the unpowered fit describe the dynamics model.
    let params = IdentifiedParams { motor_constant: full.motor_constant, ..dyn_fit };
    ctx.write_report("sysid_fit.txt", &fit_report(&params))?;
    Ok((params, motor))
}

fn sysid_validate(ctx: &Context) -> Result<(), CliError> {
    let (params, held_out) = sysid_fit(ctx)?;
    let (rms, max) = validation_stats(&held_out, &params, &ctx.cfg.identify_options()).map_err(runtime)?;
    let mut report = fit_report(&params);
    report.num("validation_rms_error_N", rms).num("validation_max_error_N", max);
    ctx.write_report("sysid_validation.txt", &report)
}

fn render_vbox(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let r = &cfg.render;
    let fixture = r.fixture();
    let trace = simulate_interaction(&r.mechanism(), &cfg.actuator, &fixture, &r.operator(), r.duration, &r.settings(cfg.sim))
        .map_err(runtime)?;
    let mut csv = Csv::new(&["t_s", "x_m", "y_m", "xq_m", "yq_m", "Fd_x_N", "Fd_y_N", "tau1_N", "tau2_N", "clamped"]);
    for t in &trace.ticks {
        csv.row(&[
            fmt_num(t.t),
            fmt_num(t.x.x),
            fmt_num(t.x.y),
            fmt_num(t.xq.x),
            fmt_num(t.xq.y),
            fmt_num(t.desired.x),
            fmt_num(t.desired.y),
            fmt_num(t.tau.x),
            fmt_num(t.tau.y),
            fmt_bool(t.clamped).to_string(),
        ]);
    }
    ctx.write_csv("render_vbox.csv", &csv)?;
    let within = |w: [f64; 2]| trace.ticks.iter().filter(move |t| t.t >= w[0] && t.t <= w[1]);
    let n = within(r.measure_window).count().max(1) as f64;
    let mean_force = within(r.measure_window).map(|t| t.desired.norm()).sum::<f64>() / n;
    let free_zero = within(r.free_window).all(|t| t.tau.x == 0.0 && t.tau.y == 0.0);
    let max_tau = trace.ticks.iter().map(|t| t.tau.x.abs().max(t.tau.y.abs())).fold(0.0, f64::max);
    let max_task = trace.ticks.iter().map(|t| t.desired.norm()).fold(0.0, f64::max);
    let mut report = Report::new();
    report
        .num("stiffness_N_per_mm", r.stiffness)
        .num("mean_contact_force_N", mean_force)
        .num("mean_penetration_m", mean_force / (r.stiffness * 1000.0))
        .num("max_actuator_force_N", max_tau)
        .num("max_desired_force_N", max_task)
        .line("clamp_events", trace.ticks.iter().filter(|t| t.clamped).count())
        .line("free_space_zero_force", free_zero);
    ctx.write_report("render_vbox.txt", &report)
}

fn limit_text(r: &RenderLimit) -> String {
    match r.critical {
        Some(k) => fmt_num(k),
        None => "not_reached".into(),
    }
}

fn render_limit(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let l = &cfg.stiffness_limit;
    let ks = l.sweep();
    let operator = l.operator.build(vec![(0.0, crate::mechanisms::Vec2::zeros())]);
    let mut runs: Vec<(String, Option<u32>)> = l.encoder_bits.iter().map(|&b| (format!("bits_{b}"), Some(b))).collect();
    if l.unquantized {
        runs.push(("unquantized".into(), None));
    }
    let mut csv = Csv::new(&["run", "stiffness_N_per_mm", "unstable", "amplitude_m", "span_s"]);
    let mut report = Report::new();
    report
        .num("sweep_min_N_per_mm", l.sweep_min)
        .num("sweep_max_N_per_mm", l.sweep_max)
        .line("sweep_points", ks.len())
        .line("mode", mode_name(l.mode))
        .num("reference_limit_N_per_mm", l.reference_limit);
    for (label, bits) in runs {
        ctx.note(format!("stiffness-limit {label}: {} stiffness values", ks.len()));
        let mut params = cfg.actuator;
        if let Some(b) = bits {
            params.encoder_bits = b;
        }
        let res = stiffness_render_limit(&params, &l.wall(), &operator, &ks, &l.settings(cfg.sim, bits.is_some()))
            .map_err(|e| runtime(format!("{label}: {e}")))?;
        for p in &res.points {
            csv.row(&[label.clone(), fmt_num(p.stiffness), fmt_bool(p.unstable).into(), fmt_num(p.amplitude), fmt_num(p.span)]);
        }
        report.line(&format!("{label}.critical_N_per_mm"), limit_text(&res));
        match res.first_unstable {
            Some(k) => report.num(&format!("{label}.first_unstable_N_per_mm"), k),
            None => report.line(&format!("{label}.first_unstable_N_per_mm"), "none"),
        };
        report.num(&format!("{label}.threshold_m"), res.threshold);
    }
    ctx.write_csv("stiffness_limit.csv", &csv)?;
    ctx.write_report("stiffness_limit.txt", &report)
}

/// Convenience for callers that already hold a config (tests, scripts).
pub fn output_path(cfg: &ScenarioConfig, name: &str) -> PathBuf {
    Path::new(&cfg.output_dir).join(name)
}
