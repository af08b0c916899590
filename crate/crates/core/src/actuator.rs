//! One belt-driven linear actuator: lumped rigid model or rotor and rod
//! coupled through the belt spring, driven through a first-order current
//! loop, integrated with semi-implicit Euler under a zero-order-hold
//! controller.
//!
//! Sign convention: `external_force` is the force the rod pushes on its
//! environment, so `m a = F_motor - F_friction - external_force`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanisms::{PULLEY_RADIUS, ROD_LINEAR_INERTIA, ROTOR_LINEAR_INERTIA};

/// Driver pole placing the clamped two-mass −3 dB point at 30 Hz
/// (see [`calibrate_driver_pole`]).
pub const DEFAULT_DRIVER_POLE_HZ: f64 = 25.06;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActuatorError {
    #[error("state diverged at t = {0:.6} s")]
    NonfiniteState(f64),
    #[error("time step {0} s outside (0, 1e-2]")]
    BadTimeStep(f64),
    #[error("sinusoid fit did not converge at {0} Hz")]
    NonConvergedFit(f64),
    #[error("invalid actuator parameter: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ActuatorMode {
    #[default]
    Lumped,
    TwoMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Rotor,
    Rod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorParams {
    /// Rotor and idlers reflected to the rod axis, kg.
    pub rotor_mass: f64,
    /// Rod, belt and tensioner, kg.
    pub rod_mass: f64,
    /// Coulomb level, N.
    pub static_friction: f64,
    /// N·s/m.
    pub viscous_coeff: f64,
    /// N/A.
    pub motor_constant: f64,
    /// N/mm.
    pub belt_stiffness: f64,
    /// Current-loop pole, Hz; `None` disables the lag.
    pub driver_pole_hz: Option<f64>,
    pub encoder_bits: u32,
    /// m.
    pub pulley_radius: f64,
    /// N.
    pub force_limit: f64,
    /// Half-width of the stiction band, m/s.
    pub stiction_velocity: f64,
    /// Two-mass placement of the Coulomb term.
    pub coulomb_on: Body,
    /// Two-mass placement of the viscous term.
    pub viscous_on: Body,
}

impl Default for ActuatorParams {
    fn default() -> Self {
        ActuatorParams {
            rotor_mass: ROTOR_LINEAR_INERTIA,
            rod_mass: ROD_LINEAR_INERTIA,
            static_friction: 5.26,
            viscous_coeff: 7.52,
            motor_constant: 3.25,
            belt_stiffness: 222.0,
            driver_pole_hz: Some(DEFAULT_DRIVER_POLE_HZ),
            encoder_bits: 12,
            pulley_radius: PULLEY_RADIUS,
            force_limit: 100.0,
            stiction_velocity: 1e-4,
            coulomb_on: Body::Rod,
            viscous_on: Body::Rotor,
        }
    }
}

impl ActuatorParams {
    pub fn lumped_mass(&self) -> f64 {
        self.rotor_mass + self.rod_mass
    }

    /// Belt stiffness in N/m.
    pub fn belt_k(&self) -> f64 {
        self.belt_stiffness * 1000.0
    }

    /// Encoder resolution along the rod, m.
    pub fn encoder_resolution(&self) -> f64 {
        std::f64::consts::TAU * self.pulley_radius / 2f64.powi(self.encoder_bits as i32)
    }

    pub fn frictionless(mut self) -> Self {
        self.static_friction = 0.0;
        self.viscous_coeff = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), ActuatorError> {
        let pos = [
            ("rotor_mass", self.rotor_mass),
            ("rod_mass", self.rod_mass),
            ("motor_constant", self.motor_constant),
            ("belt_stiffness", self.belt_stiffness),
            ("pulley_radius", self.pulley_radius),
            ("force_limit", self.force_limit),
            ("stiction_velocity", self.stiction_velocity),
        ];
        for (n, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(ActuatorError::Invalid(format!("{n} must be positive, got {v}")));
            }
        }
        for (n, v) in [("static_friction", self.static_friction), ("viscous_coeff", self.viscous_coeff)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ActuatorError::Invalid(format!("{n} must be non-negative, got {v}")));
            }
        }
        if let Some(p) = self.driver_pole_hz {
            if !(p.is_finite() && p > 0.0) {
                return Err(ActuatorError::Invalid(format!("driver_pole_hz must be positive, got {p}")));
            }
        }
        if self.encoder_bits == 0 || self.encoder_bits > 52 {
            return Err(ActuatorError::Invalid("encoder_bits must be in 1..=52".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorState {
    /// m, m/s.
    pub rod_position: f64,
    pub rod_velocity: f64,
    /// Reflected linear coordinates of the rotor, m, m/s.
    pub rotor_position: f64,
    pub rotor_velocity: f64,
    pub time: f64,
    /// Driver output current after the lag, A.
    pub current: f64,
}

impl ActuatorState {
    fn finite(&self) -> bool {
        [self.rod_position, self.rod_velocity, self.rotor_position, self.rotor_velocity, self.current]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Kinetic + belt energy (belt term only meaningful in two-mass mode).
    pub fn mechanical_energy(&self, params: &ActuatorParams, mode: ActuatorMode) -> f64 {
        match mode {
            ActuatorMode::Lumped => 0.5 * params.lumped_mass() * self.rod_velocity.powi(2),
            ActuatorMode::TwoMass => {
                let d = self.rotor_position - self.rod_position;
                0.5 * params.rotor_mass * self.rotor_velocity.powi(2)
                    + 0.5 * params.rod_mass * self.rod_velocity.powi(2)
                    + 0.5 * params.belt_k() * d * d
            }
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Coulomb + viscous friction with a stiction band. Inside `|v| < v_eps`
/// the Coulomb part balances the net `applied` force up to `F_static`.
pub fn friction_force(v: f64, applied: f64, params: &ActuatorParams) -> f64 {
    let fs = params.static_friction;
    if v.abs() < params.stiction_velocity {
        applied.clamp(-fs, fs)
    } else {
        fs * sign(v) + params.viscous_coeff * v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorOutput {
    pub force: f64,
    pub saturated: bool,
}

/// `K_m i` clamped to the force limit.
pub fn motor_force(current: f64, params: &ActuatorParams) -> MotorOutput {
    let f = params.motor_constant * current;
    MotorOutput { force: f.clamp(-params.force_limit, params.force_limit), saturated: f.abs() > params.force_limit }
}

/// Advances the driver lag by `dt` under a held command; exact for a
/// piecewise-constant input.
pub fn driver_update(current: f64, command: f64, params: &ActuatorParams, dt: f64) -> f64 {
    match params.driver_pole_hz {
        Some(p) => current + (1.0 - (-std::f64::consts::TAU * p * dt).exp()) * (command - current),
        None => command,
    }
}

/// Velocity update of one body with friction that may stop it but never
/// reverse it. Returns (new velocity, friction force).
fn body_update(v: f64, applied: f64, mass: f64, fs: f64, c: f64, veps: f64, dt: f64) -> (f64, f64) {
    if fs > 0.0 && v.abs() < veps {
        if applied.abs() <= fs {
            return (0.0, applied);
        }
        let fr = fs * sign(applied) + c * v;
        return (v + dt * (applied - fr) / mass, fr);
    }
    let fr = fs * sign(v) + c * v;
    let vn = v + dt * (applied - fr) / mass;
    if v != 0.0 && vn * v < 0.0 && (applied.abs() <= fs || applied * v > 0.0) {
        // Friction alone would carry the body through zero.
        return (0.0, fr);
    }
    (vn, fr)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub motor: MotorOutput,
    /// Friction on the rod (lumped: on the whole mass), N.
    pub friction: f64,
    /// Belt tension, N (two-mass only).
    pub belt_force: f64,
}

/// One semi-implicit Euler step: velocities first, then positions with the
/// new velocities.
pub fn step(
    state: &ActuatorState,
    command: f64,
    external_force: f64,
    dt: f64,
    params: &ActuatorParams,
    mode: ActuatorMode,
) -> Result<(ActuatorState, StepInfo), ActuatorError> {
    if !(dt > 0.0 && dt <= 1e-2) {
        return Err(ActuatorError::BadTimeStep(dt));
    }
    let mut s = *state;
    s.current = driver_update(state.current, command, params, dt);
    let motor = motor_force(s.current, params);
    let veps = params.stiction_velocity;
    let info = match mode {
        ActuatorMode::Lumped => {
            let (v, fr) = body_update(
                state.rod_velocity,
                motor.force - external_force,
                params.lumped_mass(),
                params.static_friction,
                params.viscous_coeff,
                veps,
                dt,
            );
            s.rod_velocity = v;
            s.rod_position += dt * v;
            s.rotor_velocity = v;
            s.rotor_position = s.rod_position;
            StepInfo { motor, friction: fr, belt_force: 0.0 }
        }
        ActuatorMode::TwoMass => {
            let belt = params.belt_k() * (state.rotor_position - state.rod_position);
            let split = |b: Body| {
                (
                    if params.coulomb_on == b { params.static_friction } else { 0.0 },
                    if params.viscous_on == b { params.viscous_coeff } else { 0.0 },
                )
            };
            let (fs_r, c_r) = split(Body::Rotor);
            let (fs_o, c_o) = split(Body::Rod);
            let (vr, _) = body_update(state.rotor_velocity, motor.force - belt, params.rotor_mass, fs_r, c_r, veps, dt);
            let (vo, fr) = body_update(state.rod_velocity, belt - external_force, params.rod_mass, fs_o, c_o, veps, dt);
            s.rotor_velocity = vr;
            s.rod_velocity = vo;
            s.rotor_position += dt * vr;
            s.rod_position += dt * vo;
            StepInfo { motor, friction: fr, belt_force: belt }
        }
    };
    s.time += dt;
    if !s.finite() {
        return Err(ActuatorError::NonfiniteState(s.time));
    }
    Ok((s, info))
}

/// Physics step and controller rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub control_rate: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings { dt: 1e-5, control_rate: 1000.0 }
    }
}

impl SimSettings {
    /// Physics steps per controller tick.
    pub fn substeps(&self) -> usize {
        ((1.0 / self.control_rate) / self.dt).round().max(1.0) as usize
    }
}

/// One controller tick of a recorded actuator run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    /// Driver output current, A.
    pub current: f64,
    pub motor_force: f64,
    pub external_force: f64,
    pub saturated: bool,
}

/// Runs the actuator with a held current command from `controller` (called
/// once per tick with the state at the tick) and an external force from
/// `environment` (called every physics step). Rows are recorded at ticks,
/// before the tick's command is applied.
pub fn simulate<C, E>(
    params: &ActuatorParams,
    mode: ActuatorMode,
    settings: SimSettings,
    duration: f64,
    initial: ActuatorState,
    mut controller: C,
    mut environment: E,
) -> Result<Vec<TraceRow>, ActuatorError>
where
    C: FnMut(f64, &ActuatorState) -> f64,
    E: FnMut(f64, &ActuatorState) -> f64,
{
    let sub = settings.substeps();
    let ticks = (duration * settings.control_rate).round() as usize;
    let mut s = initial;
    let mut rows = Vec::with_capacity(ticks + 1);
    let mut last = StepInfo { motor: motor_force(s.current, params), friction: 0.0, belt_force: 0.0 };
    let mut last_ext = environment(s.time, &s);
    for k in 0..=ticks {
        let t = k as f64 / settings.control_rate;
        rows.push(TraceRow {
            t,
            x: s.rod_position,
            v: s.rod_velocity,
            current: s.current,
            motor_force: last.motor.force,
            external_force: last_ext,
            saturated: last.motor.saturated,
        });
        if k == ticks {
            break;
        }
        let u = controller(t, &s);
        for _ in 0..sub {
            last_ext = environment(s.time, &s);
            let (ns, info) = step(&s, u, last_ext, settings.dt, params, mode)?;
            s = ns;
            last = info;
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyPoint {
    pub frequency_hz: f64,
    pub gain_db: f64,
    pub phase_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyResponseSettings {
    pub sim: SimSettings,
    pub min_cycles: f64,
    /// Lower bound on simulated time so slow transients decay, s.
    pub min_duration: f64,
}

impl Default for FrequencyResponseSettings {
    fn default() -> Self {
        FrequencyResponseSettings { sim: SimSettings::default(), min_cycles: 20.0, min_duration: 3.0 }
    }
}

/// Least-squares `a sin + b cos + c` fit at angular frequency `w`.
/// Returns (amplitude, phase rad, relative residual).
pub fn fit_sinusoid(t: &[f64], y: &[f64], w: f64) -> Option<(f64, f64, f64)> {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let r = nalgebra::Vector3::new((w * ti).sin(), (w * ti).cos(), 1.0);
        ata += r * r.transpose();
        aty += r * yi;
    }
    let c = ata.try_inverse()? * aty;
    let amp = c[0].hypot(c[1]);
    let mut ss = 0.0;
    let mut sy = 0.0;
    for (&ti, &yi) in t.iter().zip(y) {
        let e = yi - (c[0] * (w * ti).sin() + c[1] * (w * ti).cos() + c[2]);
        ss += e * e;
        sy += (yi - c[2]).powi(2);
    }
    let rel = if sy > 0.0 { (ss / sy).sqrt() } else { 0.0 };
    amp.is_finite().then_some((amp, c[1].atan2(c[0]), rel))
}

/// Transmitted clamp force for a sinusoidal force command at `f` Hz.
pub fn clamped_response_at(
    params: &ActuatorParams,
    mode: ActuatorMode,
    amplitude: f64,
    f: f64,
    settings: &FrequencyResponseSettings,
) -> Result<FrequencyPoint, ActuatorError> {
    let w = std::f64::consts::TAU * f;
    let duration = (settings.min_cycles / f).max(settings.min_duration);
    let sub = settings.sim.substeps();
    let ticks = (duration * settings.sim.control_rate).round() as usize;
    let mut s = ActuatorState::default();
    let (mut ts, mut ys) = (Vec::new(), Vec::new());
    for k in 0..ticks {
        let t = k as f64 / settings.sim.control_rate;
        let u = amplitude * (w * t).sin() / params.motor_constant;
        for _ in 0..sub {
            let (mut ns, info) = step(&s, u, 0.0, settings.sim.dt, params, mode)?;
            // Rod held by the load cell.
            ns.rod_position = 0.0;
            ns.rod_velocity = 0.0;
            if mode == ActuatorMode::Lumped {
                ns.rotor_position = 0.0;
                ns.rotor_velocity = 0.0;
            }
            s = ns;
            if k >= ticks / 2 {
                let clamp = match mode {
                    ActuatorMode::Lumped => info.motor.force,
                    ActuatorMode::TwoMass => params.belt_k() * (s.rotor_position - s.rod_position),
                };
                ts.push(s.time);
                ys.push(clamp);
            }
        }
    }
    let (amp, ph, rel) = fit_sinusoid(&ts, &ys, w).ok_or(ActuatorError::NonConvergedFit(f))?;
    if rel > 0.5 || amp <= 0.0 {
        return Err(ActuatorError::NonConvergedFit(f));
    }
    // Command phase is zero in the sin/cos basis.
    let mut phase = ph.to_degrees();
    while phase > 180.0 {
        phase -= 360.0;
    }
    while phase <= -180.0 {
        phase += 360.0;
    }
    Ok(FrequencyPoint { frequency_hz: f, gain_db: 20.0 * (amp / amplitude).log10(), phase_deg: phase })
}

/// Clamped-end response over `freqs`, evaluated in parallel.
pub fn frequency_response(
    params: &ActuatorParams,
    mode: ActuatorMode,
    amplitude: f64,
    freqs: &[f64],
    settings: &FrequencyResponseSettings,
) -> Result<Vec<FrequencyPoint>, ActuatorError> {
    params.validate()?;
    if !(amplitude > 0.0 && amplitude <= params.force_limit) {
        return Err(ActuatorError::Invalid(format!("amplitude {amplitude} must be in (0, force_limit]")));
    }
    if freqs.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(ActuatorError::Invalid("frequencies must be positive".into()));
    }
    freqs.par_iter().map(|&f| clamped_response_at(params, mode, amplitude, f, settings)).collect()
}

/// `n` log-spaced frequencies from `lo` to `hi` inclusive.
pub fn log_frequencies(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Frequency of the largest gain.
pub fn resonance_peak(points: &[FrequencyPoint]) -> Option<FrequencyPoint> {
    points.iter().copied().fold(None, |b: Option<FrequencyPoint>, p| match b {
        Some(b) if b.gain_db >= p.gain_db => Some(b),
        _ => Some(p),
    })
}

/// First downward crossing of −3 dB, interpolated in log frequency.
pub fn minus_3db_crossing(points: &[FrequencyPoint]) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        if a.gain_db >= -3.0 && b.gain_db < -3.0 {
            let s = (-3.0 - a.gain_db) / (b.gain_db - a.gain_db);
            Some((a.frequency_hz.ln() + s * (b.frequency_hz.ln() - a.frequency_hz.ln())).exp())
        } else {
            None
        }
    })
}

/// Analytic clamped two-mass magnitude |F_belt / F_cmd| at `f` Hz, with the
/// viscous term on the rotor.
pub fn clamped_two_mass_gain(params: &ActuatorParams, f: f64) -> f64 {
    let w = std::f64::consts::TAU * f;
    let k = params.belt_k();
    let c = if params.viscous_on == Body::Rotor { params.viscous_coeff } else { 0.0 };
    let belt = k / (k - params.rotor_mass * w * w).hypot(c * w);
    let lag = params.driver_pole_hz.map_or(1.0, |p| 1.0 / (1.0 + (f / p).powi(2)).sqrt());
    belt * lag
}

/// Driver pole that puts the clamped two-mass −3 dB point at `target_hz`.
pub fn calibrate_driver_pole(params: &ActuatorParams, target_hz: f64) -> Result<f64, ActuatorError> {
    let mut p = *params;
    p.driver_pole_hz = None;
    let lag = std::f64::consts::FRAC_1_SQRT_2 / clamped_two_mass_gain(&p, target_hz);
    if !(lag > 0.0 && lag < 1.0) {
        return Err(ActuatorError::Invalid(format!("no single pole reaches −3 dB at {target_hz} Hz")));
    }
    Ok(target_hz / (1.0 / (lag * lag) - 1.0).sqrt())
}
