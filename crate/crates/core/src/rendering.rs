//! Sampled-data haptic rendering: virtual fixtures, Jacobian-transpose
//! feedforward with clamping, encoder quantization, a spring-damper
//! operator, and the displayable-stiffness sweep.
//!
//! Forces returned by fixtures act on the end-effector (on the operator).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuator::{
    driver_update, motor_force, step, ActuatorError, ActuatorMode, ActuatorParams, ActuatorState, SimSettings,
};
use crate::mechanisms::{
    forward_kinematics, JointState, Mat2, MechanismError, MechanismModel, ParallelLinear, Vec2,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("state diverged at t = {0:.6} s")]
    NonfiniteState(f64),
    #[error("singular Jacobian (|det| = {0:.3e})")]
    Singular(f64),
    #[error("stiffness sweep too coarse: {0}")]
    SweepTooCoarse(String),
    #[error("invalid rendering setup: {0}")]
    Invalid(String),
    #[error(transparent)]
    Actuator(#[from] ActuatorError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixtureShape {
    /// Solid half-line `sign * (x - position) > 0` along the actuator axis.
    Wall1D { position: f64, sign: f64 },
    /// Solid box with rounded corners; inside the box the field pushes out.
    Box2D { center: Vec2, half_extents: Vec2, corner_radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceClamps {
    /// Largest task-space force magnitude, N.
    pub task: f64,
    /// Largest force per actuator, N.
    pub actuator: f64,
}

impl Default for ForceClamps {
    fn default() -> Self {
        ForceClamps { task: 100.0, actuator: 65.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualFixture {
    pub shape: FixtureShape,
    /// N/mm.
    pub stiffness: f64,
    pub clamps: ForceClamps,
}

impl VirtualFixture {
    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.stiffness >= 0.0 && self.stiffness.is_finite()) {
            return Err(RenderError::Invalid("fixture stiffness must be non-negative".into()));
        }
        if !(self.clamps.task > 0.0 && self.clamps.actuator > 0.0) {
            return Err(RenderError::Invalid("clamps must be positive".into()));
        }
        match self.shape {
            FixtureShape::Box2D { half_extents, corner_radius, .. } => {
                if !(half_extents.x > 0.0 && half_extents.y > 0.0) {
                    return Err(RenderError::Invalid("box half-extents must be positive".into()));
                }
                if !(corner_radius >= 0.0 && corner_radius <= half_extents.x.min(half_extents.y)) {
                    return Err(RenderError::Invalid("corner radius must lie in [0, min half-extent]".into()));
                }
            }
            FixtureShape::Wall1D { sign, .. } => {
                if sign.abs() != 1.0 {
                    return Err(RenderError::Invalid("wall sign must be ±1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Signed distance to a rounded box (negative inside) and its outward
/// gradient.
fn rounded_box_distance(p: Vec2, center: Vec2, half: Vec2, radius: f64) -> (f64, Vec2) {
    let d = p - center;
    let s = Vec2::new(if d.x < 0.0 { -1.0 } else { 1.0 }, if d.y < 0.0 { -1.0 } else { 1.0 });
    let q = d.abs() - (half - Vec2::repeat(radius));
    if q.x > 0.0 && q.y > 0.0 {
        // Corner zone: radial from the core corner.
        let n = q.norm();
        (n - radius, Vec2::new(s.x * q.x / n, s.y * q.y / n))
    } else if q.x > q.y {
        (q.x - radius, Vec2::new(s.x, 0.0))
    } else {
        (q.y - radius, Vec2::new(0.0, s.y))
    }
}

/// Penalty force `K * depth` along the outward normal; zero outside.
pub fn fixture_force(position: Vec2, fixture: &VirtualFixture) -> Vec2 {
    let k = fixture.stiffness * 1000.0;
    match fixture.shape {
        FixtureShape::Wall1D { position: w, sign } => {
            let depth = sign * (position.x - w);
            if depth > 0.0 {
                Vec2::new(-sign * k * depth, 0.0)
            } else {
                Vec2::zeros()
            }
        }
        FixtureShape::Box2D { center, half_extents, corner_radius } => {
            let (sd, n) = rounded_box_distance(position, center, half_extents, corner_radius);
            if sd < 0.0 {
                -k * sd * n
            } else {
                Vec2::zeros()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedforwardCommand {
    /// Actuator efforts after both clamps.
    pub tau: Vec2,
    /// Task force actually mapped (after the magnitude clamp and any
    /// actuator rescaling).
    pub task_force: Vec2,
    pub task_clamped: bool,
    pub actuator_clamped: bool,
}

impl FeedforwardCommand {
    pub fn clamped(&self) -> bool {
        self.task_clamped || self.actuator_clamped
    }
}

/// `tau = J^T F` after scaling `F` to the task limit and then scaling the
/// actuator pair to the per-actuator limit; both preserve direction.
pub fn feedforward_torque(j: &Mat2, desired: Vec2, clamps: &ForceClamps) -> Result<FeedforwardCommand, RenderError> {
    let det = j.determinant();
    if !det.is_finite() || det.abs() <= crate::mechanisms::DEFAULT_SINGULAR_EPS {
        return Err(RenderError::Singular(det));
    }
    let mut f = desired;
    let mag = f.norm();
    let task_clamped = mag > clamps.task;
    if task_clamped {
        f *= clamps.task / mag;
    }
    let mut tau = j.transpose() * f;
    let peak = tau.amax();
    let actuator_clamped = peak > clamps.actuator;
    if actuator_clamped {
        let s = clamps.actuator / peak;
        tau *= s;
        f *= s;
    }
    Ok(FeedforwardCommand { tau, task_force: f, task_clamped, actuator_clamped })
}

/// Encoder step along one axis, m.
pub fn encoder_resolution(pulley_radius: f64, bits: u32) -> f64 {
    std::f64::consts::TAU * pulley_radius / 2f64.powi(bits as i32)
}

/// Round to the nearest encoder count.
pub fn quantize(position: f64, pulley_radius: f64, bits: u32) -> f64 {
    let d = encoder_resolution(pulley_radius, bits);
    (position / d).round() * d
}

/// Spring-damper hand following a piecewise-linear intent path.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorModel {
    /// kg, rigidly attached to the end-effector.
    pub hand_mass: f64,
    /// N/m.
    pub grip_stiffness: f64,
    /// N·s/m.
    pub grip_damping: f64,
    /// (time s, target m), time-sorted.
    pub trajectory: Vec<(f64, Vec2)>,
    /// Optional (time, factor) schedule scaling grip stiffness, damping and
    /// the coupled hand mass.
    pub grip_schedule: Vec<(f64, f64)>,
}

impl OperatorModel {
    pub fn new(trajectory: Vec<(f64, Vec2)>) -> Self {
        OperatorModel { hand_mass: 2.0, grip_stiffness: 500.0, grip_damping: 20.0, trajectory, grip_schedule: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.hand_mass > 0.0 && self.grip_stiffness > 0.0 && self.grip_damping > 0.0) {
            return Err(RenderError::Invalid("operator mass, stiffness and damping must be positive".into()));
        }
        if self.trajectory.is_empty() {
            return Err(RenderError::Invalid("operator trajectory is empty".into()));
        }
        if self.trajectory.windows(2).any(|w| w[1].0 < w[0].0) || self.grip_schedule.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(RenderError::Invalid("operator schedules must be time-sorted".into()));
        }
        if self.grip_schedule.iter().any(|g| !(g.1 >= 0.0)) {
            return Err(RenderError::Invalid("grip factors must be non-negative".into()));
        }
        Ok(())
    }

    /// Intent position and velocity at `t` (held at the ends).
    pub fn intent(&self, t: f64) -> (Vec2, Vec2) {
        let tr = &self.trajectory;
        let i = tr.partition_point(|p| p.0 <= t);
        if i == 0 {
            return (tr[0].1, Vec2::zeros());
        }
        if i == tr.len() {
            return (tr[i - 1].1, Vec2::zeros());
        }
        let ((t0, p0), (t1, p1)) = (tr[i - 1], tr[i]);
        let v = (p1 - p0) / (t1 - t0);
        (p0 + v * (t - t0), v)
    }

    pub fn grip_factor(&self, t: f64) -> f64 {
        let g = &self.grip_schedule;
        if g.is_empty() {
            return 1.0;
        }
        let i = g.partition_point(|p| p.0 <= t);
        if i == 0 {
            return g[0].1;
        }
        if i == g.len() {
            return g[i - 1].1;
        }
        let s = (t - g[i - 1].0) / (g[i].0 - g[i - 1].0);
        g[i - 1].1 + s * (g[i].1 - g[i - 1].1)
    }

    /// Hand mass moving with the end-effector at `t`.
    pub fn coupled_mass(&self, t: f64) -> f64 {
        self.grip_factor(t) * self.hand_mass
    }

    /// Force the hand applies to the end-effector.
    pub fn force(&self, t: f64, x: Vec2, v: Vec2) -> Vec2 {
        let (p, pd) = self.intent(t);
        self.grip_factor(t) * (self.grip_stiffness * (p - x) + self.grip_damping * (pd - v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub sim: SimSettings,
    pub quantize: bool,
    pub motor_enabled: bool,
    /// Controller ticks between sensing and actuation.
    pub delay_ticks: usize,
    /// Velocity scale of the smoothed Coulomb term in the planar model, m/s.
    pub friction_smoothing: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            sim: SimSettings::default(),
            quantize: true,
            motor_enabled: true,
            delay_ticks: 1,
            friction_smoothing: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderTick {
    pub t: f64,
    pub x: Vec2,
    pub xq: Vec2,
    /// Fixture force before clamping, N.
    pub desired: Vec2,
    /// Actuator force commands, N.
    pub tau: Vec2,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RenderTrace {
    pub ticks: Vec<RenderTick>,
}

/// Delay line for held commands.
struct CommandQueue {
    buf: std::collections::VecDeque<Vec2>,
}

impl CommandQueue {
    fn new(delay: usize) -> Self {
        CommandQueue { buf: std::iter::repeat_n(Vec2::zeros(), delay).collect() }
    }

    fn push_pop(&mut self, v: Vec2) -> Vec2 {
        self.buf.push_back(v);
        self.buf.pop_front().unwrap_or(v)
    }
}

/// Planar run of the parallel-linear device with lumped actuators, hand
/// mass at the end-effector and a smoothed Coulomb term per rod.
pub fn simulate_interaction(
    mechanism: &ParallelLinear,
    actuator: &ActuatorParams,
    fixture: &VirtualFixture,
    operator: &OperatorModel,
    duration: f64,
    settings: &RenderSettings,
) -> Result<RenderTrace, RenderError> {
    let model = MechanismModel::ParallelLinear(mechanism.clone());
    model.validate()?;
    actuator.validate()?;
    fixture.validate()?;
    operator.validate()?;
    let (start, _) = operator.intent(0.0);
    let (_, l0) = mechanism.rod_geometry(start);
    let mut x = forward_kinematics(&model, &JointState::at(l0.x, l0.y))?.x;
    let mut v = Vec2::zeros();
    let mut current = Vec2::zeros();
    let m = actuator.lumped_mass();
    let sub = settings.sim.substeps();
    let dt = settings.sim.dt;
    let ticks = (duration * settings.sim.control_rate).round() as usize;
    let mut queue = CommandQueue::new(settings.delay_ticks);
    let mut out = RenderTrace { ticks: Vec::with_capacity(ticks) };
    let (fs, c, vs) = (actuator.static_friction, actuator.viscous_coeff, settings.friction_smoothing);
    for k in 0..ticks {
        let t = k as f64 / settings.sim.control_rate;
        let (_, l) = mechanism.rod_geometry(x);
        let lq = if settings.quantize {
            l.map(|li| quantize(li, actuator.pulley_radius, actuator.encoder_bits))
        } else {
            l
        };
        let xq = forward_kinematics(&model, &JointState::at(lq.x, lq.y))?.x;
        let desired = fixture_force(xq, fixture);
        let (uq, _) = mechanism.rod_geometry(xq);
        let j = Mat2::from_rows(&[uq[0].transpose(), uq[1].transpose()])
            .try_inverse()
            .ok_or(RenderError::Singular(0.0))?;
        let cmd = feedforward_torque(&j, desired, &fixture.clamps)?;
        out.ticks.push(RenderTick { t, x, xq, desired, tau: cmd.tau, clamped: cmd.clamped() });
        let applied = queue.push_pop(if settings.motor_enabled { cmd.tau } else { Vec2::zeros() });
        let u = applied / actuator.motor_constant;
        let mut time = t;
        for _ in 0..sub {
            let (u_i, l) = mechanism.rod_geometry(x);
            let a = Mat2::from_rows(&[u_i[0].transpose(), u_i[1].transpose()]);
            let ldot = a * v;
            let mut tau = Vec2::zeros();
            let mut rhs_j = Vec2::zeros();
            let vv = v.norm_squared();
            for i in 0..2 {
                current[i] = driver_update(current[i], u[i], actuator, dt);
                tau[i] = motor_force(current[i], actuator).force;
                let fr = fs * (ldot[i] / vs).tanh() + c * ldot[i];
                let centripetal = (vv - ldot[i] * ldot[i]) / l[i];
                rhs_j[i] = tau[i] - fr - m * centripetal;
            }
            let mass = m * a.transpose() * a + Mat2::identity() * operator.coupled_mass(time);
            let f = a.transpose() * rhs_j + operator.force(time, x, v);
            let acc = mass.try_inverse().ok_or(RenderError::Singular(mass.determinant()))? * f;
            v += dt * acc;
            x += dt * v;
            time += dt;
            if !(x.x.is_finite() && x.y.is_finite() && v.x.is_finite() && v.y.is_finite()) {
                return Err(RenderError::NonfiniteState(time));
            }
        }
    }
    Ok(out)
}

/// One controller tick of a single-axis wall run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallTick {
    pub t: f64,
    pub x: f64,
    pub xq: f64,
    pub desired: f64,
    pub command: f64,
    pub clamped: bool,
}

/// Single actuator against a [`FixtureShape::Wall1D`], the operator's
/// coupled hand mass added to the rod.
pub fn simulate_wall_interaction(
    actuator: &ActuatorParams,
    mode: ActuatorMode,
    fixture: &VirtualFixture,
    operator: &OperatorModel,
    duration: f64,
    settings: &RenderSettings,
) -> Result<Vec<WallTick>, RenderError> {
    actuator.validate()?;
    fixture.validate()?;
    operator.validate()?;
    if !matches!(fixture.shape, FixtureShape::Wall1D { .. }) {
        return Err(RenderError::Invalid("single-axis run needs a Wall1D fixture".into()));
    }
    let mut params = *actuator;
    let start = operator.intent(0.0).0.x;
    let mut s = ActuatorState { rod_position: start, rotor_position: start, ..Default::default() };
    let sub = settings.sim.substeps();
    let ticks = (duration * settings.sim.control_rate).round() as usize;
    let mut queue = CommandQueue::new(settings.delay_ticks);
    let mut out = Vec::with_capacity(ticks);
    for k in 0..ticks {
        let t = k as f64 / settings.sim.control_rate;
        let sensed = s.rod_position;
        let xq = if settings.quantize { quantize(sensed, params.pulley_radius, params.encoder_bits) } else { sensed };
        let desired = fixture_force(Vec2::new(xq, 0.0), fixture).x;
        let cmd = feedforward_torque(&Mat2::identity(), Vec2::new(desired, 0.0), &fixture.clamps)?;
        out.push(WallTick { t, x: s.rod_position, xq, desired, command: cmd.tau.x, clamped: cmd.clamped() });
        let applied = queue.push_pop(if settings.motor_enabled { cmd.tau } else { Vec2::zeros() }).x;
        let u = applied / params.motor_constant;
        for _ in 0..sub {
            params.rod_mass = actuator.rod_mass + operator.coupled_mass(s.time);
            let hand = operator.force(s.time, Vec2::new(s.rod_position, 0.0), Vec2::new(s.rod_velocity, 0.0)).x;
            let (ns, _) = step(&s, u, -hand, settings.sim.dt, &params, mode)?;
            s = ns;
        }
    }
    Ok(out)
}

/// Press into the wall, hold, then let go: the contact force the operator
/// aims for ramps up, holds and ramps back to zero while the grip fades,
/// leaving the rod at the wall surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PressRelease {
    /// Contact force at the end of the press, N.
    pub peak_force: f64,
    pub approach: f64,
    pub hold: f64,
    pub release: f64,
    pub settle: f64,
    /// Grip factor reached at the end of the release.
    pub release_grip: f64,
    /// Sampling of the generated intent path, s.
    pub path_step: f64,
}

impl Default for PressRelease {
    fn default() -> Self {
        PressRelease { peak_force: 50.0, approach: 1.0, hold: 0.5, release: 1.5, settle: 1.0, release_grip: 0.1, path_step: 0.005 }
    }
}

impl PressRelease {
    pub fn duration(&self) -> f64 {
        self.approach + self.hold + self.release + self.settle
    }

    pub fn release_start(&self) -> f64 {
        self.approach + self.hold
    }

    /// (target contact force fraction, grip factor) at `t`.
    fn schedule(&self, t: f64) -> (f64, f64) {
        let t2 = self.release_start();
        if t < self.approach {
            (t / self.approach, 1.0)
        } else if t < t2 {
            (1.0, 1.0)
        } else if t < t2 + self.release {
            let r = (t - t2) / self.release;
            (1.0 - r, 1.0 - (1.0 - self.release_grip) * r)
        } else {
            (0.0, self.release_grip)
        }
    }

    /// Operator for a wall at `wall` (occupied side +x) of stiffness `k`
    /// N/mm, keeping the impedance of `base`. The intent sits where the
    /// scheduled force balances wall and grip springs.
    pub fn operator(&self, base: &OperatorModel, wall: f64, k: f64) -> OperatorModel {
        let n = (self.duration() / self.path_step).ceil() as usize;
        let mut trajectory = Vec::with_capacity(n + 1);
        let mut grip = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let t = i as f64 * self.path_step;
            let (s, g) = self.schedule(t);
            let f = s * self.peak_force;
            let stretch = if g > 0.0 { f / (base.grip_stiffness * g) } else { 0.0 };
            trajectory.push((t, Vec2::new(wall + f / (k * 1000.0) + stretch, 0.0)));
            grip.push((t, g));
        }
        OperatorModel { trajectory, grip_schedule: grip, ..base.clone() }
    }
}

/// Operational instability test: half peak-to-peak about a per-window
/// least-squares line, 50 ms windows with a 10 ms hop, above `threshold` for
/// a continuous span of at least `min_span` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillationClassifier {
    pub window: f64,
    pub hop: f64,
    pub min_span: f64,
    /// Threshold in encoder steps.
    pub threshold_steps: f64,
}

impl Default for OscillationClassifier {
    fn default() -> Self {
        OscillationClassifier { window: 0.05, hop: 0.01, min_span: 0.2, threshold_steps: 2.0 }
    }
}

impl OscillationClassifier {
    /// Returns (largest windowed amplitude, longest flagged span in s).
    pub fn measure(&self, x: &[f64], rate: f64, threshold: f64) -> (f64, f64) {
        let n = x.len();
        let w = ((self.window * rate).round() as usize).max(3);
        let hop = ((self.hop * rate).round() as usize).max(1);
        let (mut best_amp, mut best_span, mut run_start): (f64, f64, Option<usize>) = (0.0, 0.0, None);
        let mut start = 0;
        while start + w <= n {
            let amp = detrended_amplitude(&x[start..start + w]);
            best_amp = best_amp.max(amp);
            if amp > threshold {
                let s0 = *run_start.get_or_insert(start);
                best_span = best_span.max((start + w - s0) as f64 / rate);
            } else {
                run_start = None;
            }
            start += hop;
        }
        (best_amp, best_span)
    }
}

/// Half peak-to-peak of `seg` after removing its least-squares line.
fn detrended_amplitude(seg: &[f64]) -> f64 {
    let n = seg.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let xm = seg.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &v) in seg.iter().enumerate() {
        let d = i as f64 - tm;
        sxy += d * (v - xm);
        sxx += d * d;
    }
    let slope = sxy / sxx;
    let (lo, hi) = seg.iter().enumerate().fold((f64::MAX, f64::MIN), |(a, b), (i, &v)| {
        let r = v - xm - slope * (i as f64 - tm);
        (a.min(r), b.max(r))
    });
    (hi - lo) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitPoint {
    /// N/mm.
    pub stiffness: f64,
    pub unstable: bool,
    /// Largest windowed oscillation amplitude after release, m.
    pub amplitude: f64,
    /// Longest span above threshold, s.
    pub span: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderLimit {
    pub points: Vec<LimitPoint>,
    /// Largest stable stiffness below the first unstable one; `None` if no
    /// sweep point was unstable.
    pub critical: Option<f64>,
    pub first_unstable: Option<f64>,
    /// Oscillation threshold used, m.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSettings {
    pub render: RenderSettings,
    pub mode: ActuatorMode,
    pub profile: PressRelease,
    pub classifier: OscillationClassifier,
}

impl Default for LimitSettings {
    fn default() -> Self {
        LimitSettings {
            render: RenderSettings::default(),
            // Belt compliance matters near the limit; the lumped model puts
            // the 12-bit onset roughly 10% higher.
            mode: ActuatorMode::TwoMass,
            profile: PressRelease::default(),
            classifier: OscillationClassifier::default(),
        }
    }
}

/// Classifies one press-and-release run at wall stiffness `k` N/mm.
pub fn classify_stiffness(
    actuator: &ActuatorParams,
    wall: &VirtualFixture,
    operator: &OperatorModel,
    k: f64,
    settings: &LimitSettings,
) -> Result<LimitPoint, RenderError> {
    let FixtureShape::Wall1D { position, sign } = wall.shape else {
        return Err(RenderError::Invalid("stiffness limit needs a Wall1D fixture".into()));
    };
    if sign != 1.0 {
        return Err(RenderError::Invalid("press-release profile expects the wall on the +x side".into()));
    }
    let fixture = VirtualFixture { stiffness: k, ..*wall };
    let op = settings.profile.operator(operator, position, k);
    let trace = simulate_wall_interaction(actuator, settings.mode, &fixture, &op, settings.profile.duration(), &settings.render)?;
    let rate = settings.render.sim.control_rate;
    let from = (settings.profile.release_start() * rate).round() as usize;
    let x: Vec<f64> = trace[from.min(trace.len())..].iter().map(|t| t.x).collect();
    let threshold = settings.classifier.threshold_steps * actuator.encoder_resolution();
    let (amplitude, span) = settings.classifier.measure(&x, rate, threshold);
    Ok(LimitPoint { stiffness: k, unstable: span >= settings.classifier.min_span, amplitude, span })
}

/// Sweeps wall stiffness (N/mm, increasing) and reports the largest stable
/// value below the first unstable one.
pub fn stiffness_render_limit(
    actuator: &ActuatorParams,
    wall: &VirtualFixture,
    operator: &OperatorModel,
    k_sweep: &[f64],
    settings: &LimitSettings,
) -> Result<RenderLimit, RenderError> {
    if k_sweep.is_empty() || k_sweep.windows(2).any(|w| w[1] <= w[0]) || k_sweep[0] <= 0.0 {
        return Err(RenderError::Invalid("stiffness sweep must be positive and strictly increasing".into()));
    }
    let points: Vec<LimitPoint> = k_sweep
        .par_iter()
        .map(|&k| classify_stiffness(actuator, wall, operator, k, settings))
        .collect::<Result<_, _>>()?;
    let first = points.iter().position(|p| p.unstable);
    let threshold = settings.classifier.threshold_steps * actuator.encoder_resolution();
    match first {
        Some(0) => Err(RenderError::SweepTooCoarse(format!(
            "already unstable at the first sweep value {} N/mm",
            k_sweep[0]
        ))),
        Some(i) => Ok(RenderLimit { critical: Some(points[i - 1].stiffness), first_unstable: Some(points[i].stiffness), points, threshold }),
        None => Ok(RenderLimit { critical: None, first_unstable: None, points, threshold }),
    }
}

/// Evenly spaced sweep `lo..=hi` with `n` points.
pub fn linear_sweep(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
