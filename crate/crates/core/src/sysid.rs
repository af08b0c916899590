//! Least-squares identification of the actuator's mass, friction and motor
//! constant from position / load-cell / current traces, and the synthetic
//! chirp experiments that produce such traces.
//!
//! Load-cell convention: `force` is what the operator applies to the rod, so
//! `force = m a + F_s sign(v) + c v - K_m i`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuator::{step, ActuatorError, ActuatorMode, ActuatorParams, ActuatorState, SimSettings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SysidError {
    #[error("trace too short: {0} samples")]
    TooShort(usize),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("regression is rank deficient (condition number {0:.3e})")]
    RankDeficient(f64),
    #[error("insufficient excitation: {0}")]
    InsufficientExcitation(String),
    #[error(transparent)]
    Simulation(#[from] ActuatorError),
}

/// Uniformly sampled record of an identification run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    /// Hz.
    pub sample_rate: f64,
    pub t: Vec<f64>,
    /// Rod position, m.
    pub x: Vec<f64>,
    /// Load-cell force on the rod, N.
    pub force: Vec<f64>,
    /// Motor current, A.
    pub current: Vec<f64>,
    /// Samples where the motor force was clamped.
    pub saturated: Vec<bool>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn validate(&self) -> Result<(), SysidError> {
        let n = self.t.len();
        if n < 3 {
            return Err(SysidError::TooShort(n));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(SysidError::InvalidTrace("sample rate must be positive".into()));
        }
        if self.x.len() != n || self.force.len() != n || self.current.len() != n || self.saturated.len() != n {
            return Err(SysidError::InvalidTrace("column lengths differ".into()));
        }
        let h = 1.0 / self.sample_rate;
        let tol = 1e-6 * h;
        for w in self.t.windows(2) {
            if ((w[1] - w[0]) - h).abs() > tol.max(1e-9 * w[1].abs()) {
                return Err(SysidError::InvalidTrace("timestamps are not uniform at the sample rate".into()));
            }
        }
        Ok(())
    }

    /// Same samples with timestamps shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        let mut out = self.clone();
        out.t.iter_mut().for_each(|t| *t += dt);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiffOptions {
    /// Zero-phase low-pass cutoff applied to position first, Hz.
    pub lowpass_hz: Option<f64>,
}

/// Default cutoff when filtering is requested.
pub const DEFAULT_LOWPASS_HZ: f64 = 50.0;

/// Second-order Butterworth section (bilinear transform).
fn butterworth2(cutoff: f64, fs: f64) -> ([f64; 3], [f64; 3]) {
    let k = (std::f64::consts::PI * cutoff / fs).tan();
    let q = std::f64::consts::FRAC_1_SQRT_2;
    let norm = 1.0 / (1.0 + k / q + k * k);
    let b0 = k * k * norm;
    (
        [b0, 2.0 * b0, b0],
        [1.0, 2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
    )
}

fn filter_pass(b: &[f64; 3], a: &[f64; 3], x: &[f64]) -> Vec<f64> {
    // Direct form II transposed, started at the steady state of x[0].
    let x0 = x[0];
    let mut z1 = x0 * (1.0 - b[0]);
    let mut z2 = x0 * (b[2] - a[2]);
    x.iter()
        .map(|&xi| {
            let y = b[0] * xi + z1;
            z1 = b[1] * xi - a[1] * y + z2;
            z2 = b[2] * xi - a[2] * y;
            y
        })
        .collect()
}

/// Forward-backward Butterworth low-pass (zero phase).
pub fn zero_phase_lowpass(x: &[f64], cutoff: f64, fs: f64) -> Vec<f64> {
    if x.is_empty() || !(cutoff > 0.0 && cutoff < fs / 2.0) {
        return x.to_vec();
    }
    let (b, a) = butterworth2(cutoff, fs);
    let mut y = filter_pass(&b, &a, x);
    y.reverse();
    let mut z = filter_pass(&b, &a, &y);
    z.reverse();
    z
}

/// Central differences inside, one-sided at the ends.
pub fn differentiate(trace: &SimTrace, opts: &DiffOptions) -> Result<(Vec<f64>, Vec<f64>), SysidError> {
    let n = trace.x.len();
    if n < 3 {
        return Err(SysidError::TooShort(n));
    }
    let x = match opts.lowpass_hz {
        Some(fc) => zero_phase_lowpass(&trace.x, fc, trace.sample_rate),
        None => trace.x.clone(),
    };
    let h = 1.0 / trace.sample_rate;
    let mut v = vec![0.0; n];
    let mut a = vec![0.0; n];
    for i in 1..n - 1 {
        v[i] = (x[i + 1] - x[i - 1]) / (2.0 * h);
        a[i] = (x[i + 1] - 2.0 * x[i] + x[i - 1]) / (h * h);
    }
    v[0] = (x[1] - x[0]) / h;
    v[n - 1] = (x[n - 1] - x[n - 2]) / h;
    a[0] = a[1];
    a[n - 1] = a[n - 2];
    Ok((v, a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifyOptions {
    pub diff: DiffOptions,
    /// Samples with |v| below this are dropped, m/s.
    pub stiction_velocity: f64,
    pub condition_limit: f64,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        IdentifyOptions { diff: DiffOptions::default(), stiction_velocity: 1e-4, condition_limit: 1e8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifiedParams {
    pub mass: f64,
    pub static_friction: f64,
    pub viscous_coeff: f64,
    pub motor_constant: Option<f64>,
    pub rms_error: f64,
    pub max_error: f64,
    pub condition_number: f64,
    pub samples_used: usize,
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

/// Samples usable for regression: away from the ends, out of the stiction
/// band, not saturated, and with no velocity sign change within two
/// samples either side.
pub fn usable_samples(v: &[f64], saturated: &[bool], veps: f64) -> Vec<usize> {
    let n = v.len();
    (2..n.saturating_sub(2))
        .filter(|&i| {
            let s = sign(v[i]);
            (i - 2..=i + 2).all(|j| v[j].abs() >= veps && sign(v[j]) == s && !saturated[j])
        })
        .collect()
}

/// Design matrix, target and the sample indices they came from.
#[derive(Debug, Clone)]
pub struct Regression {
    pub design: DMatrix<f64>,
    pub target: DVector<f64>,
    pub rows: Vec<usize>,
}

impl Regression {
    pub fn solve(&self, condition_limit: f64) -> Result<(DVector<f64>, f64), SysidError> {
        let svd = self.design.clone().svd(true, true);
        let sv = &svd.singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(cond <= condition_limit) {
            return Err(SysidError::RankDeficient(cond));
        }
        let beta = svd.solve(&self.target, 0.0).map_err(|e| SysidError::InvalidTrace(e.to_string()))?;
        Ok((beta, cond))
    }

    pub fn residuals(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.target - &self.design * beta
    }
}

/// Regressors `[a, sign(v), v]` against the load-cell force.
pub fn dynamics_regression(trace: &SimTrace, opts: &IdentifyOptions) -> Result<Regression, SysidError> {
    trace.validate()?;
    let (v, a) = differentiate(trace, &opts.diff)?;
    let rows = usable_samples(&v, &trace.saturated, opts.stiction_velocity);
    if rows.len() < 10 {
        return Err(SysidError::InsufficientExcitation(format!("only {} usable samples", rows.len())));
    }
    let design = DMatrix::from_fn(rows.len(), 3, |r, c| {
        let i = rows[r];
        match c {
            0 => a[i],
            1 => sign(v[i]),
            _ => v[i],
        }
    });
    let target = DVector::from_fn(rows.len(), |r, _| trace.force[rows[r]]);
    Ok(Regression { design, target, rows })
}

fn stats(res: &DVector<f64>) -> (f64, f64) {
    if res.is_empty() {
        return (0.0, 0.0);
    }
    let rms = (res.norm_squared() / res.len() as f64).sqrt();
    (rms, res.amax())
}

/// Fits `m`, `F_s`, `c` from an unpowered trace.
pub fn identify_dynamics(trace: &SimTrace, opts: &IdentifyOptions) -> Result<IdentifiedParams, SysidError> {
    let reg = dynamics_regression(trace, opts)?;
    let col = |c: usize| reg.design.column(c).iter().copied().collect::<Vec<_>>();
    let signs = col(1);
    if !(signs.iter().any(|&s| s > 0.0) && signs.iter().any(|&s| s < 0.0)) {
        return Err(SysidError::InsufficientExcitation("velocity never changes sign".into()));
    }
    let (beta, cond) = reg.solve(opts.condition_limit)?;
    let (rms, max) = stats(&reg.residuals(&beta));
    Ok(IdentifiedParams {
        mass: beta[0],
        static_friction: beta[1],
        viscous_coeff: beta[2],
        motor_constant: None,
        rms_error: rms,
        max_error: max,
        condition_number: cond,
        samples_used: reg.rows.len(),
    })
}

/// Fits `K_m` from a powered trace given prior mass and friction.
pub fn identify_motor_constant(
    trace: &SimTrace,
    prior: &IdentifiedParams,
    opts: &IdentifyOptions,
) -> Result<IdentifiedParams, SysidError> {
    trace.validate()?;
    let (v, a) = differentiate(trace, &opts.diff)?;
    let rows = usable_samples(&v, &trace.saturated, opts.stiction_velocity);
    let i_max = rows.iter().map(|&i| trace.current[i].abs()).fold(0.0, f64::max);
    if rows.len() < 10 || !(i_max > 1e-9) {
        return Err(SysidError::InsufficientExcitation("no motor current in usable samples".into()));
    }
    let design = DMatrix::from_fn(rows.len(), 1, |r, _| trace.current[rows[r]]);
    let target = DVector::from_fn(rows.len(), |r, _| {
        let i = rows[r];
        prior.mass * a[i] + prior.static_friction * sign(v[i]) + prior.viscous_coeff * v[i] - trace.force[i]
    });
    let reg = Regression { design, target, rows };
    let (beta, cond) = reg.solve(opts.condition_limit)?;
    let km = beta[0];
    // Residuals expressed in load-cell terms.
    let (rms, max) = stats(&reg.residuals(&beta));
    Ok(IdentifiedParams {
        motor_constant: Some(km),
        rms_error: rms,
        max_error: max,
        condition_number: cond,
        samples_used: reg.rows.len(),
        ..*prior
    })
}

/// Measured minus predicted load-cell force over the usable samples.
pub fn validation_stats(trace: &SimTrace, params: &IdentifiedParams, opts: &IdentifyOptions) -> Result<(f64, f64), SysidError> {
    trace.validate()?;
    let (v, a) = differentiate(trace, &opts.diff)?;
    let rows = usable_samples(&v, &trace.saturated, opts.stiction_velocity);
    let km = params.motor_constant.unwrap_or(0.0);
    let res = DVector::from_iterator(
        rows.len(),
        rows.iter().map(|&i| {
            let pred = params.mass * a[i] + params.static_friction * sign(v[i]) + params.viscous_coeff * v[i]
                - km * trace.current[i];
            trace.force[i] - pred
        }),
    );
    Ok(stats(&res))
}

/// Operator force profile: logarithmic chirp plus a centring spring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChirpProfile {
    /// N.
    pub amplitude: f64,
    pub f_start: f64,
    pub f_end: f64,
    /// s.
    pub duration: f64,
    /// Centring stiffness of the operator's hand, N/m.
    pub hold_stiffness: f64,
}

impl Default for ChirpProfile {
    fn default() -> Self {
        ChirpProfile { amplitude: 40.0, f_start: 0.1, f_end: 10.0, duration: 30.0, hold_stiffness: 200.0 }
    }
}

impl ChirpProfile {
    pub fn validate(&self) -> Result<(), SysidError> {
        let ok = self.amplitude > 0.0
            && self.f_start > 0.0
            && self.f_end > self.f_start
            && self.duration > 0.0
            && self.hold_stiffness >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(SysidError::InvalidTrace("chirp needs positive amplitude/duration and f_end > f_start > 0".into()))
        }
    }

    pub fn phase(&self, t: f64) -> f64 {
        let k = self.f_end / self.f_start;
        std::f64::consts::TAU * self.f_start * self.duration / k.ln() * (k.powf(t / self.duration) - 1.0)
    }

    /// Operator force on the rod at `t` with the rod at `x`.
    pub fn force(&self, t: f64, x: f64) -> f64 {
        self.amplitude * self.phase(t).sin() - self.hold_stiffness * x
    }
}

/// Settings of a synthetic identification run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSettings {
    pub sim: SimSettings,
    pub mode: ActuatorMode,
    /// Gaussian load-cell noise, N.
    pub noise_sigma: f64,
    /// Virtual spring rendered during the motor-constant run, N/m.
    pub virtual_spring: f64,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings { sim: SimSettings::default(), mode: ActuatorMode::Lumped, noise_sigma: 0.0, virtual_spring: 400.0 }
    }
}

fn run_experiment(
    params: &ActuatorParams,
    chirp: &ChirpProfile,
    settings: &ExperimentSettings,
    seed: u64,
    spring: Option<f64>,
) -> Result<SimTrace, SysidError> {
    chirp.validate()?;
    params.validate()?;
    let sub = settings.sim.substeps();
    let rate = settings.sim.control_rate;
    let ticks = (chirp.duration * rate).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, settings.noise_sigma.max(0.0)).map_err(|e| SysidError::InvalidTrace(e.to_string()))?;
    let mut s = ActuatorState::default();
    let mut tr = SimTrace {
        sample_rate: rate,
        t: Vec::with_capacity(ticks + 1),
        x: Vec::with_capacity(ticks + 1),
        force: Vec::with_capacity(ticks + 1),
        current: Vec::with_capacity(ticks + 1),
        saturated: Vec::with_capacity(ticks + 1),
    };
    let mut saturated = false;
    for k in 0..=ticks {
        let t = k as f64 / rate;
        let h = chirp.force(s.time, s.rod_position);
        let n = if settings.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        tr.t.push(t);
        tr.x.push(s.rod_position);
        tr.force.push(h + n);
        tr.current.push(s.current);
        tr.saturated.push(saturated);
        if k == ticks {
            break;
        }
        let u = spring.map_or(0.0, |kv| -kv * s.rod_position / params.motor_constant);
        saturated = false;
        for _ in 0..sub {
            let ext = -chirp.force(s.time, s.rod_position);
            let (ns, info) = step(&s, u, ext, settings.sim.dt, params, settings.mode)?;
            saturated |= info.motor.saturated;
            s = ns;
        }
    }
    Ok(tr)
}

/// Unpowered run driven by the operator's chirp.
pub fn generate_dynamics_trace(
    params: &ActuatorParams,
    chirp: &ChirpProfile,
    settings: &ExperimentSettings,
    seed: u64,
) -> Result<SimTrace, SysidError> {
    run_experiment(params, chirp, settings, seed, None)
}

/// Run with a soft virtual spring rendered by the motor while the operator
/// applies the chirp.
pub fn generate_motor_trace(
    params: &ActuatorParams,
    chirp: &ChirpProfile,
    settings: &ExperimentSettings,
    seed: u64,
) -> Result<SimTrace, SysidError> {
    run_experiment(params, chirp, settings, seed, Some(settings.virtual_spring))
}
