//! Planar 2-DOF mechanism geometry: kinematics, Jacobians and joint-space
//! inertia for the parallel-linear, serial-rotational and
//! parallel-rotational arms.
//!
//! Jacobian convention: `xdot = J(q) qdot`, so a joint effort `tau` produces
//! the task force `F = J^-T tau` and `tau = J^T F`.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Default determinant threshold below which a configuration is singular.
pub const DEFAULT_SINGULAR_EPS: f64 = 1e-9;

/// Reflected rotor mass of the linear actuator, kg.
pub const ROTOR_LINEAR_INERTIA: f64 = 0.583;
/// Moving rod + belt + tensioner mass of the linear actuator, kg.
pub const ROD_LINEAR_INERTIA: f64 = 0.533;
/// Drive pulley radius, m.
pub const PULLEY_RADIUS: f64 = 0.028245;
/// Nominal (continuous) motor torque, N·m.
pub const NOMINAL_TORQUE: f64 = 2.825;
/// Linear density of the CFRP rod: 158 g over 1219 mm, kg/m.
pub const ROD_LINEAR_DENSITY: f64 = 0.158 / 1.219;

/// Rotor inertia at the motor shaft implied by the reflected rotor mass.
pub fn default_rotor_inertia() -> f64 {
    ROTOR_LINEAR_INERTIA * PULLEY_RADIUS * PULLEY_RADIUS
}

/// Continuous force of one linear actuator, `torque / pulley radius`.
pub fn actuator_force_from_torque(torque: f64, pulley_radius: f64) -> f64 {
    torque / pulley_radius
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("rods cannot meet: lengths ({0:.6}, {1:.6}) m")]
    NoIntersection(f64, f64),
    #[error("rod length {length:.6} m outside travel [{min:.6}, {max:.6}]")]
    OutOfTravel { length: f64, min: f64, max: f64 },
    #[error("point ({0:.6}, {1:.6}) is not reachable")]
    Unreachable(f64, f64),
    #[error("singular configuration (|det| = {0:.3e})")]
    Singular(f64),
    #[error("invalid mechanism: {0}")]
    Invalid(String),
}

/// Which of the two assembly branches is used.
///
/// For the linear mechanism `Up` puts the end-effector on the left of the
/// directed line from pivot 1 to pivot 2. For the rotational arms `Up` puts
/// the elbow counter-clockwise of the base→tip line (negative relative
/// elbow angle).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Elbow {
    #[default]
    Up,
    Down,
}

impl Elbow {
    fn sign(self) -> f64 {
        match self {
            Elbow::Up => 1.0,
            Elbow::Down => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelLinear {
    pub base_pivots: [Vec2; 2],
    /// Minimum and maximum rod length, m.
    pub rod_travel: [f64; 2],
    /// Force limit per actuator, N.
    pub actuator_force_max: f64,
    /// Rod + belt + tensioner, kg per actuator.
    pub moving_linear_inertia: f64,
    /// Rotor + idler reflected to the rod axis, kg per actuator.
    pub rotor_linear_inertia: f64,
    pub elbow: Elbow,
}

/// Rotary drive shared by both rotational arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotaryDrive {
    pub gear_ratio: [f64; 2],
    /// Rotor inertia at the motor shaft, kg·m².
    pub rotor_inertia: f64,
    /// Motor torque limit at the shaft, N·m.
    pub motor_torque_max: f64,
}

/// Two-link arm, second joint angle measured relative to link 1; motor 2
/// rides on link 1 at the elbow.
#[derive(Debug, Clone, PartialEq)]
pub struct SerialRotational {
    pub base_point: Vec2,
    pub link_lengths: [f64; 2],
    pub drive: RotaryDrive,
    /// kg/m, uniform slender rods.
    pub link_linear_density: f64,
    /// Point mass at the elbow, kg.
    pub carried_motor_mass: f64,
    pub elbow: Elbow,
}

/// Five-bar/parallelogram arm with both motors on the base; both joint
/// angles are absolute.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelRotational {
    pub base_point: Vec2,
    pub link_lengths: [f64; 2],
    pub drive: RotaryDrive,
    pub link_linear_density: f64,
    pub elbow: Elbow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MechanismModel {
    ParallelLinear(ParallelLinear),
    SerialRotational(SerialRotational),
    ParallelRotational(ParallelRotational),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub q: Vec2,
    pub qdot: Vec2,
}

impl JointState {
    pub fn at(q0: f64, q1: f64) -> Self {
        JointState { q: Vec2::new(q0, q1), qdot: Vec2::zeros() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: Vec2,
    pub xdot: Option<Vec2>,
}

impl Pose {
    pub fn at(x: f64, y: f64) -> Self {
        Pose { x: Vec2::new(x, y), xdot: None }
    }
}

fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

fn dir(angle: f64) -> Vec2 {
    Vec2::new(angle.cos(), angle.sin())
}

fn positive(name: &str, v: f64) -> Result<(), MechanismError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(MechanismError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), MechanismError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(MechanismError::Invalid(format!("{name} must be non-negative, got {v}")))
    }
}

impl RotaryDrive {
    fn validate(&self) -> Result<(), MechanismError> {
        positive("gear_ratio[0]", self.gear_ratio[0])?;
        positive("gear_ratio[1]", self.gear_ratio[1])?;
        positive("rotor_inertia", self.rotor_inertia)?;
        positive("motor_torque_max", self.motor_torque_max)
    }
}

impl ParallelLinear {
    /// Actuator constants at their nominal values, given pivots.
    pub fn with_pivots(p1: Vec2, p2: Vec2) -> Self {
        ParallelLinear {
            base_pivots: [p1, p2],
            rod_travel: [0.1, 1.2],
            actuator_force_max: actuator_force_from_torque(NOMINAL_TORQUE, PULLEY_RADIUS),
            moving_linear_inertia: ROD_LINEAR_INERTIA,
            rotor_linear_inertia: ROTOR_LINEAR_INERTIA,
            elbow: Elbow::Up,
        }
    }

    pub fn actuator_mass(&self) -> f64 {
        self.moving_linear_inertia + self.rotor_linear_inertia
    }

    /// Unit vectors from each pivot to `x`, and the rod lengths.
    pub fn rod_geometry(&self, x: Vec2) -> ([Vec2; 2], Vec2) {
        let d0 = x - self.base_pivots[0];
        let d1 = x - self.base_pivots[1];
        let (l0, l1) = (d0.norm(), d1.norm());
        ([d0 / l0, d1 / l1], Vec2::new(l0, l1))
    }

    fn check_travel(&self, l: f64) -> Result<(), MechanismError> {
        let [min, max] = self.rod_travel;
        let tol = 1e-12;
        if l < min - tol || l > max + tol {
            Err(MechanismError::OutOfTravel { length: l, min, max })
        } else {
            Ok(())
        }
    }

    fn side(&self, x: Vec2) -> f64 {
        let d = self.base_pivots[1] - self.base_pivots[0];
        let r = x - self.base_pivots[0];
        d.x * r.y - d.y * r.x
    }
}

impl RotaryDrive {
    /// Both joints at `gear`:1 with the nominal motor and rotor.
    pub fn nominal(gear: f64) -> RotaryDrive {
        RotaryDrive {
            gear_ratio: [gear, gear],
            rotor_inertia: default_rotor_inertia(),
            motor_torque_max: NOMINAL_TORQUE,
        }
    }
}

/// Planar two-link inverse kinematics. Returns (θ1, θ2 relative).
fn two_link_ik(base: Vec2, l: [f64; 2], elbow: Elbow, x: Vec2) -> Result<Vec2, MechanismError> {
    let d = x - base;
    let r2 = d.norm_squared();
    let c2 = (r2 - l[0] * l[0] - l[1] * l[1]) / (2.0 * l[0] * l[1]);
    if !c2.is_finite() || c2.abs() > 1.0 + 1e-12 || r2 == 0.0 {
        return Err(MechanismError::Unreachable(x.x, x.y));
    }
    let c2 = c2.clamp(-1.0, 1.0);
    let s2 = -elbow.sign() * (1.0 - c2 * c2).max(0.0).sqrt();
    let t2 = s2.atan2(c2);
    let t1 = d.y.atan2(d.x) - (l[1] * s2).atan2(l[0] + l[1] * c2);
    Ok(Vec2::new(t1, t2))
}

fn finite_vec(v: Vec2) -> bool {
    v.x.is_finite() && v.y.is_finite()
}

impl MechanismModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            MechanismModel::ParallelLinear(_) => "parallel_linear",
            MechanismModel::SerialRotational(_) => "serial_rotational",
            MechanismModel::ParallelRotational(_) => "parallel_rotational",
        }
    }

    pub fn validate(&self) -> Result<(), MechanismError> {
        match self {
            MechanismModel::ParallelLinear(m) => {
                if !finite_vec(m.base_pivots[0]) || !finite_vec(m.base_pivots[1]) {
                    return Err(MechanismError::Invalid("non-finite pivot".into()));
                }
                if (m.base_pivots[0] - m.base_pivots[1]).norm() <= 0.0 {
                    return Err(MechanismError::Invalid("base pivots coincide".into()));
                }
                positive("rod_travel min", m.rod_travel[0])?;
                if !(m.rod_travel[1] > m.rod_travel[0]) {
                    return Err(MechanismError::Invalid("rod_travel max must exceed min".into()));
                }
                positive("actuator_force_max", m.actuator_force_max)?;
                positive("moving_linear_inertia", m.moving_linear_inertia)?;
                positive("rotor_linear_inertia", m.rotor_linear_inertia)
            }
            MechanismModel::SerialRotational(m) => {
                if !finite_vec(m.base_point) {
                    return Err(MechanismError::Invalid("non-finite base".into()));
                }
                positive("link_lengths[0]", m.link_lengths[0])?;
                positive("link_lengths[1]", m.link_lengths[1])?;
                m.drive.validate()?;
                non_negative("link_linear_density", m.link_linear_density)?;
                non_negative("carried_motor_mass", m.carried_motor_mass)
            }
            MechanismModel::ParallelRotational(m) => {
                if !finite_vec(m.base_point) {
                    return Err(MechanismError::Invalid("non-finite base".into()));
                }
                positive("link_lengths[0]", m.link_lengths[0])?;
                positive("link_lengths[1]", m.link_lengths[1])?;
                m.drive.validate()?;
                non_negative("link_linear_density", m.link_linear_density)
            }
        }
    }

    /// Joint effort limits (N for rods, N·m at the joint for rotary arms).
    pub fn effort_limits(&self) -> Vec2 {
        match self {
            MechanismModel::ParallelLinear(m) => Vec2::repeat(m.actuator_force_max),
            MechanismModel::SerialRotational(SerialRotational { drive, .. })
            | MechanismModel::ParallelRotational(ParallelRotational { drive, .. }) => Vec2::new(
                drive.gear_ratio[0] * drive.motor_torque_max,
                drive.gear_ratio[1] * drive.motor_torque_max,
            ),
        }
    }

    /// Same model with every effort limit multiplied by `k`.
    pub fn with_effort_scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            MechanismModel::ParallelLinear(m) => m.actuator_force_max *= k,
            MechanismModel::SerialRotational(SerialRotational { drive, .. })
            | MechanismModel::ParallelRotational(ParallelRotational { drive, .. }) => {
                drive.motor_torque_max *= k
            }
        }
        out
    }

    /// Same model rigidly translated by `t`.
    pub fn translated(&self, t: Vec2) -> Self {
        let mut out = self.clone();
        match &mut out {
            MechanismModel::ParallelLinear(m) => {
                m.base_pivots[0] += t;
                m.base_pivots[1] += t;
            }
            MechanismModel::SerialRotational(m) => m.base_point += t,
            MechanismModel::ParallelRotational(m) => m.base_point += t,
        }
        out
    }
}

pub fn forward_kinematics(model: &MechanismModel, q: &JointState) -> Result<Pose, MechanismError> {
    let x = match model {
        MechanismModel::ParallelLinear(m) => {
            let (l0, l1) = (q.q.x, q.q.y);
            m.check_travel(l0)?;
            m.check_travel(l1)?;
            let d = m.base_pivots[1] - m.base_pivots[0];
            let s = d.norm();
            if !((l0 - l1).abs() < s && s < l0 + l1) {
                return Err(MechanismError::NoIntersection(l0, l1));
            }
            let e = d / s;
            let a = (l0 * l0 - l1 * l1 + s * s) / (2.0 * s);
            let h = (l0 * l0 - a * a).max(0.0).sqrt();
            m.base_pivots[0] + a * e + m.elbow.sign() * h * perp(e)
        }
        MechanismModel::SerialRotational(m) => {
            let [l0, l1] = m.link_lengths;
            m.base_point + l0 * dir(q.q.x) + l1 * dir(q.q.x + q.q.y)
        }
        MechanismModel::ParallelRotational(m) => {
            let [l0, l1] = m.link_lengths;
            m.base_point + l0 * dir(q.q.x) + l1 * dir(q.q.y)
        }
    };
    let xdot = jacobian_unchecked(model, q, x).map(|j| j * q.qdot);
    Ok(Pose { x, xdot })
}

pub fn inverse_kinematics(model: &MechanismModel, pose: &Pose) -> Result<JointState, MechanismError> {
    let x = pose.x;
    if !finite_vec(x) {
        return Err(MechanismError::Unreachable(x.x, x.y));
    }
    let q = match model {
        MechanismModel::ParallelLinear(m) => {
            if m.side(x) * m.elbow.sign() <= 0.0 {
                return Err(MechanismError::Unreachable(x.x, x.y));
            }
            let (_, l) = m.rod_geometry(x);
            if m.check_travel(l.x).is_err() || m.check_travel(l.y).is_err() {
                return Err(MechanismError::Unreachable(x.x, x.y));
            }
            l
        }
        MechanismModel::SerialRotational(m) => two_link_ik(m.base_point, m.link_lengths, m.elbow, x)?,
        MechanismModel::ParallelRotational(m) => {
            let t = two_link_ik(m.base_point, m.link_lengths, m.elbow, x)?;
            Vec2::new(t.x, t.x + t.y)
        }
    };
    let mut state = JointState { q, qdot: Vec2::zeros() };
    if let Some(v) = pose.xdot {
        let j = jacobian(model, &state)?;
        state.qdot = j.try_inverse().ok_or(MechanismError::Singular(j.determinant()))? * v;
    }
    Ok(state)
}

/// Jacobian for an already-known end-effector position, no singularity check.
fn jacobian_unchecked(model: &MechanismModel, q: &JointState, x: Vec2) -> Option<Mat2> {
    match model {
        MechanismModel::ParallelLinear(m) => inverse_jacobian_linear(m, x).try_inverse(),
        MechanismModel::SerialRotational(m) => {
            let [l0, l1] = m.link_lengths;
            let a = l0 * perp(dir(q.q.x));
            let b = l1 * perp(dir(q.q.x + q.q.y));
            Some(Mat2::from_columns(&[a + b, b]))
        }
        MechanismModel::ParallelRotational(m) => {
            let [l0, l1] = m.link_lengths;
            Some(Mat2::from_columns(&[l0 * perp(dir(q.q.x)), l1 * perp(dir(q.q.y))]))
        }
    }
}

/// Rows are the unit rod vectors: `ldot = A xdot`.
fn inverse_jacobian_linear(m: &ParallelLinear, x: Vec2) -> Mat2 {
    let (u, _) = m.rod_geometry(x);
    Mat2::from_rows(&[u[0].transpose(), u[1].transpose()])
}

pub fn jacobian(model: &MechanismModel, q: &JointState) -> Result<Mat2, MechanismError> {
    jacobian_with_eps(model, q, DEFAULT_SINGULAR_EPS)
}

/// Jacobian with an explicit singularity threshold. For the linear kind the
/// threshold applies to `J^-1`, whose determinant is the one that vanishes.
pub fn jacobian_with_eps(model: &MechanismModel, q: &JointState, eps: f64) -> Result<Mat2, MechanismError> {
    let x = forward_kinematics(model, q)?.x;
    match model {
        MechanismModel::ParallelLinear(m) => {
            let a = inverse_jacobian_linear(m, x);
            let det = a.determinant();
            if det.abs() <= eps {
                return Err(MechanismError::Singular(det));
            }
            a.try_inverse().ok_or(MechanismError::Singular(det))
        }
        _ => {
            let j = jacobian_unchecked(model, q, x).expect("rotary jacobian is explicit");
            let det = j.determinant();
            if det.abs() <= eps {
                return Err(MechanismError::Singular(det));
            }
            Ok(j)
        }
    }
}

/// `J^-1` with the same singularity rule as [`jacobian`].
pub fn inverse_jacobian(model: &MechanismModel, q: &JointState) -> Result<Mat2, MechanismError> {
    match model {
        MechanismModel::ParallelLinear(m) => {
            let x = forward_kinematics(model, q)?.x;
            let a = inverse_jacobian_linear(m, x);
            let det = a.determinant();
            if det.abs() <= DEFAULT_SINGULAR_EPS {
                return Err(MechanismError::Singular(det));
            }
            Ok(a)
        }
        _ => {
            let j = jacobian(model, q)?;
            j.try_inverse().ok_or(MechanismError::Singular(j.determinant()))
        }
    }
}

/// Joint-space inertia. Links are uniform slender rods; rotors enter as
/// `N^2 J_rotor` on the diagonal.
pub fn inertia_matrix(model: &MechanismModel, q: &JointState) -> Result<Mat2, MechanismError> {
    if !finite_vec(q.q) {
        return Err(MechanismError::Invalid("non-finite joint state".into()));
    }
    Ok(match model {
        MechanismModel::ParallelLinear(m) => Mat2::identity() * m.actuator_mass(),
        MechanismModel::SerialRotational(m) => {
            let [l0, l1] = m.link_lengths;
            let (m0, m1) = (m.link_linear_density * l0, m.link_linear_density * l1);
            let c = q.q.y.cos();
            let rot = |i: usize| m.drive.gear_ratio[i].powi(2) * m.drive.rotor_inertia;
            let m11 = m0 * l0 * l0 / 3.0
                + m1 * (l0 * l0 + l1 * l1 / 3.0 + l0 * l1 * c)
                + m.carried_motor_mass * l0 * l0
                + rot(0);
            let m12 = m1 * (l1 * l1 / 3.0 + l0 * l1 * c / 2.0);
            let m22 = m1 * l1 * l1 / 3.0 + rot(1);
            Mat2::new(m11, m12, m12, m22)
        }
        MechanismModel::ParallelRotational(m) => {
            let [l0, l1] = m.link_lengths;
            let (m0, m1) = (m.link_linear_density * l0, m.link_linear_density * l1);
            let rot = |i: usize| m.drive.gear_ratio[i].powi(2) * m.drive.rotor_inertia;
            let m11 = m0 * l0 * l0 / 3.0 + m1 * l0 * l0 + rot(0);
            let m12 = m1 * l0 * l1 / 2.0 * (q.q.y - q.q.x).cos();
            let m22 = m1 * l1 * l1 / 3.0 + rot(1);
            Mat2::new(m11, m12, m12, m22)
        }
    })
}

/// Inter-rod angle of the linear mechanism at `x`, rad in [0, π].
pub fn inter_rod_angle(m: &ParallelLinear, x: Vec2) -> f64 {
    let (u, _) = m.rod_geometry(x);
    u[0].dot(&u[1]).clamp(-1.0, 1.0).acos()
}

/// Point above the midpoint of the pivots (for pivots on a horizontal line)
/// where the rods meet at angle `gamma`.
pub fn symmetric_point_for_angle(m: &ParallelLinear, gamma: f64) -> Vec2 {
    let d = m.base_pivots[1] - m.base_pivots[0];
    let half = d.norm() / 2.0;
    let mid = m.base_pivots[0] + d / 2.0;
    let h = half / (gamma / 2.0).tan();
    mid + m.elbow.sign() * h * perp(d / d.norm())
}
