//! Structural stiffness with actuators locked: belt stretch for the
//! parallel-linear mechanism, link bending for the rotational arms.
//!
//! Matrices here are in N/mm (force per millimetre of end-effector
//! displacement).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanisms::{
    forward_kinematics, inverse_jacobian, inverse_kinematics, JointState, Mat2, MechanismError,
    MechanismModel, ParallelLinear, Pose, Vec2,
};
use crate::metrics::{unit, DirectionSweep, WorkspaceGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StiffnessError {
    #[error("belt length must be positive, got {0}")]
    NonpositiveLength(f64),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error("no reachable, nonsingular cell in the grid")]
    AllSingular,
}

/// Belt stiffness scales inversely with free belt length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeltParams {
    /// N/mm, measured at `reference_length`.
    pub reference_stiffness: f64,
    /// m.
    pub reference_length: f64,
    /// Belt length with the rod fully retracted, m.
    pub base_offset: f64,
}

impl Default for BeltParams {
    fn default() -> Self {
        // Reference taken at full rod extension (0.15 m + 1.1 m of travel).
        BeltParams { reference_stiffness: 222.0, reference_length: 1.25, base_offset: 0.15 }
    }
}

impl BeltParams {
    pub fn validate(&self) -> Result<(), StiffnessError> {
        for (n, v) in [
            ("reference_stiffness", self.reference_stiffness),
            ("reference_length", self.reference_length),
            ("base_offset", self.base_offset),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(StiffnessError::Invalid(format!("{n} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Hollow circular rod.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RodSection {
    pub outer_diameter: f64,
    pub inner_diameter: f64,
    /// Pa.
    pub elastic_modulus: f64,
}

impl Default for RodSection {
    fn default() -> Self {
        RodSection { outer_diameter: 0.0254, inner_diameter: 0.02286, elastic_modulus: 106e9 }
    }
}

impl RodSection {
    pub fn validate(&self) -> Result<(), StiffnessError> {
        if !(self.inner_diameter > 0.0 && self.outer_diameter > self.inner_diameter && self.outer_diameter.is_finite()) {
            return Err(StiffnessError::Invalid("need 0 < inner_diameter < outer_diameter".into()));
        }
        if !(self.elastic_modulus > 0.0 && self.elastic_modulus.is_finite()) {
            return Err(StiffnessError::Invalid("elastic_modulus must be positive".into()));
        }
        Ok(())
    }

    /// Second moment of area, m⁴.
    pub fn second_moment(&self) -> f64 {
        std::f64::consts::PI * (self.outer_diameter.powi(4) - self.inner_diameter.powi(4)) / 64.0
    }

    pub fn flexural_rigidity(&self) -> f64 {
        self.elastic_modulus * self.second_moment()
    }

    /// Tip-load cantilever stiffness `3EI/L^3`, N/mm.
    pub fn cantilever_stiffness(&self, length: f64) -> f64 {
        3.0 * self.flexural_rigidity() / length.powi(3) / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessParams {
    pub belt: BeltParams,
    pub section: RodSection,
    /// Cap on any principal stiffness of the bending-only model, N/mm.
    pub axial_ceiling: f64,
}

impl Default for StiffnessParams {
    fn default() -> Self {
        StiffnessParams { belt: BeltParams::default(), section: RodSection::default(), axial_ceiling: 1e4 }
    }
}

pub fn belt_axial_stiffness(belt: &BeltParams, length: f64) -> Result<f64, StiffnessError> {
    if !(length > 0.0) {
        return Err(StiffnessError::NonpositiveLength(length));
    }
    Ok(belt.reference_stiffness * belt.reference_length / length)
}

/// Free belt length for a rod of length `rod_length`.
pub fn belt_length(belt: &BeltParams, model: &ParallelLinear, rod_length: f64) -> f64 {
    belt.base_offset + (rod_length - model.rod_travel[0])
}

/// `K = Σ k_i u_i u_i^T` over both rods.
pub fn parallel_linear_stiffness(model: &MechanismModel, q: &JointState, belt: &BeltParams) -> Result<Mat2, StiffnessError> {
    let MechanismModel::ParallelLinear(m) = model else {
        return Err(StiffnessError::Invalid("belt model applies to the parallel-linear mechanism".into()));
    };
    let a = inverse_jacobian(model, q)?;
    let mut k = Mat2::zeros();
    for i in 0..2 {
        let u = a.row(i).transpose();
        let ki = belt_axial_stiffness(belt, belt_length(belt, m, q.q[i]))?;
        k += ki * u * u.transpose();
    }
    Ok(k)
}

/// Tip compliance (m/N) of a locked two-link chain base→elbow→tip built
/// from two tip-loaded Euler–Bernoulli cantilevers.
pub fn chain_compliance(base: Vec2, elbow: Vec2, tip: Vec2, ei: f64) -> Mat2 {
    let r1 = elbow - base;
    let r2 = tip - elbow;
    let (l1, l2) = (r1.norm(), r2.norm());
    let n1 = Vec2::new(-r1.y, r1.x) / l1;
    let n2 = Vec2::new(-r2.y, r2.x) / l2;
    let deflect = |f: Vec2| -> Vec2 {
        let d2 = f.dot(&n2) * l2.powi(3) / (3.0 * ei) * n2;
        let moment = r2.x * f.y - r2.y * f.x;
        let ft = f.dot(&n1);
        let d1 = ft * l1.powi(3) / (3.0 * ei) + moment * l1 * l1 / (2.0 * ei);
        let phi = ft * l1 * l1 / (2.0 * ei) + moment * l1 / ei;
        d1 * n1 + phi * Vec2::new(-r2.y, r2.x) + d2
    };
    let c = Mat2::from_columns(&[deflect(Vec2::x()), deflect(Vec2::y())]);
    (c + c.transpose()) * 0.5
}

/// Inverts a compliance (m/N) into N/mm, capping principal stiffness.
fn capped_inverse(c: Mat2, ceiling: f64) -> Mat2 {
    let eig = c.symmetric_eigen();
    let mut d = Mat2::zeros();
    for i in 0..2 {
        let ci = eig.eigenvalues[i];
        d[(i, i)] = if ci > 0.0 { (1.0 / ci / 1000.0).min(ceiling) } else { ceiling };
    }
    eig.eigenvectors * d * eig.eigenvectors.transpose()
}

pub fn rotational_structure_stiffness(
    model: &MechanismModel,
    q: &JointState,
    section: &RodSection,
    axial_ceiling: f64,
) -> Result<Mat2, StiffnessError> {
    section.validate()?;
    let (base, l0, elbow_angle) = match model {
        MechanismModel::SerialRotational(m) => (m.base_point, m.link_lengths[0], q.q.x),
        MechanismModel::ParallelRotational(m) => (m.base_point, m.link_lengths[0], q.q.x),
        MechanismModel::ParallelLinear(_) => {
            return Err(StiffnessError::Invalid("bending model applies to rotational arms".into()))
        }
    };
    let tip = forward_kinematics(model, q)?.x;
    let elbow = base + l0 * Vec2::new(elbow_angle.cos(), elbow_angle.sin());
    if (tip - elbow).norm() == 0.0 {
        return Err(MechanismError::Singular(0.0).into());
    }
    Ok(capped_inverse(chain_compliance(base, elbow, tip, section.flexural_rigidity()), axial_ceiling))
}

/// Locked stiffness for any mechanism kind, N/mm.
pub fn structure_stiffness(model: &MechanismModel, q: &JointState, params: &StiffnessParams) -> Result<Mat2, StiffnessError> {
    match model {
        MechanismModel::ParallelLinear(_) => parallel_linear_stiffness(model, q, &params.belt),
        _ => rotational_structure_stiffness(model, q, &params.section, params.axial_ceiling),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessSample {
    pub position: Vec2,
    pub direction: f64,
    pub reachable: bool,
    /// |K u| for a 1 mm displacement along `direction`, N.
    pub force_per_mm: f64,
    /// Smallest eigenvalue of K at this cell, N/mm.
    pub min_eig: f64,
}

pub fn min_eigenvalue(k: &Mat2) -> f64 {
    let e = k.symmetric_eigen().eigenvalues;
    e[0].min(e[1])
}

fn cell_stiffness(model: &MechanismModel, p: Vec2, params: &StiffnessParams) -> Option<Mat2> {
    let q = inverse_kinematics(model, &Pose { x: p, xdot: None }).ok()?;
    structure_stiffness(model, &q, params).ok()
}

/// Row-major over cells, then by direction.
pub fn stiffness_map(
    model: &MechanismModel,
    grid: &WorkspaceGrid,
    sweep: &DirectionSweep,
    params: &StiffnessParams,
) -> Vec<StiffnessSample> {
    grid.points()
        .par_iter()
        .map(|&p| {
            let k = cell_stiffness(model, p, params);
            let min_eig = k.as_ref().map_or(f64::NAN, min_eigenvalue);
            sweep
                .angles()
                .iter()
                .map(|&th| StiffnessSample {
                    position: p,
                    direction: th,
                    reachable: k.is_some(),
                    force_per_mm: k.as_ref().map_or(f64::NAN, |k| (k * unit(th)).norm()),
                    min_eig,
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Smallest principal stiffness over the grid and where it occurs.
pub fn min_stiffness(model: &MechanismModel, grid: &WorkspaceGrid, params: &StiffnessParams) -> Result<(f64, Vec2), StiffnessError> {
    let cells: Vec<Option<(f64, Vec2)>> = grid
        .points()
        .par_iter()
        .map(|&p| cell_stiffness(model, p, params).map(|k| (min_eigenvalue(&k), p)))
        .collect();
    let mut best: Option<(f64, Vec2)> = None;
    for c in cells.into_iter().flatten() {
        if best.is_none_or(|b| c.0 < b.0) {
            best = Some(c);
        }
    }
    best.ok_or(StiffnessError::AllSingular)
}
