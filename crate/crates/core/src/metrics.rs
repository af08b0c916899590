//! Directional force capability, reflected inertial force and their ratio
//! (haptic force density), pointwise and swept over a workspace grid.

use rayon::prelude::*;
use thiserror::Error;

use crate::mechanisms::{
    inertia_matrix, inverse_jacobian, jacobian, inverse_kinematics, JointState, Mat2, MechanismError,
    MechanismModel, Pose, Vec2,
};

/// Density maps in the comparison figure are drawn at one tenth of the
/// physical ratio; summaries report both.
pub const FIGURE_DENSITY_SCALE: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no reachable, nonsingular cell in the grid")]
    AllSingular,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid direction sweep: {0}")]
    InvalidSweep(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSweep {
    angles: Vec<f64>,
}

impl DirectionSweep {
    /// `count` evenly spaced directions starting at 0.
    pub fn uniform(count: usize) -> Result<Self, MetricsError> {
        if count == 0 {
            return Err(MetricsError::InvalidSweep("count must be at least 1".into()));
        }
        let step = std::f64::consts::TAU / count as f64;
        Ok(DirectionSweep { angles: (0..count).map(|i| i as f64 * step).collect() })
    }

    pub fn from_angles(angles: Vec<f64>) -> Result<Self, MetricsError> {
        if angles.is_empty() {
            return Err(MetricsError::InvalidSweep("empty".into()));
        }
        if angles.iter().any(|a| !(0.0..std::f64::consts::TAU).contains(a)) {
            return Err(MetricsError::InvalidSweep("angles must lie in [0, 2π)".into()));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MetricsError::InvalidSweep("angles must be strictly increasing".into()));
        }
        Ok(DirectionSweep { angles })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

impl Default for DirectionSweep {
    fn default() -> Self {
        DirectionSweep::uniform(360).expect("nonzero count")
    }
}

/// Rectangular grid, `resolution` points per axis including both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceGrid {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub resolution: usize,
}

impl WorkspaceGrid {
    pub fn new(x_range: [f64; 2], y_range: [f64; 2], resolution: usize) -> Result<Self, MetricsError> {
        let g = WorkspaceGrid { x_range, y_range, resolution };
        g.validate()?;
        Ok(g)
    }

    /// Square grid centred on `c` with side `side`.
    pub fn square(c: Vec2, side: f64, resolution: usize) -> Result<Self, MetricsError> {
        let h = side / 2.0;
        Self::new([c.x - h, c.x + h], [c.y - h, c.y + h], resolution)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[1] >= r[0];
        if !ok(self.x_range) || !ok(self.y_range) {
            return Err(MetricsError::InvalidGrid("ranges must be finite with max ≥ min".into()));
        }
        if self.resolution < 2 && !(self.x_range[0] == self.x_range[1] && self.y_range[0] == self.y_range[1]) {
            return Err(MetricsError::InvalidGrid("resolution must be at least 2".into()));
        }
        if self.resolution == 0 {
            return Err(MetricsError::InvalidGrid("resolution must be at least 1".into()));
        }
        Ok(())
    }

    /// Single-cell grid at `p`.
    pub fn point(p: Vec2) -> Self {
        WorkspaceGrid { x_range: [p.x, p.x], y_range: [p.y, p.y], resolution: 1 }
    }

    /// Cell centres in row-major order (y outer, x inner).
    pub fn points(&self) -> Vec<Vec2> {
        let n = self.resolution;
        let at = |r: [f64; 2], i: usize| {
            if n == 1 {
                r[0]
            } else {
                r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                out.push(Vec2::new(at(self.x_range, ix), at(self.y_range, iy)));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub position: Vec2,
    pub direction: f64,
    pub reachable: bool,
    /// N; NaN when unreachable or singular.
    pub force_capability: f64,
    /// N at 1 m/s²; NaN when unreachable or singular.
    pub reflected_inertial_force: f64,
    pub density: f64,
}

pub fn unit(direction: f64) -> Vec2 {
    Vec2::new(direction.cos(), direction.sin())
}

/// Largest `s` with `s u` inside the image of the effort box: the
/// per-joint ratio `tau_max_i / |(J^T u)_i|`, minimised over joints.
pub fn capability_along(j: &Mat2, limits: &Vec2, u: &Vec2) -> f64 {
    let w = j.transpose() * u;
    let mut s = f64::INFINITY;
    for i in 0..2 {
        if w[i] != 0.0 {
            s = s.min(limits[i] / w[i].abs());
        }
    }
    s
}

/// Everything per configuration that the directional metrics need.
#[derive(Debug, Clone, Copy)]
pub struct ConfigurationMetrics {
    pub jacobian: Mat2,
    /// Task-space inertia `J^-T M J^-1`.
    pub lambda: Mat2,
    pub limits: Vec2,
}

impl ConfigurationMetrics {
    pub fn new(model: &MechanismModel, q: &JointState) -> Result<Self, MechanismError> {
        let j = jacobian(model, q)?;
        let ji = inverse_jacobian(model, q)?;
        let m = inertia_matrix(model, q)?;
        Ok(ConfigurationMetrics { jacobian: j, lambda: ji.transpose() * m * ji, limits: model.effort_limits() })
    }

    pub fn force_capability(&self, direction: f64) -> f64 {
        capability_along(&self.jacobian, &self.limits, &unit(direction))
    }

    pub fn reflected_inertial_force(&self, direction: f64) -> f64 {
        (self.lambda * unit(direction)).norm()
    }

    pub fn density(&self, direction: f64) -> f64 {
        self.force_capability(direction) / self.reflected_inertial_force(direction)
    }
}

pub fn force_capability(model: &MechanismModel, q: &JointState, direction: f64) -> Result<f64, MechanismError> {
    let j = jacobian(model, q)?;
    Ok(capability_along(&j, &model.effort_limits(), &unit(direction)))
}

pub fn reflected_inertial_force(model: &MechanismModel, q: &JointState, direction: f64) -> Result<f64, MechanismError> {
    Ok(ConfigurationMetrics::new(model, q)?.reflected_inertial_force(direction))
}

pub fn haptic_force_density(model: &MechanismModel, q: &JointState, direction: f64) -> Result<f64, MechanismError> {
    Ok(ConfigurationMetrics::new(model, q)?.density(direction))
}

fn cell_samples(model: &MechanismModel, p: Vec2, sweep: &DirectionSweep) -> Vec<MetricSample> {
    let cm = inverse_kinematics(model, &Pose { x: p, xdot: None })
        .and_then(|q| ConfigurationMetrics::new(model, &q));
    sweep
        .angles()
        .iter()
        .map(|&th| match &cm {
            Ok(c) => {
                let f = c.force_capability(th);
                let r = c.reflected_inertial_force(th);
                MetricSample {
                    position: p,
                    direction: th,
                    reachable: true,
                    force_capability: f,
                    reflected_inertial_force: r,
                    density: f / r,
                }
            }
            Err(_) => MetricSample {
                position: p,
                direction: th,
                reachable: false,
                force_capability: f64::NAN,
                reflected_inertial_force: f64::NAN,
                density: f64::NAN,
            },
        })
        .collect()
}

/// One sample per (cell, direction), row-major then by angle. Unreachable or
/// singular cells are kept with `reachable = false`.
pub fn sweep_workspace(model: &MechanismModel, grid: &WorkspaceGrid, sweep: &DirectionSweep) -> Vec<MetricSample> {
    grid.points()
        .par_iter()
        .map(|&p| cell_samples(model, p, sweep))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMinimum {
    pub value: f64,
    pub position: Vec2,
    pub direction: f64,
}

impl DensityMinimum {
    pub fn figure_scale(&self) -> f64 {
        self.value * FIGURE_DENSITY_SCALE
    }
}

/// First-occurrence minimum over a sample sequence.
pub fn min_of_samples(samples: &[MetricSample]) -> Option<DensityMinimum> {
    let mut best: Option<DensityMinimum> = None;
    for s in samples.iter().filter(|s| s.reachable && s.density.is_finite()) {
        if best.is_none_or(|b| s.density < b.value) {
            best = Some(DensityMinimum { value: s.density, position: s.position, direction: s.direction });
        }
    }
    best
}

pub fn min_density(model: &MechanismModel, grid: &WorkspaceGrid, sweep: &DirectionSweep) -> Result<DensityMinimum, MetricsError> {
    grid.validate()?;
    // Per-cell minima in parallel, then an ordered first-occurrence merge.
    let per_cell: Vec<Option<DensityMinimum>> = grid
        .points()
        .par_iter()
        .map(|&p| min_of_samples(&cell_samples(model, p, sweep)))
        .collect();
    let mut best: Option<DensityMinimum> = None;
    for m in per_cell.into_iter().flatten() {
        if best.is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    best.ok_or(MetricsError::AllSingular)
}
