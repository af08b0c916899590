//! Numerical models of a large-force planar haptic interface: mechanism
//! kinematics and force-density metrics, structural stiffness maps, linear
//! actuator dynamics, least-squares identification and sampled-data
//! virtual-fixture rendering.

pub mod actuator;
pub mod cli;
pub mod config;
pub mod mechanisms;
pub mod metrics;
pub mod output;
pub mod rendering;
pub mod stiffness;
pub mod sysid;

pub use nalgebra::{Matrix2, Vector2};
