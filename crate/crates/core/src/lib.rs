//! Two-dimensional weakly compressible SPH for fluid-structure interaction
//! with deformable, fracturing solids.
//!
//! The fluid is advanced with WCSPH plus delta-SPH density diffusion, rigid
//! walls are fixed dummy particles with extrapolated pressure, and the solid
//! is an updated-Lagrangian SPH continuum restricted to immediate lattice
//! neighbors that are joined by pseudo-springs. Breaking a spring removes the
//! pair from every solid sum, which is how cracks advance. Fluid and solid
//! only see each other through a soft repulsive contact force.

pub mod coupling;
pub mod error;
pub mod fluid;
pub mod integrator;
pub mod io;
pub mod kernel;
pub mod particles;
pub mod probes;
pub mod scenarios;
pub mod solid;
pub mod walls;

pub use error::{Result, SimError};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;
