//! Structured hexahedral finite elements and the linear algebra they need.

pub mod assembly;
pub mod cg;
pub mod constrained;
pub mod eigen;
pub mod grid;
pub mod skyline;
pub mod sparse;
