//! Hardy and weighted Korn inequalities: quadrature checks, finite element
//! constant estimates, rigid-motion Gram matrices and optimality witnesses.

pub mod gram;
pub mod hardy;
pub mod korn;
pub mod weights;
pub mod witness;

pub use hardy::{HardyQuadrature, HardyVariant};
pub use korn::{korn_constant, ClampMode, KornEstimate, KornMesh, NormVariant, SupportLayout};
pub use weights::{Rect, WeightKind, WeightSpec};
pub use witness::{WitnessKind, WitnessValues};
