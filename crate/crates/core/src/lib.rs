//! A numerical laboratory for perturbation of frames, Banach frames, atomic
//! decompositions and Riesz bases in finite-dimensional `l^p` spaces.

pub mod cli;
pub mod equivalence;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod optimize;
pub mod oracles;
pub mod perturbation;
pub mod spaces;

mod certify;
mod polyhedral;

pub use error::{FrameError, Result};
pub use operators::{BoundKind, BoundsEstimate, FrameSystem};
pub use optimize::OptimizerConfig;
pub use spaces::{Exponent, SpaceSpec};
