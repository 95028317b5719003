//! Numerical experiments for damped wave equations on the 2-torus with
//! damping invariant in one direction.

pub mod cutoff;
pub mod decay;
pub mod error;
pub mod fit;
pub mod grid;
pub mod jet;
pub mod linalg;
pub mod profiles;
pub mod resolvent;
pub mod sweep;
pub mod weyl;

pub use error::{Error, Result};
pub use profiles::DampingProfile;
pub use num_complex::Complex64 as C64;
