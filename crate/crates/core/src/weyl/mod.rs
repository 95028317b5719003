//! Semiclassical Weyl calculus on the discretized circle.

pub mod checks;
pub mod parametrix;
pub mod quantize;
pub mod symbol;

pub use checks::{
    commutator_identity_check, commutator_identity_residual, composition_remainder, cutoff_conjugation_error,
    dyadic, moyal_term, CommutatorReport, RemainderScaling,
};
pub use parametrix::{
    elliptic_estimate_check, parametrix_build, parametrix_composition_check, parametrix_norm_scaling, EllipticReport,
};
pub use quantize::{check_band_limit, quantize};
pub use symbol::{symbol_library, SemiclassicalSymbol, Structure, SupportHint};
