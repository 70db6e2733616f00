//! Approximate quantum error correction toolkit.
//!
//! Kraus-operator channels, code spaces, the D-operator fidelity bound and
//! constructive recoveries, entropic quantities, unitarily invariant random
//! code ensembles, and ε-typical reductions of tensor-power channels.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod channels;
pub mod ensembles;
pub mod error;
pub mod info;
pub mod linalg;
pub mod qec;
pub mod rng;
pub mod scalar;
pub mod settings;
pub mod stats;
pub mod typicality;

pub use error::{Error, Result};
pub use scalar::Real;
pub use settings::{Limits, Tolerances};

pub type ComplexMatrix = linalg::CMatrix<f64>;
pub type ComplexVector = linalg::CVector<f64>;
pub type DensityMatrix = linalg::Density<f64>;
pub type Channel = channels::KrausChannel<f64>;
pub type CodeSpace = qec::CodeSpace<f64>;
