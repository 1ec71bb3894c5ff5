//! Relative eigenvalue bounds for empirical covariance matrices: the
//! deterministic sandwich, the catalog of probabilistic bounds, samplers,
//! incoherence machinery and a Monte-Carlo harness that measures all of it.

pub mod bounds;
pub mod distributions;
pub mod error;
pub mod fmt;
pub mod incoherence;
pub mod linalg;
pub mod montecarlo;
pub mod sandwich;
pub mod seed;

pub use bounds::{BoundInterval, BoundKind, ConstantsConfig};
pub use distributions::{DistributionSpec, EntryLaw, Family};
pub use error::{Error, Result};
pub use linalg::{DataMatrix, Spectrum, SymMatrix};
