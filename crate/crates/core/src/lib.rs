//! Linear cocycles over hyperbolic toral automorphisms.
//!
//! The crate evaluates matrix cocycles over linear Anosov maps of the torus,
//! computes their stable and unstable holonomies, solves twisted
//! cohomological equations, runs the inductive block-triangular conjugacy
//! solve, and certifies growth hypotheses (fiber bunching, domination,
//! boundedness) on finite ranges.

pub mod base;
pub mod cocycle;
pub mod config;
pub mod conjugacy;
pub mod error;
pub mod field;
pub mod flag;
pub mod growth;
pub mod holder;
pub mod holonomy;
pub mod linalg;
pub mod lyapunov;
pub mod pw;
pub mod report;
pub mod scenarios;
pub mod sampling;
pub mod spd;
pub mod splitting;
pub mod transport;
pub mod twisted;

pub use base::{HyperbolicAutomorphism, LeafKind, LeafPair, LeafSelector, TorusPoint};
pub use cocycle::Cocycle;
pub use error::{LabError, Result};
pub use field::{Generator, MatrixField, VectorField, VectorSection};
