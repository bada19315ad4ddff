//! Bifurcation analysis and simulation for a diffusive SIS epidemic model
//! with stage structure and two delays: a maturation delay `τ` and a
//! freely-moving delay `ω`.
//!
//! - [`model`]: parameters, `R0`, constant equilibria, reaction terms.
//! - [`spectral`]: per-mode Hopf crossings and the first Hopf point.
//! - [`normalform`]: center-manifold reduction and the Hopf coefficients.
//! - [`simulator`]: method-of-lines integration with delay history.
//! - [`analysis`]: mode projection, attractor classification, sweeps.

pub mod analysis;
pub mod config;
pub mod error;
pub mod model;
pub mod normalform;
pub mod simulator;
pub mod spectral;

pub use error::{Error, ErrorCategory, Result};
pub use model::{EquilibriumSet, ModelParams};
pub use spectral::{FirstHopf, HopfCrossing};
