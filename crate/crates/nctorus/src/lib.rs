//! Numerical realization of sigma-model solitons on noncommutative tori.
//!
//! The library models the twisted group algebras over the lattice pair
//! Λ = θZ×Z, Λ° = Z×(1/θ)Z, the Schwartz-class equivalence bimodule
//! between them built from Gabor window functions, and the soliton layer
//! on top: frame verification, Rieffel-type projections, energy and
//! topological charge, self-duality diagnostics, and the trace-invariant
//! classifier for gauge equivalence to Gaussian solitons.

pub mod algebra;
pub mod error;
pub mod lattice;
pub mod module;
pub mod quadrature;
// pub mod report;
pub mod soliton;
pub mod spectral;
pub mod window;

pub use algebra::{AlgebraElement, Derivation};
pub use error::NcError;
pub use lattice::{LatticeSpec, Side};
pub use module::ModuleVector;
pub use quadrature::QuadratureSpec;
pub use soliton::{FrameReport, GaugeReport, SolitonReport};
pub use window::Window;
