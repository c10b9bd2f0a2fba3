//! Numerical scattering theory for first-order N x N Lax operators
//! `L = d/dx - kJ - U0(u)`: Jost solutions, transmission coefficients,
//! renormalized Fredholm determinants, Green's functions, conserved energies
//! and the quadratic-dNLS flow.

pub mod conserved;
pub mod error;
pub mod evolve;
pub mod field;
pub mod fredholm;
pub mod greens;
pub mod jost;
pub mod lax;
pub mod linalg;
pub mod norms;
pub mod report;
pub mod scattering;
pub mod volterra;

pub use error::{Error, Result};
pub use field::{make_grid, standard_potential, GridSpec, PotentialKind, SampledField, SpectrumField};
pub use lax::{build_general_spec, build_qdnls_spec, DiagonalGenerator, LaxSpec, PotentialMatrix};
