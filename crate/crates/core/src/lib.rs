//! Spectral Galerkin solver for bipolynomial fractional Dirichlet-Laplace
//! problems
//!
//! ```text
//! (α_k A^{β_k} + … + α_0 A^{β_0})² u = D_uF(x, u)   in Ω,   u = 0 on ∂Ω,
//! ```
//!
//! where `A` is the Dirichlet Laplacian on a bounded box or planar polygon.
//! The operator is represented through its eigendecomposition, every
//! fractional power or polynomial of `A` acts diagonally on expansion
//! coefficients, and the nonlinear problem is solved by minimizing the
//! associated energy functional.

pub mod calculus;
pub mod config;
pub mod domain;
pub mod eigen;
pub mod error;
pub mod linear;
pub mod output;
pub mod run;
pub mod variational;
pub mod verify;

pub use calculus::{FractionalPolynomial, SpectralFunction, Term};
pub use domain::Domain;
pub use eigen::{analytic_box_basis, discrete_basis, SpectralBasis};
pub use error::{Error, Result};
