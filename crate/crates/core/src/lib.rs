//! Numerical building blocks for experiments on non-uniformly elliptic
//! variational problems with (p,q)-growth.
//!
//! The crate is organized along the pipeline used by the experiments:
//!
//! * [`grid`] — uniform box grids, scalar/vector fields, ball and sphere
//!   quadrature, truncations and superlevel measures;
//! * [`rearrangement`] — non-increasing rearrangements, Lorentz `L^{n,1}`
//!   norms and the forcing modulus `omega_f`;
//! * [`integrand`] — the radial two-term (p,q) model integrand, growth
//!   envelopes, and the mollify-and-glue regularization;
//! * [`solver`] — convex minimization of the discrete energy, linear
//!   elliptic solves, subsolution checks and Caccioppoli-constant
//!   estimation;
//! * [`degiorgi`] — the level-set iteration, its explicit constants,
//!   the cutoff-optimization and hole-filling lemmas, and the exponent
//!   algebra of the Lipschitz estimate.

pub mod degiorgi;
mod error;
pub mod grid;
pub mod integrand;
pub mod rearrangement;
pub mod solver;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
