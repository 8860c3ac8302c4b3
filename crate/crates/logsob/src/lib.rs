//! Certified lower bounds on log-Sobolev constants of finite Markov chains.
//!
//! The pipeline: replace the logarithm in the entropy functional by a rational
//! Padé majorant, so that the log-Sobolev inequality relaxes to a family of
//! polynomial nonnegativity constraints; encode those as sums-of-squares
//! programs over weighted constraint cones; solve the resulting semidefinite
//! programs in floating point with an interior-point method; then round the
//! solution to nearby rationals, project it exactly back onto the affine
//! constraints, and verify positive semidefiniteness with exact arithmetic.
//! The output is a certificate whose validity is checked end to end over the
//! rationals, so the reported bound is a theorem about the chain, not a
//! numerical estimate.
//!
//! Modules:
//! - [`ratla`]: exact rational scalars and dense rational linear algebra.
//! - [`poly`]: multivariate/univariate polynomials, Padé approximants of log,
//!   Taylor majorants, Sturm chains.
//! - [`markov`]: finite chains with exact kernels, stationary laws, Dirichlet
//!   forms, entropy functionals, and the standard chain families.

pub mod markov;
pub mod poly;
pub mod ratla;
pub mod sdp;
pub mod sos;

pub use markov::{chain_from_shorthand, Chain, ChainSpec};

/// Exact rational scalar used throughout certification.
pub type Rat = num_rational::BigRational;
