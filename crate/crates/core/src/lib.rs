//! Fractional Laplacian toolkit for truncated unbounded domains.
//!
//! The crate discretizes `(-Δ)^s` on uniform grids with exterior Dirichlet data,
//! solves linear, eigenvalue and semilinear problems on half-spaces, Lipschitz and
//! coercive epigraphs, cones and balls, and turns the qualitative behaviour expected
//! of bistable solutions (bounds, monotonicity, symmetry, boundary growth and decay,
//! uniqueness, moving planes, maximum principles) into executable checks.
//!
//! Module map:
//!
//! * [`domain`] and [`grid`]: domain geometry, grids, node classification.
//! * [`operator`]: the discrete operator (stencil, far-field tail, apply).
//! * [`solvers`]: linear Dirichlet solves, principal eigenpairs, monotone iteration.
//! * [`cone`]: homogeneous s-harmonic profiles in cones and their exponent.
//! * [`barriers`] and [`chain`]: boundary barriers and Harnack chains.
//! * [`checks`]: qualitative checks on computed solutions.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod barriers;
pub mod chain;
pub mod checks;
pub mod cone;
pub mod domain;
pub mod error;
pub mod fft;
pub mod fit;
pub mod grid;
pub mod nonlinearity;
pub mod operator;
pub mod quadrature;
pub mod solvers;

pub use domain::{DistBounds, DomainKind, DomainSpec, PhiSpec};
pub use error::{Error, Result};
pub use grid::{ExteriorRule, GridFunction, NodePartition, UniformGrid};
pub use nonlinearity::NonlinearitySpec;
pub use operator::DiscreteOperator;
pub use solvers::{SolveOptions, SolveReport};
