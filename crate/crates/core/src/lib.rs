//! Numerical lab for regularized one-phase free-boundary problems with a
//! superlinear source term.
//!
//! Critical points of the regularized functional are found by a mountain-pass
//! path deformation and followed to small regularization parameters by damped
//! Newton continuation; ground states of the sharp functional are computed by
//! Nehari projection. The free boundary `∂{u > 1}` is then extracted and
//! checked against the free-boundary condition, nondegeneracy, density and
//! the domain-variation identity.

// NaN must fail every positivity test, hence `!(x > 0.0)` throughout
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod discretization;
pub mod error;
pub mod freeboundary;
pub mod nonlinearity;
pub mod regularization;
pub mod solver;
pub mod verification;

pub use discretization::{Field, Grid, GridKind};
pub use error::{ConfigError, ModelError, SolverError};
pub use nonlinearity::NonlinearityModel;
pub use regularization::{Bump, RegularizedFunctional};
