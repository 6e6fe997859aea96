//! Construction and verification of asymptotically flat solutions of the
//! 2+1-dimensional Einstein constraint equations with translational
//! symmetry: polar-grid field calculus, weighted-space Laplace solvers with
//! explicit log/dipole asymptotics, closed-form background data, and the
//! contraction fixed point that assembles the conformal factor, extrinsic
//! curvature, and mean curvature together with their asymptotic charges.

pub mod ansatz;
pub mod calculus;
pub mod cutoff;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod matter;
pub mod norms;
pub mod solver;
pub mod verify;

pub use calculus::{discretize, divergence, gradient, integrate, laplacian, MomentWeight};
pub use error::{Error, Result};
pub use field::{ModeField, ScalarField, TensorField};
pub use grid::PolarGrid;
pub use norms::{sobolev_norm, sobolev_norm_report, tail_exponent, Tail};
