//! Galerkin projection solvers for large sparse symmetric Lyapunov and
//! Sylvester matrix equations `AX + XB + C₁C₂ᵀ = 0`.
//!
//! The solvers build block Krylov (or extended Krylov) bases, solve the
//! projected equation only when it has converged, and monitor convergence with
//! a residual-norm evaluation that works on the projected block tridiagonal
//! matrix alone. See [`solvers::solve_lyapunov`] for the main entry point.

// `!(x >= tol)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dense;
pub mod error;
pub mod krylov;
pub mod la;
pub mod problems;
pub mod residual;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
pub use la::{BlockTridiagonal, DenseMatrix};
pub use sparse::{LinearOperator, SparseSymmetric};
