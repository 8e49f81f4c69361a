//! Shift-splitting solvers for nonsymmetric saddle point systems
//!
//! ```text
//! [ A   B^T ] [x]   [ f]
//! [-B   C   ] [y] = [-g]
//! ```
//!
//! with `A + A^T` positive definite, `C` symmetric positive semidefinite and
//! `B` of full row rank. The crate provides the MGSS and RMGSS
//! preconditioners, a flexible GMRES, the stationary MGSS iteration, test
//! problem generators and dense spectral verification of the splitting.

pub mod error;
pub mod generate;
pub mod krylov;
pub mod precond;
pub mod sparse;
pub mod spectral;
pub mod stationary;
pub mod system;
pub mod vecops;

pub use error::{Error, Result};
pub use generate::{generate_oseen, generate_random, OseenSpec, RandomSpec, Scaling, Wind};
pub use krylov::{fgmres, IdentityPreconditioner, LinearOperator, Preconditioner, SolveOptions, SolveReport};
pub use precond::{
    apply_mgss, apply_rmgss, build_mgss, build_rmgss, InnerSolveConfig, MgssPreconditioner, RmgssPreconditioner,
    ShiftParams,
};
pub use sparse::CsrMatrix;
pub use stationary::mgss_stationary;
pub use system::{SaddlePointSystem, ValidationMode, ValidationReport};
