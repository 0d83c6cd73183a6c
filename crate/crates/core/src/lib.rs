//! Matrix-free geometric multigrid for the Poisson problem on the unit
//! square and cube, with multiplicative vertex-patch smoothers whose local
//! solves use fast diagonalization.
//!
//! Levels carry `Q_k` elements on a uniform Cartesian mesh with homogeneous
//! Dirichlet data eliminated. [`multigrid::MultigridContext`] drives full
//! multigrid and V-cycles; [`krylov::gmres`] wraps a V-cycle as a
//! preconditioner in double or mixed precision. [`banksim`] replays the
//! shared-memory access pattern of GPU contraction kernels.

pub mod element;
pub mod error;
pub mod exec;
pub mod mesh;
pub mod real;
pub mod tensor;
pub mod operator;
pub mod sparse;
pub mod vector;

mod boxes;
pub mod patches;
pub mod fastdiag;
pub mod smoother;
pub mod multigrid;
pub mod krylov;
pub mod banksim;
pub mod problem;
pub mod driver;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
pub use krylov::{gmres, GmresOptions, SolveStats};
pub use mesh::CartesianLevel;
pub use multigrid::{MultigridConfig, MultigridContext, SmootherKind};
pub use operator::LaplaceOperator;
pub use problem::RhsKind;
pub use real::{Precision, Real};
pub use smoother::{LocalSolver, PatchSmoother, SmootherVariant};
pub use vector::DofVector;
