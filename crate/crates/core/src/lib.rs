//! ℓ1-regularized sparse regression
//!
//! ```text
//! min_{x ∈ C}  F(Ax) + λ‖x‖₁
//! ```
//!
//! for the quadratic, β = 1.5 divergence, Kullback–Leibler and logistic
//! data terms, with dynamic Gap Safe screening. Three screening variants are
//! available: a global strong-concavity bound of the dual (DGS), a bound
//! local to the dual feasible set (G-DGS), and per-iteration radius
//! refinement on balls around the current dual point (R-DGS).

pub mod data_io;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod oracle;
pub mod screening;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{build_matrix, masked_matvec, preprocess, ActiveSet, DesignMatrix};
pub use losses::{LossKind, LossModel, PinvPolicy, ProblemSpec};
pub use screening::{RefineTol, SafeSphere};
pub use solvers::{run, Algorithm, AlphaInit, RunConfig, RunTrace, SolverKind};
