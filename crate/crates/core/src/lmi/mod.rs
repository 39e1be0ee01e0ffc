//! Solver-neutral LMI construction, semidefinite program assembly and the
//! conic solver adapter.

mod blocks;
mod expr;
mod problem;
mod sdpa;
mod solver;
pub mod structured;
pub mod svec;

pub use blocks::{
    coupling_block, ellipsoid_in_halfspace, input_row_containment, invariance_block, point_in_ellipsoid_level,
    point_in_scaled_ellipsoid, strict_pd, InvarianceTerms,
};
pub use expr::{AffExpr, AffMatrix, MatrixVar, VarRole};
pub use problem::{
    LinearConstraint, LinearKind, LmiConstraint, Residuals, SdpProblem, Sense, SocConstraint, SolveResult, SolveStatus,
    Tolerances,
};
pub use sdpa::to_sdpa;
pub use solver::solve;
