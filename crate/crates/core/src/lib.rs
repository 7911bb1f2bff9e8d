//! Composite cardinality optimization at desk scale.
//!
//! Primal problems `f(x) + g(Ax) + Phi(Bx - b)` are assembled from a catalog of
//! convex atoms; their stationary duals are derived mechanically. Both sides
//! are solved globally by enumerating supports over restricted convex
//! programs, and stationarity, KKT and correspondence claims come back as
//! certificates with their witnesses.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atoms;
pub mod cardinality;
pub mod certificate;
pub mod diagnostics;
pub mod enumeration;
pub mod error;
pub mod extended;
pub mod model;
pub mod schema;
pub mod stationarity;
pub mod subset;
pub mod subsolver;
pub mod tol;
pub mod zoo;

pub use atoms::{AtomKind, ConvexAtom, SubgradSet};
pub use cardinality::{CardFlavor, Side, Variant};
pub use certificate::{Certificate, Verdict};
pub use diagnostics::{existence_check_dual, existence_check_primal, svm_separability};
pub use enumeration::{
    brute_force_grid, compute_thresholds, enumerate_global, select_mu, GlobalReport, SubsetRecord, Thresholds,
};
pub use error::{Error, Result};
pub use extended::ExtendedReal;
pub use model::{DualModel, ObjectiveValue, PrimalModel, Which};
pub use stationarity::{
    check_slater, check_stationary_dual, check_stationary_primal, dual_to_primal, primal_to_dual, Correspondence,
    SlaterKind, StationarityCertificate,
};
pub use subset::Subset;
pub use subsolver::{
    kkt_residual, lp_feasibility, solve_restricted, ConstraintFlavor, KktResiduals, ProgramBase,
    RestrictedProgram, SolveOutcome, SolverConfig, Status,
};
