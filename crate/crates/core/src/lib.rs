//! Equivalent-projection coordination for hierarchical dispatch models.
//!
//! Each subsystem of a tree-shaped model projects its feasible region,
//! together with the epigraph of its cost, onto the variables it shares with
//! its parent. Parents optimise against those projections instead of the
//! detailed child models, and the resulting commands are disaggregated back
//! down the tree in a single pass. Everything is computed in exact rational
//! arithmetic so the coordinated optimum can be compared with the joint
//! optimum by equality.

pub mod coordinator;
pub mod error;
pub mod generator;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod polytope;
pub mod projection;
pub mod scalar;

pub use coordinator::{
    run_coordinated, stage1_project, stage2_solve_upper, stage3_disaggregate, Command,
    DispatchResult, Message, MessageKind, NodeDispatch, StageTimings,
};
pub use error::DispatchError;
pub use generator::{generate, GenSpec};
pub use lp::{
    check_feasible, solve_lp, Assignment, Constraint, Feasibility, LinearExpr, LinearProgram,
    LpError, LpOutcome, LpStatus, Relation, Sense,
};
pub use model::{
    assemble_jod, assemble_reformulated, parse_and_validate, ModelError, SubsystemNode, SystemTree,
    COST_VAR,
};
pub use oracle::{compare, solve_joint, verify_projection, ComparisonReport, TimingReport};
pub use polytope::{HalfSpace, Interval, Polytope, PolytopeDoc, PolytopeError};
pub use projection::{build_ofr, compute_ep, cost_upper_bound, EpDoc, EpModel, OfrPolytope};
pub use scalar::{ParseScalarError, Scalar};
