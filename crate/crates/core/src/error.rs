use thiserror::Error;

use crate::lp::LpError;
use crate::model::ModelError;
use crate::polytope::PolytopeError;

/// Failures of projection, coordination and the verification oracles.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DispatchError {
    #[error("subsystem {node:?} has no feasible operating point")]
    InfeasibleSubsystem { node: String },
    #[error("cost of subsystem {node:?} is unbounded above; give it an explicit cost_bound")]
    UnboundedCost { node: String },
    #[error("coordination problem at {node:?} is infeasible")]
    UpperInfeasible { node: String },
    #[error("coordination problem at {node:?} is unbounded")]
    UpperUnbounded { node: String },
    #[error("internal inconsistency at {node:?}: {detail}")]
    InternalInconsistency { node: String, detail: String },
    #[error("dimension {dimension} exceeds the enumeration limit {limit}")]
    DimensionTooLarge { dimension: usize, limit: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl DispatchError {
    /// `true` for outcomes that mean "this instance has no solution" rather
    /// than a defect.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            DispatchError::InfeasibleSubsystem { .. } | DispatchError::UpperInfeasible { .. }
        )
    }
}
