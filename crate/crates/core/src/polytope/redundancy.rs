//! LP-based redundancy removal and bounding boxes.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::{HalfSpace, Polytope, PolytopeError};
use crate::lp::simplex::{self, DenseOutcome, RowRef};
use crate::scalar::Scalar;

/// Closed interval with optional (infinite) ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Interval {
    /// `None` is −∞.
    pub lower: Option<Scalar>,
    /// `None` is +∞.
    pub upper: Option<Scalar>,
}

impl Interval {
    pub fn bounded(lower: Scalar, upper: Scalar) -> Self {
        Interval {
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    pub fn contains(&self, v: &Scalar) -> bool {
        self.lower.as_ref().is_none_or(|l| l <= v) && self.upper.as_ref().is_none_or(|u| v <= u)
    }
}

/// Result of maximising a row's left side over the other rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowSupport {
    Unbounded,
    Max(Scalar),
    Infeasible,
}

impl Polytope {
    /// Drops every row implied by the others. Surviving rows are certified
    /// irredundant: the maximum of their left side subject to the remaining
    /// rows exceeds their rhs. An inconsistent system comes back flagged
    /// empty.
    ///
    /// Rows are examined in index order, so among mutually redundant rows the
    /// lowest index is removed first.
    pub fn remove_redundant(&self) -> Polytope {
        let mut out = Polytope {
            variables: self.variables.clone(),
            rows: Vec::new(),
            empty: self.empty,
        };
        if self.empty {
            return out;
        }
        for row in &self.rows {
            out.push_row(row.clone());
        }
        if out.empty {
            return out;
        }
        out.rows = drop_dominated_parallel(std::mem::take(&mut out.rows));
        if !out.is_feasible() {
            out.mark_empty();
            return out;
        }

        let mut kept = vec![true; out.rows.len()];
        for i in 0..out.rows.len() {
            let support = out.row_support(i, &kept);
            let redundant = match support {
                RowSupport::Max(v) => v <= out.rows[i].rhs,
                RowSupport::Unbounded => false,
                // The full system is feasible, so dropping a row cannot make it
                // infeasible.
                RowSupport::Infeasible => unreachable!("feasible system lost feasibility"),
            };
            if redundant {
                kept[i] = false;
            }
        }
        out.rows = out
            .rows
            .into_iter()
            .zip(kept)
            .filter_map(|(r, k)| k.then_some(r))
            .collect();
        out
    }

    /// Maximum of row `i`'s left side over the rows flagged in `active`,
    /// excluding row `i` itself.
    pub(crate) fn row_support(&self, i: usize, active: &[bool]) -> RowSupport {
        let others: Vec<RowRef<'_>> = self
            .rows
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i && active[j])
            .map(|(_, r)| r.as_row_ref())
            .collect();
        match simplex::maximize(self.variables.len(), &others, &self.rows[i].coeffs) {
            DenseOutcome::Optimal { value, .. } => RowSupport::Max(value),
            DenseOutcome::Unbounded => RowSupport::Unbounded,
            DenseOutcome::Infeasible => RowSupport::Infeasible,
        }
    }

    /// Irredundancy certificate for each row: `true` iff maximising the row's
    /// left side over all other rows yields a value strictly above its rhs
    /// (or is unbounded).
    pub fn irredundancy_certificates(&self) -> Vec<bool> {
        let all = vec![true; self.rows.len()];
        (0..self.rows.len())
            .map(|i| match self.row_support(i, &all) {
                RowSupport::Unbounded => true,
                RowSupport::Max(v) => v > self.rows[i].rhs,
                RowSupport::Infeasible => false,
            })
            .collect()
    }

    /// Exact per-variable range, from two LPs per variable.
    pub fn bounding_box(&self) -> Result<BTreeMap<String, Interval>, PolytopeError> {
        if self.empty {
            return Err(PolytopeError::EmptyPolytope);
        }
        let refs: Vec<RowRef<'_>> = self.rows.iter().map(HalfSpace::as_row_ref).collect();
        let n = self.variables.len();
        let mut out = BTreeMap::new();
        for (j, name) in self.variables.iter().enumerate() {
            let mut unit = vec![Scalar::zero(); n];
            unit[j] = Scalar::one();
            let lower = match simplex::minimize(n, &refs, &unit) {
                DenseOutcome::Optimal { value, .. } => Some(value),
                DenseOutcome::Unbounded => None,
                DenseOutcome::Infeasible => return Err(PolytopeError::EmptyPolytope),
            };
            let upper = match simplex::maximize(n, &refs, &unit) {
                DenseOutcome::Optimal { value, .. } => Some(value),
                DenseOutcome::Unbounded => None,
                DenseOutcome::Infeasible => return Err(PolytopeError::EmptyPolytope),
            };
            out.insert(name.clone(), Interval { lower, upper });
        }
        Ok(out)
    }
}

/// Among rows with the same direction keeps only the tightest, first index on
/// ties. Output preserves the input order of the survivors.
fn drop_dominated_parallel(rows: Vec<HalfSpace>) -> Vec<HalfSpace> {
    let mut best: HashMap<Vec<Scalar>, (usize, Scalar)> = HashMap::new();
    for (i, row) in rows.iter().enumerate() {
        let normal = row.direction_normalized();
        match best.get_mut(&normal.coeffs) {
            Some((idx, rhs)) if normal.rhs < *rhs => {
                *idx = i;
                *rhs = normal.rhs;
            }
            Some(_) => {}
            None => {
                best.insert(normal.coeffs, (i, normal.rhs));
            }
        }
    }
    let mut keep = vec![false; rows.len()];
    for (idx, _) in best.values() {
        keep[*idx] = true;
    }
    rows.into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect()
}
