//! Ground truth for the coordinated pipeline: the flat joint LP, brute-force
//! vertex enumeration, sampled projection checks and stage timings.

mod sampling;
mod timing;
mod vertices;

use std::collections::BTreeMap;

use serde::Serialize;

pub use sampling::{
    sample_points, verify_projection, Counterexample, ProjectionCheck, SampleSource,
};
pub use timing::{benchmark, ModelScale, TimingReport};
pub use vertices::{enumerate_vertices, vertex_optimum, MAX_ENUMERATION_DIMENSION};

use crate::coordinator::{run_coordinated, DispatchResult};
use crate::error::DispatchError;
use crate::lp::{solve_lp, Assignment, LinearProgram, LpOutcome, LpStatus, Sense};
use crate::model::{
    assemble_jod, assemble_reformulated, assemble_subtree_reformulated, cost_var_of, qualify,
    SystemTree,
};
use crate::scalar::Scalar;

/// The flat joint LP, solved.
pub fn solve_joint(tree: &SystemTree) -> Result<LpOutcome, DispatchError> {
    Ok(solve_lp(&assemble_jod(tree))?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub jod_status: LpStatus,
    pub coordinated_status: LpStatus,
    pub jod_value: Option<Scalar>,
    pub coordinated_value: Option<Scalar>,
    pub values_equal: bool,
    pub jod_assignment_feasible_for_tree: bool,
    pub coordinated_assignment_feasible_for_flat_lp: bool,
    /// Coordinated minus joint own cost per node. Nonzero entries are
    /// possible under alternative optima even when the totals agree.
    pub cost_deltas: BTreeMap<String, Scalar>,
    #[serde(skip)]
    pub coordinated: Option<DispatchResult>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.values_equal
            && self.jod_assignment_feasible_for_tree
            && self.coordinated_assignment_feasible_for_flat_lp
    }
}

fn own_costs(tree: &SystemTree, flat: &Assignment) -> BTreeMap<String, Scalar> {
    tree.nodes()
        .iter()
        .map(|n| {
            let local: Assignment = n
                .own_vars()
                .map(|v| (v.clone(), flat[&qualify(&n.id, v)].clone()))
                .collect();
            (
                n.id.clone(),
                n.cost.eval(&local).expect("cost over own variables"),
            )
        })
        .collect()
}

/// Cost of each subtree at a flat assignment.
fn subtree_costs(tree: &SystemTree, own: &BTreeMap<String, Scalar>) -> BTreeMap<String, Scalar> {
    let mut out: BTreeMap<String, Scalar> = BTreeMap::new();
    for id in tree.post_order() {
        let mut total = own[id].clone();
        for c in tree.children(id) {
            total += &out[c];
        }
        out.insert(id.to_string(), total);
    }
    out
}

/// A joint optimum is realisable by the coordinated scheme when it satisfies
/// every row and each non-root node's `(x, subtree cost)` lies in its EP.
fn realisable_in_tree(
    tree: &SystemTree,
    jod: &LinearProgram,
    flat: &Assignment,
    result: &DispatchResult,
) -> Result<bool, DispatchError> {
    if !jod.is_feasible_point(flat) {
        return Ok(false);
    }
    let costs = subtree_costs(tree, &own_costs(tree, flat));
    for (id, ep) in &result.eps {
        let node = tree.node(id).expect("known node");
        let mut point: Assignment = node
            .coordination_vars
            .iter()
            .map(|v| (v.clone(), flat[&qualify(id, v)].clone()))
            .collect();
        point.insert(crate::model::COST_VAR.into(), costs[id].clone());
        if !ep.polytope.contains(&point)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn coordinated_status(err: &DispatchError) -> Option<LpStatus> {
    match err {
        DispatchError::InfeasibleSubsystem { .. } | DispatchError::UpperInfeasible { .. } => {
            Some(LpStatus::Infeasible)
        }
        DispatchError::UpperUnbounded { .. } => Some(LpStatus::Unbounded),
        _ => None,
    }
}

/// Runs the joint and coordinated solves and cross-checks them.
pub fn compare(tree: &SystemTree) -> Result<ComparisonReport, DispatchError> {
    let jod = assemble_jod(tree);
    let joint = solve_lp(&jod)?;
    let coordinated = match run_coordinated(tree) {
        Ok(r) => Ok(r),
        Err(e) => match coordinated_status(&e) {
            Some(status) => Err(status),
            None => return Err(e),
        },
    };
    let coordinated_status = match &coordinated {
        Ok(_) => LpStatus::Optimal,
        Err(s) => *s,
    };
    let jod_value = joint.value().cloned();
    let coordinated_value = coordinated.as_ref().ok().map(|r| r.objective.clone());
    let mut report = ComparisonReport {
        jod_status: joint.status(),
        coordinated_status,
        values_equal: jod_value == coordinated_value && joint.status() == coordinated_status,
        jod_value,
        coordinated_value,
        jod_assignment_feasible_for_tree: true,
        coordinated_assignment_feasible_for_flat_lp: true,
        cost_deltas: BTreeMap::new(),
        coordinated: None,
    };
    if let Ok(result) = &coordinated {
        let flat = result.flat_assignment();
        report.coordinated_assignment_feasible_for_flat_lp = jod.is_feasible_point(&flat)
            && jod.objective_at(&flat).as_ref() == Some(&result.objective);
        if let Some(joint_point) = joint.assignment() {
            report.jod_assignment_feasible_for_tree =
                realisable_in_tree(tree, &jod, joint_point, result)?;
            let a = own_costs(tree, &flat);
            let b = own_costs(tree, joint_point);
            report.cost_deltas = a
                .into_iter()
                .map(|(k, v)| {
                    let d = &v - &b[&k];
                    (k, d)
                })
                .collect();
        }
    }
    report.coordinated = coordinated.ok();
    Ok(report)
}

/// Per non-root node, the cost cap used in the reformulated LP: the node's
/// explicit `cost_bound`, otherwise the supremum of its aggregated cost over
/// its reformulated subtree.
pub fn subtree_cost_bounds(tree: &SystemTree) -> Result<BTreeMap<String, Scalar>, DispatchError> {
    let mut bounds = BTreeMap::new();
    for id in tree.post_order() {
        if id == tree.root_id() {
            continue;
        }
        let node = tree.node(id).expect("known node");
        let bound = match &node.cost_bound {
            Some(b) => b.clone(),
            None => {
                let mut lp = assemble_subtree_reformulated(tree, id, &bounds);
                lp.sense = Sense::Maximize;
                match solve_lp(&lp)? {
                    LpOutcome::Optimal { value, .. } => value,
                    LpOutcome::Unbounded => {
                        return Err(DispatchError::UnboundedCost { node: id.into() })
                    }
                    LpOutcome::Infeasible => {
                        return Err(DispatchError::InfeasibleSubsystem { node: id.into() })
                    }
                }
            }
        };
        bounds.insert(id.to_string(), bound);
    }
    Ok(bounds)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReformulationReport {
    pub direct_value: Option<Scalar>,
    pub reformulated_value: Option<Scalar>,
    pub values_equal: bool,
    /// Nodes whose `pi` exceeds their aggregated cost at the reformulated
    /// optimum.
    pub slack_epigraphs: Vec<String>,
}

impl ReformulationReport {
    pub fn passed(&self) -> bool {
        self.values_equal && self.slack_epigraphs.is_empty()
    }
}

/// Solves the direct and epigraph-reformulated flat LPs and checks that the
/// optima agree and every epigraph row is tight.
pub fn check_reformulation(tree: &SystemTree) -> Result<ReformulationReport, DispatchError> {
    let direct = solve_lp(&assemble_jod(tree))?;
    let bounds = subtree_cost_bounds(tree)?;
    let reformulated = solve_lp(&assemble_reformulated(tree, &bounds))?;
    let mut slack_epigraphs = Vec::new();
    if let Some(point) = reformulated.assignment() {
        for id in tree.pre_order().into_iter().skip(1) {
            let cost = tree.aggregated_cost(id);
            let flat: Assignment = cost
                .terms
                .keys()
                .map(|k| {
                    let name = qualify(id, k);
                    (k.clone(), point[&name].clone())
                })
                .collect();
            let value = cost.eval(&flat).expect("complete point");
            if point[&cost_var_of(id)] != value {
                slack_epigraphs.push(id.to_string());
            }
        }
    }
    Ok(ReformulationReport {
        values_equal: direct.value() == reformulated.value()
            && direct.status() == reformulated.status(),
        direct_value: direct.value().cloned(),
        reformulated_value: reformulated.value().cloned(),
        slack_epigraphs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_and_validate;
    use crate::projection::tests::ILLUSTRATIVE;

    #[test]
    fn illustrative_comparison() {
        let tree = parse_and_validate(ILLUSTRATIVE).unwrap();
        let r = compare(&tree).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.jod_value, Some(Scalar::new(17, 2)));
        assert_eq!(
            solve_joint(&tree).unwrap().value(),
            Some(&Scalar::new(17, 2))
        );
    }

    #[test]
    fn illustrative_reformulation() {
        let tree = parse_and_validate(ILLUSTRATIVE).unwrap();
        let bounds = subtree_cost_bounds(&tree).unwrap();
        assert_eq!(bounds["sys1"], Scalar::from_integer(7));
        let r = check_reformulation(&tree).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn perturbed_coupling_lowers_the_optimum() {
        let mut nodes = parse_and_validate(ILLUSTRATIVE).unwrap().nodes().to_vec();
        nodes[0].constraints[0].rhs = Scalar::from_integer(4);
        let tree = SystemTree::new("perturbed", nodes).unwrap();
        let r = compare(&tree).unwrap();
        assert!(r.passed());
        assert!(r.jod_value.unwrap() < Scalar::new(17, 2));
    }

    #[test]
    fn infeasible_instances_agree() {
        let mut nodes = parse_and_validate(ILLUSTRATIVE).unwrap().nodes().to_vec();
        nodes[0].constraints[0].rhs = Scalar::from_integer(100);
        let tree = SystemTree::new("far", nodes).unwrap();
        let r = compare(&tree).unwrap();
        assert_eq!(r.jod_status, LpStatus::Infeasible);
        assert_eq!(r.coordinated_status, LpStatus::Infeasible);
        assert!(r.values_equal);
    }
}
