//! Operation feasible regions and their equivalent projections.
//!
//! A node's operation feasible region (OFR) lives over its coordination
//! variables, its cost variable `pi`, its internal variables and, for a
//! parent, its children's exported `(child.x, child.pi)` coordinates. The
//! equivalent projection (EP) is the OFR projected onto `(x, pi)`: every
//! coordination value the node can execute together with every cost level it
//! can achieve it at.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::DispatchError;
use crate::lp::{simplex, Constraint};
use crate::model::{SystemTree, COST_VAR};
use crate::polytope::{Polytope, PolytopeDoc};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfrPolytope {
    pub owner: String,
    pub polytope: Polytope,
    /// Coordination variables followed by `pi`: the coordinates that survive
    /// projection.
    pub exported: Vec<String>,
    pub bound_used: Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpModel {
    pub owner: String,
    /// Irredundant, canonical, over exactly `coordination_vars ++ [pi]`.
    pub polytope: Polytope,
    pub bound_used: Scalar,
}

/// Wire form of an EP model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EpDoc {
    pub node: String,
    pub bound_used: Scalar,
    #[serde(flatten)]
    pub polytope: PolytopeDoc,
    /// Rows rendered as text, in the same order as `rows`.
    pub display: Vec<String>,
}

impl EpModel {
    /// Rows over the parent's names (`child.x`, `child.pi`).
    pub fn rows_for_parent(&self) -> Vec<Constraint> {
        self.polytope
            .renamed(|v| format!("{}.{v}", self.owner))
            .to_constraints()
    }

    pub fn to_doc(&self) -> EpDoc {
        let polytope = PolytopeDoc::from(&self.polytope);
        let display = polytope.rows.iter().map(|r| self.row_text(r)).collect();
        EpDoc {
            node: self.owner.clone(),
            bound_used: self.bound_used.clone(),
            polytope,
            display,
        }
    }

    fn row_text(&self, row: &Constraint) -> String {
        // Variable order rather than the map's alphabetical order.
        struct Row<'a>(&'a EpModel, &'a Constraint);
        impl std::fmt::Display for Row<'_> {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                let vars = self.0.polytope.variables();
                let zero = Scalar::zero();
                crate::lp::write_terms(
                    f,
                    vars.iter()
                        .map(|v| (v.as_str(), self.1.terms.get(v).unwrap_or(&zero))),
                )?;
                write!(f, " {} {}", self.1.relation.symbol(), self.1.rhs)
            }
        }
        Row(self, row).to_string()
    }
}

/// Column order of a node's OFR.
pub fn ofr_variables(tree: &SystemTree, id: &str) -> Vec<String> {
    let node = tree.node(id).expect("known node");
    let mut vars: Vec<String> = node.coordination_vars.clone();
    vars.push(COST_VAR.to_string());
    vars.extend(node.internal_vars.iter().cloned());
    for child in tree.children(id) {
        let c = tree.node(child).expect("known child");
        vars.extend(c.coordination_vars.iter().map(|v| format!("{child}.{v}")));
        vars.push(format!("{child}.{COST_VAR}"));
    }
    vars
}

fn child_rows(
    tree: &SystemTree,
    id: &str,
    child_eps: &BTreeMap<String, EpModel>,
) -> Result<Vec<Constraint>, DispatchError> {
    let mut rows = Vec::new();
    for child in tree.children(id) {
        let ep = child_eps
            .get(child)
            .ok_or_else(|| DispatchError::InternalInconsistency {
                node: id.to_string(),
                detail: format!("missing EP of child {child:?}"),
            })?;
        if ep.polytope.is_empty_flagged() {
            return Err(DispatchError::InfeasibleSubsystem {
                node: child.clone(),
            });
        }
        rows.extend(ep.rows_for_parent());
    }
    Ok(rows)
}

/// `pi`'s cap: the explicit `cost_bound` when given, otherwise the exact
/// supremum of the aggregated cost over the node's rows and its children's
/// EPs.
pub fn cost_upper_bound(
    tree: &SystemTree,
    id: &str,
    child_eps: &BTreeMap<String, EpModel>,
) -> Result<Scalar, DispatchError> {
    let node = tree.node(id).expect("known node");
    if let Some(b) = &node.cost_bound {
        return Ok(b.clone());
    }
    let vars: Vec<String> = ofr_variables(tree, id)
        .into_iter()
        .filter(|v| v != COST_VAR)
        .collect();
    let mut rows = node.constraints.clone();
    rows.extend(child_rows(tree, id, child_eps)?);
    let region = Polytope::from_constraints(vars.clone(), &rows)?;
    let cost = tree.aggregated_cost(id);
    let mut objective = vec![Scalar::zero(); vars.len()];
    for (name, c) in &cost.terms {
        let j = region.index_of(name).expect("cost over own variables");
        objective[j] = c.clone();
    }
    let refs: Vec<_> = region.rows().iter().map(|r| r.as_row_ref()).collect();
    if region.is_empty_flagged() {
        return Err(DispatchError::InfeasibleSubsystem { node: id.into() });
    }
    match simplex::maximize(vars.len(), &refs, &objective) {
        simplex::DenseOutcome::Optimal { value, .. } => Ok(value + &cost.constant),
        simplex::DenseOutcome::Unbounded => Err(DispatchError::UnboundedCost { node: id.into() }),
        simplex::DenseOutcome::Infeasible => {
            Err(DispatchError::InfeasibleSubsystem { node: id.into() })
        }
    }
}

/// Conjunction of the node's rows, its epigraph rows and its children's EP
/// rows.
pub fn build_ofr(
    tree: &SystemTree,
    id: &str,
    child_eps: &BTreeMap<String, EpModel>,
) -> Result<OfrPolytope, DispatchError> {
    let node = tree.node(id).expect("known node");
    let bound = cost_upper_bound(tree, id, child_eps)?;
    let mut rows = node.constraints.clone();
    rows.extend(tree.epigraph_reform(id, &bound));
    rows.extend(child_rows(tree, id, child_eps)?);
    let polytope = Polytope::from_constraints(ofr_variables(tree, id), &rows)?;
    if !polytope.is_feasible() {
        return Err(DispatchError::InfeasibleSubsystem { node: id.into() });
    }
    let mut exported = node.coordination_vars.clone();
    exported.push(COST_VAR.to_string());
    Ok(OfrPolytope {
        owner: id.into(),
        polytope,
        exported,
        bound_used: bound,
    })
}

/// Projects the OFR onto `(x, pi)`, then prunes and canonicalises.
pub fn compute_ep(ofr: &OfrPolytope) -> Result<EpModel, DispatchError> {
    let projected = ofr.polytope.project_onto(&ofr.exported)?;
    let polytope = projected.remove_redundant().canonicalize();
    if polytope.is_empty_flagged() {
        return Err(DispatchError::InfeasibleSubsystem {
            node: ofr.owner.clone(),
        });
    }
    Ok(EpModel {
        owner: ofr.owner.clone(),
        polytope,
        bound_used: ofr.bound_used.clone(),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::lp::{LinearExpr, Relation};
    use crate::model::parse_and_validate;
    use crate::polytope::HalfSpace;

    pub(crate) const ILLUSTRATIVE: &str = include_str!("../examples/illustrative.json");

    fn s(n: i64) -> Scalar {
        Scalar::from_integer(n)
    }

    fn canonical(vs: &[&str], rows: &[(&[i64], i64)]) -> Polytope {
        let mut p = Polytope::universe(vs.iter().map(|v| v.to_string()).collect()).unwrap();
        for (c, b) in rows {
            p.push_row(HalfSpace::new(c.iter().map(|&x| s(x)).collect(), s(*b)));
        }
        p.canonicalize()
    }

    /// Φ1 with x1 ≥ 1, x1 ≤ 3, π1 ≤ 7, x1 − π1 ≤ −1, 2x1 − π1 ≤ 1.
    pub(crate) fn expected_phi1() -> Polytope {
        canonical(
            &["x1", "pi"],
            &[
                (&[-1, 0], -1),
                (&[1, 0], 3),
                (&[0, 1], 7),
                (&[1, -1], -1),
                (&[2, -1], 1),
            ],
        )
    }

    /// Φ2 with x2 ≥ 1, x2 ≤ 3, π2 ≤ 10, 3x2 − 2π2 ≤ −3, 6x2 − 2π2 ≤ 3.
    pub(crate) fn expected_phi2() -> Polytope {
        canonical(
            &["x2", "pi"],
            &[
                (&[-1, 0], -1),
                (&[1, 0], 3),
                (&[0, 1], 10),
                (&[3, -2], -3),
                (&[6, -2], 3),
            ],
        )
    }

    #[test]
    fn illustrative_eps_match_printed_systems() {
        let tree = parse_and_validate(ILLUSTRATIVE).unwrap();
        let none = BTreeMap::new();
        let ofr1 = build_ofr(&tree, "sys1", &none).unwrap();
        assert_eq!(ofr1.polytope.variables(), &["x1", "pi", "y1"]);
        assert_eq!(compute_ep(&ofr1).unwrap().polytope, expected_phi1());
        let ofr2 = build_ofr(&tree, "sys2", &none).unwrap();
        assert_eq!(compute_ep(&ofr2).unwrap().polytope, expected_phi2());
    }

    #[test]
    fn eliminating_y1_then_pruning_gives_four_row_system() {
        let tree = parse_and_validate(ILLUSTRATIVE).unwrap();
        let ofr1 = build_ofr(&tree, "sys1", &BTreeMap::new()).unwrap();
        let raw = ofr1.polytope.fme_eliminate("y1").unwrap();
        assert!(raw.row_count() > 5);
        assert_eq!(raw.remove_redundant().canonicalize(), expected_phi1());
        let ofr2 = build_ofr(&tree, "sys2", &BTreeMap::new()).unwrap();
        let raw2 = ofr2.polytope.fme_eliminate("y2").unwrap();
        assert_eq!(raw2.remove_redundant().canonicalize(), expected_phi2());
    }

    #[test]
    fn supremum_bound_when_not_given() {
        let mut tree = parse_and_validate(ILLUSTRATIVE).unwrap();
        let mut nodes = tree.nodes().to_vec();
        nodes[1].cost_bound = None;
        tree = SystemTree::new("nb", nodes).unwrap();
        let none = BTreeMap::new();
        // x1 = 3, y1 = 3 is feasible since −x1 + y1 = 0.
        assert_eq!(cost_upper_bound(&tree, "sys1", &none).unwrap(), s(6));
        assert_eq!(cost_upper_bound(&tree, "sys2", &none).unwrap(), s(10));
    }

    fn bare_leaf_tree(
        cost: LinearExpr,
        rows: Vec<Constraint>,
        bound: Option<Scalar>,
    ) -> SystemTree {
        use crate::model::SubsystemNode;
        let root = SubsystemNode {
            id: "r".into(),
            parent: None,
            coordination_vars: vec![],
            internal_vars: vec![],
            cost: LinearExpr::default(),
            constraints: vec![],
            cost_bound: None,
        };
        let leaf = SubsystemNode {
            id: "a".into(),
            parent: Some("r".into()),
            coordination_vars: vec!["x".into()],
            internal_vars: vec![],
            cost,
            constraints: rows,
            cost_bound: bound,
        };
        SystemTree::new("t", vec![root, leaf]).unwrap()
    }

    #[test]
    fn zero_cost_bound_is_zero() {
        let rows = vec![Constraint::from_terms([("x", s(1))], Relation::Le, s(2))];
        let t = bare_leaf_tree(LinearExpr::default(), rows, None);
        assert_eq!(cost_upper_bound(&t, "a", &BTreeMap::new()).unwrap(), s(0));
    }

    #[test]
    fn unbounded_cost_needs_explicit_bound() {
        let rows = vec![Constraint::from_terms([("x", s(1))], Relation::Ge, s(0))];
        let cost = LinearExpr::new([("x".to_string(), s(1))].into(), s(0));
        let t = bare_leaf_tree(cost.clone(), rows.clone(), None);
        assert_eq!(
            cost_upper_bound(&t, "a", &BTreeMap::new()),
            Err(DispatchError::UnboundedCost { node: "a".into() })
        );
        let t = bare_leaf_tree(cost, rows, Some(s(5)));
        let ep = compute_ep(&build_ofr(&t, "a", &BTreeMap::new()).unwrap()).unwrap();
        // 0 ≤ x ≤ π ≤ 5
        assert_eq!(
            ep.polytope,
            canonical(&["x", "pi"], &[(&[-1, 0], 0), (&[1, -1], 0), (&[0, 1], 5)])
        );
    }

    #[test]
    fn no_internal_variables_means_identity_projection() {
        let rows = vec![
            Constraint::from_terms([("x", s(1))], Relation::Le, s(2)),
            Constraint::from_terms([("x", s(1))], Relation::Ge, s(0)),
        ];
        let cost = LinearExpr::new([("x".to_string(), s(2))].into(), s(1));
        let t = bare_leaf_tree(cost, rows, Some(s(8)));
        let ofr = build_ofr(&t, "a", &BTreeMap::new()).unwrap();
        assert_eq!(ofr.polytope.variables(), &["x", "pi"]);
        let ep = compute_ep(&ofr).unwrap();
        assert_eq!(ep.polytope, ofr.polytope.canonicalize());
    }

    #[test]
    fn infeasible_leaf_is_named() {
        let rows = vec![
            Constraint::from_terms([("x", s(1))], Relation::Le, s(0)),
            Constraint::from_terms([("x", s(1))], Relation::Ge, s(1)),
        ];
        let t = bare_leaf_tree(LinearExpr::default(), rows, Some(s(1)));
        assert_eq!(
            build_ofr(&t, "a", &BTreeMap::new()),
            Err(DispatchError::InfeasibleSubsystem { node: "a".into() })
        );
    }

    #[test]
    fn ep_doc_renders_rows_in_variable_order() {
        let tree = parse_and_validate(ILLUSTRATIVE).unwrap();
        let ep = compute_ep(&build_ofr(&tree, "sys1", &BTreeMap::new()).unwrap()).unwrap();
        let doc = ep.to_doc();
        assert_eq!(doc.polytope.variables, vec!["x1", "pi"]);
        let mut shown = doc.display.clone();
        shown.sort();
        let mut expected = vec![
            "-x1 <= -1",
            "x1 <= 3",
            "pi <= 7",
            "x1 - pi <= -1",
            "2 x1 - pi <= 1",
        ];
        expected.sort();
        assert_eq!(shown, expected);
    }
}
