//! Flat (monolithic) LPs assembled from a tree.

use std::collections::BTreeMap;

use super::{cost_var_of, qualify, SystemTree, COST_VAR};
use crate::lp::{Constraint, LinearExpr, LinearProgram, Sense};
use crate::scalar::Scalar;

fn qualified_expr(node_id: &str, expr: &LinearExpr) -> LinearExpr {
    LinearExpr::new(
        expr.terms
            .iter()
            .map(|(k, v)| (qualify(node_id, k), v.clone()))
            .collect(),
        expr.constant.clone(),
    )
}

fn qualified_row(node_id: &str, row: &Constraint) -> Constraint {
    Constraint::new(
        row.terms
            .iter()
            .map(|(k, v)| (qualify(node_id, k), v.clone()))
            .collect(),
        row.relation,
        row.rhs.clone(),
    )
}

/// Total cost of the subtree rooted at `id`, over flat names.
fn subtree_cost(tree: &SystemTree, id: &str) -> LinearExpr {
    let mut total = LinearExpr::default();
    for n in tree.subtree(id) {
        let node = tree.node(n).expect("known node");
        let expr = qualified_expr(n, &node.cost);
        for (k, v) in expr.terms {
            total.add_term(k, v);
        }
        total.constant += expr.constant;
    }
    total
}

fn flat_variables(tree: &SystemTree, ids: &[&str]) -> Vec<String> {
    ids.iter()
        .flat_map(|&id| {
            let node = tree.node(id).expect("known node");
            node.own_vars().map(move |v| qualify(id, v))
        })
        .collect()
}

/// The joint dispatch LP: minimise the sum of every node's cost subject to
/// every node's constraints, over flat `node.var` names. A parent's cap on
/// `child.pi` is applied to the child's total subtree cost.
pub fn assemble_jod(tree: &SystemTree) -> LinearProgram {
    let ids = tree.pre_order();
    let variables = flat_variables(tree, &ids);
    let objective = subtree_cost(tree, tree.root_id());
    let mut rows = Vec::new();
    for &id in &ids {
        let node = tree.node(id).expect("known node");
        for row in &node.constraints {
            let flat = qualified_row(id, row);
            let mut terms = BTreeMap::new();
            let mut rhs = flat.rhs.clone();
            for (name, coeff) in flat.terms {
                match name.strip_suffix(&format!(".{COST_VAR}")) {
                    Some(child) if tree.node(child).is_some() => {
                        let cost = subtree_cost(tree, child);
                        rhs -= &(&coeff * &cost.constant);
                        for (k, v) in cost.terms {
                            let e = terms.entry(k).or_insert_with(Scalar::zero);
                            *e += &coeff * &v;
                        }
                    }
                    _ => {
                        let e = terms.entry(name).or_insert_with(Scalar::zero);
                        *e += coeff;
                    }
                }
            }
            rows.push(Constraint::new(terms, flat.relation, rhs));
        }
    }
    LinearProgram::new(variables, objective, Sense::Minimize).with_rows(rows)
}

/// The epigraph-reformulated LP of the subtree rooted at `id`: every
/// descendant carries a cost variable bounded below by its aggregated cost
/// and above by `bounds[descendant]`; the objective is `id`'s own cost plus
/// its children's cost variables.
///
/// Panics if a descendant has no entry in `bounds`.
pub fn assemble_subtree_reformulated(
    tree: &SystemTree,
    id: &str,
    bounds: &BTreeMap<String, Scalar>,
) -> LinearProgram {
    let ids = tree.subtree(id);
    let mut variables = flat_variables(tree, &ids);
    variables.extend(ids.iter().skip(1).map(|d| cost_var_of(d)));

    let top = tree.node(id).expect("known node");
    let objective = qualified_expr(id, &tree.aggregated_cost(id));
    debug_assert_eq!(objective.constant, top.cost.constant);

    let mut rows = Vec::new();
    for &n in &ids {
        let node = tree.node(n).expect("known node");
        rows.extend(node.constraints.iter().map(|r| qualified_row(n, r)));
        if n != id {
            let bound = bounds
                .get(n)
                .unwrap_or_else(|| panic!("no cost bound for {n:?}"));
            rows.extend(
                tree.epigraph_reform(n, bound)
                    .iter()
                    .map(|r| qualified_row(n, r)),
            );
        }
    }
    LinearProgram::new(variables, objective, Sense::Minimize).with_rows(rows)
}

/// The reformulated joint LP over the whole tree.
pub fn assemble_reformulated(
    tree: &SystemTree,
    bounds: &BTreeMap<String, Scalar>,
) -> LinearProgram {
    assemble_subtree_reformulated(tree, tree.root_id(), bounds)
}
