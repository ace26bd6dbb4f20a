//! Hierarchical dispatch models.
//!
//! A [`SystemTree`] is a rooted tree of [`SubsystemNode`]s. Each non-root
//! node exposes coordination variables to its parent and keeps internal
//! variables private; every node carries an affine cost and affine
//! constraints. A parent's constraints may reference a direct child's
//! coordination variables as `child.var` and the child's cost variable as
//! `child.pi`.

mod assemble;
mod document;

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::lp::{Constraint, LinearExpr, Relation};
use crate::scalar::{ParseScalarError, Scalar};

pub use assemble::{assemble_jod, assemble_reformulated, assemble_subtree_reformulated};
pub use document::{parse_and_validate, parse_document};

/// Name of a node's cost (epigraph) variable.
pub const COST_VAR: &str = "pi";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed document: {0}")]
    Document(String),
    #[error("{context}: {source}")]
    InvalidNumber {
        context: String,
        source: ParseScalarError,
    },
    #[error("parent links form a cycle through {0:?}")]
    CycleDetected(Vec<String>),
    #[error("node {node:?}: unknown reference {reference:?}")]
    UnknownReference { node: String, reference: String },
    #[error("node {node:?}: variable {var:?} declared twice")]
    DuplicateVariable { node: String, var: String },
    #[error("node id {0:?} used twice")]
    DuplicateNode(String),
    #[error("node {node:?}: non-affine term {term:?}")]
    NonAffineTerm { node: String, term: String },
    #[error("several root nodes: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("node {node:?}: invalid name {name:?}: {reason}")]
    InvalidName {
        node: String,
        name: String,
        reason: &'static str,
    },
    #[error("node {node:?}: invalid relation {relation:?}")]
    InvalidRelation { node: String, relation: String },
    #[error("root {0:?} must not declare coordination variables or a cost bound")]
    RootCoordination(String),
    #[error("node {node:?}: {reference:?} may only appear as an upper bound on the child's cost")]
    CostLowerBound { node: String, reference: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemNode {
    pub id: String,
    pub parent: Option<String>,
    pub coordination_vars: Vec<String>,
    pub internal_vars: Vec<String>,
    /// Affine cost over the node's own variables (local names).
    pub cost: LinearExpr,
    /// Rows over local names, plus `child.var` / `child.pi` references.
    pub constraints: Vec<Constraint>,
    /// Explicit cap for the node's cost variable.
    pub cost_bound: Option<Scalar>,
}

impl SubsystemNode {
    /// Coordination variables followed by internal variables.
    pub fn own_vars(&self) -> impl Iterator<Item = &String> {
        self.coordination_vars.iter().chain(&self.internal_vars)
    }

    pub fn is_own_var(&self, name: &str) -> bool {
        self.own_vars().any(|v| v == name)
    }
}

/// Fully qualified flat name of a node-local reference: own variables get the
/// node prefix, `child.var` references already are flat names.
pub fn qualify(node_id: &str, local: &str) -> String {
    if local.contains('.') {
        local.to_string()
    } else {
        format!("{node_id}.{local}")
    }
}

pub fn cost_var_of(node_id: &str) -> String {
    format!("{node_id}.{COST_VAR}")
}

/// A validated dispatch hierarchy. Node order follows the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemTree {
    name: String,
    nodes: Vec<SubsystemNode>,
    index: HashMap<String, usize>,
    children: BTreeMap<String, Vec<String>>,
    root: String,
}

impl SystemTree {
    /// Checks every structural invariant and builds the tree.
    pub fn new(name: impl Into<String>, nodes: Vec<SubsystemNode>) -> Result<Self, ModelError> {
        let mut index = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            check_name(&node.id, &node.id)?;
            if index.insert(node.id.clone(), i).is_some() {
                return Err(ModelError::DuplicateNode(node.id.clone()));
            }
        }
        for node in &nodes {
            check_variables(node)?;
            if let Some(p) = &node.parent {
                if !index.contains_key(p) {
                    return Err(ModelError::UnknownReference {
                        node: node.id.clone(),
                        reference: p.clone(),
                    });
                }
            }
        }

        let roots: Vec<String> = nodes
            .iter()
            .filter(|n| n.parent.is_none())
            .map(|n| n.id.clone())
            .collect();
        if roots.len() > 1 {
            return Err(ModelError::MultipleRoots(roots));
        }
        // Every node must reach the root by following parents.
        for node in &nodes {
            let mut seen = HashSet::new();
            let mut cur = node;
            while let Some(p) = &cur.parent {
                if !seen.insert(cur.id.clone()) {
                    let mut cycle: Vec<String> = seen.into_iter().collect();
                    cycle.sort();
                    return Err(ModelError::CycleDetected(cycle));
                }
                cur = &nodes[index[p]];
            }
        }
        let Some(root) = roots.into_iter().next() else {
            let mut all: Vec<String> = nodes.iter().map(|n| n.id.clone()).collect();
            all.sort();
            return Err(ModelError::CycleDetected(all));
        };

        let mut children: BTreeMap<String, Vec<String>> =
            nodes.iter().map(|n| (n.id.clone(), Vec::new())).collect();
        for node in &nodes {
            if let Some(p) = &node.parent {
                children
                    .get_mut(p)
                    .expect("parent indexed")
                    .push(node.id.clone());
            }
        }

        let root_node = &nodes[index[&root]];
        if !root_node.coordination_vars.is_empty() || root_node.cost_bound.is_some() {
            return Err(ModelError::RootCoordination(root));
        }

        let tree = SystemTree {
            name: name.into(),
            nodes,
            index,
            children,
            root,
        };
        for node in &tree.nodes {
            tree.check_references(node)?;
        }
        Ok(tree)
    }

    fn check_references(&self, node: &SubsystemNode) -> Result<(), ModelError> {
        let unknown = |reference: &str| ModelError::UnknownReference {
            node: node.id.clone(),
            reference: reference.to_string(),
        };
        for name in node.cost.terms.keys() {
            if !node.is_own_var(name) {
                return Err(unknown(name));
            }
        }
        let kids = &self.children[&node.id];
        for row in &node.constraints {
            for (name, coeff) in &row.terms {
                let Some((child, var)) = name.split_once('.') else {
                    if !node.is_own_var(name) {
                        return Err(unknown(name));
                    }
                    continue;
                };
                if !kids.iter().any(|k| k == child) {
                    return Err(unknown(name));
                }
                let child_node = self.node(child).expect("child indexed");
                if var == COST_VAR {
                    // The cost variable sits above the child's true cost, so it
                    // may only be capped from above.
                    let caps = match row.relation {
                        Relation::Le => !coeff.is_negative(),
                        Relation::Ge => !coeff.is_positive(),
                        Relation::Eq => coeff.is_zero(),
                    };
                    if !caps {
                        return Err(ModelError::CostLowerBound {
                            node: node.id.clone(),
                            reference: name.clone(),
                        });
                    }
                } else if !child_node.coordination_vars.iter().any(|v| v == var) {
                    return Err(unknown(name));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root(&self) -> &SubsystemNode {
        &self.nodes[self.index[&self.root]]
    }

    pub fn root_id(&self) -> &str {
        &self.root
    }

    pub fn node(&self, id: &str) -> Option<&SubsystemNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    /// Nodes in input order.
    pub fn nodes(&self) -> &[SubsystemNode] {
        &self.nodes
    }

    /// Direct children in input order; empty for unknown ids.
    pub fn children(&self, id: &str) -> &[String] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_leaf(&self, id: &str) -> bool {
        self.children(id).is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of levels; a single node has depth 1.
    pub fn depth(&self) -> usize {
        fn go(tree: &SystemTree, id: &str) -> usize {
            1 + tree
                .children(id)
                .iter()
                .map(|c| go(tree, c))
                .max()
                .unwrap_or(0)
        }
        go(self, &self.root)
    }

    /// Children before parents; siblings in input order.
    pub fn post_order(&self) -> Vec<&str> {
        fn go<'a>(tree: &'a SystemTree, id: &'a str, out: &mut Vec<&'a str>) {
            for c in tree.children(id) {
                go(tree, c, out);
            }
            out.push(id);
        }
        let mut out = Vec::with_capacity(self.nodes.len());
        go(self, &self.root, &mut out);
        out
    }

    /// Parents before children; siblings in input order.
    pub fn pre_order(&self) -> Vec<&str> {
        fn go<'a>(tree: &'a SystemTree, id: &'a str, out: &mut Vec<&'a str>) {
            out.push(id);
            for c in tree.children(id) {
                go(tree, c, out);
            }
        }
        let mut out = Vec::with_capacity(self.nodes.len());
        go(self, &self.root, &mut out);
        out
    }

    /// The node and all of its descendants, pre-order.
    pub fn subtree(&self, id: &str) -> Vec<&str> {
        fn go<'a>(tree: &'a SystemTree, id: &'a str, out: &mut Vec<&'a str>) {
            out.push(id);
            for c in tree.children(id) {
                go(tree, c, out);
            }
        }
        let mut out = Vec::new();
        if let Some(node) = self.node(id) {
            go(self, &node.id, &mut out);
        }
        out
    }

    /// Epigraph rows for `id` over its local names: the cost (plus, for a
    /// parent, the sum of its children's cost variables) is at most `pi`,
    /// and `pi` is at most `bound`.
    pub fn epigraph_reform(&self, id: &str, bound: &Scalar) -> Vec<Constraint> {
        let node = self.node(id).expect("known node");
        let mut terms = node.cost.terms.clone();
        for child in self.children(id) {
            terms.insert(cost_var_of(child), Scalar::one());
        }
        let entry = terms
            .entry(COST_VAR.to_string())
            .or_insert_with(Scalar::zero);
        *entry -= &Scalar::one();
        vec![
            Constraint::new(terms, Relation::Le, -&node.cost.constant),
            Constraint::from_terms([(COST_VAR, Scalar::one())], Relation::Le, bound.clone()),
        ]
    }

    /// The node's aggregated cost `C_r(own) + Σ child.pi` over local names.
    pub fn aggregated_cost(&self, id: &str) -> LinearExpr {
        let node = self.node(id).expect("known node");
        let mut expr = node.cost.clone();
        for child in self.children(id) {
            expr.add_term(cost_var_of(child), Scalar::one());
        }
        expr
    }
}

const RESERVED: &[char] = &['*', '^', '(', ')', '/', '+', '[', ']', ' ', '\t', '\n'];

fn check_name(node: &str, name: &str) -> Result<(), ModelError> {
    let invalid = |reason| ModelError::InvalidName {
        node: node.to_string(),
        name: name.to_string(),
        reason,
    };
    if name.is_empty() {
        return Err(invalid("empty"));
    }
    if name.contains('.') {
        return Err(invalid("'.' is reserved for child references"));
    }
    if name.contains(RESERVED) {
        return Err(invalid("contains an operator or whitespace"));
    }
    Ok(())
}

fn check_variables(node: &SubsystemNode) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for v in node.own_vars() {
        check_name(&node.id, v)?;
        if v == COST_VAR {
            return Err(ModelError::InvalidName {
                node: node.id.clone(),
                name: v.clone(),
                reason: "reserved for the cost variable",
            });
        }
        if !seen.insert(v.as_str()) {
            return Err(ModelError::DuplicateVariable {
                node: node.id.clone(),
                var: v.clone(),
            });
        }
    }
    Ok(())
}
