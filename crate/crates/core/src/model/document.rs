//! JSON model documents.
//!
//! ```json
//! { "name": "...",
//!   "nodes": [ { "id": "sys1", "parent": "upper",
//!                "coordination_vars": ["x1"], "internal_vars": ["y1"],
//!                "cost": { "terms": { "x1": 1, "y1": "3/2" }, "constant": 0 },
//!                "constraints": [ { "terms": { "x1": 1 }, "relation": "<=", "rhs": 3 } ],
//!                "cost_bound": 7 } ] }
//! ```
//!
//! Numbers may be JSON integers, finite decimals, or strings holding either
//! form or a fraction `"p/q"`. They are read from their literal text, never
//! through `f64`.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::{ModelError, SubsystemNode, SystemTree};
use crate::lp::{Constraint, LinearExpr, Relation};
use crate::scalar::{scalar_from_json, Scalar};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    name: String,
    nodes: Vec<RawNode>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: String,
    parent: Option<String>,
    #[serde(default)]
    coordination_vars: Vec<String>,
    #[serde(default)]
    internal_vars: Vec<String>,
    #[serde(default)]
    cost: Option<RawCost>,
    #[serde(default)]
    constraints: Vec<RawConstraint>,
    #[serde(default)]
    cost_bound: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCost {
    #[serde(default)]
    terms: Map<String, Value>,
    #[serde(default)]
    constant: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    terms: Map<String, Value>,
    relation: String,
    rhs: Value,
}

fn number(node: &str, what: &str, value: &Value) -> Result<Scalar, ModelError> {
    if value.is_object() || value.is_array() {
        return Err(ModelError::NonAffineTerm {
            node: node.to_string(),
            term: format!("{what} = {value}"),
        });
    }
    scalar_from_json(value).map_err(|source| ModelError::InvalidNumber {
        context: format!("node {node:?}, {what}"),
        source,
    })
}

fn terms(node: &str, raw: &Map<String, Value>) -> Result<BTreeMap<String, Scalar>, ModelError> {
    let mut out = BTreeMap::new();
    for (name, value) in raw {
        if name.contains(['*', '^', '(', ')', '/']) {
            return Err(ModelError::NonAffineTerm {
                node: node.to_string(),
                term: name.clone(),
            });
        }
        let coeff = number(node, &format!("coefficient of {name:?}"), value)?;
        out.insert(name.clone(), coeff);
    }
    Ok(out)
}

fn relation(node: &str, text: &str) -> Result<Relation, ModelError> {
    match text {
        "<=" => Ok(Relation::Le),
        "=" | "==" => Ok(Relation::Eq),
        ">=" => Ok(Relation::Ge),
        other => Err(ModelError::InvalidRelation {
            node: node.to_string(),
            relation: other.to_string(),
        }),
    }
}

fn convert(raw: RawNode) -> Result<SubsystemNode, ModelError> {
    let id = raw.id;
    let cost = match raw.cost {
        None => LinearExpr::default(),
        Some(c) => LinearExpr::new(
            terms(&id, &c.terms)?,
            match &c.constant {
                Some(v) => number(&id, "cost constant", v)?,
                None => Scalar::zero(),
            },
        ),
    };
    let constraints = raw
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| {
            Ok(Constraint::new(
                terms(&id, &c.terms)?,
                relation(&id, &c.relation)?,
                number(&id, &format!("rhs of constraint {i}"), &c.rhs)?,
            ))
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let cost_bound = raw
        .cost_bound
        .as_ref()
        .filter(|v| !v.is_null())
        .map(|v| number(&id, "cost_bound", v))
        .transpose()?;
    Ok(SubsystemNode {
        id,
        parent: raw.parent,
        coordination_vars: raw.coordination_vars,
        internal_vars: raw.internal_vars,
        cost,
        constraints,
        cost_bound,
    })
}

/// Parses a JSON document and validates it into a tree.
pub fn parse_and_validate(text: &str) -> Result<SystemTree, ModelError> {
    let raw: RawDocument =
        serde_json::from_str(text).map_err(|e| ModelError::Document(e.to_string()))?;
    let nodes = raw
        .nodes
        .into_iter()
        .map(convert)
        .collect::<Result<Vec<_>, _>>()?;
    SystemTree::new(raw.name, nodes)
}

/// Same as [`parse_and_validate`], starting from an already parsed value.
pub fn parse_document(value: &Value) -> Result<SystemTree, ModelError> {
    parse_and_validate(&value.to_string())
}

fn terms_json(terms: &BTreeMap<String, Scalar>) -> Value {
    Value::Object(
        terms
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.to_string())))
            .collect(),
    )
}

impl SystemTree {
    /// The tree as a model document; numbers are written as exact strings.
    pub fn to_document(&self) -> Value {
        let nodes: Vec<Value> = self
            .nodes()
            .iter()
            .map(|n| {
                let mut obj = json!({
                    "id": n.id,
                    "parent": n.parent,
                    "coordination_vars": n.coordination_vars,
                    "internal_vars": n.internal_vars,
                    "cost": {
                        "terms": terms_json(&n.cost.terms),
                        "constant": n.cost.constant.to_string(),
                    },
                    "constraints": n.constraints.iter().map(|c| json!({
                        "terms": terms_json(&c.terms),
                        "relation": c.relation.symbol(),
                        "rhs": c.rhs.to_string(),
                    })).collect::<Vec<_>>(),
                });
                if let Some(b) = &n.cost_bound {
                    obj["cost_bound"] = Value::String(b.to_string());
                }
                obj
            })
            .collect();
        json!({ "name": self.name(), "nodes": nodes })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("serializable")
    }
}
