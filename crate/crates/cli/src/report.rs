//! JSON reports. Every rational is written as `{"exact": "p/q", "approx": f64}`.

use ep_core::oracle::{ComparisonReport, ProjectionCheck};
use ep_core::{Assignment, DispatchResult, EpModel, LpOutcome, Scalar, SystemTree};
use serde_json::{json, Map, Value};

pub fn num(s: &Scalar) -> Value {
    json!({ "exact": s.to_string(), "approx": s.to_f64() })
}

fn opt_num(s: Option<&Scalar>) -> Value {
    s.map(num).unwrap_or(Value::Null)
}

pub fn assignment(a: &Assignment) -> Value {
    Value::Object(a.iter().map(|(k, v)| (k.clone(), num(v))).collect())
}

pub fn ep(ep: &EpModel) -> Value {
    let doc = ep.to_doc();
    let p = &ep.polytope;
    let rows: Vec<Value> = p
        .rows()
        .iter()
        .zip(&doc.display)
        .map(|(row, text)| {
            json!({
                "coefficients": row.coeffs.iter().map(num).collect::<Vec<_>>(),
                "rhs": num(&row.rhs),
                "text": text,
            })
        })
        .collect();
    json!({
        "node": ep.owner,
        "variables": p.variables(),
        "bound_used": num(&ep.bound_used),
        "rows": rows,
    })
}

pub fn eps<'a>(tree: &SystemTree, eps: impl IntoIterator<Item = &'a EpModel>) -> Value {
    let mut all: Vec<&EpModel> = eps.into_iter().collect();
    let order = tree.post_order();
    all.sort_by_key(|e| order.iter().position(|&id| id == e.owner));
    Value::Array(all.into_iter().map(ep).collect())
}

pub fn joint(outcome: &LpOutcome) -> Value {
    json!({
        "mode": "joint",
        "status": outcome.status(),
        "value": opt_num(outcome.value()),
        "assignment": outcome.assignment().map(assignment).unwrap_or(Value::Null),
    })
}

pub fn dispatch(tree: &SystemTree, r: &DispatchResult, emit_eps: bool) -> Value {
    let mut nodes = Map::new();
    for id in tree.pre_order() {
        let n = &r.nodes[id];
        nodes.insert(
            id.to_string(),
            json!({
                "coordination": assignment(&n.coordination),
                "pi_hat": opt_num(n.pi_hat.as_ref()),
                "internal": assignment(&n.internal),
                "own_cost": num(&n.own_cost),
                "aggregated_cost": num(&n.aggregated_cost),
            }),
        );
    }
    let secs = |m: &std::collections::BTreeMap<String, std::time::Duration>| -> Value {
        Value::Object(
            m.iter()
                .map(|(k, v)| (k.clone(), json!(v.as_secs_f64())))
                .collect(),
        )
    };
    let mut out = json!({
        "mode": "coordinated",
        "status": "Optimal",
        "objective": num(&r.objective),
        "nodes": nodes,
        "messages": r.messages,
        "timings": {
            "projection": secs(&r.timings.projection),
            "upper": r.timings.upper.as_secs_f64(),
            "local": secs(&r.timings.local),
            "total": r.timings.total.as_secs_f64(),
        },
    });
    if emit_eps {
        out["eps"] = eps(tree, r.eps.values());
    }
    out
}

pub fn comparison(
    tree: &SystemTree,
    r: &ComparisonReport,
    checks: &[ProjectionCheck],
    emit_eps: bool,
) -> Value {
    let deltas: Map<String, Value> = r
        .cost_deltas
        .iter()
        .map(|(k, v)| (k.clone(), num(v)))
        .collect();
    let checks: Vec<Value> = checks
        .iter()
        .map(|c| {
            json!({
                "node": c.node,
                "passed": c.passed(),
                "seed": c.seed,
                "samples": c.samples,
                "samples_inside": c.samples_inside,
                "vertices_checked": c.vertices_checked,
                "counterexamples": c.counterexamples.iter().map(|x| json!({
                    "point": assignment(&x.point),
                    "in_ep": x.in_ep,
                    "ofr_feasible": x.ofr_feasible,
                    "source": x.source,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut out = json!({
        "mode": "compare",
        "jod_status": r.jod_status,
        "coordinated_status": r.coordinated_status,
        "jod_value": opt_num(r.jod_value.as_ref()),
        "coordinated_value": opt_num(r.coordinated_value.as_ref()),
        "values_equal": r.values_equal,
        "jod_assignment_feasible_for_tree": r.jod_assignment_feasible_for_tree,
        "coordinated_assignment_feasible_for_flat_lp": r.coordinated_assignment_feasible_for_flat_lp,
        "cost_deltas": deltas,
        "projection_checks": checks,
    });
    if let (true, Some(c)) = (emit_eps, &r.coordinated) {
        out["eps"] = eps(tree, c.eps.values());
    }
    out
}

/// Variant name from a `Debug` rendering, e.g. `CycleDetected`.
pub fn error_kind(debug: &str) -> &str {
    let end = debug
        .find(|c: char| !c.is_alphanumeric() && c != '_')
        .unwrap_or(debug.len());
    &debug[..end]
}

pub fn error(kind: &str, message: &str) -> Value {
    json!({ "status": "error", "kind": kind, "message": message })
}
