use std::collections::BTreeMap;

use ep_core::coordinator::{run_coordinated, stage1_project, MessageKind};
use ep_core::oracle::{compare, enumerate_vertices};
use ep_core::{
    generate, parse_and_validate, solve_lp, Constraint, GenSpec, LinearExpr, LinearProgram,
    LpOutcome, Relation, Scalar, Sense,
};
use proptest::prelude::*;
use serde_json::json;

fn s(n: i64) -> Scalar {
    Scalar::from_integer(n)
}

fn chain() -> ep_core::SystemTree {
    let doc = json!({ "name": "chain", "nodes": [
        { "id": "root", "parent": null,
          "constraints": [ { "terms": { "mid.m": 1 }, "relation": "=", "rhs": 3 } ] },
        { "id": "mid", "parent": "root", "coordination_vars": ["m"], "internal_vars": ["g"],
          "cost": { "terms": { "g": 2 } },
          "constraints": [
            { "terms": { "m": 1, "g": -1, "leaf.l": -1 }, "relation": "=", "rhs": 0 },
            { "terms": { "g": 1 }, "relation": ">=", "rhs": 0 },
            { "terms": { "g": 1 }, "relation": "<=", "rhs": 2 } ] },
        { "id": "leaf", "parent": "mid", "coordination_vars": ["l"], "internal_vars": ["u"],
          "cost": { "terms": { "u": 1, "l": "1/2" } },
          "constraints": [
            { "terms": { "l": 1 }, "relation": ">=", "rhs": 0 },
            { "terms": { "l": 1 }, "relation": "<=", "rhs": 2 },
            { "terms": { "u": 1, "l": -1 }, "relation": ">=", "rhs": 0 },
            { "terms": { "u": 1 }, "relation": "<=", "rhs": 4 } ] }
    ]});
    parse_and_validate(&doc.to_string()).unwrap()
}

#[test]
fn chain_projects_bottom_up_and_matches_joint() {
    let tree = chain();
    let stage1 = stage1_project(&tree).unwrap();
    let order: Vec<&str> = stage1.messages.iter().map(|m| m.from.as_str()).collect();
    assert_eq!(order, ["leaf", "mid"]);
    let mid = &stage1.ofrs["mid"].polytope;
    assert!(mid.variables().contains(&"leaf.pi".to_string()));
    assert!(mid.variables().contains(&"leaf.l".to_string()));

    let r = compare(&tree).unwrap();
    assert!(r.passed(), "{r:?}");
    // Leaf power costs 3/2 per unit, mid power 2: the leaf runs flat out.
    assert_eq!(r.jod_value, Some(s(5)));
    let d = r.coordinated.unwrap();
    assert_eq!(d.nodes["leaf"].coordination["l"], s(2));
    assert_eq!(d.nodes["mid"].internal["g"], s(1));
    assert_eq!(
        d.messages
            .iter()
            .filter(|m| m.kind == MessageKind::CommandDown)
            .count(),
        2
    );
}

#[test]
fn unique_preimage_is_recovered() {
    // Every EP vertex of the chain's leaf has a single internal value, so the
    // disaggregated u must be the one the vertex oracle finds.
    let tree = chain();
    let stage1 = stage1_project(&tree).unwrap();
    let ofr = &stage1.ofrs["leaf"].polytope;
    let r = run_coordinated(&tree).unwrap();
    let leaf = &r.nodes["leaf"];
    let matching: Vec<_> = enumerate_vertices(ofr)
        .unwrap()
        .into_iter()
        .filter(|v| v["l"] == leaf.coordination["l"] && Some(&v["pi"]) == leaf.pi_hat.as_ref())
        .collect();
    assert_eq!(matching.len(), 1);
    assert_eq!(matching[0]["u"], leaf.internal["u"]);
}

/// `min c·x, A x >= b, x >= 0` against `max b·y, Aᵀ y <= c, y >= 0`.
fn primal_dual(a: &[Vec<i64>], b: &[i64], c: &[i64]) -> (LpOutcome, LpOutcome) {
    let xs: Vec<String> = (0..c.len()).map(|j| format!("x{j}")).collect();
    let ys: Vec<String> = (0..b.len()).map(|i| format!("y{i}")).collect();
    let expr = |names: &[String], coeffs: &[i64]| -> BTreeMap<String, Scalar> {
        names
            .iter()
            .cloned()
            .zip(coeffs.iter().map(|&v| s(v)))
            .collect()
    };
    let mut primal_rows: Vec<Constraint> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| Constraint::new(expr(&xs, row), Relation::Ge, s(bi)))
        .collect();
    primal_rows.extend(
        xs.iter()
            .map(|x| Constraint::from_terms([(x.as_str(), s(1))], Relation::Ge, s(0))),
    );
    let primal = LinearProgram::new(
        xs.clone(),
        LinearExpr::new(expr(&xs, c), s(0)),
        Sense::Minimize,
    )
    .with_rows(primal_rows);

    let mut dual_rows: Vec<Constraint> = (0..c.len())
        .map(|j| {
            let col: Vec<i64> = a.iter().map(|row| row[j]).collect();
            Constraint::new(expr(&ys, &col), Relation::Le, s(c[j]))
        })
        .collect();
    dual_rows.extend(
        ys.iter()
            .map(|y| Constraint::from_terms([(y.as_str(), s(1))], Relation::Ge, s(0))),
    );
    let dual = LinearProgram::new(
        ys.clone(),
        LinearExpr::new(expr(&ys, b), s(0)),
        Sense::Maximize,
    )
    .with_rows(dual_rows);
    (solve_lp(&primal).unwrap(), solve_lp(&dual).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn strong_duality(
        a in proptest::collection::vec(proptest::collection::vec(-3i64..=4, 3), 1..=4),
        b in proptest::collection::vec(-4i64..=6, 4),
        c in proptest::collection::vec(0i64..=5, 3),
    ) {
        let b = &b[..a.len()];
        let (p, d) = primal_dual(&a, b, &c);
        // c >= 0 keeps the primal bounded below; y = 0 keeps the dual feasible.
        match (&p, &d) {
            (LpOutcome::Optimal { value: vp, .. }, LpOutcome::Optimal { value: vd, .. }) => prop_assert_eq!(vp, vd),
            (LpOutcome::Infeasible, LpOutcome::Unbounded) => {}
            other => prop_assert!(false, "unexpected pair {:?}", other),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn coordinated_equals_joint(seed in any::<u64>(), branching in 1usize..=3) {
        let spec = GenSpec { branching, max_internal: 3, max_rows: 8, ..GenSpec::default() };
        let tree = generate(&spec, seed);
        let r = compare(&tree).unwrap();
        prop_assert!(r.passed(), "{:?}", r);
        prop_assert!(r.jod_value.is_some());
    }
}
