//! Random feasible trees for the randomized suites and benchmarks.
//!
//! Every node gets a sampled operating point first; all rows are then drawn
//! so that the point satisfies them. Own variables are boxed by per-variable
//! lower bounds and one cap on their sum, so every cost is bounded.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lp::{Assignment, Constraint, LinearExpr, Relation};
use crate::model::{SubsystemNode, SystemTree, COST_VAR};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    /// Tree height counted in nodes; 1 is a lone root.
    pub levels: usize,
    /// Children per non-leaf node.
    pub branching: usize,
    pub max_coordination: usize,
    pub max_internal: usize,
    /// Cap on each node's own constraint count.
    pub max_rows: usize,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            levels: 2,
            branching: 2,
            max_coordination: 2,
            max_internal: 4,
            max_rows: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid generator spec {spec:?}: {reason}")]
pub struct GenSpecError {
    pub spec: String,
    pub reason: String,
}

impl FromStr for GenSpec {
    type Err = GenSpecError;

    /// Comma-separated `key=value` pairs. Keys: `leaves` (two levels with that
    /// many leaves), `levels`, `branching`, `coord`, `internal`, `rows`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: String| GenSpecError {
            spec: s.to_string(),
            reason,
        };
        let mut spec = GenSpec::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {part:?}")))?;
            let n: usize = value
                .trim()
                .parse()
                .map_err(|_| err(format!("{key} needs a non-negative integer")))?;
            match key.trim() {
                "leaves" => {
                    spec.levels = 2;
                    spec.branching = n;
                }
                "levels" => spec.levels = n,
                "branching" => spec.branching = n,
                "coord" => spec.max_coordination = n,
                "internal" => spec.max_internal = n,
                "rows" => spec.max_rows = n,
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        if spec.levels == 0 {
            return Err(err("levels must be at least 1".into()));
        }
        if spec.levels > 1 && spec.branching == 0 {
            return Err(err("branching must be at least 1".into()));
        }
        if spec.max_coordination == 0 {
            return Err(err("coord must be at least 1".into()));
        }
        if spec.max_rows < spec.max_coordination + spec.max_internal + 1 {
            return Err(err("rows must leave room for the variable box".into()));
        }
        Ok(spec)
    }
}

impl fmt::Display for GenSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "levels={},branching={},coord={},internal={},rows={}",
            self.levels, self.branching, self.max_coordination, self.max_internal, self.max_rows
        )
    }
}

struct Draft {
    id: String,
    parent: Option<String>,
    children: Vec<String>,
    coordination: Vec<String>,
    internal: Vec<String>,
    point: Assignment,
    lower: BTreeMap<String, Scalar>,
    sum_cap: Scalar,
    cost: LinearExpr,
}

impl Draft {
    fn own_vars(&self) -> impl Iterator<Item = &String> {
        self.coordination.iter().chain(&self.internal)
    }

    /// Exact maximum of the own cost over the variable box.
    fn own_cost_max(&self) -> Scalar {
        let mut at_lower = self.cost.constant.clone();
        let mut best = Scalar::zero();
        for v in self.own_vars() {
            let c = self.cost.terms.get(v).cloned().unwrap_or_default();
            at_lower += &(&c * &self.lower[v]);
            best = best.max(c);
        }
        let room: Scalar = &self.sum_cap - &self.lower.values().sum::<Scalar>();
        at_lower + &best * &room
    }
}

fn small_value(rng: &mut ChaCha8Rng) -> Scalar {
    let k = rng.gen_range(0..=12);
    if rng.gen_bool(0.25) {
        Scalar::new(k, 2)
    } else {
        Scalar::from_integer(k / 2)
    }
}

fn nonzero_coeff(rng: &mut ChaCha8Rng) -> Scalar {
    let c = *[-3, -2, -1, 1, 2, 3].choose(rng).expect("nonempty");
    Scalar::from_integer(c)
}

fn lhs_at(terms: &BTreeMap<String, Scalar>, values: &Assignment) -> Scalar {
    terms.iter().map(|(k, c)| c * &values[k]).sum()
}

/// A row through or around the point: equality now and then, otherwise an
/// inequality of random direction with a small slack.
fn row_around(
    rng: &mut ChaCha8Rng,
    terms: BTreeMap<String, Scalar>,
    values: &Assignment,
) -> Constraint {
    let at = lhs_at(&terms, values);
    if rng.gen_bool(0.15) {
        return Constraint::new(terms, Relation::Eq, at);
    }
    let slack = Scalar::from_integer(rng.gen_range(0..=3));
    if rng.gen_bool(0.5) {
        Constraint::new(terms, Relation::Le, at + slack)
    } else {
        Constraint::new(terms, Relation::Ge, at - slack)
    }
}

/// A random feasible tree, deterministic in `seed`.
pub fn generate(spec: &GenSpec, seed: u64) -> SystemTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drafts: Vec<Draft> = Vec::new();
    let mut frontier = vec![("root".to_string(), None::<String>, 1usize)];
    while let Some((id, parent, level)) = frontier.pop() {
        let is_root = parent.is_none();
        let n_coord = if is_root {
            0
        } else {
            rng.gen_range(1..=spec.max_coordination)
        };
        let n_internal = if is_root {
            rng.gen_range(0..=spec.max_internal.min(2))
        } else {
            rng.gen_range(0..=spec.max_internal)
        };
        let coordination: Vec<String> = (1..=n_coord).map(|i| format!("x{i}")).collect();
        let internal: Vec<String> = (1..=n_internal).map(|i| format!("y{i}")).collect();
        let mut point = Assignment::new();
        let mut lower = BTreeMap::new();
        for v in coordination.iter().chain(&internal) {
            let p = small_value(&mut rng);
            lower.insert(v.clone(), &p - &Scalar::from_integer(rng.gen_range(0..=3)));
            point.insert(v.clone(), p);
        }
        let sum_cap = point.values().sum::<Scalar>() + Scalar::from_integer(rng.gen_range(0..=4));
        let cost = LinearExpr::new(
            point
                .keys()
                .map(|v| (v.clone(), Scalar::from_integer(rng.gen_range(-1..=4))))
                .filter(|(_, c)| !c.is_zero())
                .collect(),
            Scalar::from_integer(rng.gen_range(0..=2)),
        );
        let children: Vec<String> = if level < spec.levels {
            (1..=spec.branching)
                .map(|i| {
                    if is_root {
                        format!("n{i}")
                    } else {
                        format!("{id}_{i}")
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        for c in children.iter().rev() {
            frontier.push((c.clone(), Some(id.clone()), level + 1));
        }
        drafts.push(Draft {
            id,
            parent,
            children,
            coordination,
            internal,
            point,
            lower,
            sum_cap,
            cost,
        });
    }

    // Subtree cost at the sampled point and a valid cap on it, leaves first.
    let index: BTreeMap<String, usize> = drafts
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.clone(), i))
        .collect();
    let mut cost_at_point: BTreeMap<String, Scalar> = BTreeMap::new();
    let mut cost_cap: BTreeMap<String, Scalar> = BTreeMap::new();
    for d in drafts.iter().rev() {
        let mut at = d.cost.eval(&d.point).expect("own point");
        let mut cap = d.own_cost_max();
        for c in &d.children {
            at += &cost_at_point[c];
            cap += &cost_cap[c];
        }
        cost_at_point.insert(d.id.clone(), at);
        cost_cap.insert(d.id.clone(), cap);
    }

    let mut nodes = Vec::with_capacity(drafts.len());
    for d in &drafts {
        let mut rows = Vec::new();
        for v in d.own_vars() {
            rows.push(Constraint::from_terms(
                [(v.as_str(), Scalar::one())],
                Relation::Ge,
                d.lower[v].clone(),
            ));
        }
        if !d.point.is_empty() {
            rows.push(Constraint::new(
                d.point.keys().map(|v| (v.clone(), Scalar::one())).collect(),
                Relation::Le,
                d.sum_cap.clone(),
            ));
        }

        // Values visible to this node: its own point and its children's
        // coordination values under `child.var` names.
        let mut visible = d.point.clone();
        let mut child_vars = Vec::new();
        for c in &d.children {
            let child = &drafts[index[c]];
            for v in &child.coordination {
                let name = format!("{c}.{v}");
                visible.insert(name.clone(), child.point[v].clone());
                child_vars.push(name);
            }
        }
        let mut budget = spec.max_rows.saturating_sub(rows.len());
        if !child_vars.is_empty() && budget > 0 {
            // A coupling row over every child's first coordination variable.
            let mut terms = BTreeMap::new();
            for c in &d.children {
                terms.insert(
                    format!("{c}.x1"),
                    Scalar::from_integer(rng.gen_range(1..=2)),
                );
            }
            if let Some(y) = d.internal.first() {
                terms.insert(y.clone(), Scalar::from_integer(-1));
            }
            let at = lhs_at(&terms, &visible);
            rows.push(Constraint::new(terms, Relation::Eq, at));
            budget -= 1;
        }
        let pool: Vec<String> = d
            .own_vars()
            .cloned()
            .chain(child_vars.iter().cloned())
            .collect();
        let extra = if pool.is_empty() {
            0
        } else {
            rng.gen_range(0..=budget.min(3))
        };
        for _ in 0..extra {
            let k = rng.gen_range(1..=pool.len().min(3));
            let terms: BTreeMap<String, Scalar> = pool
                .choose_multiple(&mut rng, k)
                .map(|v| (v.clone(), nonzero_coeff(&mut rng)))
                .collect();
            rows.push(row_around(&mut rng, terms, &visible));
        }
        for c in &d.children {
            if rows.len() < spec.max_rows && rng.gen_bool(0.2) {
                let cap = &cost_at_point[c] + &Scalar::from_integer(rng.gen_range(0..=2));
                rows.push(Constraint::from_terms(
                    [(format!("{c}.{COST_VAR}").as_str(), Scalar::one())],
                    Relation::Le,
                    cap,
                ));
            }
        }

        let cost_bound = (d.parent.is_some() && rng.gen_bool(0.5))
            .then(|| &cost_cap[&d.id] + &Scalar::from_integer(rng.gen_range(0..=3)));
        nodes.push(SubsystemNode {
            id: d.id.clone(),
            parent: d.parent.clone(),
            coordination_vars: d.coordination.clone(),
            internal_vars: d.internal.clone(),
            cost: d.cost.clone(),
            constraints: rows,
            cost_bound,
        });
    }
    SystemTree::new(format!("gen-{seed}"), nodes).expect("generated tree is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, LpStatus};
    use crate::model::assemble_jod;

    #[test]
    fn spec_strings() {
        let s: GenSpec = "leaves=8".parse().unwrap();
        assert_eq!((s.levels, s.branching), (2, 8));
        let s: GenSpec = "levels=3,branching=2,internal=2".parse().unwrap();
        assert_eq!((s.levels, s.branching, s.max_internal), (3, 2, 2));
        assert_eq!(s.to_string().parse::<GenSpec>().unwrap(), s);
        assert!("depth=3".parse::<GenSpec>().is_err());
        assert!("levels=two".parse::<GenSpec>().is_err());
        assert!("rows=2".parse::<GenSpec>().is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GenSpec::default();
        assert_eq!(generate(&spec, 11), generate(&spec, 11));
        assert_ne!(generate(&spec, 11), generate(&spec, 12));
    }

    #[test]
    fn shapes_and_limits() {
        let spec: GenSpec = "levels=3,branching=2".parse().unwrap();
        let t = generate(&spec, 5);
        assert_eq!(t.nodes().len(), 7);
        assert_eq!(t.depth(), 3);
        for n in t.nodes() {
            assert!(n.constraints.len() <= spec.max_rows);
            assert!(n.coordination_vars.len() <= spec.max_coordination);
            assert!(n.internal_vars.len() <= spec.max_internal);
        }
        assert_eq!(
            generate(&"leaves=8".parse().unwrap(), 1)
                .children("root")
                .len(),
            8
        );
    }

    #[test]
    fn generated_trees_are_feasible() {
        for seed in 0..30 {
            let t = generate(&GenSpec::default(), seed);
            assert_eq!(
                solve_lp(&assemble_jod(&t)).unwrap().status(),
                LpStatus::Optimal,
                "seed {seed}"
            );
        }
    }
}
