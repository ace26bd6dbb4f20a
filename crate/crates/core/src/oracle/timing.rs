//! Wall-clock composition of the coordinated scheme against the joint solve.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Serialize, Serializer};

use crate::coordinator::{local_program, run_coordinated, stage1_project};
use crate::error::DispatchError;
use crate::lp::solve_lp;
use crate::model::{assemble_jod, SystemTree};

fn secs<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

fn secs_map<S: Serializer>(m: &BTreeMap<String, Duration>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(m.iter().map(|(k, v)| (k, v.as_secs_f64())))
}

/// Model size as variables times constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelScale {
    pub variables: usize,
    pub constraints: usize,
    pub product: usize,
}

impl ModelScale {
    fn new(variables: usize, constraints: usize) -> Self {
        ModelScale {
            variables,
            constraints,
            product: variables * constraints,
        }
    }
}

/// Median stage timings and their composition.
///
/// Nodes at the same depth run in parallel, so each stage costs its slowest
/// root-to-leaf chain: `projection_path` is the largest sum of projection
/// times along a chain (children first), `local_path` the same for local
/// solves. With two levels these are the maxima over the leaves, and
/// `t_coor = projection_path + upper + local_path`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimingReport {
    pub repetitions: usize,
    #[serde(serialize_with = "secs_map")]
    pub projection: BTreeMap<String, Duration>,
    #[serde(serialize_with = "secs")]
    pub upper: Duration,
    #[serde(serialize_with = "secs_map")]
    pub local: BTreeMap<String, Duration>,
    #[serde(serialize_with = "secs")]
    pub projection_path: Duration,
    #[serde(serialize_with = "secs")]
    pub local_path: Duration,
    #[serde(serialize_with = "secs")]
    pub t_coor: Duration,
    #[serde(serialize_with = "secs")]
    pub t_jod: Duration,
    pub scale_upper: ModelScale,
    pub scale_local: BTreeMap<String, ModelScale>,
    pub scale_jod: ModelScale,
}

impl TimingReport {
    /// `t_coor` recomputed from the reported components.
    pub fn composed(&self) -> Duration {
        self.projection_path + self.upper + self.local_path
    }
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[(xs.len() - 1) / 2]
}

/// Longest chain below `id` (excluding `id` itself).
fn critical_path(tree: &SystemTree, id: &str, times: &BTreeMap<String, Duration>) -> Duration {
    tree.children(id)
        .iter()
        .map(|c| times[c] + critical_path(tree, c, times))
        .max()
        .unwrap_or_default()
}

/// Runs the coordinated and joint solves `repetitions` times and reports
/// per-component medians.
pub fn benchmark(tree: &SystemTree, repetitions: usize) -> Result<TimingReport, DispatchError> {
    let reps = repetitions.max(1);
    let jod = assemble_jod(tree);
    let mut projection: BTreeMap<String, Vec<Duration>> = BTreeMap::new();
    let mut local: BTreeMap<String, Vec<Duration>> = BTreeMap::new();
    let mut upper = Vec::with_capacity(reps);
    let mut joint = Vec::with_capacity(reps);
    for _ in 0..reps {
        let r = run_coordinated(tree)?;
        for (k, v) in r.timings.projection {
            projection.entry(k).or_default().push(v);
        }
        for (k, v) in r.timings.local {
            local.entry(k).or_default().push(v);
        }
        upper.push(r.timings.upper);
        let start = Instant::now();
        solve_lp(&jod)?;
        joint.push(start.elapsed());
    }
    let projection: BTreeMap<String, Duration> = projection
        .into_iter()
        .map(|(k, v)| (k, median(v)))
        .collect();
    let local: BTreeMap<String, Duration> =
        local.into_iter().map(|(k, v)| (k, median(v))).collect();
    let upper = median(upper);
    let root = tree.root_id();
    let projection_path = critical_path(tree, root, &projection);
    let local_path = critical_path(tree, root, &local);

    let stage1 = stage1_project(tree)?;
    let root_lp = local_program(tree, root, &stage1.eps, None)?;
    let scale_local = stage1
        .ofrs
        .iter()
        .map(|(k, o)| {
            (
                k.clone(),
                ModelScale::new(o.polytope.dimension(), o.polytope.row_count()),
            )
        })
        .collect();

    Ok(TimingReport {
        repetitions: reps,
        projection,
        upper,
        local,
        projection_path,
        local_path,
        t_coor: projection_path + upper + local_path,
        t_jod: median(joint),
        scale_upper: ModelScale::new(root_lp.variables.len(), root_lp.rows.len()),
        scale_local,
        scale_jod: ModelScale::new(jod.variables.len(), jod.rows.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_and_validate;
    use crate::projection::tests::ILLUSTRATIVE;

    #[test]
    fn illustrative_report_shape() {
        let tree = parse_and_validate(ILLUSTRATIVE).unwrap();
        let r = benchmark(&tree, 3).unwrap();
        assert_eq!(r.projection.len(), 2);
        assert_eq!(r.local.len(), 2);
        assert_eq!(r.scale_local["sys1"].variables, 3);
        assert_eq!(r.t_coor, r.composed());
        let max_p = r.projection.values().max().copied().unwrap();
        let max_l = r.local.values().max().copied().unwrap();
        assert_eq!(r.t_coor, max_p + r.upper + max_l);
    }

    #[test]
    fn single_repetition_is_its_own_median() {
        assert_eq!(
            median(vec![Duration::from_millis(4)]),
            Duration::from_millis(4)
        );
        assert_eq!(
            median(
                vec![3, 1, 2, 9]
                    .into_iter()
                    .map(Duration::from_millis)
                    .collect()
            ),
            Duration::from_millis(2)
        );
    }

    #[test]
    fn single_node_has_no_stage_one() {
        let doc = serde_json::json!({ "name": "one", "nodes": [
            { "id": "r", "parent": null, "internal_vars": ["u"],
              "cost": { "terms": { "u": 1 } },
              "constraints": [ { "terms": { "u": 1 }, "relation": ">=", "rhs": 1 } ] }
        ]});
        let tree = parse_and_validate(&doc.to_string()).unwrap();
        let r = benchmark(&tree, 1).unwrap();
        assert!(r.projection.is_empty());
        assert_eq!(r.t_coor, r.upper);
        assert_eq!(r.scale_upper, r.scale_jod);
    }
}
