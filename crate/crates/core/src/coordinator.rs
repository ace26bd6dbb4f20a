//! Three-stage non-iterative coordination.
//!
//! 1. Every non-root node builds its OFR from its own model and its
//!    children's EPs, projects it, and sends the EP to its parent
//!    (leaves first).
//! 2. The root optimises its own cost plus its children's `pi` subject to
//!    its rows and the children's EPs.
//! 3. Every node receives `(x_hat, pi_hat)`, fixes `x_hat`, caps its
//!    aggregated cost at `pi_hat`, solves locally and forwards commands to
//!    its own children (root first).
//!
//! Exactly one message crosses each edge in each direction.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::DispatchError;
use crate::lp::{solve_lp, Assignment, Constraint, LinearProgram, LpOutcome, Relation, Sense};
use crate::model::{cost_var_of, SystemTree, COST_VAR};
use crate::projection::{build_ofr, compute_ep, ofr_variables, EpModel, OfrPolytope};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MessageKind {
    EpUp,
    CommandDown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Message {
    pub from: String,
    pub to: String,
    pub kind: MessageKind,
    /// Number of scalars carried.
    pub payload_size: usize,
    /// Names of the variables the payload mentions, as seen by the sender.
    pub payload_variables: Vec<String>,
}

/// What a parent tells a child: its coordination values and its cost cap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Command {
    pub coordination: Assignment,
    pub pi: Scalar,
}

#[derive(Debug, Clone)]
pub struct Stage1Output {
    pub ofrs: BTreeMap<String, OfrPolytope>,
    pub eps: BTreeMap<String, EpModel>,
    pub timings: BTreeMap<String, Duration>,
    pub messages: Vec<Message>,
}

/// A node's local optimum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalSolution {
    pub node: String,
    pub own: Assignment,
    pub own_cost: Scalar,
    /// `own_cost` plus the children's commanded `pi`.
    pub aggregated_cost: Scalar,
    pub child_commands: BTreeMap<String, Command>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeDispatch {
    pub coordination: Assignment,
    /// `None` for the root.
    pub pi_hat: Option<Scalar>,
    pub internal: Assignment,
    pub own_cost: Scalar,
    pub aggregated_cost: Scalar,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageTimings {
    pub projection: BTreeMap<String, Duration>,
    pub upper: Duration,
    pub local: BTreeMap<String, Duration>,
    pub total: Duration,
}

#[derive(Debug, Clone)]
pub struct DispatchResult {
    pub nodes: BTreeMap<String, NodeDispatch>,
    pub objective: Scalar,
    pub messages: Vec<Message>,
    pub eps: BTreeMap<String, EpModel>,
    pub timings: StageTimings,
}

impl DispatchResult {
    /// Every node's own variables under flat `node.var` names.
    pub fn flat_assignment(&self) -> Assignment {
        let mut out = Assignment::new();
        for (id, n) in &self.nodes {
            for (v, x) in n.coordination.iter().chain(&n.internal) {
                out.insert(format!("{id}.{v}"), x.clone());
            }
        }
        out
    }
}

type Projected = Vec<(String, OfrPolytope, EpModel, Duration)>;

fn project_subtree(tree: &SystemTree, id: &str) -> Result<Projected, DispatchError> {
    let results: Vec<Result<Projected, DispatchError>> = tree
        .children(id)
        .par_iter()
        .map(|c| project_subtree(tree, c))
        .collect();
    let mut out = Vec::new();
    // First failure in child order, so errors do not depend on scheduling.
    for r in results {
        out.extend(r?);
    }
    if id == tree.root_id() {
        return Ok(out);
    }
    let child_eps: BTreeMap<String, EpModel> = tree
        .children(id)
        .iter()
        .map(|c| {
            let ep = out
                .iter()
                .find(|(n, ..)| n == c)
                .expect("child projected")
                .2
                .clone();
            (c.clone(), ep)
        })
        .collect();
    let start = Instant::now();
    let ofr = build_ofr(tree, id, &child_eps)?;
    let ep = compute_ep(&ofr)?;
    out.push((id.to_string(), ofr, ep, start.elapsed()));
    Ok(out)
}

fn ep_message(tree: &SystemTree, ep: &EpModel) -> Message {
    let p = &ep.polytope;
    Message {
        from: ep.owner.clone(),
        to: tree
            .node(&ep.owner)
            .and_then(|n| n.parent.clone())
            .unwrap_or_default(),
        kind: MessageKind::EpUp,
        payload_size: p.row_count() * (p.dimension() + 1),
        payload_variables: p.variables().to_vec(),
    }
}

fn command_message(from: &str, to: &str, cmd: &Command) -> Message {
    let mut payload_variables: Vec<String> = cmd.coordination.keys().cloned().collect();
    payload_variables.push(COST_VAR.to_string());
    Message {
        from: from.into(),
        to: to.into(),
        kind: MessageKind::CommandDown,
        payload_size: payload_variables.len(),
        payload_variables,
    }
}

/// Stage 1: EPs of every non-root node, computed bottom-up with siblings in
/// parallel.
pub fn stage1_project(tree: &SystemTree) -> Result<Stage1Output, DispatchError> {
    let projected = project_subtree(tree, tree.root_id())?;
    let mut by_id: BTreeMap<String, (OfrPolytope, EpModel, Duration)> = projected
        .into_iter()
        .map(|(id, o, e, t)| (id, (o, e, t)))
        .collect();
    let mut out = Stage1Output {
        ofrs: BTreeMap::new(),
        eps: BTreeMap::new(),
        timings: BTreeMap::new(),
        messages: Vec::new(),
    };
    for id in tree.post_order() {
        if let Some((ofr, ep, t)) = by_id.remove(id) {
            out.messages.push(ep_message(tree, &ep));
            out.ofrs.insert(id.into(), ofr);
            out.eps.insert(id.into(), ep);
            out.timings.insert(id.into(), t);
        }
    }
    Ok(out)
}

/// The LP a node solves against its children's EPs. With a command, its
/// coordination variables are fixed and its aggregated cost is capped.
pub fn local_program(
    tree: &SystemTree,
    id: &str,
    child_eps: &BTreeMap<String, EpModel>,
    command: Option<&Command>,
) -> Result<LinearProgram, DispatchError> {
    let node = tree.node(id).expect("known node");
    let variables: Vec<String> = ofr_variables(tree, id)
        .into_iter()
        .filter(|v| v != COST_VAR)
        .collect();
    let objective = tree.aggregated_cost(id);
    let mut rows = node.constraints.clone();
    for child in tree.children(id) {
        let ep = child_eps
            .get(child)
            .ok_or_else(|| DispatchError::InternalInconsistency {
                node: id.into(),
                detail: format!("missing EP of child {child:?}"),
            })?;
        rows.extend(ep.rows_for_parent());
    }
    if let Some(cmd) = command {
        for v in &node.coordination_vars {
            let value =
                cmd.coordination
                    .get(v)
                    .ok_or_else(|| DispatchError::InternalInconsistency {
                        node: id.into(),
                        detail: format!("command lacks {v:?}"),
                    })?;
            rows.push(Constraint::from_terms(
                [(v.as_str(), Scalar::one())],
                Relation::Eq,
                value.clone(),
            ));
        }
        rows.push(Constraint::new(
            objective.terms.clone(),
            Relation::Le,
            &cmd.pi - &objective.constant,
        ));
    }
    Ok(LinearProgram::new(variables, objective, Sense::Minimize).with_rows(rows))
}

/// Solves a node's local program and splits the optimum into its own values
/// and its children's commands.
pub fn solve_local(
    tree: &SystemTree,
    id: &str,
    child_eps: &BTreeMap<String, EpModel>,
    command: Option<&Command>,
) -> Result<LocalSolution, DispatchError> {
    let lp = local_program(tree, id, child_eps, command)?;
    let failure = |what: &str| {
        if command.is_none() {
            match what {
                "infeasible" => DispatchError::UpperInfeasible { node: id.into() },
                _ => DispatchError::UpperUnbounded { node: id.into() },
            }
        } else {
            DispatchError::InternalInconsistency {
                node: id.into(),
                detail: format!("commanded local problem is {what}"),
            }
        }
    };
    let (value, assignment) = match solve_lp(&lp)? {
        LpOutcome::Optimal { value, assignment } => (value, assignment),
        LpOutcome::Infeasible => return Err(failure("infeasible")),
        LpOutcome::Unbounded => return Err(failure("unbounded")),
    };
    let node = tree.node(id).expect("known node");
    let own: Assignment = node
        .own_vars()
        .map(|v| (v.clone(), assignment[v].clone()))
        .collect();
    let own_cost = node.cost.eval(&own).expect("cost over own variables");
    let mut child_commands = BTreeMap::new();
    for child in tree.children(id) {
        let c = tree.node(child).expect("known child");
        let coordination = c
            .coordination_vars
            .iter()
            .map(|v| (v.clone(), assignment[&format!("{child}.{v}")].clone()))
            .collect();
        let pi = assignment[&cost_var_of(child)].clone();
        child_commands.insert(child.clone(), Command { coordination, pi });
    }
    Ok(LocalSolution {
        node: id.into(),
        own,
        own_cost,
        aggregated_cost: value,
        child_commands,
    })
}

/// Stage 2: the root's coordination problem.
pub fn stage2_solve_upper(
    tree: &SystemTree,
    eps: &BTreeMap<String, EpModel>,
) -> Result<LocalSolution, DispatchError> {
    solve_local(tree, tree.root_id(), eps, None)
}

fn dispatch_subtree(
    tree: &SystemTree,
    id: &str,
    eps: &BTreeMap<String, EpModel>,
    command: &Command,
) -> Result<Vec<(LocalSolution, Command, Duration)>, DispatchError> {
    let start = Instant::now();
    let sol = solve_local(tree, id, eps, Some(command))?;
    let elapsed = start.elapsed();
    let results: Vec<_> = sol
        .child_commands
        .par_iter()
        .map(|(c, cmd)| dispatch_subtree(tree, c, eps, cmd))
        .collect();
    let mut out = vec![(sol, command.clone(), elapsed)];
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Per-node dispatch, per-node local solve times and the forwarded commands.
pub type Disaggregated = (
    BTreeMap<String, NodeDispatch>,
    BTreeMap<String, Duration>,
    Vec<Message>,
);

/// Stage 3: disaggregation of the root's commands down the tree.
pub fn stage3_disaggregate(
    tree: &SystemTree,
    eps: &BTreeMap<String, EpModel>,
    upper: &LocalSolution,
) -> Result<Disaggregated, DispatchError> {
    let results: Vec<_> = upper
        .child_commands
        .par_iter()
        .map(|(c, cmd)| dispatch_subtree(tree, c, eps, cmd))
        .collect();
    let mut solved: BTreeMap<String, (LocalSolution, Command, Duration)> = BTreeMap::new();
    for r in results {
        for (sol, cmd, t) in r? {
            solved.insert(sol.node.clone(), (sol, cmd, t));
        }
    }
    let mut nodes = BTreeMap::new();
    let mut timings = BTreeMap::new();
    let mut messages = Vec::new();
    for id in tree.pre_order().into_iter().skip(1) {
        let (sol, cmd, t) = solved.remove(id).expect("every non-root node dispatched");
        if sol.aggregated_cost != cmd.pi {
            return Err(DispatchError::InternalInconsistency {
                node: id.into(),
                detail: format!(
                    "realised cost {} differs from command {}",
                    sol.aggregated_cost, cmd.pi
                ),
            });
        }
        for (c, child_cmd) in &sol.child_commands {
            messages.push(command_message(id, c, child_cmd));
        }
        timings.insert(id.to_string(), t);
        nodes.insert(
            id.to_string(),
            dispatch_entry(tree, &sol, Some(cmd.pi.clone())),
        );
    }
    Ok((nodes, timings, messages))
}

fn dispatch_entry(tree: &SystemTree, sol: &LocalSolution, pi_hat: Option<Scalar>) -> NodeDispatch {
    let node = tree.node(&sol.node).expect("known node");
    let split = |names: &[String]| -> Assignment {
        names
            .iter()
            .map(|v| (v.clone(), sol.own[v].clone()))
            .collect()
    };
    NodeDispatch {
        coordination: split(&node.coordination_vars),
        pi_hat,
        internal: split(&node.internal_vars),
        own_cost: sol.own_cost.clone(),
        aggregated_cost: sol.aggregated_cost.clone(),
    }
}

/// Runs all three stages.
pub fn run_coordinated(tree: &SystemTree) -> Result<DispatchResult, DispatchError> {
    let start = Instant::now();
    let stage1 = stage1_project(tree)?;
    let t_upper = Instant::now();
    let upper = stage2_solve_upper(tree, &stage1.eps)?;
    let upper_time = t_upper.elapsed();
    let mut messages = stage1.messages;
    for (c, cmd) in &upper.child_commands {
        messages.push(command_message(tree.root_id(), c, cmd));
    }
    let (mut nodes, local, down) = stage3_disaggregate(tree, &stage1.eps, &upper)?;
    // Root commands go out before any mid-level forwarding.
    messages.extend(down);
    nodes.insert(
        tree.root_id().to_string(),
        dispatch_entry(tree, &upper, None),
    );

    let total: Scalar = nodes.values().map(|n| &n.own_cost).sum();
    if total != upper.aggregated_cost {
        return Err(DispatchError::InternalInconsistency {
            node: tree.root_id().into(),
            detail: format!(
                "realised total {total} differs from objective {}",
                upper.aggregated_cost
            ),
        });
    }
    Ok(DispatchResult {
        nodes,
        objective: upper.aggregated_cost,
        messages,
        eps: stage1.eps,
        timings: StageTimings {
            projection: stage1.timings,
            upper: upper_time,
            local,
            total: start.elapsed(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_jod, parse_and_validate};
    use crate::projection::tests::ILLUSTRATIVE;

    fn s(n: i64) -> Scalar {
        Scalar::from_integer(n)
    }

    #[test]
    fn illustrative_dispatch() {
        let tree = parse_and_validate(ILLUSTRATIVE).unwrap();
        let r = run_coordinated(&tree).unwrap();
        assert_eq!(r.objective, Scalar::new(17, 2));
        let sys1 = &r.nodes["sys1"];
        assert_eq!(sys1.coordination["x1"], Scalar::new(5, 2));
        assert_eq!(sys1.internal["y1"], Scalar::new(3, 2));
        assert_eq!(sys1.pi_hat, Some(s(4)));
        let sys2 = &r.nodes["sys2"];
        assert_eq!(sys2.coordination["x2"], s(2));
        assert_eq!(sys2.internal["y2"], s(1));
        assert_eq!(sys2.pi_hat, Some(Scalar::new(9, 2)));
        assert!(assemble_jod(&tree).is_feasible_point(&r.flat_assignment()));
    }

    #[test]
    fn one_message_per_edge_and_direction() {
        let tree = parse_and_validate(ILLUSTRATIVE).unwrap();
        let r = run_coordinated(&tree).unwrap();
        assert_eq!(r.messages.len(), 4);
        let kinds: Vec<_> = r.messages.iter().map(|m| m.kind).collect();
        assert_eq!(
            kinds,
            [
                MessageKind::EpUp,
                MessageKind::EpUp,
                MessageKind::CommandDown,
                MessageKind::CommandDown
            ]
        );
        for m in &r.messages {
            assert!(!m.payload_variables.iter().any(|v| v.starts_with('y')));
        }
        assert_eq!(r.messages[0].payload_variables, vec!["x1", "pi"]);
        assert_eq!(r.messages[0].payload_size, 5 * 3);
    }

    #[test]
    fn infeasible_coupling_is_reported_at_root() {
        let mut nodes = parse_and_validate(ILLUSTRATIVE).unwrap().nodes().to_vec();
        nodes[0].constraints[0].rhs = s(100);
        let tree = SystemTree::new("far", nodes).unwrap();
        assert_eq!(
            run_coordinated(&tree).unwrap_err(),
            DispatchError::UpperInfeasible {
                node: "upper".into()
            }
        );
    }

    #[test]
    fn single_node_tree_is_solved_directly() {
        let doc = serde_json::json!({ "name": "one", "nodes": [
            { "id": "r", "parent": null, "internal_vars": ["u"],
              "cost": { "terms": { "u": 2 } },
              "constraints": [ { "terms": { "u": 1 }, "relation": ">=", "rhs": 3 } ] }
        ]});
        let tree = parse_and_validate(&doc.to_string()).unwrap();
        let r = run_coordinated(&tree).unwrap();
        assert_eq!(r.objective, s(6));
        assert!(r.messages.is_empty());
        assert_eq!(r.nodes["r"].internal["u"], s(3));
    }
}
