//! Linear programs over named variables and an exact simplex solver.

pub(crate) mod simplex;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use simplex::{DenseOutcome, RowRef};

/// Variable name → value.
pub type Assignment = BTreeMap<String, Scalar>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn holds(self, lhs: &Scalar, rhs: &Scalar) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// `Σ terms[v]·v + constant`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LinearExpr {
    pub terms: BTreeMap<String, Scalar>,
    #[serde(default)]
    pub constant: Scalar,
}

impl LinearExpr {
    pub fn new(terms: BTreeMap<String, Scalar>, constant: Scalar) -> Self {
        LinearExpr { terms, constant }
    }

    /// Evaluates the expression; `None` if a referenced variable is missing.
    pub fn eval(&self, point: &Assignment) -> Option<Scalar> {
        let mut total = self.constant.clone();
        for (name, coeff) in &self.terms {
            total += coeff * point.get(name)?;
        }
        Some(total)
    }

    pub fn add_term(&mut self, name: impl Into<String>, coeff: Scalar) {
        let entry = self.terms.entry(name.into()).or_insert_with(Scalar::zero);
        *entry += coeff;
    }
}

/// `Σ terms[v]·v (relation) rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub terms: BTreeMap<String, Scalar>,
    pub relation: Relation,
    pub rhs: Scalar,
}

impl Constraint {
    pub fn new(terms: BTreeMap<String, Scalar>, relation: Relation, rhs: Scalar) -> Self {
        Constraint {
            terms,
            relation,
            rhs,
        }
    }

    /// Convenience constructor from `(name, coeff)` pairs.
    pub fn from_terms<'a>(
        terms: impl IntoIterator<Item = (&'a str, Scalar)>,
        relation: Relation,
        rhs: Scalar,
    ) -> Self {
        let mut map = BTreeMap::new();
        for (name, coeff) in terms {
            let entry = map.entry(name.to_string()).or_insert_with(Scalar::zero);
            *entry += coeff;
        }
        Constraint::new(map, relation, rhs)
    }

    pub fn lhs(&self, point: &Assignment) -> Option<Scalar> {
        let mut total = Scalar::zero();
        for (name, coeff) in &self.terms {
            total += coeff * point.get(name)?;
        }
        Some(total)
    }

    /// `false` when violated or when a referenced variable is unassigned.
    pub fn is_satisfied_by(&self, point: &Assignment) -> bool {
        self.lhs(point)
            .is_some_and(|lhs| self.relation.holds(&lhs, &self.rhs))
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_terms(f, self.terms.iter().map(|(n, c)| (n.as_str(), c)))?;
        write!(f, " {} {}", self.relation.symbol(), self.rhs)
    }
}

/// Writes `2 x - y + 1/2 z` style sums; `0` when every coefficient is zero.
pub(crate) fn write_terms<'a>(
    f: &mut fmt::Formatter<'_>,
    terms: impl Iterator<Item = (&'a str, &'a Scalar)>,
) -> fmt::Result {
    let mut first = true;
    for (name, coeff) in terms {
        if coeff.is_zero() {
            continue;
        }
        let magnitude = coeff.abs();
        let sign = if coeff.is_negative() { "-" } else { "+" };
        match (first, coeff.is_negative()) {
            (true, true) => write!(f, "-")?,
            (true, false) => {}
            (false, _) => write!(f, " {sign} ")?,
        }
        if magnitude == Scalar::one() {
            write!(f, "{name}")?;
        } else {
            write!(f, "{magnitude} {name}")?;
        }
        first = false;
    }
    if first {
        write!(f, "0")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub variables: Vec<String>,
    pub objective: LinearExpr,
    pub sense: Sense,
    pub rows: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(variables: Vec<String>, objective: LinearExpr, sense: Sense) -> Self {
        LinearProgram {
            variables,
            objective,
            sense,
            rows: Vec::new(),
        }
    }

    pub fn with_rows(mut self, rows: impl IntoIterator<Item = Constraint>) -> Self {
        self.rows.extend(rows);
        self
    }

    /// Objective value at `point` (including the constant).
    pub fn objective_at(&self, point: &Assignment) -> Option<Scalar> {
        self.objective.eval(point)
    }

    pub fn is_feasible_point(&self, point: &Assignment) -> bool {
        self.rows.iter().all(|r| r.is_satisfied_by(point))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status")]
pub enum LpOutcome {
    Optimal {
        value: Scalar,
        assignment: Assignment,
    },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn status(&self) -> LpStatus {
        match self {
            LpOutcome::Optimal { .. } => LpStatus::Optimal,
            LpOutcome::Infeasible => LpStatus::Infeasible,
            LpOutcome::Unbounded => LpStatus::Unbounded,
        }
    }

    pub fn value(&self) -> Option<&Scalar> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            LpOutcome::Optimal { assignment, .. } => Some(assignment),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible(Assignment),
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("malformed program: {0}")]
    MalformedProgram(String),
}

/// Dense copy of named rows, columns ordered as `variables`.
struct DenseRows {
    coeffs: Vec<Vec<Scalar>>,
    relations: Vec<Relation>,
    rhs: Vec<Scalar>,
}

impl DenseRows {
    fn build(rows: &[Constraint], variables: &[String]) -> Result<Self, LpError> {
        let index = variable_index(variables)?;
        let mut coeffs = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let mut dense = vec![Scalar::zero(); variables.len()];
            for (name, c) in &row.terms {
                let j = *index.get(name.as_str()).ok_or_else(|| {
                    LpError::MalformedProgram(format!(
                        "row {i} references undeclared variable {name:?}"
                    ))
                })?;
                dense[j] += c;
            }
            coeffs.push(dense);
        }
        Ok(DenseRows {
            coeffs,
            relations: rows.iter().map(|r| r.relation).collect(),
            rhs: rows.iter().map(|r| r.rhs.clone()).collect(),
        })
    }

    fn refs(&self) -> Vec<RowRef<'_>> {
        self.coeffs
            .iter()
            .zip(&self.relations)
            .zip(&self.rhs)
            .map(|((coeffs, &relation), rhs)| RowRef {
                coeffs,
                relation,
                rhs,
            })
            .collect()
    }
}

fn variable_index(variables: &[String]) -> Result<HashMap<&str, usize>, LpError> {
    let mut index = HashMap::with_capacity(variables.len());
    for (j, name) in variables.iter().enumerate() {
        if index.insert(name.as_str(), j).is_some() {
            return Err(LpError::MalformedProgram(format!(
                "variable {name:?} declared twice"
            )));
        }
    }
    Ok(index)
}

fn to_assignment(variables: &[String], point: Vec<Scalar>) -> Assignment {
    variables.iter().cloned().zip(point).collect()
}

/// Solves `lp` exactly. Any optimal vertex may be returned when optima tie.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    let dense = DenseRows::build(&lp.rows, &lp.variables)?;
    let index = variable_index(&lp.variables)?;
    let mut objective = vec![Scalar::zero(); lp.variables.len()];
    for (name, c) in &lp.objective.terms {
        let j = *index.get(name.as_str()).ok_or_else(|| {
            LpError::MalformedProgram(format!("objective references undeclared variable {name:?}"))
        })?;
        objective[j] += c;
    }
    let rows = dense.refs();
    let outcome = match lp.sense {
        Sense::Minimize => simplex::minimize(lp.variables.len(), &rows, &objective),
        Sense::Maximize => simplex::maximize(lp.variables.len(), &rows, &objective),
    };
    Ok(match outcome {
        DenseOutcome::Optimal { value, point } => LpOutcome::Optimal {
            value: value + &lp.objective.constant,
            assignment: to_assignment(&lp.variables, point),
        },
        DenseOutcome::Infeasible => LpOutcome::Infeasible,
        DenseOutcome::Unbounded => LpOutcome::Unbounded,
    })
}

/// Phase one only: a witness point, or `Infeasible`.
pub fn check_feasible(rows: &[Constraint], variables: &[String]) -> Result<Feasibility, LpError> {
    let dense = DenseRows::build(rows, variables)?;
    Ok(
        match simplex::feasible_point(variables.len(), &dense.refs()) {
            Some(point) => Feasibility::Feasible(to_assignment(variables, point)),
            None => Feasibility::Infeasible,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: i64) -> Scalar {
        Scalar::from_integer(n)
    }

    fn names(vs: &[&str]) -> Vec<String> {
        vs.iter().map(|v| v.to_string()).collect()
    }

    #[test]
    fn bound_attaining_minimum() {
        let lp = LinearProgram::new(
            names(&["x"]),
            LinearExpr::new([("x".to_string(), s(1))].into(), Scalar::zero()),
            Sense::Minimize,
        )
        .with_rows([
            Constraint::from_terms([("x", s(1))], Relation::Ge, s(0)),
            Constraint::from_terms([("x", s(1))], Relation::Le, s(1)),
        ]);
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.value(), Some(&s(0)));
        assert_eq!(out.assignment().unwrap()["x"], s(0));
    }

    #[test]
    fn undeclared_variable_is_malformed() {
        let lp = LinearProgram::new(names(&["x"]), LinearExpr::default(), Sense::Minimize)
            .with_rows([Constraint::from_terms([("z", s(1))], Relation::Le, s(1))]);
        assert!(matches!(solve_lp(&lp), Err(LpError::MalformedProgram(_))));
        let rows = [Constraint::from_terms([("z", s(1))], Relation::Le, s(1))];
        assert!(check_feasible(&rows, &names(&["x"])).is_err());
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let rows = [
            Constraint::from_terms([("x", s(1))], Relation::Le, s(1)),
            Constraint::from_terms([("x", s(1))], Relation::Ge, s(2)),
        ];
        assert_eq!(
            check_feasible(&rows, &names(&["x"])).unwrap(),
            Feasibility::Infeasible
        );
    }

    #[test]
    fn empty_row_set_is_feasible() {
        assert!(check_feasible(&[], &names(&["x"])).unwrap().is_feasible());
    }

    #[test]
    fn constant_objective_without_rows_is_optimal() {
        let lp = LinearProgram::new(
            names(&["x"]),
            LinearExpr::new(BTreeMap::new(), s(3)),
            Sense::Minimize,
        );
        assert_eq!(solve_lp(&lp).unwrap().value(), Some(&s(3)));
        let lp = LinearProgram::new(
            names(&["x"]),
            LinearExpr::new([("x".to_string(), s(1))].into(), s(0)),
            Sense::Maximize,
        );
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn display_is_readable() {
        let c = Constraint::from_terms(
            [("x", s(2)), ("pi", s(-1)), ("y", Scalar::new(1, 2))],
            Relation::Le,
            s(1),
        );
        assert_eq!(c.to_string(), "-pi + 2 x + 1/2 y <= 1");
    }
}
