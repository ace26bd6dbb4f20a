//! H-representation polyhedra `{z : A z ≤ b}` over named variables.
//!
//! Rows are stored densely against the polytope's variable order. Equalities
//! enter as a pair of opposite `≤` rows; [`Polytope::project_onto`] recognises
//! such pairs and eliminates through them by substitution before falling back
//! to Fourier–Motzkin.

mod fme;
mod redundancy;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::simplex::{self, RowRef};
use crate::lp::{Assignment, Constraint, Relation};
use crate::scalar::{integer_scale, Scalar};

pub use redundancy::Interval;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolytopeError {
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("variable {0:?} declared twice")]
    DuplicateVariable(String),
    #[error("point has no coordinate for {0:?}")]
    MissingCoordinate(String),
    #[error("polytope is empty")]
    EmptyPolytope,
}

/// One row `coeffs · z ≤ rhs`, dense over the owning polytope's variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HalfSpace {
    pub coeffs: Vec<Scalar>,
    pub rhs: Scalar,
}

impl HalfSpace {
    pub fn new(coeffs: Vec<Scalar>, rhs: Scalar) -> Self {
        HalfSpace { coeffs, rhs }
    }

    fn is_trivial(&self) -> bool {
        self.coeffs.iter().all(Scalar::is_zero)
    }

    fn lhs(&self, point: &[Scalar]) -> Scalar {
        self.coeffs
            .iter()
            .zip(point)
            .filter(|(a, _)| !a.is_zero())
            .map(|(a, x)| a * x)
            .sum()
    }

    /// Rescaled by a positive factor so that coefficients and rhs are coprime
    /// integers. Trivial rows are returned unchanged.
    fn integer_normalized(&self) -> HalfSpace {
        let mut all: Vec<&Scalar> = self.coeffs.iter().collect();
        all.push(&self.rhs);
        match integer_scale(&all) {
            Some(scale) if !self.is_trivial() => self.scaled(&scale),
            _ => self.clone(),
        }
    }

    /// Rescaled by a positive factor so that the coefficients alone are
    /// coprime integers; parallel rows then share identical coefficients.
    fn direction_normalized(&self) -> HalfSpace {
        let coeffs: Vec<&Scalar> = self.coeffs.iter().collect();
        match integer_scale(&coeffs) {
            Some(scale) => self.scaled(&scale),
            None => self.clone(),
        }
    }

    fn scaled(&self, factor: &Scalar) -> HalfSpace {
        HalfSpace {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            rhs: &self.rhs * factor,
        }
    }

    fn negated(&self) -> HalfSpace {
        HalfSpace {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
            rhs: -&self.rhs,
        }
    }

    pub(crate) fn as_row_ref(&self) -> RowRef<'_> {
        RowRef {
            coeffs: &self.coeffs,
            relation: Relation::Le,
            rhs: &self.rhs,
        }
    }
}

/// A polyhedron in H-representation. Despite the name nothing requires it to
/// be bounded; [`Polytope::bounding_box`] reports unbounded directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polytope {
    variables: Vec<String>,
    rows: Vec<HalfSpace>,
    empty: bool,
}

impl Polytope {
    /// The whole space over `variables` (no rows).
    pub fn universe(variables: Vec<String>) -> Result<Self, PolytopeError> {
        let mut seen = HashMap::new();
        for v in &variables {
            if seen.insert(v.as_str(), ()).is_some() {
                return Err(PolytopeError::DuplicateVariable(v.clone()));
            }
        }
        Ok(Polytope {
            variables,
            rows: Vec::new(),
            empty: false,
        })
    }

    /// The empty set over `variables`.
    pub fn empty(variables: Vec<String>) -> Self {
        Polytope {
            variables,
            rows: Vec::new(),
            empty: true,
        }
    }

    /// Builds a polytope from named constraints; `=` becomes two rows and `≥`
    /// is negated into `≤`.
    pub fn from_constraints(
        variables: Vec<String>,
        constraints: &[Constraint],
    ) -> Result<Self, PolytopeError> {
        let mut p = Polytope::universe(variables)?;
        for c in constraints {
            p.add_constraint(c)?;
        }
        Ok(p)
    }

    pub fn add_constraint(&mut self, c: &Constraint) -> Result<(), PolytopeError> {
        let row = self.dense_row(&c.terms, c.rhs.clone())?;
        match c.relation {
            Relation::Le => self.push_row(row),
            Relation::Ge => self.push_row(row.negated()),
            Relation::Eq => {
                let neg = row.negated();
                self.push_row(row);
                self.push_row(neg);
            }
        }
        Ok(())
    }

    fn dense_row(
        &self,
        terms: &BTreeMap<String, Scalar>,
        rhs: Scalar,
    ) -> Result<HalfSpace, PolytopeError> {
        let mut coeffs = vec![Scalar::zero(); self.variables.len()];
        for (name, c) in terms {
            let j = self
                .index_of(name)
                .ok_or_else(|| PolytopeError::UnknownVariable(name.clone()))?;
            coeffs[j] += c;
        }
        Ok(HalfSpace::new(coeffs, rhs))
    }

    /// Appends a row. An all-zero row is dropped when it holds trivially and
    /// marks the polytope empty when it cannot hold.
    pub fn push_row(&mut self, row: HalfSpace) {
        assert_eq!(row.coeffs.len(), self.variables.len(), "row width mismatch");
        if self.empty {
            return;
        }
        if row.is_trivial() {
            if row.rhs.is_negative() {
                self.mark_empty();
            }
            return;
        }
        self.rows.push(row);
    }

    fn mark_empty(&mut self) {
        self.empty = true;
        self.rows.clear();
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn rows(&self) -> &[HalfSpace] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn dimension(&self) -> usize {
        self.variables.len()
    }

    /// `true` only when the polytope carries the explicit empty flag; a
    /// polytope whose rows happen to be inconsistent reports `false` until
    /// [`Polytope::remove_redundant`] detects it.
    pub fn is_empty_flagged(&self) -> bool {
        self.empty
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    /// Rows as named `≤` constraints (zero coefficients omitted).
    pub fn to_constraints(&self) -> Vec<Constraint> {
        self.rows
            .iter()
            .map(|row| {
                let terms = self
                    .variables
                    .iter()
                    .zip(&row.coeffs)
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(v, c)| (v.clone(), c.clone()))
                    .collect();
                Constraint::new(terms, Relation::Le, row.rhs.clone())
            })
            .collect()
    }

    /// Renames every variable through `f`.
    pub fn renamed(&self, mut f: impl FnMut(&str) -> String) -> Polytope {
        Polytope {
            variables: self.variables.iter().map(|v| f(v)).collect(),
            rows: self.rows.clone(),
            empty: self.empty,
        }
    }

    fn dense_point(&self, point: &Assignment) -> Result<Vec<Scalar>, PolytopeError> {
        self.variables
            .iter()
            .map(|v| {
                point
                    .get(v)
                    .cloned()
                    .ok_or_else(|| PolytopeError::MissingCoordinate(v.clone()))
            })
            .collect()
    }

    /// Exact membership test.
    pub fn contains(&self, point: &Assignment) -> Result<bool, PolytopeError> {
        let dense = self.dense_point(point)?;
        Ok(!self.empty && self.rows.iter().all(|r| r.lhs(&dense) <= r.rhs))
    }

    /// Substitutes fixed values for some variables, returning the slice over
    /// the remaining ones. Names in `fixed` that are not variables are ignored.
    pub fn fix(&self, fixed: &Assignment) -> Polytope {
        let keep: Vec<usize> = (0..self.variables.len())
            .filter(|&j| !fixed.contains_key(&self.variables[j]))
            .collect();
        let mut out = Polytope {
            variables: keep.iter().map(|&j| self.variables[j].clone()).collect(),
            rows: Vec::new(),
            empty: self.empty,
        };
        if self.empty {
            return out;
        }
        for row in &self.rows {
            let mut rhs = row.rhs.clone();
            for (j, c) in row.coeffs.iter().enumerate() {
                if let Some(v) = fixed.get(&self.variables[j]) {
                    if !c.is_zero() {
                        rhs -= &(c * v);
                    }
                }
            }
            let coeffs = keep.iter().map(|&j| row.coeffs[j].clone()).collect();
            out.push_row(HalfSpace::new(coeffs, rhs));
        }
        out
    }

    /// Some point of the polytope, or `None` if it is empty.
    pub fn feasible_point(&self) -> Option<Assignment> {
        if self.empty {
            return None;
        }
        let refs: Vec<RowRef<'_>> = self.rows.iter().map(HalfSpace::as_row_ref).collect();
        simplex::feasible_point(self.variables.len(), &refs)
            .map(|p| self.variables.iter().cloned().zip(p).collect())
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible_point().is_some()
    }

    /// Same set, rows rescaled to coprime integers (coefficients and rhs
    /// together, positive factor), trivial rows dropped, sorted
    /// lexicographically and deduplicated.
    pub fn canonicalize(&self) -> Polytope {
        let mut out = Polytope {
            variables: self.variables.clone(),
            rows: Vec::with_capacity(self.rows.len()),
            empty: self.empty,
        };
        for row in &self.rows {
            out.push_row(row.integer_normalized());
        }
        out.rows.sort_by(compare_rows);
        out.rows.dedup();
        out
    }

    /// Reorders columns to `order`, which must be a permutation of the
    /// variables.
    pub fn reordered(&self, order: &[String]) -> Result<Polytope, PolytopeError> {
        if order.len() != self.variables.len() {
            return Err(PolytopeError::UnknownVariable(format!(
                "expected {} variables, got {}",
                self.variables.len(),
                order.len()
            )));
        }
        let perm: Vec<usize> = order
            .iter()
            .map(|v| {
                self.index_of(v)
                    .ok_or_else(|| PolytopeError::UnknownVariable(v.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Polytope {
            variables: order.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    HalfSpace::new(
                        perm.iter().map(|&j| r.coeffs[j].clone()).collect(),
                        r.rhs.clone(),
                    )
                })
                .collect(),
            empty: self.empty,
        })
    }
}

fn compare_rows(a: &HalfSpace, b: &HalfSpace) -> Ordering {
    a.coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| x.cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.rhs.cmp(&b.rhs))
}

impl fmt::Display for Polytope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty {
            return write!(f, "{{ empty over ({}) }}", self.variables.join(", "));
        }
        writeln!(f, "{{")?;
        for row in &self.rows {
            write!(f, "  ")?;
            crate::lp::write_terms(
                f,
                self.variables.iter().map(String::as_str).zip(&row.coeffs),
            )?;
            writeln!(f, " <= {}", row.rhs)?;
        }
        write!(f, "}}")
    }
}

/// Named-row wire form of a polytope: the only thing a subsystem exports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolytopeDoc {
    pub variables: Vec<String>,
    pub empty: bool,
    pub rows: Vec<Constraint>,
}

impl From<&Polytope> for PolytopeDoc {
    fn from(p: &Polytope) -> Self {
        PolytopeDoc {
            variables: p.variables.clone(),
            empty: p.empty,
            rows: p.to_constraints(),
        }
    }
}

impl TryFrom<&PolytopeDoc> for Polytope {
    type Error = PolytopeError;

    fn try_from(doc: &PolytopeDoc) -> Result<Self, Self::Error> {
        if doc.empty {
            return Ok(Polytope::empty(doc.variables.clone()));
        }
        Polytope::from_constraints(doc.variables.clone(), &doc.rows)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn s(n: i64) -> Scalar {
        Scalar::from_integer(n)
    }

    pub(crate) fn vars(vs: &[&str]) -> Vec<String> {
        vs.iter().map(|v| v.to_string()).collect()
    }

    /// Builds a polytope from `(coeffs, rhs)` rows in variable order.
    pub(crate) fn poly(vs: &[&str], rows: &[(&[i64], i64)]) -> Polytope {
        let mut p = Polytope::universe(vars(vs)).unwrap();
        for (coeffs, rhs) in rows {
            p.push_row(HalfSpace::new(
                coeffs.iter().map(|&c| s(c)).collect(),
                s(*rhs),
            ));
        }
        p
    }

    pub(crate) fn point(pairs: &[(&str, Scalar)]) -> Assignment {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    /// Φ1 as printed for the illustrative example.
    pub(crate) fn phi1() -> Polytope {
        poly(
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

    #[test]
    fn canonicalize_scales_to_coprime_integers() {
        let p = poly(&["x"], &[(&[2], 4)]);
        assert_eq!(p.canonicalize(), poly(&["x"], &[(&[1], 2)]));

        let mut q = Polytope::universe(vars(&["x2", "y2", "pi"])).unwrap();
        let third_halves = Scalar::new(3, 2);
        q.add_constraint(&Constraint::from_terms(
            [
                ("x2", third_halves.clone()),
                ("y2", third_halves),
                ("pi", s(-1)),
            ],
            Relation::Le,
            s(0),
        ))
        .unwrap();
        assert_eq!(
            q.canonicalize(),
            poly(&["x2", "y2", "pi"], &[(&[3, 3, -2], 0)])
        );
    }

    #[test]
    fn canonicalize_keeps_rhs_in_the_gcd() {
        let p = poly(&["x", "pi"], &[(&[6, -2], 3)]);
        assert_eq!(p.canonicalize(), p);
    }

    #[test]
    fn canonicalize_merges_duplicates_and_sorts() {
        let p = poly(&["x", "y"], &[(&[0, 2], 2), (&[1, 0], 1), (&[0, 1], 1)]);
        let c = p.canonicalize();
        assert_eq!(c.rows().len(), 2);
        assert_eq!(c, poly(&["x", "y"], &[(&[0, 1], 1), (&[1, 0], 1)]));
    }

    #[test]
    fn contradictory_trivial_row_flags_empty() {
        let p = poly(&["x"], &[(&[0], -1)]);
        assert!(p.is_empty_flagged());
        assert!(!p.contains(&point(&[("x", s(0))])).unwrap());
        let p = poly(&["x"], &[(&[0], 1)]);
        assert_eq!(p.row_count(), 0);
    }

    #[test]
    fn membership_in_phi1() {
        let p = phi1();
        assert!(p
            .contains(&point(&[("x1", Scalar::new(5, 2)), ("pi", s(4))]))
            .unwrap());
        // 2·3 − 4 = 2 > 1
        assert!(!p.contains(&point(&[("x1", s(3)), ("pi", s(4))])).unwrap());
        assert_eq!(
            p.contains(&point(&[("x1", s(3))])),
            Err(PolytopeError::MissingCoordinate("pi".into()))
        );
    }

    #[test]
    fn witness_is_contained() {
        let p = phi1();
        let w = p.feasible_point().unwrap();
        assert!(p.contains(&w).unwrap());
    }

    #[test]
    fn fix_substitutes_values() {
        let p = poly(&["x", "y"], &[(&[1, 1], 3), (&[-1, 0], 0)]);
        let slice = p.fix(&point(&[("x", s(1))]));
        assert_eq!(slice.variables(), &vars(&["y"])[..]);
        assert_eq!(slice, poly(&["y"], &[(&[1], 2)]));
        let infeasible = p.fix(&point(&[("x", s(-1))]));
        assert!(infeasible.is_empty_flagged());
    }

    #[test]
    fn doc_round_trip() {
        let p = phi1();
        let doc = PolytopeDoc::from(&p);
        let back = Polytope::try_from(&doc).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn display_uses_variable_order() {
        let p = poly(&["x1", "pi"], &[(&[2, -1], 1)]);
        assert_eq!(p.to_string(), "{\n  2 x1 - pi <= 1\n}");
    }
}
