//! Fourier–Motzkin elimination and multi-variable projection.

use super::{HalfSpace, Polytope, PolytopeError};
use crate::scalar::Scalar;

impl Polytope {
    /// Projects out `var`: rows without it are copied, and every pair of a
    /// positive-coefficient and a negative-coefficient row is combined so that
    /// `var` cancels. The result may contain redundant rows.
    pub fn fme_eliminate(&self, var: &str) -> Result<Polytope, PolytopeError> {
        let k = self
            .index_of(var)
            .ok_or_else(|| PolytopeError::UnknownVariable(var.to_string()))?;
        let variables: Vec<String> = self
            .variables
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, v)| v.clone())
            .collect();
        if self.empty {
            return Ok(Polytope::empty(variables));
        }
        let drop_col = |coeffs: &[Scalar]| -> Vec<Scalar> {
            coeffs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, c)| c.clone())
                .collect()
        };

        let mut out = Polytope {
            variables,
            rows: Vec::new(),
            empty: false,
        };
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for row in &self.rows {
            let a = &row.coeffs[k];
            if a.is_positive() {
                pos.push(row);
            } else if a.is_negative() {
                neg.push(row);
            } else {
                out.push_row(HalfSpace::new(drop_col(&row.coeffs), row.rhs.clone()));
            }
        }
        for p in &pos {
            for n in &neg {
                // (−n_k)·p + (p_k)·n, both multipliers positive.
                let mp = -&n.coeffs[k];
                let mn = p.coeffs[k].clone();
                let coeffs: Vec<Scalar> = p
                    .coeffs
                    .iter()
                    .zip(&n.coeffs)
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, (a, b))| &(&mp * a) + &(&mn * b))
                    .collect();
                let rhs = &(&mp * &p.rhs) + &(&mn * &n.rhs);
                out.push_row(HalfSpace::new(coeffs, rhs).integer_normalized());
                if out.empty {
                    return Ok(out);
                }
            }
        }
        Ok(out)
    }

    /// Projects onto `keep` (in that column order), eliminating every other
    /// variable. Equality pairs are used first for exact substitution; the
    /// rest go through Fourier–Motzkin, choosing at each step the variable
    /// with the fewest positive×negative row pairs and pruning redundant rows
    /// after every step.
    pub fn project_onto(&self, keep: &[String]) -> Result<Polytope, PolytopeError> {
        for v in keep {
            if self.index_of(v).is_none() {
                return Err(PolytopeError::UnknownVariable(v.clone()));
            }
        }
        if self.empty {
            return Ok(Polytope::empty(keep.to_vec()));
        }
        let eliminable = |p: &Polytope, j: usize| !keep.contains(&p.variables[j]);

        let mut current = self.remove_redundant();
        while let Some((row, col)) = find_substitution(&current, &eliminable) {
            current = current.substitute_equality(row, col);
        }
        loop {
            if current.empty {
                return Ok(Polytope::empty(keep.to_vec()));
            }
            let candidates = (0..current.variables.len()).filter(|&j| eliminable(&current, j));
            let Some(col) = candidates.min_by_key(|&j| {
                let pos = current
                    .rows
                    .iter()
                    .filter(|r| r.coeffs[j].is_positive())
                    .count();
                let neg = current
                    .rows
                    .iter()
                    .filter(|r| r.coeffs[j].is_negative())
                    .count();
                (pos * neg, j)
            }) else {
                break;
            };
            let name = current.variables[col].clone();
            current = current.fme_eliminate(&name)?.remove_redundant();
        }
        current.reordered(keep)
    }

    /// Eliminates column `col` through the equality formed by row `row` and
    /// its opposite partner. Both rows disappear, as does the column.
    fn substitute_equality(&self, row: usize, col: usize) -> Polytope {
        let eq = self.rows[row].clone();
        let pivot = eq.coeffs[col].clone();
        let mut out = Polytope {
            variables: self
                .variables
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != col)
                .map(|(_, v)| v.clone())
                .collect(),
            rows: Vec::new(),
            empty: false,
        };
        // The partner row (and any copy of the equality) reduces to 0 ≤ 0.
        for (i, r) in self.rows.iter().enumerate() {
            if i == row {
                continue;
            }
            let factor = &r.coeffs[col] / &pivot;
            let coeffs: Vec<Scalar> = r
                .coeffs
                .iter()
                .zip(&eq.coeffs)
                .enumerate()
                .filter(|&(j, _)| j != col)
                .map(|(_, (a, e))| {
                    if factor.is_zero() {
                        a.clone()
                    } else {
                        a - &(&factor * e)
                    }
                })
                .collect();
            let rhs = if factor.is_zero() {
                r.rhs.clone()
            } else {
                &r.rhs - &(&factor * &eq.rhs)
            };
            out.push_row(HalfSpace::new(coeffs, rhs).integer_normalized());
            if out.empty {
                break;
            }
        }
        out
    }
}

/// An equality (a row whose exact opposite is also present) with a nonzero
/// coefficient on an eliminable column. Returns `(row, column)`.
fn find_substitution(
    p: &Polytope,
    eliminable: &impl Fn(&Polytope, usize) -> bool,
) -> Option<(usize, usize)> {
    let normalized: Vec<HalfSpace> = p.rows.iter().map(HalfSpace::integer_normalized).collect();
    for (i, r) in normalized.iter().enumerate() {
        let Some(col) =
            (0..p.variables.len()).find(|&j| eliminable(p, j) && !r.coeffs[j].is_zero())
        else {
            continue;
        };
        let opposite = r.negated();
        if normalized
            .iter()
            .skip(i + 1)
            .any(|other| *other == opposite)
        {
            return Some((i, col));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::super::tests::{point, poly, s, vars};
    use super::*;
    use crate::lp::{Constraint, Relation};
    use proptest::prelude::*;

    #[test]
    fn single_pair_combination() {
        // x − y ≤ 0, y ≤ 2  →  x ≤ 2
        let p = poly(&["x", "y"], &[(&[1, -1], 0), (&[0, 1], 2)]);
        let q = p.fme_eliminate("y").unwrap();
        assert_eq!(q, poly(&["x"], &[(&[1], 2)]));
    }

    #[test]
    fn unknown_variable() {
        let p = poly(&["x"], &[(&[1], 2)]);
        assert_eq!(
            p.fme_eliminate("z"),
            Err(PolytopeError::UnknownVariable("z".into()))
        );
        assert!(p.project_onto(&vars(&["z"])).is_err());
    }

    #[test]
    fn contradictory_combination_flags_empty() {
        // y ≥ 2, y ≤ 1
        let p = poly(&["x", "y"], &[(&[0, -1], -2), (&[0, 1], 1)]);
        assert!(p.fme_eliminate("y").unwrap().is_empty_flagged());
    }

    #[test]
    fn equality_substitution_matches_fme() {
        // x + y = 2, 0 ≤ y ≤ 1, project onto x: 1 ≤ x ≤ 2
        let mut p = Polytope::universe(vars(&["x", "y"])).unwrap();
        p.add_constraint(&Constraint::from_terms(
            [("x", s(1)), ("y", s(1))],
            Relation::Eq,
            s(2),
        ))
        .unwrap();
        p.add_constraint(&Constraint::from_terms([("y", s(1))], Relation::Le, s(1)))
            .unwrap();
        p.add_constraint(&Constraint::from_terms([("y", s(1))], Relation::Ge, s(0)))
            .unwrap();
        let via_projection = p.project_onto(&vars(&["x"])).unwrap().canonicalize();
        let via_fme = p
            .fme_eliminate("y")
            .unwrap()
            .remove_redundant()
            .canonicalize();
        assert_eq!(via_projection, poly(&["x"], &[(&[-1], -1), (&[1], 2)]));
        assert_eq!(via_projection, via_fme);
    }

    #[test]
    fn projection_is_identity_without_eliminated_variables() {
        let p = poly(
            &["x", "pi"],
            &[(&[1, 0], 3), (&[-1, 0], -1), (&[1, -1], -1)],
        );
        let q = p.project_onto(&vars(&["x", "pi"])).unwrap();
        assert_eq!(q.canonicalize(), p.remove_redundant().canonicalize());
    }

    #[test]
    fn projection_reorders_columns() {
        let p = poly(
            &["a", "b", "c"],
            &[(&[1, 0, 0], 1), (&[0, 0, 1], 2), (&[0, 1, 0], 3)],
        );
        let q = p.project_onto(&vars(&["c", "a"])).unwrap();
        assert_eq!(q.variables(), &vars(&["c", "a"])[..]);
        assert!(q.contains(&point(&[("a", s(1)), ("c", s(2))])).unwrap());
        assert!(!q.contains(&point(&[("a", s(2)), ("c", s(1))])).unwrap());
    }

    fn random_polytope_3d() -> impl Strategy<Value = Polytope> {
        prop::collection::vec((prop::collection::vec(-3i64..=3, 3), -2i64..=6), 2..9).prop_map(
            |rows| {
                let mut p = poly(
                    &["x", "y", "z"],
                    &[
                        (&[1, 0, 0], 4),
                        (&[-1, 0, 0], 4),
                        (&[0, 0, 1], 4),
                        (&[0, 0, -1], 4),
                    ],
                );
                for (c, b) in rows {
                    p.push_row(HalfSpace::new(c.into_iter().map(s).collect(), s(b)));
                }
                p
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        // A point is in the projection iff the slice of the original polytope
        // at that point is feasible.
        #[test]
        fn elimination_is_exact_projection(p in random_polytope_3d()) {
            let q = p.fme_eliminate("y").unwrap();
            let r = q.remove_redundant();
            for xi in -10..=10 {
                for zi in -5..=5 {
                    let pt = point(&[("x", Scalar::new(xi, 2)), ("z", Scalar::from_integer(zi))]);
                    let oracle = p.fix(&pt).is_feasible();
                    prop_assert_eq!(q.contains(&pt).unwrap(), oracle);
                    prop_assert_eq!(r.contains(&pt).unwrap(), oracle);
                }
            }
        }

        #[test]
        fn projection_onto_one_axis(p in random_polytope_3d()) {
            let q = p.project_onto(&vars(&["z"])).unwrap();
            for zi in -20..=20 {
                let pt = point(&[("z", Scalar::new(zi, 4))]);
                prop_assert_eq!(q.contains(&pt).unwrap(), p.fix(&pt).is_feasible());
            }
        }
    }
}
