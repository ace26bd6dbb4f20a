//! Brute-force vertex enumeration for small polytopes.

use std::collections::BTreeSet;

use crate::error::DispatchError;
use crate::lp::{Assignment, LinearProgram, Sense};
use crate::polytope::Polytope;
use crate::scalar::Scalar;

pub const MAX_ENUMERATION_DIMENSION: usize = 6;

/// Solves the square system `a z = b` exactly; `None` if `a` is singular.
fn solve_square(mut a: Vec<Vec<Scalar>>, mut b: Vec<Scalar>) -> Option<Vec<Scalar>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] * &inv;
            let pivot_row = a[col].clone();
            for (x, p) in a[r].iter_mut().zip(&pivot_row).skip(col) {
                *x -= &(&f * p);
            }
            let delta = &f * &b[col];
            b[r] -= &delta;
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

fn for_each_subset(m: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..=m - (k - cur.len()) {
            cur.push(i);
            go(i + 1, m, k, cur, f);
            cur.pop();
        }
    }
    if k <= m {
        go(0, m, k, &mut Vec::with_capacity(k), f);
    }
}

/// Every basic feasible point: each `dimension`-subset of rows with an
/// invertible coefficient block is solved exactly and kept if it satisfies
/// all rows. Duplicates are merged; order is lexicographic.
pub fn enumerate_vertices(p: &Polytope) -> Result<Vec<Assignment>, DispatchError> {
    let d = p.dimension();
    if d > MAX_ENUMERATION_DIMENSION {
        return Err(DispatchError::DimensionTooLarge {
            dimension: d,
            limit: MAX_ENUMERATION_DIMENSION,
        });
    }
    if p.is_empty_flagged() {
        return Ok(Vec::new());
    }
    let rows = p.rows();
    let mut found: BTreeSet<Vec<Scalar>> = BTreeSet::new();
    for_each_subset(rows.len(), d, &mut |subset| {
        let a = subset.iter().map(|&i| rows[i].coeffs.clone()).collect();
        let b = subset.iter().map(|&i| rows[i].rhs.clone()).collect();
        if let Some(z) = solve_square(a, b) {
            let ok = rows.iter().all(|r| {
                let lhs: Scalar = r.coeffs.iter().zip(&z).map(|(c, x)| c * x).sum();
                lhs <= r.rhs
            });
            if ok {
                found.insert(z);
            }
        }
    });
    Ok(found
        .into_iter()
        .map(|z| p.variables().iter().cloned().zip(z).collect())
        .collect())
}

/// Optimum of `lp` over the vertices of its feasible set, `None` when there
/// are none. Only meaningful when the feasible set is a bounded polytope.
pub fn vertex_optimum(lp: &LinearProgram) -> Result<Option<Scalar>, DispatchError> {
    let p = Polytope::from_constraints(lp.variables.clone(), &lp.rows)?;
    let values = enumerate_vertices(&p)?.into_iter().map(|v| {
        lp.objective
            .eval(&v)
            .expect("objective over program variables")
    });
    Ok(match lp.sense {
        Sense::Minimize => values.min(),
        Sense::Maximize => values.max(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, Constraint, LinearExpr, Relation};
    use crate::polytope::tests::{phi1, point, s, vars};
    use proptest::prelude::*;

    #[test]
    fn phi1_vertices() {
        let v = enumerate_vertices(&phi1()).unwrap();
        for (x, pi) in [(1, 2), (1, 7), (3, 5), (3, 7), (2, 3)] {
            assert!(
                v.contains(&point(&[("x1", s(x)), ("pi", s(pi))])),
                "({x}, {pi})"
            );
        }
        assert_eq!(v.len(), 5);
    }

    #[test]
    fn unit_box_has_four_vertices() {
        let mut p = Polytope::universe(vars(&["a", "b"])).unwrap();
        for (c, b) in [([1, 0], 1), ([-1, 0], 0), ([0, 1], 1), ([0, -1], 0)] {
            p.push_row(crate::polytope::HalfSpace::new(
                c.iter().map(|&x| s(x)).collect(),
                s(b),
            ));
        }
        assert_eq!(enumerate_vertices(&p).unwrap().len(), 4);
    }

    #[test]
    fn dimension_guard() {
        let names: Vec<String> = (0..7).map(|i| format!("v{i}")).collect();
        let p = Polytope::universe(names).unwrap();
        assert_eq!(
            enumerate_vertices(&p),
            Err(DispatchError::DimensionTooLarge {
                dimension: 7,
                limit: 6
            })
        );
    }

    #[test]
    fn min_pi_over_phi1_matches_solver() {
        let mut lp = LinearProgram::new(
            vars(&["x1", "pi"]),
            LinearExpr::new([("pi".to_string(), s(1))].into(), s(0)),
            Sense::Minimize,
        );
        lp.rows = phi1().to_constraints();
        assert_eq!(vertex_optimum(&lp).unwrap(), Some(s(2)));
        assert_eq!(solve_lp(&lp).unwrap().value(), Some(&s(2)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn solver_agrees_with_vertices(
            n in 1usize..=4,
            cost in proptest::collection::vec(-4i64..=4, 4),
            extra in proptest::collection::vec((proptest::collection::vec(-3i64..=3, 4), 0i64..=8), 0..=4),
        ) {
            let names: Vec<String> = (0..n).map(|i| format!("z{i}")).collect();
            let mut rows = Vec::new();
            for v in &names {
                rows.push(Constraint::from_terms([(v.as_str(), s(1))], Relation::Ge, s(-2)));
                rows.push(Constraint::from_terms([(v.as_str(), s(1))], Relation::Le, s(3)));
            }
            for (c, b) in &extra {
                rows.push(Constraint::new(
                    names.iter().zip(c).map(|(v, &x)| (v.clone(), s(x))).collect(),
                    Relation::Le,
                    s(*b),
                ));
            }
            let objective = LinearExpr::new(names.iter().zip(&cost).map(|(v, &c)| (v.clone(), s(c))).collect(), s(0));
            let lp = LinearProgram::new(names, objective, Sense::Minimize).with_rows(rows);
            let by_vertices = vertex_optimum(&lp).unwrap();
            prop_assert_eq!(solve_lp(&lp).unwrap().value().cloned(), by_vertices);
        }
    }
}
