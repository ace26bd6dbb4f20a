//! Dense two-phase tableau simplex over exact rationals.
//!
//! Free variables are split as `x = x⁺ − x⁻`. Every row is normalised to a
//! non-negative right-hand side; `≤` rows start with their slack in the
//! basis, the rest get an artificial column. Pivoting follows Bland's rule
//! (lowest-index entering column, lowest-index leaving basic variable on ratio
//! ties), which cannot cycle.

use super::Relation;
use crate::scalar::Scalar;

/// Borrowed view of one constraint `coeffs · x (rel) rhs` over dense columns.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RowRef<'a> {
    pub coeffs: &'a [Scalar],
    pub relation: Relation,
    pub rhs: &'a Scalar,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum DenseOutcome {
    Optimal { value: Scalar, point: Vec<Scalar> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// `m` rows of `ncols + 1` entries; the last entry is the rhs.
    rows: Vec<Vec<Scalar>>,
    basis: Vec<usize>,
    ncols: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Scalar {
        &self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize, reduced: &mut [Scalar]) {
        let inv = self.rows[r][c].recip();
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let factor = row[c].clone();
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &(&factor * p);
                }
            }
        }
        if !reduced[c].is_zero() {
            let factor = reduced[c].clone();
            for (v, p) in reduced.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &(&factor * p);
                }
            }
        }
        self.rows[r] = pivot_row;
        self.basis[r] = c;
    }

    /// Reduced costs `c_j − c_B B⁻¹ A_j` for the current basis, with the
    /// negated objective value in the trailing slot.
    fn reduced_costs(&self, cost: &[Scalar]) -> Vec<Scalar> {
        let mut reduced: Vec<Scalar> = cost.to_vec();
        reduced.push(Scalar::zero());
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (v, a) in reduced.iter_mut().zip(row) {
                if !a.is_zero() {
                    *v -= &(cb * a);
                }
            }
        }
        reduced
    }

    /// Minimises `cost` over columns `< active` starting from the current
    /// (feasible) basis.
    fn optimize(&mut self, cost: &[Scalar], active: usize) -> Phase {
        let mut reduced = self.reduced_costs(cost);
        loop {
            let Some(enter) = (0..active).find(|&j| reduced[j].is_negative()) else {
                return Phase::Optimal;
            };
            let mut leave: Option<(usize, Scalar)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][enter];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let better = match &leave {
                    None => true,
                    Some((li, best)) => {
                        ratio < *best || (ratio == *best && self.basis[i] < self.basis[*li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                None => return Phase::Unbounded,
                Some((r, _)) => self.pivot(r, enter, &mut reduced),
            }
        }
    }

    fn column_values(&self) -> Vec<Scalar> {
        let mut values = vec![Scalar::zero(); self.ncols];
        for (i, &b) in self.basis.iter().enumerate() {
            values[b] = self.rhs(i).clone();
        }
        values
    }
}

/// Phase one. Returns the tableau restricted to structural and slack columns
/// with a feasible basis, or `None` if the rows are inconsistent.
fn phase_one(nvars: usize, rows: &[RowRef<'_>]) -> Option<(Tableau, usize)> {
    let m = rows.len();
    let nstruct = 2 * nvars;
    let nslack = rows.iter().filter(|r| r.relation != Relation::Eq).count();
    let mut flipped = Vec::with_capacity(m);
    let mut needs_artificial = Vec::with_capacity(m);
    for row in rows {
        let flip = row.rhs.is_negative() || (row.rhs.is_zero() && row.relation == Relation::Ge);
        let relation = match (row.relation, flip) {
            (Relation::Le, true) => Relation::Ge,
            (Relation::Ge, true) => Relation::Le,
            (rel, _) => rel,
        };
        flipped.push(flip);
        needs_artificial.push(relation != Relation::Le);
    }
    let nart = needs_artificial.iter().filter(|&&a| a).count();
    let art_start = nstruct + nslack;
    let ncols = art_start + nart;

    let mut table = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut slack = nstruct;
    let mut art = art_start;
    for (i, row) in rows.iter().enumerate() {
        let sign = if flipped[i] {
            -Scalar::one()
        } else {
            Scalar::one()
        };
        let mut entries = vec![Scalar::zero(); ncols + 1];
        for (j, a) in row.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let v = &sign * a;
            entries[2 * j + 1] = -&v;
            entries[2 * j] = v;
        }
        entries[ncols] = &sign * row.rhs;
        if row.relation != Relation::Eq {
            // Slack sign in the original orientation: +1 for ≤, −1 for ≥.
            let s = if row.relation == Relation::Le { 1 } else { -1 };
            entries[slack] = &sign * &Scalar::from_integer(s);
            if !needs_artificial[i] {
                basis.push(slack);
            }
            slack += 1;
        }
        if needs_artificial[i] {
            entries[art] = Scalar::one();
            basis.push(art);
            art += 1;
        }
        table.push(entries);
    }

    let mut tableau = Tableau {
        rows: table,
        basis,
        ncols,
    };
    if nart > 0 {
        let mut cost = vec![Scalar::zero(); ncols];
        for c in cost.iter_mut().skip(art_start) {
            *c = Scalar::one();
        }
        tableau.optimize(&cost, ncols);
        let infeasibility: Scalar = tableau
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= art_start)
            .map(|(i, _)| tableau.rhs(i).clone())
            .sum();
        if infeasibility.is_positive() {
            return None;
        }
        // Drive zero-level artificials out of the basis; rows where that is
        // impossible are linearly dependent and get dropped.
        let mut dummy = vec![Scalar::zero(); ncols + 1];
        let mut i = 0;
        while i < tableau.rows.len() {
            if tableau.basis[i] < art_start {
                i += 1;
                continue;
            }
            match (0..art_start).find(|&j| !tableau.rows[i][j].is_zero()) {
                Some(j) => {
                    tableau.pivot(i, j, &mut dummy);
                    i += 1;
                }
                None => {
                    tableau.rows.remove(i);
                    tableau.basis.remove(i);
                }
            }
        }
        for row in tableau.rows.iter_mut() {
            let rhs = row[ncols].clone();
            row.truncate(art_start);
            row.push(rhs);
        }
        tableau.ncols = art_start;
    }
    Some((tableau, nvars))
}

fn structural_point(tableau: &Tableau, nvars: usize) -> Vec<Scalar> {
    let values = tableau.column_values();
    (0..nvars)
        .map(|j| &values[2 * j] - &values[2 * j + 1])
        .collect()
}

/// Any point satisfying all rows, or `None` if there is none.
pub(crate) fn feasible_point(nvars: usize, rows: &[RowRef<'_>]) -> Option<Vec<Scalar>> {
    phase_one(nvars, rows).map(|(t, n)| structural_point(&t, n))
}

/// Minimises `objective · x` over the rows.
pub(crate) fn minimize(nvars: usize, rows: &[RowRef<'_>], objective: &[Scalar]) -> DenseOutcome {
    debug_assert_eq!(objective.len(), nvars);
    let Some((mut tableau, _)) = phase_one(nvars, rows) else {
        return DenseOutcome::Infeasible;
    };
    let mut cost = vec![Scalar::zero(); tableau.ncols];
    for (j, c) in objective.iter().enumerate() {
        if !c.is_zero() {
            cost[2 * j] = c.clone();
            cost[2 * j + 1] = -c;
        }
    }
    let active = tableau.ncols;
    match tableau.optimize(&cost, active) {
        Phase::Unbounded => DenseOutcome::Unbounded,
        Phase::Optimal => {
            let point = structural_point(&tableau, nvars);
            let value = point.iter().zip(objective).map(|(x, c)| x * c).sum();
            DenseOutcome::Optimal { value, point }
        }
    }
}

/// Maximises `objective · x` over the rows.
pub(crate) fn maximize(nvars: usize, rows: &[RowRef<'_>], objective: &[Scalar]) -> DenseOutcome {
    let negated: Vec<Scalar> = objective.iter().map(|c| -c).collect();
    match minimize(nvars, rows, &negated) {
        DenseOutcome::Optimal { value, point } => DenseOutcome::Optimal {
            value: -value,
            point,
        },
        other => other,
    }
}
