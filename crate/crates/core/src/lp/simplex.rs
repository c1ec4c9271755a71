//! Dense phase-one simplex with Bland's rule, generic over an ordered field.

use num_rational::BigRational;
use num_traits::{Num, Signed};

use super::{Relation, Row};

/// Field operations the tableau needs, with the sign tests exact for
/// rationals and tolerant for floats.
pub trait Field: Clone + Num + PartialOrd {
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn from_rational(x: &BigRational) -> Self;
}

impl Field for BigRational {
    fn is_pos(&self) -> bool {
        self.is_positive()
    }

    fn is_neg(&self) -> bool {
        self.is_negative()
    }

    fn from_rational(x: &BigRational) -> Self {
        x.clone()
    }
}

/// Tolerance of the floating-point tableau.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

impl Field for f64 {
    fn is_pos(&self) -> bool {
        *self > FLOAT_TOLERANCE
    }

    fn is_neg(&self) -> bool {
        *self < -FLOAT_TOLERANCE
    }

    fn from_rational(x: &BigRational) -> Self {
        crate::rational::to_f64(x)
    }
}

/// Finds `x >= 0` satisfying every row, or `None` if there is none.
pub fn phase_one<T: Field>(num_vars: usize, rows: &[Row]) -> Option<Vec<T>> {
    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.rel != Relation::Eq).count();
    let art_count = rows
        .iter()
        .filter(|r| {
            let flip = r.rhs.is_negative();
            !matches!((r.rel, flip), (Relation::Le, false) | (Relation::Ge, true))
        })
        .count();
    let width = num_vars + slack_count + art_count;
    let rhs_col = width;
    let mut t: Vec<Vec<T>> = vec![vec![T::zero(); width + 1]; m + 1];
    let mut basis = vec![0usize; m];
    let mut artificial = vec![false; width];
    let (mut next_slack, mut next_art) = (num_vars, num_vars + slack_count);

    for (i, row) in rows.iter().enumerate() {
        let flip = row.rhs.is_negative();
        let sign = |x: T| if flip { T::zero() - x } else { x };
        for (j, a) in &row.coeffs {
            t[i][*j] = t[i][*j].clone() + sign(T::from_rational(a));
        }
        t[i][rhs_col] = sign(T::from_rational(&row.rhs));
        let rel = match (row.rel, flip) {
            (Relation::Le, true) => Relation::Ge,
            (Relation::Ge, true) => Relation::Le,
            (r, _) => r,
        };
        match rel {
            Relation::Le => {
                t[i][next_slack] = T::one();
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                t[i][next_slack] = T::zero() - T::one();
                next_slack += 1;
                t[i][next_art] = T::one();
                artificial[next_art] = true;
                basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                t[i][next_art] = T::one();
                artificial[next_art] = true;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }
    // Objective: minimise the sum of artificials, stored as reduced costs
    // with the negated objective value in the right-hand column.
    for i in 0..m {
        if artificial[basis[i]] {
            for j in 0..=width {
                if j < width && artificial[j] {
                    continue;
                }
                t[m][j] = t[m][j].clone() - t[i][j].clone();
            }
        }
    }

    loop {
        // Bland's rule: the lowest improving column that has a pivot row.
        // In exact arithmetic the first improving column always has one,
        // since the objective is bounded below by 0; with floats a noise
        // level reduced cost may not.
        let mut step = None;
        for e in (0..width).filter(|&j| t[m][j].is_neg()) {
            let mut pivot: Option<(usize, T)> = None;
            for i in 0..m {
                if !t[i][e].is_pos() {
                    continue;
                }
                let ratio = t[i][rhs_col].clone() / t[i][e].clone();
                let better = match &pivot {
                    None => true,
                    Some((r, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*r]),
                };
                if better {
                    pivot = Some((i, ratio));
                }
            }
            if let Some((r, _)) = pivot {
                step = Some((r, e));
                break;
            }
        }
        let Some((r, e)) = step else {
            break;
        };
        let p = t[r][e].clone();
        for x in t[r].iter_mut() {
            *x = x.clone() / p.clone();
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == r || row[e].is_zero() {
                continue;
            }
            let f = row[e].clone();
            for (x, a) in row.iter_mut().zip(&pivot_row) {
                if !a.is_zero() {
                    *x = x.clone() - f.clone() * a.clone();
                }
            }
        }
        basis[r] = e;
    }

    let objective = T::zero() - t[m][rhs_col].clone();
    if objective.is_pos() {
        return None;
    }
    let mut x = vec![T::zero(); num_vars];
    for (i, &b) in basis.iter().enumerate() {
        if b < num_vars {
            x[b] = t[i][rhs_col].clone();
        }
    }
    Some(x)
}
