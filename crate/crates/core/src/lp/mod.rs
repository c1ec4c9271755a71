//! The feasibility LP over a coupling tree. Each node ρ carries two
//! variables, `P1(ρ)` and `P2(ρ)`, the probabilities that the coupling
//! reaches ρ on each side.

pub mod cone;
pub mod simplex;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{CouplingTree, LeafCounts, NodeKind};

/// A ratio bound that may be infinite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bound {
    Finite(BigRational),
    Infinite,
}

impl Bound {
    pub fn show(&self) -> String {
        match self {
            Bound::Finite(x) => crate::rational::show(x),
            Bound::Infinite => "inf".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// Which family a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `P <= 1`.
    Box,
    /// Leaf ratio window `r_l N2 P2 <= N1 P1 <= r_u N2 P2`.
    LeafRatio,
    /// Root normalisation and conservation at internal nodes.
    Flow,
    /// `s P_i(child) <= P_i(parent)` for disagreeing children.
    Damping,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub family: Family,
    pub node: usize,
    pub coeffs: Vec<(usize, BigRational)>,
    pub rel: Relation,
    pub rhs: BigRational,
}

impl Row {
    /// Signed slack: nonnegative iff the row holds.
    pub fn slack(&self, x: &[BigRational]) -> BigRational {
        let lhs: BigRational = self.coeffs.iter().map(|(j, a)| a * &x[*j]).sum();
        match self.rel {
            Relation::Le => &self.rhs - lhs,
            Relation::Ge => lhs - &self.rhs,
            Relation::Eq => -(lhs - &self.rhs).abs(),
        }
    }
}

/// Tree shape as the LP sees it.
#[derive(Debug, Clone)]
pub struct LpNode {
    pub children: Option<[usize; 4]>,
    pub counts: Option<LeafCounts>,
}

#[derive(Debug, Clone)]
pub struct LpInstance {
    pub num_vars: usize,
    pub rows: Vec<Row>,
    pub nodes: Vec<LpNode>,
    pub r_lower: Bound,
    pub r_upper: Bound,
    pub s: BigRational,
}

pub fn p1(node: usize) -> usize {
    2 * node
}

pub fn p2(node: usize) -> usize {
    2 * node + 1
}

/// Builds the LP for `tree` with leaf window `[r_lower, r_upper]` and
/// damping parameter `s`. Every leaf must carry its counts.
pub fn build_lp(tree: &CouplingTree, r_lower: &Bound, r_upper: &Bound, s: &BigRational) -> Result<LpInstance> {
    if !s.is_positive() {
        return Err(Error::InvalidConfig(format!(
            "s must be positive, got {}",
            crate::rational::show(s)
        )));
    }
    let one = BigRational::one;
    let neg = || -BigRational::one();
    let zero = BigRational::zero;
    let mut rows = Vec::new();
    let mut nodes = Vec::with_capacity(tree.nodes.len());
    for node in &tree.nodes {
        let id = node.id;
        for var in [p1(id), p2(id)] {
            rows.push(Row {
                family: Family::Box,
                node: id,
                coeffs: vec![(var, one())],
                rel: Relation::Le,
                rhs: one(),
            });
        }
        match node.kind {
            NodeKind::Leaf => {
                let counts = node.counts.ok_or(Error::MissingLeafRatio(id))?;
                let n1 = crate::rational::int(counts.n1 as i64);
                let n2 = crate::rational::int(counts.n2 as i64);
                match r_lower {
                    Bound::Finite(r) => rows.push(Row {
                        family: Family::LeafRatio,
                        node: id,
                        coeffs: vec![(p1(id), n1.clone()), (p2(id), -(r * &n2))],
                        rel: Relation::Ge,
                        rhs: zero(),
                    }),
                    Bound::Infinite => rows.push(Row {
                        family: Family::LeafRatio,
                        node: id,
                        coeffs: vec![(p2(id), n2.clone())],
                        rel: Relation::Le,
                        rhs: zero(),
                    }),
                }
                if let Bound::Finite(r) = r_upper {
                    rows.push(Row {
                        family: Family::LeafRatio,
                        node: id,
                        coeffs: vec![(p1(id), n1), (p2(id), -(r * &n2))],
                        rel: Relation::Le,
                        rhs: zero(),
                    });
                }
            }
            NodeKind::Internal => {
                let ch = node
                    .children
                    .ok_or_else(|| Error::InvariantViolation(format!("internal node {id} has no children")))?;
                // P1 splits over the second side's value, P2 over the first's.
                for pair in [[ch[0], ch[1]], [ch[2], ch[3]]] {
                    rows.push(Row {
                        family: Family::Flow,
                        node: id,
                        coeffs: vec![(p1(id), one()), (p1(pair[0]), neg()), (p1(pair[1]), neg())],
                        rel: Relation::Eq,
                        rhs: zero(),
                    });
                }
                for pair in [[ch[0], ch[2]], [ch[1], ch[3]]] {
                    rows.push(Row {
                        family: Family::Flow,
                        node: id,
                        coeffs: vec![(p2(id), one()), (p2(pair[0]), neg()), (p2(pair[1]), neg())],
                        rel: Relation::Eq,
                        rhs: zero(),
                    });
                }
                for c in [ch[1], ch[2]] {
                    for (pc, pp) in [(p1(c), p1(id)), (p2(c), p2(id))] {
                        rows.push(Row {
                            family: Family::Damping,
                            node: id,
                            coeffs: vec![(pc, s.clone()), (pp, neg())],
                            rel: Relation::Le,
                            rhs: zero(),
                        });
                    }
                }
            }
            NodeKind::Truncating => {}
        }
        nodes.push(LpNode {
            children: node.children,
            counts: if node.kind == NodeKind::Leaf { node.counts } else { None },
        });
    }
    for var in [p1(0), p2(0)] {
        rows.push(Row {
            family: Family::Flow,
            node: 0,
            coeffs: vec![(var, one())],
            rel: Relation::Eq,
            rhs: one(),
        });
    }
    Ok(LpInstance {
        num_vars: 2 * tree.nodes.len(),
        rows,
        nodes,
        r_lower: r_lower.clone(),
        r_upper: r_upper.clone(),
        s: s.clone(),
    })
}

/// How to decide feasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpMode {
    /// Exact arithmetic: the tree cone solver when `s <= 1`, otherwise the
    /// rational simplex.
    Exact,
    /// Exact rational simplex regardless of `s`.
    Simplex,
    /// Floating-point simplex with tolerance. Only a feasible answer whose
    /// witness passes a float recheck is kept; infeasible answers and bad
    /// witnesses are decided again by the rational simplex.
    Float,
}

impl std::str::FromStr for LpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(LpMode::Exact),
            "simplex" => Ok(LpMode::Simplex),
            "float" => Ok(LpMode::Float),
            _ => Err(Error::InvalidConfig(format!("unknown LP mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    TreeCone,
    Simplex,
    FloatSimplex,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub feasible: bool,
    pub solver: Solver,
    /// A point satisfying every row, when feasible.
    pub witness: Option<Vec<BigRational>>,
}

/// Default cap on `rows * columns` for the dense simplex.
pub const DEFAULT_SIMPLEX_CAP: usize = 400_000;

/// Indices of rows violated by `x` (exactly), including negativity.
pub fn violations(lp: &LpInstance, x: &[BigRational]) -> Vec<usize> {
    lp.rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.slack(x).is_negative())
        .map(|(i, _)| i)
        .collect()
}

fn float_violations(lp: &LpInstance, x: &[f64]) -> usize {
    let tol = 1e-7;
    lp.rows
        .iter()
        .filter(|r| {
            let lhs: f64 = r.coeffs.iter().map(|(j, a)| crate::rational::to_f64(a) * x[*j]).sum();
            let rhs = crate::rational::to_f64(&r.rhs);
            let scale = 1.0
                + rhs.abs()
                + r.coeffs
                    .iter()
                    .map(|(_, a)| crate::rational::to_f64(a).abs())
                    .sum::<f64>();
            match r.rel {
                Relation::Le => lhs > rhs + tol * scale,
                Relation::Ge => lhs < rhs - tol * scale,
                Relation::Eq => (lhs - rhs).abs() > tol * scale,
            }
        })
        .count()
        + x.iter().filter(|v| **v < -tol).count()
}

/// Rows divided by their largest coefficient magnitude, so the float
/// tableau starts with entries of order one.
fn equilibrated(rows: &[Row]) -> Vec<Row> {
    rows.iter()
        .map(|r| {
            let scale = r
                .coeffs
                .iter()
                .map(|(_, a)| a.abs())
                .max()
                .filter(|a| !a.is_zero())
                .unwrap_or_else(BigRational::one);
            Row {
                coeffs: r.coeffs.iter().map(|(j, a)| (*j, a / &scale)).collect(),
                rhs: &r.rhs / &scale,
                ..r.clone()
            }
        })
        .collect()
}

pub fn solve(lp: &LpInstance, mode: LpMode, simplex_cap: usize) -> Result<LpOutcome> {
    let use_cone = mode == LpMode::Exact && lp.s <= BigRational::one();
    if use_cone {
        let sol = cone::solve(lp);
        return finish(lp, Solver::TreeCone, sol.witness);
    }
    let cells = lp.rows.len() * (lp.num_vars + 2 * lp.rows.len() + 1);
    if cells > simplex_cap {
        return Err(Error::SizeCapExceeded {
            vars: lp.num_vars,
            rows: lp.rows.len(),
        });
    }
    match mode {
        LpMode::Float => {
            let x = simplex::phase_one::<f64>(lp.num_vars, &equilibrated(&lp.rows));
            match x {
                Some(x) if float_violations(lp, &x) == 0 => Ok(LpOutcome {
                    feasible: true,
                    solver: Solver::FloatSimplex,
                    witness: Some(
                        x.iter()
                            .map(|v| BigRational::from_float(*v).unwrap_or_else(BigRational::zero))
                            .collect(),
                    ),
                }),
                // Roundoff can end phase one early or corrupt the witness,
                // so only a checked witness is trusted. Anything else is
                // decided again exactly.
                _ => {
                    let x = simplex::phase_one::<BigRational>(lp.num_vars, &lp.rows);
                    finish(lp, Solver::Simplex, x)
                }
            }
        }
        _ => {
            let x = simplex::phase_one::<BigRational>(lp.num_vars, &lp.rows);
            finish(lp, Solver::Simplex, x)
        }
    }
}

fn finish(lp: &LpInstance, solver: Solver, witness: Option<Vec<BigRational>>) -> Result<LpOutcome> {
    if let Some(x) = &witness {
        if x.iter().any(|v| v.is_negative()) {
            return Err(Error::InvariantViolation(format!(
                "{solver:?} witness has a negative entry"
            )));
        }
        let bad = violations(lp, x);
        if let Some(&i) = bad.first() {
            return Err(Error::InvariantViolation(format!(
                "{solver:?} witness violates {} rows, first a {:?} row at node {}",
                bad.len(),
                lp.rows[i].family,
                lp.rows[i].node
            )));
        }
    }
    Ok(LpOutcome {
        feasible: witness.is_some(),
        solver,
        witness,
    })
}
