//! Marking of good variables, a satisfying assignment of the bad part, and
//! the prefix assignment Λ* of marked variables, each with an independent
//! verifier.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::Classification;
use crate::enumerate::LocalCnf;
use crate::error::{Error, Result};
use crate::formula::{connected_components, ClauseId, Formula, Literal, PartialAssignment, Var};
use crate::rational::meets;

fn marked_fraction() -> Ratio<u64> {
    Ratio::new(3, 10)
}

fn unmarked_fraction() -> Ratio<u64> {
    Ratio::new(1, 4)
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th independent stream labelled `stream`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    mix(mix(seed ^ mix(stream)).wrapping_add(index))
}

const MARKING_STREAM: u64 = 1;
const BAD_SAT_STREAM: u64 = 2;
const LAMBDA_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Marking {
    /// Marked variables, ascending.
    pub marked: Vec<Var>,
    #[serde(skip)]
    mask: Vec<bool>,
}

impl Marking {
    pub fn from_vars(n: usize, vars: impl IntoIterator<Item = Var>) -> Self {
        let mut mask = vec![false; n + 1];
        for v in vars {
            mask[v as usize] = true;
        }
        let marked = (1..=n as Var).filter(|&v| mask[v as usize]).collect();
        Marking { marked, mask }
    }

    pub fn is_marked(&self, v: Var) -> bool {
        self.mask.get(v as usize).copied().unwrap_or(false)
    }

    /// Distinct marked variables of clause `c`, ascending.
    pub fn marked_in(&self, formula: &Formula, c: ClauseId) -> Vec<Var> {
        formula
            .clause_vars(c)
            .iter()
            .copied()
            .filter(|&v| self.is_marked(v))
            .collect()
    }
}

/// Per-clause counts (marked, unmarked good) of a good clause.
pub fn marking_counts(
    formula: &Formula,
    cls: &Classification,
    is_marked: impl Fn(Var) -> bool,
    c: ClauseId,
) -> (usize, usize) {
    let vs = formula.clause_vars(c);
    let marked = vs.iter().filter(|&&v| is_marked(v)).count();
    let good = vs.iter().filter(|&&v| cls.is_good_var(v)).count();
    (marked, good - marked)
}

fn clause_ok(k: usize, counts: (usize, usize)) -> bool {
    meets(counts.0, &marked_fraction(), k) && meets(counts.1, &unmarked_fraction(), k)
}

/// Good clauses violating the marking thresholds, or marking a bad variable.
pub fn verify_marking(formula: &Formula, cls: &Classification, marking: &Marking) -> Vec<ClauseId> {
    let mut bad: Vec<ClauseId> = cls
        .good_clauses
        .iter()
        .copied()
        .filter(|&c| {
            let counts = marking_counts(formula, cls, |v| marking.is_marked(v), c);
            !clause_ok(formula.k(), counts)
        })
        .collect();
    if marking.marked.iter().any(|&v| cls.is_bad_var(v)) {
        bad.extend(
            cls.bad_clauses
                .iter()
                .copied()
                .filter(|&c| formula.clause_vars(c).iter().any(|&v| marking.is_marked(v))),
        );
    }
    bad
}

/// Resamples the good variables of the lowest-index violated good clause,
/// one component of the good clause graph at a time.
pub fn find_marking(formula: &Formula, cls: &Classification, seed: u64, max_attempts: usize) -> Result<Marking> {
    let k = formula.k();
    for &c in &cls.good_clauses {
        let good = formula.clause_vars(c).iter().filter(|&&v| cls.is_good_var(v)).count();
        if !(0..=good).any(|a| clause_ok(k, (a, good - a))) {
            return Err(Error::MarkingNotFound { attempts: 0, clause: c });
        }
    }

    let graph = cls.good_graph(formula);
    let mut mask = vec![false; formula.n() + 1];
    for (idx, comp) in connected_components(&graph, &cls.good_clauses).iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, MARKING_STREAM, idx as u64));
        let mut vars: Vec<Var> = comp
            .iter()
            .flat_map(|&c| formula.clause_vars(c).iter().copied())
            .filter(|&v| cls.is_good_var(v))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        for &v in &vars {
            mask[v as usize] = rng.gen();
        }
        let mut attempts = 0;
        loop {
            let violated = comp
                .iter()
                .copied()
                .find(|&c| !clause_ok(k, marking_counts(formula, cls, |v| mask[v as usize], c)));
            let Some(c) = violated else { break };
            if attempts == max_attempts {
                return Err(Error::MarkingNotFound { attempts, clause: c });
            }
            attempts += 1;
            for &v in formula.clause_vars(c) {
                if cls.is_good_var(v) {
                    mask[v as usize] = rng.gen();
                }
            }
        }
    }
    Ok(Marking::from_vars(
        formula.n(),
        formula.vars().filter(|&v| mask[v as usize]),
    ))
}

/// Satisfies `clauses` over `vars` by exhaustive search when `vars` is within
/// `exhaustive_cap`, otherwise by Moser–Tardos resampling (lowest-index
/// violated clause first). `Ok(None)` means exhaustive search proved the
/// clauses unsatisfiable.
fn solve_local(
    clauses: &[Vec<Literal>],
    vars: &[Var],
    exhaustive_cap: usize,
    rng: &mut ChaCha8Rng,
    max_resamples: usize,
) -> Result<Option<PartialAssignment>> {
    if vars.len() <= exhaustive_cap {
        let cnf = LocalCnf::from_literals(clauses.iter().map(Vec::as_slice), &PartialAssignment::new(), vars)?;
        return Ok(cnf.first_solution());
    }
    let mut value: std::collections::HashMap<Var, bool> = vars.iter().map(|&v| (v, rng.gen())).collect();
    for _ in 0..=max_resamples {
        let violated = clauses.iter().find(|c| !c.iter().any(|l| l.eval(value[&l.var()])));
        match violated {
            None => return Ok(Some(value.into_iter().collect())),
            Some(c) => {
                for l in c {
                    value.insert(l.var(), rng.gen());
                }
            }
        }
    }
    Err(Error::ComponentTooLarge {
        size: vars.len(),
        cap: exhaustive_cap,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BadSatAssignment {
    pub assignment: PartialAssignment,
}

pub fn find_bad_sat_assignment(
    formula: &Formula,
    cls: &Classification,
    seed: u64,
    exhaustive_cap: usize,
    max_resamples: usize,
) -> Result<BadSatAssignment> {
    let mut assignment = PartialAssignment::new();
    for (idx, comp) in cls.bad_components.iter().enumerate() {
        let clauses: Vec<Vec<Literal>> = cls
            .component_clauses(formula, comp)
            .into_iter()
            .map(|c| formula.clause(c).literals().to_vec())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, BAD_SAT_STREAM, idx as u64));
        match solve_local(&clauses, comp, exhaustive_cap, &mut rng, max_resamples)? {
            Some(a) => assignment = assignment.union(&a).expect("components are disjoint"),
            None => return Err(Error::BadComponentUnsat { first_var: comp[0] }),
        }
    }
    Ok(BadSatAssignment { assignment })
}

/// Number of leading marked literals of a good clause that Λ* must satisfy:
/// `max(1, ceil(k/20))`.
pub fn truncation_length(k: usize) -> usize {
    k.div_ceil(20).max(1)
}

/// The first `truncation_length(k)` literals of clause `c` on marked
/// variables, in literal order.
pub fn truncated_literals(formula: &Formula, marking: &Marking, c: ClauseId) -> Vec<Literal> {
    formula
        .clause(c)
        .ordered_literals()
        .into_iter()
        .filter(|l| marking.is_marked(l.var()))
        .take(truncation_length(formula.k()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LambdaStar {
    pub assignment: PartialAssignment,
    /// The assigned variables in the order they are fixed one at a time.
    pub order: Vec<Var>,
}

impl LambdaStar {
    /// The assignment restricted to the first `len` variables of `order`.
    pub fn prefix(&self, len: usize) -> PartialAssignment {
        self.order[..len]
            .iter()
            .map(|&v| (v, self.assignment.get(v).expect("order lists assigned variables")))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

pub fn find_lambda_star(
    formula: &Formula,
    cls: &Classification,
    marking: &Marking,
    seed: u64,
    exhaustive_cap: usize,
    max_resamples: usize,
) -> Result<LambdaStar> {
    let truncated: Vec<(ClauseId, Vec<Literal>)> = cls
        .good_clauses
        .iter()
        .map(|&c| (c, truncated_literals(formula, marking, c)))
        .collect();
    if let Some((c, _)) = truncated.iter().find(|(_, lits)| lits.is_empty()) {
        return Err(Error::LambdaStarNotFound { clause: *c });
    }

    // Components of truncated clauses linked through shared variables.
    let mut by_var: Vec<Vec<usize>> = vec![Vec::new(); formula.n() + 1];
    for (i, (_, lits)) in truncated.iter().enumerate() {
        for l in lits {
            by_var[l.var() as usize].push(i);
        }
    }
    let adjacency: Vec<Vec<usize>> = truncated
        .iter()
        .enumerate()
        .map(|(i, (_, lits))| {
            let mut adj: Vec<usize> = lits
                .iter()
                .flat_map(|l| by_var[l.var() as usize].iter().copied())
                .filter(|&j| j != i)
                .collect();
            adj.sort_unstable();
            adj.dedup();
            adj
        })
        .collect();
    let all: Vec<usize> = (0..truncated.len()).collect();

    let mut assignment = PartialAssignment::new();
    for (idx, comp) in connected_components(&adjacency, &all).iter().enumerate() {
        let clauses: Vec<Vec<Literal>> = comp.iter().map(|&i| truncated[i].1.clone()).collect();
        let mut vars: Vec<Var> = clauses.iter().flatten().map(|l| l.var()).collect();
        vars.sort_unstable();
        vars.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, LAMBDA_STREAM, idx as u64));
        let first = truncated[comp[0]].0;
        match solve_local(&clauses, &vars, exhaustive_cap, &mut rng, max_resamples) {
            Ok(Some(a)) => assignment = assignment.union(&a).expect("components are disjoint"),
            Ok(None) | Err(Error::ComponentTooLarge { .. }) => return Err(Error::LambdaStarNotFound { clause: first }),
            Err(e) => return Err(e),
        }
    }
    let order = assignment.domain().collect();
    Ok(LambdaStar { assignment, order })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LambdaStarReport {
    /// Good clauses whose truncated prefix is not satisfied.
    pub unsatisfied: Vec<ClauseId>,
    /// Assigned variables that are not marked.
    pub unmarked_assigned: Vec<Var>,
    /// `order` lists exactly the assigned variables, ascending.
    pub order_ok: bool,
}

impl LambdaStarReport {
    pub fn is_ok(&self) -> bool {
        self.unsatisfied.is_empty() && self.unmarked_assigned.is_empty() && self.order_ok
    }
}

pub fn verify_lambda_star(
    formula: &Formula,
    cls: &Classification,
    marking: &Marking,
    lambda: &LambdaStar,
) -> LambdaStarReport {
    let unsatisfied = cls
        .good_clauses
        .iter()
        .copied()
        .filter(|&c| {
            !truncated_literals(formula, marking, c)
                .iter()
                .any(|l| lambda.assignment.get(l.var()).is_some_and(|b| l.eval(b)))
        })
        .collect();
    let unmarked_assigned = lambda.assignment.domain().filter(|&v| !marking.is_marked(v)).collect();
    let order_ok = lambda.order.windows(2).all(|w| w[0] < w[1])
        && lambda.order.len() == lambda.assignment.len()
        && lambda.order.iter().all(|&v| lambda.assignment.contains(v));
    LambdaStarReport {
        unsatisfied,
        unmarked_assigned,
        order_ok,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrefixReport {
    /// Surviving good clauses with fewer than k/4 unassigned marked
    /// variables, with that count.
    pub violations: Vec<(ClauseId, usize)>,
    /// Number of good clauses surviving the prefix.
    pub surviving_good: usize,
}

/// Checks that every good clause not satisfied by `prefix` keeps at least
/// k/4 unassigned marked variables.
pub fn verify_prefix_property(
    formula: &Formula,
    cls: &Classification,
    marking: &Marking,
    prefix: &PartialAssignment,
) -> PrefixReport {
    let mut violations = Vec::new();
    let mut surviving_good = 0;
    for &c in &cls.good_clauses {
        if formula.clause(c).is_satisfied_by(prefix) {
            continue;
        }
        surviving_good += 1;
        let free_marked = formula
            .clause_vars(c)
            .iter()
            .filter(|&&v| marking.is_marked(v) && !prefix.contains(v))
            .count();
        if !meets(free_marked, &unmarked_fraction(), formula.k()) {
            violations.push((c, free_marked));
        }
    }
    PrefixReport {
        violations,
        surviving_good,
    }
}
