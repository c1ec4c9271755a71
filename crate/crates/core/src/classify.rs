//! Splitting variables and clauses into good and bad parts by propagating
//! from high-degree variables, plus the graphs built on each part.

use num_rational::Ratio;
use serde::Serialize;

use crate::formula::{connected_components, ClauseId, Formula, Var};
use crate::rational::meets;

/// Default high-degree threshold: `max(2, ceil(2^(k/300)))`.
pub fn default_delta(k: usize) -> usize {
    let paper = (2f64.powf(k as f64 / 300.0)).ceil() as usize;
    paper.max(2)
}

pub fn default_bad_fraction() -> Ratio<u64> {
    Ratio::new(1, 10)
}

/// Variables with at least `delta` literal occurrences, counted with
/// multiplicity.
pub fn high_degree_vars(formula: &Formula, delta: usize) -> Vec<Var> {
    let occ = formula.occurrence_counts();
    formula.vars().filter(|&v| occ[v as usize] >= delta).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub k: usize,
    pub delta: usize,
    #[serde(serialize_with = "ser_fraction")]
    pub bad_fraction: Ratio<u64>,
    /// High-degree variables.
    pub v0: Vec<Var>,
    /// Number of propagation rounds that enlarged the bad variable set.
    pub rounds: usize,
    pub bad_vars: Vec<Var>,
    pub bad_clauses: Vec<ClauseId>,
    pub good_vars: Vec<Var>,
    pub good_clauses: Vec<ClauseId>,
    /// Connected components of the bad variable graph, by smallest variable.
    pub bad_components: Vec<Vec<Var>>,
    #[serde(skip)]
    bad_var_mask: Vec<bool>,
    #[serde(skip)]
    bad_clause_mask: Vec<bool>,
}

fn ser_fraction<S: serde::Serializer>(f: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", f.numer(), f.denom()))
}

/// Clauses with at least `fraction * k` distinct variables inside `mask`.
fn over_threshold(formula: &Formula, mask: &[bool], fraction: &Ratio<u64>) -> Vec<bool> {
    (0..formula.m())
        .map(|c| {
            let hits = formula.clause_vars(c).iter().filter(|&&v| mask[v as usize]).count();
            meets(hits, fraction, formula.k())
        })
        .collect()
}

pub fn classify(formula: &Formula, delta: usize, bad_fraction: Ratio<u64>) -> Classification {
    assert!(
        *bad_fraction.numer() > 0 && bad_fraction <= Ratio::from_integer(1),
        "bad_fraction must lie in (0, 1]"
    );
    let v0 = high_degree_vars(formula, delta);
    let mut bad = vec![false; formula.n() + 1];
    for &v in &v0 {
        bad[v as usize] = true;
    }
    let mut clauses = over_threshold(formula, &bad, &bad_fraction);
    let mut rounds = 0;
    loop {
        let mut grew = false;
        for c in (0..formula.m()).filter(|&c| clauses[c]) {
            for &v in formula.clause_vars(c) {
                if !bad[v as usize] {
                    bad[v as usize] = true;
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
        rounds += 1;
        clauses = over_threshold(formula, &bad, &bad_fraction);
    }
    Classification::from_masks(formula, delta, bad_fraction, v0, rounds, bad, clauses)
}

impl Classification {
    fn from_masks(
        formula: &Formula,
        delta: usize,
        bad_fraction: Ratio<u64>,
        v0: Vec<Var>,
        rounds: usize,
        bad_var_mask: Vec<bool>,
        bad_clause_mask: Vec<bool>,
    ) -> Self {
        let (bad_vars, good_vars): (Vec<Var>, Vec<Var>) = formula.vars().partition(|&v| bad_var_mask[v as usize]);
        let (bad_clauses, good_clauses): (Vec<ClauseId>, Vec<ClauseId>) =
            (0..formula.m()).partition(|&c| bad_clause_mask[c]);
        let mut out = Classification {
            k: formula.k(),
            delta,
            bad_fraction,
            v0,
            rounds,
            bad_vars,
            bad_clauses,
            good_vars,
            good_clauses,
            bad_components: Vec::new(),
            bad_var_mask,
            bad_clause_mask,
        };
        out.bad_components = connected_components(&out.bad_graph(formula), &out.bad_vars);
        out
    }

    pub fn is_bad_var(&self, v: Var) -> bool {
        self.bad_var_mask[v as usize]
    }

    pub fn is_good_var(&self, v: Var) -> bool {
        !self.bad_var_mask[v as usize]
    }

    pub fn is_bad_clause(&self, c: ClauseId) -> bool {
        self.bad_clause_mask[c]
    }

    pub fn is_good_clause(&self, c: ClauseId) -> bool {
        !self.bad_clause_mask[c]
    }

    /// Good clauses adjacent iff they share a good variable, indexed by
    /// clause id (bad clauses have no neighbours).
    pub fn good_graph(&self, formula: &Formula) -> Vec<Vec<ClauseId>> {
        let mut by_var: Vec<Vec<ClauseId>> = vec![Vec::new(); formula.n() + 1];
        for &c in &self.good_clauses {
            for &v in formula.clause_vars(c) {
                if self.is_good_var(v) {
                    by_var[v as usize].push(c);
                }
            }
        }
        let mut adj = vec![Vec::new(); formula.m()];
        for &c in &self.good_clauses {
            for &v in formula.clause_vars(c) {
                if self.is_good_var(v) {
                    adj[c].extend(by_var[v as usize].iter().copied().filter(|&d| d != c));
                }
            }
            adj[c].sort_unstable();
            adj[c].dedup();
        }
        adj
    }

    /// Bad variables adjacent iff they co-occur in a bad clause, indexed by
    /// variable.
    pub fn bad_graph(&self, formula: &Formula) -> Vec<Vec<Var>> {
        let mut adj = vec![Vec::new(); formula.n() + 1];
        for &c in &self.bad_clauses {
            let vs = formula.clause_vars(c);
            for &v in vs {
                adj[v as usize].extend(vs.iter().copied().filter(|&w| w != v));
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Bad clauses whose variables lie in `component`.
    pub fn component_clauses(&self, formula: &Formula, component: &[Var]) -> Vec<ClauseId> {
        self.bad_clauses
            .iter()
            .copied()
            .filter(|&c| {
                formula
                    .clause_vars(c)
                    .first()
                    .is_some_and(|v| component.binary_search(v).is_ok())
            })
            .collect()
    }

    /// High-degree variables inside `set`.
    pub fn high_degree_part(&self, set: &[Var]) -> Vec<Var> {
        set.iter()
            .copied()
            .filter(|v| self.v0.binary_search(v).is_ok())
            .collect()
    }
}

/// Closure of `seed` under adding `var(c)` for any clause `c` with at least
/// `fraction * k` variables already inside and at least one outside. Clauses
/// are scanned in index order and the scan restarts after every addition.
pub fn bc_closure(formula: &Formula, seed: &[Var], fraction: &Ratio<u64>) -> Vec<Var> {
    let mut inside = vec![false; formula.n() + 1];
    for &v in seed {
        inside[v as usize] = true;
    }
    'outer: loop {
        for c in 0..formula.m() {
            let vs = formula.clause_vars(c);
            let hits = vs.iter().filter(|&&v| inside[v as usize]).count();
            if hits < vs.len() && meets(hits, fraction, formula.k()) {
                for &v in vs {
                    inside[v as usize] = true;
                }
                continue 'outer;
            }
        }
        break;
    }
    formula.vars().filter(|&v| inside[v as usize]).collect()
}
