//! k-CNF formulas, partial assignments, simplification and the two
//! dependency graphs (clauses sharing a variable, variables sharing a clause).

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A variable index, 1-based.
pub type Var = u32;
/// A clause index, 0-based position in the formula.
pub type ClauseId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    var: Var,
    positive: bool,
}

impl Literal {
    pub fn new(var: Var, positive: bool) -> Self {
        Literal { var, positive }
    }

    pub fn pos(var: Var) -> Self {
        Literal::new(var, true)
    }

    pub fn neg(var: Var) -> Self {
        Literal::new(var, false)
    }

    pub fn var(self) -> Var {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    pub fn negated(self) -> Self {
        Literal::new(self.var, !self.positive)
    }

    /// Truth value of the literal when its variable takes `value`.
    pub fn eval(self, value: bool) -> bool {
        value == self.positive
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    pub fn from_dimacs(x: i64) -> Option<Self> {
        if x == 0 || x.unsigned_abs() > u32::MAX as u64 {
            return None;
        }
        Some(Literal::new(x.unsigned_abs() as Var, x > 0))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "x{}", self.var)
        } else {
            write!(f, "¬x{}", self.var)
        }
    }
}

/// A clause keeps its literals in input order. Repeated literals, repeated
/// variables and complementary pairs are all allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Self {
        Clause { literals }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn width(&self) -> usize {
        self.literals.len()
    }

    /// Literals sorted by variable index; ties between occurrences of the same
    /// variable keep their input position.
    pub fn ordered_literals(&self) -> Vec<Literal> {
        let mut lits = self.literals.clone();
        lits.sort_by_key(|l| l.var()); // stable
        lits
    }

    /// Distinct variables, ascending.
    pub fn vars(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = self.literals.iter().map(|l| l.var()).collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    pub fn contains_var(&self, v: Var) -> bool {
        self.literals.iter().any(|l| l.var() == v)
    }

    pub fn is_tautology(&self) -> bool {
        self.literals.iter().any(|l| self.literals.contains(&l.negated()))
    }

    /// True iff some literal is made true by `assignment`.
    pub fn is_satisfied_by(&self, assignment: &PartialAssignment) -> bool {
        self.literals
            .iter()
            .any(|l| assignment.get(l.var()).is_some_and(|v| l.eval(v)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FormulaData", into = "FormulaData")]
pub struct Formula {
    k: usize,
    n: usize,
    clauses: Vec<Clause>,
    clause_vars: Vec<Vec<Var>>,
}

#[derive(Serialize, Deserialize)]
struct FormulaData {
    k: usize,
    n: usize,
    clauses: Vec<Clause>,
}

impl TryFrom<FormulaData> for Formula {
    type Error = Error;

    fn try_from(d: FormulaData) -> Result<Self> {
        Formula::new(d.k, d.n, d.clauses)
    }
}

impl From<Formula> for FormulaData {
    fn from(f: Formula) -> Self {
        FormulaData {
            k: f.k,
            n: f.n,
            clauses: f.clauses,
        }
    }
}

impl Formula {
    pub fn new(k: usize, n: usize, clauses: Vec<Clause>) -> Result<Self> {
        for (i, c) in clauses.iter().enumerate() {
            if c.width() != k {
                return Err(Error::NonUniformWidth {
                    clause: i,
                    expected: k,
                    found: c.width(),
                });
            }
            for l in c.literals() {
                if l.var() == 0 || l.var() as usize > n {
                    return Err(Error::VariableOutOfRange { var: l.to_dimacs(), n });
                }
            }
        }
        let clause_vars = clauses.iter().map(Clause::vars).collect();
        Ok(Formula {
            k,
            n,
            clauses,
            clause_vars,
        })
    }

    /// Draws each of the `k * m` literals independently and uniformly from the
    /// `2n` literals over `n` variables.
    pub fn random(k: usize, n: usize, m: usize, seed: u64) -> Self {
        assert!(k >= 1 && n >= 1, "need k >= 1 and n >= 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clauses = (0..m)
            .map(|_| {
                Clause::new(
                    (0..k)
                        .map(|_| {
                            let x = rng.gen_range(0..2 * n);
                            Literal::new((x % n) as Var + 1, x < n)
                        })
                        .collect(),
                )
            })
            .collect();
        Formula::new(k, n, clauses).expect("generated formula is well-formed")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.clauses.len()
    }

    pub fn density(&self) -> f64 {
        self.m() as f64 / self.n as f64
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clause(&self, id: ClauseId) -> &Clause {
        &self.clauses[id]
    }

    /// Distinct variables of clause `id`, ascending.
    pub fn clause_vars(&self, id: ClauseId) -> &[Var] {
        &self.clause_vars[id]
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        1..=self.n as Var
    }

    /// Literal occurrences per variable (index 0 unused), counting repeats.
    pub fn occurrence_counts(&self) -> Vec<usize> {
        let mut occ = vec![0; self.n + 1];
        for c in &self.clauses {
            for l in c.literals() {
                occ[l.var() as usize] += 1;
            }
        }
        occ
    }

    /// For each variable, the clauses containing it (ascending, no repeats).
    pub fn var_occurrences(&self) -> Vec<Vec<ClauseId>> {
        let mut occ = vec![Vec::new(); self.n + 1];
        for (i, vs) in self.clause_vars.iter().enumerate() {
            for &v in vs {
                occ[v as usize].push(i);
            }
        }
        occ
    }

    pub fn is_satisfied_by(&self, assignment: &PartialAssignment) -> bool {
        self.clauses.iter().all(|c| c.is_satisfied_by(assignment))
    }

    pub fn dependency_graphs(&self) -> DependencyGraphs {
        DependencyGraphs::of(self)
    }
}

/// A partial map from variables to truth values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartialAssignment {
    bindings: BTreeMap<Var, bool>,
}

impl PartialAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: Var) -> Option<bool> {
        self.bindings.get(&v).copied()
    }

    /// Binds `v`; panics if `v` is already bound to the opposite value.
    pub fn set(&mut self, v: Var, value: bool) {
        if let Some(old) = self.bindings.insert(v, value) {
            assert_eq!(old, value, "variable {v} bound twice with different values");
        }
    }

    pub fn with(mut self, v: Var, value: bool) -> Self {
        self.set(v, value);
        self
    }

    pub fn contains(&self, v: Var) -> bool {
        self.bindings.contains_key(&v)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn domain(&self) -> impl Iterator<Item = Var> + '_ {
        self.bindings.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.bindings.iter().map(|(&v, &b)| (v, b))
    }

    /// Union of two assignments; `None` if they conflict.
    pub fn union(&self, other: &PartialAssignment) -> Option<PartialAssignment> {
        let mut out = self.clone();
        for (v, b) in other.iter() {
            match out.get(v) {
                Some(x) if x != b => return None,
                _ => {
                    out.bindings.insert(v, b);
                }
            }
        }
        Some(out)
    }
}

impl FromIterator<(Var, bool)> for PartialAssignment {
    fn from_iter<I: IntoIterator<Item = (Var, bool)>>(iter: I) -> Self {
        let mut a = PartialAssignment::new();
        for (v, b) in iter {
            a.set(v, b);
        }
        a
    }
}

/// A clause of Φ that survives a partial assignment, with its false literals
/// removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidualClause {
    pub id: ClauseId,
    pub literals: Vec<Literal>,
}

impl ResidualClause {
    pub fn vars(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = self.literals.iter().map(|l| l.var()).collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }
}

/// Φ simplified under a partial assignment Λ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplifiedFormula {
    pub n: usize,
    pub assignment: PartialAssignment,
    /// Surviving clauses in original order (the clause set C^Λ).
    pub clauses: Vec<ResidualClause>,
    /// Clauses removed because Λ satisfies them.
    pub satisfied: Vec<ClauseId>,
    /// Surviving clauses with no literal left; their presence makes Φ^Λ
    /// unsatisfiable.
    pub emptied: Vec<ClauseId>,
    /// Unassigned variables (the variable set V^Λ), ascending.
    pub free_vars: Vec<Var>,
}

impl SimplifiedFormula {
    pub fn is_unsatisfiable(&self) -> bool {
        !self.emptied.is_empty()
    }

    pub fn clause_ids(&self) -> impl Iterator<Item = ClauseId> + '_ {
        self.clauses.iter().map(|c| c.id)
    }
}

pub fn simplify_under(formula: &Formula, assignment: &PartialAssignment) -> SimplifiedFormula {
    let mut clauses = Vec::new();
    let mut satisfied = Vec::new();
    let mut emptied = Vec::new();
    for (id, c) in formula.clauses().iter().enumerate() {
        if c.is_satisfied_by(assignment) {
            satisfied.push(id);
            continue;
        }
        let literals: Vec<Literal> = c
            .literals()
            .iter()
            .copied()
            .filter(|l| !assignment.contains(l.var()))
            .collect();
        if literals.is_empty() {
            emptied.push(id);
        }
        clauses.push(ResidualClause { id, literals });
    }
    let free_vars = formula.vars().filter(|&v| !assignment.contains(v)).collect();
    SimplifiedFormula {
        n: formula.n(),
        assignment: assignment.clone(),
        clauses,
        satisfied,
        emptied,
        free_vars,
    }
}

/// Clause graph G_Φ (clauses adjacent iff they share a variable) and variable
/// graph H_Φ (variables adjacent iff they co-occur in a clause).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraphs {
    /// Adjacency of clauses, indexed by clause id.
    pub clause_adjacency: Vec<Vec<ClauseId>>,
    /// Adjacency of variables, indexed by variable (index 0 is empty).
    pub var_adjacency: Vec<Vec<Var>>,
}

impl DependencyGraphs {
    pub fn of(formula: &Formula) -> Self {
        let occ = formula.var_occurrences();
        let m = formula.m();
        let mut clause_adjacency = vec![Vec::new(); m];
        for (c, adj) in clause_adjacency.iter_mut().enumerate() {
            for &v in formula.clause_vars(c) {
                adj.extend(occ[v as usize].iter().copied().filter(|&d| d != c));
            }
            adj.sort_unstable();
            adj.dedup();
        }
        let mut var_adjacency = vec![Vec::new(); formula.n() + 1];
        for c in 0..m {
            let vs = formula.clause_vars(c);
            for &v in vs {
                var_adjacency[v as usize].extend(vs.iter().copied().filter(|&w| w != v));
            }
        }
        for adj in &mut var_adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        DependencyGraphs {
            clause_adjacency,
            var_adjacency,
        }
    }
}

/// Vertex types usable as adjacency-list indices.
pub trait GraphNode: Copy + Ord {
    fn index(self) -> usize;
}

impl GraphNode for u32 {
    fn index(self) -> usize {
        self as usize
    }
}

impl GraphNode for usize {
    fn index(self) -> usize {
        self
    }
}

/// Connected components of the subgraph induced by `subset`. Components are
/// listed by their smallest vertex, each sorted ascending.
pub fn connected_components<T: GraphNode>(adjacency: &[Vec<T>], subset: &[T]) -> Vec<Vec<T>> {
    let idx = |x: T| x.index();
    let mut in_subset = vec![false; adjacency.len()];
    for &x in subset {
        in_subset[idx(x)] = true;
    }
    let mut seen = vec![false; adjacency.len()];
    let mut sorted: Vec<T> = subset.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    for &start in &sorted {
        if seen[idx(start)] {
            continue;
        }
        seen[idx(start)] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for &y in &adjacency[idx(x)] {
                if in_subset[idx(y)] && !seen[idx(y)] {
                    seen[idx(y)] = true;
                    comp.push(y);
                    queue.push_back(y);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}
