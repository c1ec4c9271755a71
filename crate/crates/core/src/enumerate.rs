//! Exhaustive enumeration of assignments to a small set of free variables
//! against a set of clauses, with every other variable fixed.

use crate::error::{Error, Result};
use crate::formula::{ClauseId, Formula, Literal, PartialAssignment, Var};

/// Largest number of free variables the bitmask enumeration supports.
pub const MAX_FREE: usize = 40;

/// Clauses compiled to bitmasks over an ordered list of free variables. Bit
/// `j` of an assignment mask is the value of `vars[j]`.
#[derive(Debug, Clone)]
pub struct LocalCnf {
    vars: Vec<Var>,
    /// (positive mask, negative mask) of each clause that is not already
    /// satisfied by the fixed part.
    masks: Vec<(u64, u64)>,
    /// Some clause is falsified by the fixed part alone.
    dead: bool,
}

impl LocalCnf {
    /// Every variable of every listed clause must be in `free` (ascending) or
    /// bound in `fixed`.
    pub fn new(
        formula: &Formula,
        clauses: impl IntoIterator<Item = ClauseId>,
        fixed: &PartialAssignment,
        free: &[Var],
    ) -> Result<Self> {
        Self::from_literals(clauses.into_iter().map(|id| formula.clause(id).literals()), fixed, free)
    }

    pub fn from_literals<'a>(
        clauses: impl IntoIterator<Item = &'a [Literal]>,
        fixed: &PartialAssignment,
        free: &[Var],
    ) -> Result<Self> {
        if free.len() > MAX_FREE {
            return Err(Error::EnumerationCapExceeded {
                free: free.len(),
                cap: MAX_FREE,
            });
        }
        let mut masks = Vec::new();
        let mut dead = false;
        'clauses: for literals in clauses {
            let (mut pos, mut neg) = (0u64, 0u64);
            for lit in literals {
                if let Some(value) = fixed.get(lit.var()) {
                    if lit.eval(value) {
                        continue 'clauses;
                    }
                    continue;
                }
                let j = free.binary_search(&lit.var()).map_err(|_| {
                    Error::InvariantViolation(format!(
                        "clause mentions variable {} that is neither fixed nor free",
                        lit.var()
                    ))
                })?;
                if lit.is_positive() {
                    pos |= 1 << j;
                } else {
                    neg |= 1 << j;
                }
            }
            if pos & neg != 0 {
                continue;
            }
            if pos | neg == 0 {
                dead = true;
            }
            masks.push((pos, neg));
        }
        Ok(LocalCnf {
            vars: free.to_vec(),
            masks,
            dead,
        })
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn satisfies(&self, assignment: u64) -> bool {
        !self.dead
            && self
                .masks
                .iter()
                .all(|&(p, n)| (assignment & p) | (!assignment & n) != 0)
    }

    fn all_assignments(&self) -> impl Iterator<Item = u64> {
        0..(1u64 << self.vars.len())
    }

    pub fn count(&self) -> u64 {
        if self.dead {
            return 0;
        }
        if self.masks.is_empty() {
            return 1 << self.vars.len();
        }
        self.all_assignments().filter(|&a| self.satisfies(a)).count() as u64
    }

    /// The satisfying assignment with the smallest mask, if any.
    pub fn first_solution(&self) -> Option<PartialAssignment> {
        if self.dead {
            return None;
        }
        self.all_assignments()
            .find(|&a| self.satisfies(a))
            .map(|a| self.decode(a))
    }

    pub fn decode(&self, assignment: u64) -> PartialAssignment {
        self.vars
            .iter()
            .enumerate()
            .map(|(j, &v)| (v, assignment >> j & 1 == 1))
            .collect()
    }
}
