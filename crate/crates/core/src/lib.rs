//! Approximate model counting for random k-CNF formulas.
//!
//! The pipeline splits the formula into good and bad parts, marks a subset of
//! good variables, fixes a partial assignment of marked variables that
//! satisfies every good clause, and estimates each conditional marginal along
//! that assignment by deciding feasibility of a linear program built over a
//! coupling tree. The bad part is counted exactly.

pub mod audit;
pub mod canonical;
pub mod classify;
pub mod config;
pub mod counter;
pub mod dimacs;
pub mod enumerate;
pub mod error;
pub mod estimate;
pub mod formula;
pub mod invariants;
pub mod lp;
pub mod marking;
pub mod pipeline;
pub mod rational;
pub mod tree;

pub use error::{Error, ErrorClass, Result};
pub use formula::{Clause, ClauseId, Formula, Literal, PartialAssignment, Var};
