//! Exact model counting by connected-component decomposition, and the
//! end-to-end approximate counter.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::classify::Classification;
use crate::config::Config;
use crate::enumerate::LocalCnf;
use crate::error::{Error, Result};
use crate::estimate::{estimate_ratio, EstimateParams, RatioEstimate};
use crate::formula::{connected_components, simplify_under, ClauseId, Formula, PartialAssignment, Var};
use crate::lp::Bound;
use crate::marking::LambdaStar;
use crate::pipeline::{prepare, Prepared};
use crate::tree::TreeContext;

pub const DEFAULT_COMPONENT_CAP: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMethod {
    Enumeration,
    ComponentProduct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentCount {
    pub vars: Vec<Var>,
    #[serde(with = "crate::rational::serde_big")]
    pub count: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExactCount {
    #[serde(with = "crate::rational::serde_big")]
    pub count: BigUint,
    pub method: CountMethod,
    pub components: Vec<ComponentCount>,
    /// Unassigned variables that occur in no surviving clause.
    pub unconstrained: usize,
}

/// Number of satisfying assignments of `formula`.
pub fn exact_count(formula: &Formula, cap: usize) -> Result<ExactCount> {
    exact_count_under(formula, &PartialAssignment::new(), cap)
}

/// Number of satisfying assignments of the formula simplified under
/// `assignment`, i.e. of extensions of `assignment` to the remaining
/// variables. Components of the co-occurrence graph of the surviving clauses
/// are counted separately and multiplied.
pub fn exact_count_under(formula: &Formula, assignment: &PartialAssignment, cap: usize) -> Result<ExactCount> {
    let simplified = simplify_under(formula, assignment);
    let surviving: Vec<ClauseId> = simplified.clause_ids().collect();
    component_product(formula, assignment, &surviving, &simplified.free_vars, cap)
}

fn component_product(
    formula: &Formula,
    assignment: &PartialAssignment,
    clauses: &[ClauseId],
    free_vars: &[Var],
    cap: usize,
) -> Result<ExactCount> {
    let mut adjacency: Vec<Vec<Var>> = vec![Vec::new(); formula.n() + 1];
    let mut constrained = vec![false; formula.n() + 1];
    let mut by_var: Vec<Vec<ClauseId>> = vec![Vec::new(); formula.n() + 1];
    for &c in clauses {
        let vs: Vec<Var> = formula
            .clause_vars(c)
            .iter()
            .copied()
            .filter(|&v| !assignment.contains(v))
            .collect();
        if vs.is_empty() {
            return Ok(ExactCount {
                count: BigUint::zero(),
                method: CountMethod::ComponentProduct,
                components: Vec::new(),
                unconstrained: 0,
            });
        }
        for &v in &vs {
            constrained[v as usize] = true;
            adjacency[v as usize].extend(vs.iter().copied().filter(|&w| w != v));
        }
        by_var[vs[0] as usize].push(c);
    }
    let in_clauses: Vec<Var> = free_vars.iter().copied().filter(|&v| constrained[v as usize]).collect();
    let unconstrained = free_vars.len() - in_clauses.len();

    let mut count = BigUint::one() << unconstrained;
    let mut components = Vec::new();
    for comp in connected_components(&adjacency, &in_clauses) {
        if comp.len() > cap {
            return Err(Error::ComponentTooLarge { size: comp.len(), cap });
        }
        let comp_clauses = comp.iter().flat_map(|&v| by_var[v as usize].iter().copied());
        let c = BigUint::from(LocalCnf::new(formula, comp_clauses, assignment, &comp)?.count());
        count *= &c;
        components.push(ComponentCount { vars: comp, count: c });
        if count.is_zero() {
            break;
        }
    }
    Ok(ExactCount {
        count,
        method: CountMethod::ComponentProduct,
        components,
        unconstrained,
    })
}

/// Monolithic enumeration over every unassigned variable. Only for small
/// instances; used to cross-check the component product.
pub fn enumerate_count(formula: &Formula, assignment: &PartialAssignment) -> Result<ExactCount> {
    let free: Vec<Var> = formula.vars().filter(|&v| !assignment.contains(v)).collect();
    let cnf = LocalCnf::new(formula, 0..formula.m(), assignment, &free)?;
    Ok(ExactCount {
        count: BigUint::from(cnf.count()),
        method: CountMethod::Enumeration,
        components: Vec::new(),
        unconstrained: 0,
    })
}

/// Number of extensions of Λ*. Every clause surviving Λ* must be bad; the
/// count is the product over bad components times two to the number of free
/// variables outside them.
pub fn count_residual(formula: &Formula, lambda: &LambdaStar, cls: &Classification, cap: usize) -> Result<ExactCount> {
    let simplified = simplify_under(formula, &lambda.assignment);
    if let Some(c) = simplified.clause_ids().find(|&c| cls.is_good_clause(c)) {
        return Err(Error::NotFullyGoodSatisfied(c));
    }
    let mut count = BigUint::one();
    let mut components = Vec::new();
    let mut covered = 0;
    for comp in &cls.bad_components {
        if comp.len() > cap {
            return Err(Error::ComponentTooLarge { size: comp.len(), cap });
        }
        let clauses = cls.component_clauses(formula, comp);
        let c = BigUint::from(LocalCnf::new(formula, clauses, &lambda.assignment, comp)?.count());
        count *= &c;
        covered += comp.len();
        components.push(ComponentCount {
            vars: comp.clone(),
            count: c,
        });
    }
    let unconstrained = simplified.free_vars.len() - covered;
    count <<= unconstrained;
    Ok(ExactCount {
        count,
        method: CountMethod::ComponentProduct,
        components,
        unconstrained,
    })
}

/// One self-reducibility step: the estimated ratio for `var` given the
/// earlier variables of Λ*, and the resulting marginal `q`.
#[derive(Debug, Clone, Serialize)]
pub struct Step {
    pub var: Var,
    pub value: bool,
    pub p: Bound,
    #[serde(with = "crate::rational::serde_str")]
    pub q: BigRational,
    pub estimate: RatioEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxCount {
    #[serde(with = "crate::rational::serde_str")]
    pub z: BigRational,
    #[serde(with = "crate::rational::serde_str")]
    pub eps: BigRational,
    /// Exact number of extensions of Λ*.
    pub residual: ExactCount,
    pub steps: Vec<Step>,
    pub prepared: Prepared,
}

/// Estimated probability that `var` takes `value`, given its ratio
/// estimate `p` of (count with T) / (count with F).
pub fn marginal(p: &Bound, value: bool) -> BigRational {
    match (p, value) {
        (Bound::Infinite, true) => BigRational::one(),
        (Bound::Infinite, false) => BigRational::zero(),
        (Bound::Finite(p), true) => p / (BigRational::one() + p),
        (Bound::Finite(p), false) => (BigRational::one() + p).recip(),
    }
}

/// Estimates for every step of Λ*, in order. With `threads > 1` the steps
/// run concurrently; the result (including which error is reported) is the
/// same as the sequential run.
fn estimate_steps(
    formula: &Formula,
    prep: &Prepared,
    params: &EstimateParams,
    threads: usize,
) -> Result<Vec<RatioEstimate>> {
    let lambda = &prep.lambda_star;
    let one = |i: usize| -> Result<RatioEstimate> {
        let ctx = TreeContext::new(
            formula,
            &prep.classification,
            &prep.marking,
            &lambda.prefix(i),
            lambda.order[i],
        )
        .map_err(|e| e.at("tree"))?;
        estimate_ratio(&ctx, params).map_err(|e| e.at("estimate"))
    };
    let j = lambda.len();
    if threads <= 1 || j <= 1 {
        return (0..j).map(one).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RatioEstimate>>>> = Mutex::new((0..j).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.min(j) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= j {
                    break;
                }
                let r = one(i);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every step ran"))
        .collect()
}

/// The approximate count `Z = |Ω^{Λ*}| / ∏ q_i`.
pub fn approx_count(formula: &Formula, config: &Config, threads: usize) -> Result<ApproxCount> {
    let prep = prepare(formula, config)?;
    let residual = count_residual(formula, &prep.lambda_star, &prep.classification, config.component_cap)
        .map_err(|e| e.at("residual"))?;
    if residual.count.is_zero() {
        return Err(Error::Unsatisfiable.at("residual"));
    }
    let params = config.estimate_params(&prep.resolved);
    let estimates = estimate_steps(formula, &prep, &params, threads)?;
    let mut product = BigRational::one();
    let mut steps = Vec::with_capacity(estimates.len());
    for (i, estimate) in estimates.into_iter().enumerate() {
        let var = prep.lambda_star.order[i];
        let value = prep
            .lambda_star
            .assignment
            .get(var)
            .expect("order lists assigned variables");
        let q = marginal(&estimate.p, value);
        if q.is_zero() {
            return Err(Error::InvariantViolation(format!(
                "variable {var} has estimated marginal 0 for its Λ* value, yet Λ* extends to a model"
            )));
        }
        product *= &q;
        steps.push(Step {
            var,
            value,
            p: estimate.p.clone(),
            q,
            estimate,
        });
    }
    let z = BigRational::from_integer(BigInt::from(residual.count.clone())) / product;
    Ok(ApproxCount {
        z,
        eps: config.eps.clone(),
        residual,
        steps,
        prepared: prep,
    })
}
