//! Bisection on the leaf-ratio window of the coupling-tree LP to estimate
//! `|Ω^{Λ, v*=T}| / |Ω^{Λ, v*=F}|`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lp::{build_lp, solve, Bound, LpMode, Solver};
use crate::rational::{exp_lower, int, show};
use crate::tree::{build_tree, CouplingTree, TreeContext, TreeParams, TreeStats};

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.show())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BisectMode {
    /// Window `[2^-n, 2^n]`, geometric midpoints.
    Geometric,
    /// Window `((3s-1)/(3s+1), (3s+1)/(3s-1))`, arithmetic midpoints.
    Paper,
}

impl std::str::FromStr for BisectMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(BisectMode::Geometric),
            "paper" => Ok(BisectMode::Paper),
            _ => Err(Error::InvalidConfig(format!("unknown bisection mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateParams {
    pub eps: BigRational,
    pub s: BigRational,
    pub bisect: BisectMode,
    pub lp: LpMode,
    pub simplex_cap: usize,
    pub tree: TreeParams,
}

#[derive(Debug, Clone, Serialize)]
pub struct Query {
    pub lower: Bound,
    pub upper: Bound,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioEstimate {
    pub pivot: u32,
    pub p: Bound,
    pub p_lower: Bound,
    pub p_upper: Bound,
    pub iterations: usize,
    pub solver: Option<Solver>,
    pub tree: TreeStats,
    pub trace: Vec<Query>,
}

struct Oracle<'t> {
    tree: &'t CouplingTree,
    params: &'t EstimateParams,
    trace: Vec<Query>,
    solver: Option<Solver>,
}

impl Oracle<'_> {
    fn feasible(&mut self, lower: Bound, upper: Bound) -> Result<bool> {
        let lp = build_lp(self.tree, &lower, &upper, &self.params.s)?;
        let out = solve(&lp, self.params.lp, self.params.simplex_cap)?;
        self.solver = Some(out.solver);
        self.trace.push(Query {
            lower,
            upper,
            feasible: out.feasible,
        });
        Ok(out.feasible)
    }
}

/// A rational strictly between `lo` and `hi`, close to `sqrt(lo * hi)` and
/// with a short binary expansion.
fn geometric_midpoint(lo: &BigRational, hi: &BigRational) -> BigRational {
    let arithmetic = (lo + hi) / int(2);
    let (Some(l), Some(h)) = (lo.to_f64(), hi.to_f64()) else {
        return arithmetic;
    };
    let target = ((l.ln() + h.ln()) / 2.0).exp();
    if !target.is_finite() || target <= 0.0 {
        return arithmetic;
    }
    for bits in 0..128u32 {
        let scale = BigInt::one() << bits;
        let Some(num) = BigRational::from_float(target * 2f64.powi(bits as i32)) else {
            break;
        };
        let m = BigRational::new(num.round().to_integer(), scale);
        if &m > lo && &m < hi {
            return m;
        }
    }
    arithmetic
}

/// Estimates the ratio for an already-built tree.
pub fn estimate_on_tree(tree: &CouplingTree, n: usize, params: &EstimateParams) -> Result<RatioEstimate> {
    if !params.eps.is_positive() {
        return Err(Error::InvalidConfig("eps must be positive".into()));
    }
    let mut oracle = Oracle {
        tree,
        params,
        trace: Vec::new(),
        solver: None,
    };
    let finish = |oracle: Oracle, p: Bound, lo: Bound, hi: Bound, iterations: usize| RatioEstimate {
        pivot: tree.pivot,
        p,
        p_lower: lo,
        p_upper: hi,
        iterations,
        solver: oracle.solver,
        tree: tree.stats(),
        trace: oracle.trace,
    };
    let zero = BigRational::zero();
    if oracle.feasible(Bound::Finite(zero.clone()), Bound::Finite(zero.clone()))? {
        let z = || Bound::Finite(BigRational::zero());
        return Ok(finish(oracle, z(), z(), z(), 0));
    }
    if oracle.feasible(Bound::Infinite, Bound::Infinite)? {
        return Ok(finish(oracle, Bound::Infinite, Bound::Infinite, Bound::Infinite, 0));
    }

    let (mut lo, mut hi) = match params.bisect {
        BisectMode::Geometric => {
            let two_n = BigRational::from_integer(BigInt::one() << n);
            (two_n.recip(), two_n)
        }
        BisectMode::Paper => {
            let three_s = int(3) * &params.s;
            if three_s <= BigRational::one() {
                return Err(Error::InvalidConfig(format!(
                    "paper bisection needs s > 1/3, got {}",
                    show(&params.s)
                )));
            }
            let a = &three_s - BigRational::one();
            let b = &three_s + BigRational::one();
            (&a / &b, &b / &a)
        }
    };
    if !oracle.feasible(Bound::Finite(lo.clone()), Bound::Finite(hi.clone()))? {
        return Err(Error::BisectionStalled(format!(
            "initial window [{}, {}] is infeasible",
            show(&lo),
            show(&hi)
        )));
    }
    let gamma = exp_lower(&(&params.eps / int(3 * n.max(1) as i64)));
    let mut iterations = 0;
    while hi > &gamma * &lo {
        iterations += 1;
        let mid = match params.bisect {
            BisectMode::Geometric => geometric_midpoint(&lo, &hi),
            BisectMode::Paper => (&lo + &hi) / int(2),
        };
        if oracle.feasible(Bound::Finite(lo.clone()), Bound::Finite(mid.clone()))? {
            hi = mid;
        } else if oracle.feasible(Bound::Finite(mid.clone()), Bound::Finite(hi.clone()))? {
            lo = mid;
        } else {
            return Err(Error::BisectionStalled(format!(
                "both halves of [{}, {}] split at {} are infeasible",
                show(&lo),
                show(&hi),
                show(&mid)
            )));
        }
    }
    let p = (&lo + &hi) / int(2);
    Ok(finish(
        oracle,
        Bound::Finite(p),
        Bound::Finite(lo),
        Bound::Finite(hi),
        iterations,
    ))
}

/// Builds the coupling tree for `ctx` and runs the bisection on it.
pub fn estimate_ratio(ctx: &TreeContext, params: &EstimateParams) -> Result<RatioEstimate> {
    let tree = build_tree(ctx, &params.tree)?;
    estimate_on_tree(&tree, ctx.formula.n(), params)
}
