//! Fixture corpus and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rksat::classify::{classify, Classification};
use rksat::config::{Config, DeltaSetting};
use rksat::lp::{build_lp, solve, Bound, LpMode};
use rksat::marking::Marking;
use rksat::pipeline::prepare;
use rksat::tree::{build_tree, CouplingNode, CouplingTree, Depth, NodeKind, TreeContext, TreeParams};
use rksat::{Clause, Formula, Literal, PartialAssignment, Var};

/// All models of a formula with at most 20 variables, as bitmasks (bit
/// `v - 1` holds variable `v`).
pub struct Models {
    pub n: usize,
    pub models: Vec<u32>,
}

impl Models {
    pub fn of(f: &Formula) -> Models {
        assert!(f.n() <= 20);
        let masks: Vec<(u32, u32)> = f
            .clauses()
            .iter()
            .map(|c| {
                let mut pos = 0u32;
                let mut neg = 0u32;
                for l in c.literals() {
                    let bit = 1u32 << (l.var() - 1);
                    if l.is_positive() {
                        pos |= bit;
                    } else {
                        neg |= bit;
                    }
                }
                (pos, neg)
            })
            .collect();
        let models = (0..1u32 << f.n())
            .filter(|&x| masks.iter().all(|&(p, q)| x & p != 0 || !x & q != 0))
            .collect();
        Models { n: f.n(), models }
    }

    pub fn agrees(x: u32, a: &PartialAssignment) -> bool {
        a.iter().all(|(v, b)| (x >> (v - 1) & 1 == 1) == b)
    }

    pub fn count(&self, a: &PartialAssignment) -> u64 {
        self.models.iter().filter(|&&x| Models::agrees(x, a)).count() as u64
    }

    pub fn consistent<'a>(&'a self, a: &'a PartialAssignment) -> impl Iterator<Item = u32> + 'a {
        self.models.iter().copied().filter(move |&x| Models::agrees(x, a))
    }
}

pub fn value(x: u32, v: Var) -> bool {
    x >> (v - 1) & 1 == 1
}

pub fn big(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

pub fn rat(a: u64, b: u64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

/// A pivot with its surroundings: everything needed to build a tree.
pub struct Fixture {
    pub name: String,
    pub formula: Formula,
    pub cls: Classification,
    pub marking: Marking,
    pub lambda: PartialAssignment,
    pub pivot: Var,
}

impl Fixture {
    pub fn ctx(&self) -> TreeContext<'_> {
        TreeContext::new(&self.formula, &self.cls, &self.marking, &self.lambda, self.pivot).expect("fixture context")
    }

    pub fn tree(&self) -> CouplingTree {
        self.tree_at(Depth::Infinite)
    }

    pub fn tree_at(&self, depth: Depth) -> CouplingTree {
        let params = TreeParams {
            depth,
            ..TreeParams::default()
        };
        build_tree(&self.ctx(), &params).expect("fixture tree")
    }

    /// `|Ω^{Λ, pivot=T}| / |Ω^{Λ, pivot=F}|` by enumeration, as
    /// (numerator, denominator).
    pub fn oracle_ratio(&self, models: &Models) -> (u64, u64) {
        let t = models.count(&self.lambda.clone().with(self.pivot, true));
        let f = models.count(&self.lambda.clone().with(self.pivot, false));
        (t, f)
    }
}

pub fn formula(k: usize, n: usize, clauses: &[&[i64]]) -> Formula {
    Formula::new(
        k,
        n,
        clauses
            .iter()
            .map(|c| Clause::new(c.iter().map(|&x| Literal::from_dimacs(x).unwrap()).collect()))
            .collect(),
    )
    .unwrap()
}

/// One fixture per step of Λ*, over a grid of small random formulas run
/// through the real pipeline.
pub fn pipeline_fixtures(limit: usize) -> Vec<Fixture> {
    let mut out = Vec::new();
    for seed in 0..40u64 {
        for (k, n, m) in [
            (3, 10, 5),
            (3, 12, 6),
            (4, 12, 6),
            (4, 14, 7),
            (5, 14, 7),
            (3, 12, 12),
            (4, 12, 12),
        ] {
            if out.len() >= limit {
                return out;
            }
            let f = Formula::random(k, n, m, seed * 97 + n as u64);
            let config = Config {
                seed,
                delta: DeltaSetting::Fixed(8),
                retries: 50,
                ..Config::default()
            };
            let Ok(prep) = prepare(&f, &config) else { continue };
            for i in 0..prep.lambda_star.len() {
                out.push(Fixture {
                    name: format!("pipeline k={k} n={n} m={m} seed={seed} step={i}"),
                    formula: f.clone(),
                    cls: prep.classification.clone(),
                    marking: prep.marking.clone(),
                    lambda: prep.lambda_star.prefix(i),
                    pivot: prep.lambda_star.order[i],
                });
            }
        }
    }
    out
}

/// Random formulas with an arbitrary marking (not necessarily meeting the
/// per-clause thresholds), an arbitrary Λ on marked variables and an
/// arbitrary unassigned marked pivot.
pub fn random_fixtures(count: usize, seed: u64) -> Vec<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let k = rng.gen_range(2..=5);
        let n = rng.gen_range(k.max(4)..=13);
        let m = rng.gen_range(1..=2 * n);
        let f = Formula::random(k, n, m, rng.gen());
        let delta = rng.gen_range(3..=12);
        let cls = classify(&f, delta, Ratio::new(1, 10));
        let marked: Vec<Var> = cls.good_vars.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
        if marked.is_empty() {
            continue;
        }
        let marking = Marking::from_vars(n, marked.iter().copied());
        let mut lambda = PartialAssignment::new();
        for &v in &marked {
            if rng.gen_bool(0.2) {
                lambda.set(v, rng.gen());
            }
        }
        let free: Vec<Var> = marked.iter().copied().filter(|&v| !lambda.contains(v)).collect();
        if free.is_empty() {
            continue;
        }
        let pivot = free[rng.gen_range(0..free.len())];
        if TreeContext::new(&f, &cls, &marking, &lambda, pivot).is_err() {
            continue;
        }
        out.push(Fixture {
            name: format!("random #{} k={k} n={n} m={m}", out.len()),
            formula: f,
            cls,
            marking,
            lambda,
            pivot,
        });
    }
    out
}

fn crafted(name: &str, f: Formula, marked: &[Var], lambda: &[(Var, bool)], pivot: Var) -> Fixture {
    let cls = classify(&f, 1000, Ratio::new(1, 10));
    Fixture {
        name: name.into(),
        marking: Marking::from_vars(f.n(), marked.iter().copied()),
        formula: f,
        cls,
        lambda: lambda.iter().copied().collect(),
        pivot,
    }
}

/// Hand-made corner cases.
pub fn crafted_fixtures() -> Vec<Fixture> {
    vec![
        crafted(
            "isolated pivot",
            formula(3, 6, &[&[2, 3, 4], &[-4, 5, 6]]),
            &[1, 2, 4, 5],
            &[],
            1,
        ),
        crafted(
            "chain of clauses through marked variables",
            formula(3, 9, &[&[1, 2, 3], &[-2, 4, 5], &[-4, 6, 7], &[-6, 8, 9]]),
            &[1, 2, 4, 6, 8],
            &[],
            1,
        ),
        crafted(
            "opposite literals on the pivot",
            formula(3, 6, &[&[1, 2, 3], &[-1, 2, 4], &[-1, -2, 5], &[1, -2, 6]]),
            &[1, 2],
            &[],
            1,
        ),
        crafted(
            "all variables marked",
            formula(3, 5, &[&[1, 2, 3], &[-1, -3, 4], &[2, -4, 5], &[-2, 3, -5]]),
            &[1, 2, 3, 4, 5],
            &[],
            2,
        ),
        crafted(
            "clause with a repeated variable",
            formula(3, 5, &[&[1, 1, 2], &[-1, 3, 4], &[-2, -3, 5]]),
            &[1, 2, 3],
            &[],
            1,
        ),
        crafted(
            "tautological clause",
            formula(3, 5, &[&[1, -1, 2], &[-2, 3, 4], &[1, 4, 5]]),
            &[1, 2, 4],
            &[],
            1,
        ),
        crafted(
            "Λ satisfies a neighbour",
            formula(3, 7, &[&[1, 2, 3], &[2, 4, 5], &[-1, 6, 7], &[4, -6, 3]]),
            &[1, 2, 4, 6],
            &[(2, true)],
            1,
        ),
        crafted(
            "Λ shortens a neighbour",
            formula(3, 7, &[&[1, 2, 3], &[2, 4, 5], &[-1, 6, 7], &[4, -6, 3]]),
            &[1, 2, 4, 6],
            &[(2, false)],
            1,
        ),
        crafted(
            "dense k=2",
            formula(
                2,
                6,
                &[&[1, 2], &[-2, 3], &[-3, 4], &[-4, 5], &[-5, 6], &[1, -6], &[2, 4]],
            ),
            &[1, 2, 3, 4, 5, 6],
            &[],
            3,
        ),
    ]
}

/// Crafted, pipeline and random fixtures together.
pub fn corpus(random: usize) -> Vec<Fixture> {
    let mut out = crafted_fixtures();
    out.extend(pipeline_fixtures(150));
    out.extend(random_fixtures(random, 7));
    out
}

pub fn feasible(tree: &CouplingTree, lo: &Bound, hi: &Bound, mode: LpMode) -> Option<Vec<BigRational>> {
    let lp = build_lp(tree, lo, hi, &BigRational::one()).unwrap();
    solve(&lp, mode, usize::MAX).unwrap().witness
}

pub fn fin(x: BigRational) -> Bound {
    Bound::Finite(x)
}

/// Windows around the oracle ratio `t/f`: those containing it, and those
/// excluding it.
pub type Window = (Bound, Bound);

pub fn windows(t: u64, f: u64) -> (Vec<Window>, Vec<Window>) {
    let zero = || fin(BigRational::zero());
    if f == 0 {
        let inside = vec![(zero(), Bound::Infinite), (fin(big(1000)), Bound::Infinite)];
        let outside = vec![(zero(), fin(big(1000))), (zero(), zero())];
        return (inside, outside);
    }
    let r = rat(t, f);
    let near = rat(1, 1000);
    let mut inside = vec![
        (fin(r.clone()), fin(r.clone())),
        (fin(&r / big(2)), fin(&r * big(2))),
        (zero(), Bound::Infinite),
        (zero(), fin(r.clone())),
        (fin(r.clone()), Bound::Infinite),
    ];
    let mut outside = Vec::new();
    if t > 0 {
        inside.push((fin(&r * (big(1) - &near)), fin(&r * (big(1) + &near))));
        outside.push((fin(&r * (big(1) + &near)), fin(&r * big(3))));
        outside.push((fin(&r * (big(1) + &near)), Bound::Infinite));
        outside.push((zero(), fin(&r * (big(1) - &near))));
        outside.push((fin(&r / big(3)), fin(&r / big(2))));
    } else {
        inside.push((zero(), zero()));
        outside.push((fin(near.clone()), fin(big(1))));
        outside.push((fin(near), Bound::Infinite));
    }
    (inside, outside)
}

/// 𝓛* nodes whose side-`i` assignment is contained in `x`.
pub fn agreeing_ends(tree: &CouplingTree, side: u8, x: u32) -> Vec<usize> {
    tree.nodes
        .iter()
        .filter(|n| n.kind != NodeKind::Internal && Models::agrees(x, n.side(side)))
        .map(|n| n.id)
        .collect()
}

/// The replacement walk: start at the root and replace each internal node
/// by its two children that follow `x` on the branching variable.
pub fn descent(tree: &CouplingTree, side: u8, x: u32) -> Vec<usize> {
    let mut stack = vec![0];
    let mut out = Vec::new();
    while let Some(id) = stack.pop() {
        let node = &tree.nodes[id];
        match (node.children, node.branching) {
            (Some(ch), Some(b)) => {
                let v = value(x, b.var);
                for (t1, t2) in [(true, true), (true, false), (false, true), (false, false)] {
                    let mine = if side == 1 { t1 } else { t2 };
                    if mine == v {
                        stack.push(ch[CouplingNode::child_index(t1, t2)]);
                    }
                }
            }
            _ => out.push(id),
        }
    }
    out.sort_unstable();
    out
}
