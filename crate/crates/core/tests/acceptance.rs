//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rksat::audit::{audit, AuditOptions};
use rksat::canonical::canonical_solution;
use rksat::classify::{bc_closure, classify, Classification};
use rksat::config::{Config, DeltaSetting, DepthSetting};
use rksat::counter::{approx_count, enumerate_count, exact_count, exact_count_under};
use rksat::invariants::check_tree;
use rksat::lp::{build_lp, p1, p2, violations, Bound, LpMode};
use rksat::marking::{
    find_lambda_star, find_marking, verify_lambda_star, verify_marking, verify_prefix_property, LambdaStar, Marking,
};
use rksat::pipeline::attempt_seed;
use rksat::tree::{CouplingTree, Depth, NodeKind};
use rksat::{Error, Formula, PartialAssignment, Var};

/// Tolerance on `|ln(Z / |Ω|)|` for the end-to-end check.
const END_TO_END_TOL: f64 = 0.2;
/// Runtime budget of the end-to-end grid.
const END_TO_END_BUDGET: Duration = Duration::from_secs(600);
/// Minimum number of satisfiable instances the end-to-end grid must finish.
const END_TO_END_MIN: usize = 30;
/// Models checked per (fixture, window, side) for the partition of unity.
const PARTITION_MODELS: usize = 300;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// 1. End-to-end
// ---------------------------------------------------------------------------

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let (mut done, mut nondegenerate, mut unsat, mut regime, mut outside) = (0, 0, 0, 0, 0);
    let mut internal = Vec::new();
    let mut worst = 0f64;
    for k in [3, 4, 5] {
        for n in [12, 14, 16] {
            for alpha2 in [1, 2, 3, 4] {
                for seed in 0..8u64 {
                    let m = alpha2 * n / 2;
                    let f = Formula::random(k, n, m, 1000 * seed + 10 * n as u64 + k as u64);
                    let exact = exact_count(&f, 25).unwrap().count;
                    if exact.is_zero() {
                        unsat += 1;
                        continue;
                    }
                    let config = Config {
                        seed,
                        delta: DeltaSetting::Fixed(8),
                        depth: DepthSetting::Infinite,
                        lp: LpMode::Exact,
                        ..Config::default()
                    };
                    match approx_count(&f, &config, 1) {
                        Ok(run) => {
                            done += 1;
                            if !run.steps.is_empty() {
                                nondegenerate += 1;
                            }
                            let ratio = &run.z / BigRational::from_integer(BigInt::from(exact));
                            let gap = ratio.to_f64().unwrap().ln().abs();
                            worst = worst.max(gap);
                            if gap > END_TO_END_TOL {
                                outside += 1;
                            }
                        }
                        Err(e) if e.class() == rksat::ErrorClass::Regime => regime += 1,
                        Err(e) => internal.push(format!("k={k} n={n} m={m} seed={seed}: {e}")),
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = done >= END_TO_END_MIN
        && nondegenerate >= END_TO_END_MIN
        && outside == 0
        && internal.is_empty()
        && elapsed <= END_TO_END_BUDGET;
    outcome(
        pass,
        format!(
            "{done} satisfiable instances counted ({nondegenerate} with a nonempty Λ*), {outside} outside e^±{END_TO_END_TOL}, \
             max |ln(Z/|Ω|)| = {worst:.4}; {regime} regime failures, {unsat} unsatisfiable skipped, \
             {} internal errors{}; {:.1}s",
            internal.len(),
            internal.first().map(|e| format!(" (first: {e})")).unwrap_or_default(),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 2-6. Trees and LPs against enumeration
// ---------------------------------------------------------------------------

fn leaf_exactness(corpus: &[Fixture]) -> Outcome {
    let (mut leaves, mut wrong, mut no_ratio, mut undefined) = (0, Vec::new(), 0, 0);
    for fx in corpus {
        let models = Models::of(&fx.formula);
        let tree = fx.tree();
        for node in tree.leaves() {
            leaves += 1;
            let Some(counts) = node.counts else {
                no_ratio += 1;
                continue;
            };
            let c1 = models.count(&node.a1.union(&fx.lambda).unwrap());
            let c2 = models.count(&node.a2.union(&fx.lambda).unwrap());
            if c1 == 0 && c2 == 0 {
                // Clauses outside the leaf kill both sides: no ratio to match.
                undefined += 1;
                continue;
            }
            // r = N1/N2 must equal c1/c2 as a ratio, with zeros matching.
            let same = BigInt::from(c1) * BigInt::from(counts.n2) == BigInt::from(c2) * BigInt::from(counts.n1)
                && (counts.n2 == 0) == (c2 == 0)
                && (counts.n1 == 0) == (c1 == 0);
            if !same {
                wrong.push(format!(
                    "{} leaf {}: {}/{} vs {c1}/{c2}",
                    fx.name, node.id, counts.n1, counts.n2
                ));
            }
        }
    }
    outcome(
        wrong.is_empty() && no_ratio == 0 && leaves > 0,
        format!(
            "{leaves} leaves over {} trees, {} ratios differ from enumeration, {no_ratio} without a ratio, \
             {undefined} with no models on either side{}",
            corpus.len(),
            wrong.len(),
            wrong.first().map(|w| format!(" (first: {w})")).unwrap_or_default()
        ),
    )
}

fn tree_invariants(corpus: &[Fixture]) -> Outcome {
    let (mut trees, mut nodes, mut bad) = (0, 0, Vec::new());
    for fx in corpus {
        for depth in [Depth::Infinite, Depth::Finite(3)] {
            let tree = fx.tree_at(depth);
            trees += 1;
            nodes += tree.nodes.len();
            let v = check_tree(&fx.ctx(), &tree);
            if let Some(first) = v.first() {
                bad.push(format!(
                    "{} ({depth:?}) node {}: {} {}",
                    fx.name, first.node, first.property, first.detail
                ));
            }
        }
    }
    outcome(
        trees >= 200 && bad.is_empty(),
        format!(
            "{trees} trees, {nodes} nodes checked, {} trees with violations{}",
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
        ),
    )
}

fn q_sums_to_one(tree: &CouplingTree, q: &[BigRational]) -> bool {
    let total: BigRational = tree
        .nodes
        .iter()
        .filter(|n| n.kind != NodeKind::Internal)
        .map(|n| q[n.id].clone())
        .sum();
    total.is_one()
}

/// Children pair sums: Q(TT)+Q(TF) = Q·ψ₁ and Q(TT)+Q(FT) = Q·ψ₂.
fn children_sums_hold(tree: &CouplingTree, q: &[BigRational], psi: &[Option<[BigRational; 2]>]) -> bool {
    tree.nodes.iter().all(|n| match (n.children, &psi[n.id]) {
        (Some(ch), Some([s1, s2])) => {
            let four: BigRational = ch.iter().map(|&c| q[c].clone()).sum();
            four == q[n.id] && &q[ch[0]] + &q[ch[1]] == &q[n.id] * s1 && &q[ch[0]] + &q[ch[2]] == &q[n.id] * s2
        }
        (None, None) => true,
        _ => false,
    })
}

fn completeness(corpus: &[Fixture]) -> Outcome {
    let (mut windows_checked, mut infeasible, mut canonical, mut skipped, mut broken) =
        (0, Vec::new(), 0, 0, Vec::new());
    for fx in corpus {
        let models = Models::of(&fx.formula);
        let (t, f) = fx.oracle_ratio(&models);
        if t == 0 && f == 0 {
            continue;
        }
        let tree = fx.tree();
        let (inside, _) = windows(t, f);
        for (lo, hi) in &inside {
            windows_checked += 1;
            if feasible(&tree, lo, hi, LpMode::Exact).is_none() {
                infeasible.push(format!("{} [{}, {}]", fx.name, lo.show(), hi.show()));
            }
        }
        match canonical_solution(&tree, |a| Ok(BigUint::from(models.count(a)))) {
            Ok(sol) => {
                canonical += 1;
                let r = fin(rat(t, f));
                let lp = build_lp(&tree, &r, &r, &BigRational::one()).unwrap();
                let ok = violations(&lp, &sol.p).is_empty()
                    && sol.q[0].is_one()
                    && q_sums_to_one(&tree, &sol.q)
                    && children_sums_hold(&tree, &sol.q, &sol.psi);
                if !ok {
                    broken.push(fx.name.clone());
                }
            }
            Err(Error::EmptyAssignmentSet { .. }) => skipped += 1,
            Err(e) => broken.push(format!("{}: {e}", fx.name)),
        }
    }
    outcome(
        infeasible.is_empty() && broken.is_empty() && canonical > 0,
        format!(
            "{windows_checked} windows containing the oracle ratio, {} infeasible; canonical solution valid on {canonical} trees, \
             {} invalid, {skipped} skipped (a node side has no models){}",
            infeasible.len(),
            broken.len(),
            infeasible.first().or(broken.first()).map(|e| format!(" (first: {e})")).unwrap_or_default()
        ),
    )
}

fn contains(lo: &Bound, hi: &Bound, t: u64, f: u64) -> bool {
    let le = |a: &Bound, b: &Bound| match (a, b) {
        (_, Bound::Infinite) => true,
        (Bound::Infinite, Bound::Finite(_)) => false,
        (Bound::Finite(x), Bound::Finite(y)) => x <= y,
    };
    let r = if f == 0 { Bound::Infinite } else { fin(rat(t, f)) };
    le(lo, &r) && le(&r, hi)
}

fn soundness(corpus: &[Fixture]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let (mut feasible_windows, mut total, mut wrong) = (0, 0, Vec::new());
    for fx in corpus {
        let models = Models::of(&fx.formula);
        let (t, f) = fx.oracle_ratio(&models);
        if t == 0 && f == 0 {
            continue;
        }
        let tree = fx.tree();
        let (inside, outside) = windows(t, f);
        let mut all: Vec<(Bound, Bound)> = inside.into_iter().chain(outside).collect();
        for _ in 0..6 {
            let a = rat(rng.gen_range(0..64), rng.gen_range(1..16));
            let b = &a + rat(rng.gen_range(0..32), rng.gen_range(1..16));
            all.push((fin(a), if rng.gen_bool(0.2) { Bound::Infinite } else { fin(b) }));
        }
        for (lo, hi) in &all {
            total += 1;
            if feasible(&tree, lo, hi, LpMode::Exact).is_some() {
                feasible_windows += 1;
                if !contains(lo, hi, t, f) {
                    wrong.push(format!("{} [{}, {}] vs {t}/{f}", fx.name, lo.show(), hi.show()));
                }
            }
        }
    }
    outcome(
        wrong.is_empty() && feasible_windows > 0,
        format!(
            "{total} windows, {feasible_windows} feasible, {} feasible windows miss the oracle ratio{}",
            wrong.len(),
            wrong.first().map(|w| format!(" (first: {w})")).unwrap_or_default()
        ),
    )
}

fn partition(corpus: &[Fixture]) -> Outcome {
    let (mut sums, mut witnesses, mut wrong) = (0, 0, Vec::new());
    for fx in corpus {
        let models = Models::of(&fx.formula);
        let (t, f) = fx.oracle_ratio(&models);
        if t == 0 && f == 0 {
            continue;
        }
        let tree = fx.tree();
        let (inside, _) = windows(t, f);
        for (lo, hi) in inside.iter().take(3) {
            let Some(x) = feasible(&tree, lo, hi, LpMode::Exact) else {
                continue;
            };
            witnesses += 1;
            for (side, value) in [(1u8, true), (2, false)] {
                let index = if side == 1 { p1 } else { p2 };
                let omega = fx.lambda.clone().with(fx.pivot, value);
                for sigma in models.consistent(&omega).take(PARTITION_MODELS) {
                    let ends = descent(&tree, side, sigma);
                    let total: BigRational = ends.iter().map(|&id| x[index(id)].clone()).sum();
                    sums += 1;
                    if !total.is_one() || ends != agreeing_ends(&tree, side, sigma) {
                        wrong.push(format!("{} side {side} σ={sigma:b}: {}", fx.name, total));
                    }
                }
            }
        }
    }
    outcome(
        wrong.is_empty() && sums > 0,
        format!(
            "{sums} (σ, witness) sums over {witnesses} witnesses, {} differ from 1{}",
            wrong.len(),
            wrong.first().map(|w| format!(" (first: {w})")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Classification
// ---------------------------------------------------------------------------

fn hits(f: &Formula, c: usize, bad: &[bool]) -> usize {
    f.clause_vars(c).iter().filter(|&&v| bad[v as usize]).count()
}

fn at_least(count: usize, fraction: &Ratio<u64>, k: usize) -> bool {
    count as u64 * fraction.denom() >= fraction.numer() * k as u64
}

/// Straightforward fixed point: start from high-degree variables, add every
/// clause at or over the threshold and all of its variables, repeat.
fn oracle_classify(f: &Formula, delta: usize, fraction: &Ratio<u64>) -> (Vec<bool>, Vec<bool>, Vec<Var>) {
    let mut occ = vec![0usize; f.n() + 1];
    for c in f.clauses() {
        for l in c.literals() {
            occ[l.var() as usize] += 1;
        }
    }
    let v0: Vec<Var> = (1..=f.n() as Var).filter(|&v| occ[v as usize] >= delta).collect();
    let mut bad = vec![false; f.n() + 1];
    for &v in &v0 {
        bad[v as usize] = true;
    }
    loop {
        let clauses: Vec<bool> = (0..f.m())
            .map(|c| at_least(hits(f, c, &bad), fraction, f.k()))
            .collect();
        let before = bad.clone();
        for c in (0..f.m()).filter(|&c| clauses[c]) {
            for &v in f.clause_vars(c) {
                bad[v as usize] = true;
            }
        }
        if bad == before {
            return (bad, clauses, v0);
        }
    }
}

fn oracle_closure(f: &Formula, seed: &[Var], fraction: &Ratio<u64>) -> BTreeSet<Var> {
    let mut inside: BTreeSet<Var> = seed.iter().copied().collect();
    loop {
        let grow = (0..f.m()).find(|&c| {
            let vs = f.clause_vars(c);
            let h = vs.iter().filter(|v| inside.contains(v)).count();
            h < vs.len() && at_least(h, fraction, f.k())
        });
        match grow {
            Some(c) => inside.extend(f.clause_vars(c)),
            None => return inside,
        }
    }
}

/// Components of the bad variables linked through bad clauses, by union-find.
fn oracle_components(f: &Formula, bad: &[bool], bad_clauses: &[bool]) -> BTreeSet<BTreeSet<Var>> {
    let mut parent: Vec<usize> = (0..=f.n()).collect();
    fn root(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = root(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    for c in (0..f.m()).filter(|&c| bad_clauses[c]) {
        let vs = f.clause_vars(c);
        for w in vs.windows(2) {
            let (a, b) = (root(&mut parent, w[0] as usize), root(&mut parent, w[1] as usize));
            parent[a] = b;
        }
    }
    let mut groups = std::collections::BTreeMap::<usize, BTreeSet<Var>>::new();
    for v in (1..=f.n()).filter(|&v| bad[v]) {
        let r = root(&mut parent, v);
        groups.entry(r).or_default().insert(v as Var);
    }
    groups.into_values().collect()
}

fn mask(n: usize, vs: &[Var]) -> Vec<bool> {
    let mut m = vec![false; n + 1];
    for &v in vs {
        m[v as usize] = true;
    }
    m
}

fn classification_check(f: &Formula, cls: &Classification) -> Result<usize, String> {
    let fraction = cls.bad_fraction;
    let (bad, bad_clauses, v0) = oracle_classify(f, cls.delta, &fraction);
    if mask(f.n(), &cls.bad_vars) != bad || cls.v0 != v0 {
        return Err("bad variables differ from the oracle fixed point".into());
    }
    let clause_mask: Vec<bool> = (0..f.m()).map(|c| cls.bad_clauses.contains(&c)).collect();
    if clause_mask != bad_clauses {
        return Err("bad clauses differ from the oracle fixed point".into());
    }
    let good: BTreeSet<Var> = cls.good_vars.iter().copied().collect();
    let all: BTreeSet<Var> = cls.bad_vars.iter().chain(&cls.good_vars).copied().collect();
    if all.len() != f.n() || cls.bad_vars.iter().any(|v| good.contains(v)) {
        return Err("good and bad variables do not partition the variables".into());
    }
    for (c, &is_bad) in bad_clauses.iter().enumerate() {
        let h = hits(f, c, &bad);
        if is_bad && f.clause_vars(c).iter().any(|v| good.contains(v)) {
            return Err(format!("bad clause {c} has a good variable"));
        }
        if !is_bad && at_least(h, &fraction, f.k()) {
            return Err(format!("good clause {c} has {h} bad variables"));
        }
    }
    let components: BTreeSet<BTreeSet<Var>> = cls.bad_components.iter().map(|s| s.iter().copied().collect()).collect();
    if components != oracle_components(f, &bad, &bad_clauses) {
        return Err("bad components differ from the oracle".into());
    }
    for s in &cls.bad_components {
        let hd: Vec<Var> = s.iter().copied().filter(|v| v0.contains(v)).collect();
        let closure = oracle_closure(f, &hd, &fraction);
        let library: BTreeSet<Var> = bc_closure(f, &hd, &fraction).into_iter().collect();
        let target: BTreeSet<Var> = s.iter().copied().collect();
        if closure != target || library != target {
            return Err(format!("closure of HD(S) differs from S for the component at {}", s[0]));
        }
    }
    Ok(cls.bad_components.len())
}

fn random_formula(rng: &mut ChaCha8Rng) -> Formula {
    let k = rng.gen_range(3..=6);
    let n = rng.gen_range(8..=40);
    let m = rng.gen_range(n / 2..=2 * n);
    Formula::random(k, n, m, rng.gen())
}

fn classification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (mut instances, mut components, mut with_bad, mut wrong) = (0, 0, 0, Vec::new());
    for _ in 0..400 {
        let f = random_formula(&mut rng);
        let delta = rng.gen_range(2..=12);
        let fraction = [Ratio::new(1, 10), Ratio::new(1, 4), Ratio::new(1, 3)][rng.gen_range(0..3)];
        let cls = classify(&f, delta, fraction);
        instances += 1;
        if !cls.bad_vars.is_empty() && !cls.good_vars.is_empty() {
            with_bad += 1;
        }
        match classification_check(&f, &cls) {
            Ok(c) => components += c,
            Err(e) => wrong.push(format!("k={} n={} m={} Δ={delta}: {e}", f.k(), f.n(), f.m())),
        }
    }
    outcome(
        wrong.is_empty() && with_bad > 50,
        format!(
            "{instances} instances ({with_bad} with both good and bad variables), {components} bad components; {} failures{}",
            wrong.len(),
            wrong.first().map(|w| format!(" (first: {w})")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Marking and Λ*
// ---------------------------------------------------------------------------

fn check_marking(f: &Formula, cls: &Classification, marking: &Marking) -> Result<(), String> {
    let k = f.k();
    for &c in &cls.good_clauses {
        let vs = f.clause_vars(c);
        let marked = vs.iter().filter(|&&v| marking.is_marked(v)).count();
        let unmarked = vs
            .iter()
            .filter(|&&v| cls.is_good_var(v) && !marking.is_marked(v))
            .count();
        if 10 * marked < 3 * k || 4 * unmarked < k {
            return Err(format!("clause {c}: {marked} marked, {unmarked} unmarked good"));
        }
    }
    if (1..=f.n() as Var).any(|v| marking.is_marked(v) && !cls.is_good_var(v)) {
        return Err("a bad variable is marked".into());
    }
    Ok(())
}

fn check_lambda(f: &Formula, cls: &Classification, marking: &Marking, lambda: &LambdaStar) -> Result<(), String> {
    let width = f.k().div_ceil(20).max(1);
    for &c in &cls.good_clauses {
        let mut lits = f.clause(c).literals().to_vec();
        lits.sort_by_key(|l| l.var());
        let prefix: Vec<_> = lits
            .into_iter()
            .filter(|l| marking.is_marked(l.var()))
            .take(width)
            .collect();
        if !prefix
            .iter()
            .any(|l| lambda.assignment.get(l.var()) == Some(l.is_positive()))
        {
            return Err(format!("clause {c}: truncated prefix not satisfied"));
        }
    }
    if lambda.assignment.domain().any(|v| !marking.is_marked(v)) {
        return Err("Λ* assigns an unmarked variable".into());
    }
    Ok(())
}

/// Every prefix of Λ* leaves each surviving good clause at least k/4
/// unassigned marked variables.
fn check_prefixes(f: &Formula, cls: &Classification, marking: &Marking, lambda: &LambdaStar) -> Result<(), String> {
    for len in 0..=lambda.len() {
        let prefix: PartialAssignment = lambda.prefix(len);
        for &c in &cls.good_clauses {
            if f.clause(c).is_satisfied_by(&prefix) {
                continue;
            }
            let free = f
                .clause_vars(c)
                .iter()
                .filter(|&&v| marking.is_marked(v) && !prefix.contains(v))
                .count();
            if 4 * free < f.k() {
                return Err(format!(
                    "prefix {len}: clause {c} keeps {free} unassigned marked variables"
                ));
            }
        }
        if !verify_prefix_property(f, cls, marking, &prefix).violations.is_empty() {
            return Err(format!("prefix {len}: library verifier disagrees"));
        }
    }
    Ok(())
}

/// Checks one (marking, Λ*) draw. Returns the Λ* length if one was found.
fn marking_attempt(
    f: &Formula,
    cls: &Classification,
    seed: u64,
    wrong: &mut Vec<String>,
    name: &str,
) -> Result<Option<usize>, &'static str> {
    let marking = match find_marking(f, cls, seed, 10_000) {
        Ok(m) => m,
        Err(Error::MarkingNotFound { .. }) => return Err("marking"),
        Err(e) => {
            wrong.push(format!("{name}: marking raised {e}"));
            return Ok(None);
        }
    };
    if let Err(e) = check_marking(f, cls, &marking) {
        wrong.push(format!("{name}: {e}"));
    }
    if !verify_marking(f, cls, &marking).is_empty() {
        wrong.push(format!("{name}: marking verifier rejects"));
    }
    let lambda = match find_lambda_star(f, cls, &marking, seed, 20, 10_000) {
        Ok(l) => l,
        Err(Error::LambdaStarNotFound { .. }) => return Err("lambda"),
        Err(e) => {
            wrong.push(format!("{name}: Λ* raised {e}"));
            return Ok(None);
        }
    };
    if let Err(e) = check_lambda(f, cls, &marking, &lambda) {
        wrong.push(format!("{name}: {e}"));
    }
    if !verify_lambda_star(f, cls, &marking, &lambda).is_ok() {
        wrong.push(format!("{name}: Λ* verifier rejects"));
    }
    if let Err(e) = check_prefixes(f, cls, &marking, &lambda) {
        wrong.push(format!("{name}: {e}"));
    }
    Ok(Some(lambda.len()))
}

fn marking_and_lambda() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let (mut markings, mut lambdas, mut nonempty, mut prefixes) = (0, 0, 0, 0);
    let (mut marking_failures, mut lambda_failures) = (0, 0);
    let mut wrong = Vec::new();
    for i in 0..200 {
        // Sparse enough that most formulas keep a good part.
        let k = rng.gen_range(3..=6);
        let n = rng.gen_range(10..=40);
        let m = rng.gen_range(n / 4..=3 * n / 4);
        let f = Formula::random(k, n, m, rng.gen());
        let cls = classify(&f, rng.gen_range(8..=16), Ratio::new(1, 10));
        let seed: u64 = rng.gen();
        let name = format!("#{i} k={k} n={n} m={m}");
        // Fresh draws until Λ* exists, as the counter does.
        for attempt in 0..50 {
            match marking_attempt(&f, &cls, attempt_seed(seed, attempt), &mut wrong, &name) {
                Ok(Some(len)) => {
                    markings += 1;
                    lambdas += 1;
                    nonempty += usize::from(len > 0);
                    prefixes += len + 1;
                    break;
                }
                Ok(None) => break,
                Err("marking") => marking_failures += 1,
                Err(_) => {
                    markings += 1;
                    lambda_failures += 1;
                }
            }
        }
    }
    outcome(
        wrong.is_empty() && markings > 50 && nonempty > 50,
        format!(
            "{markings} markings and {lambdas} Λ* checked ({nonempty} nonempty, {prefixes} prefixes); \
             typed failures: {marking_failures} marking, {lambda_failures} Λ*; {} violations{}",
            wrong.len(),
            wrong.first().map(|w| format!(" (first: {w})")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Exact counting
// ---------------------------------------------------------------------------

fn oracle_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut checked, mut wrong) = (0, Vec::new());
    while checked < 100 {
        let k = rng.gen_range(2..=5);
        let n = rng.gen_range(4..=18);
        let m = rng.gen_range(1..=3 * n);
        let f = Formula::random(k, n, m, rng.gen());
        let mut a = PartialAssignment::new();
        for v in 1..=n as Var {
            if rng.gen_bool(0.15) {
                a.set(v, rng.gen());
            }
        }
        let models = Models::of(&f);
        let brute = BigUint::from(models.count(&a));
        let product = exact_count_under(&f, &a, 25).unwrap().count;
        let mono = enumerate_count(&f, &a).unwrap().count;
        let plain = exact_count(&f, 25).unwrap().count;
        if product != mono || mono != brute || plain != BigUint::from(models.models.len()) {
            wrong.push(format!("k={k} n={n} m={m}: {product} vs {mono} vs {brute}"));
        }
        checked += 1;
    }
    outcome(
        wrong.is_empty(),
        format!(
            "{checked} instances (n ≤ 18): component product, monolithic enumeration and bitmask count agree on {}",
            checked - wrong.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. Audit
// ---------------------------------------------------------------------------

fn connected(f: &Formula, set: &[usize]) -> bool {
    let mut seen = vec![set[0]];
    let mut grew = true;
    while grew {
        grew = false;
        for &c in set {
            if !seen.contains(&c)
                && seen
                    .iter()
                    .any(|&d| f.clause_vars(c).iter().any(|v| f.clause_vars(d).contains(v)))
            {
                seen.push(c);
                grew = true;
            }
        }
    }
    seen.len() == set.len()
}

/// Connected clause sets of each size up to `max`, and the smallest
/// `|var(Y)| / (k |Y|)` per size, by brute force over all subsets.
fn brute_expansion(f: &Formula, max: usize) -> (Vec<usize>, Vec<Option<f64>>) {
    let mut sets = vec![0; max];
    let mut min: Vec<Option<f64>> = vec![None; max];
    fn rec(f: &Formula, max: usize, start: usize, cur: &mut Vec<usize>, sets: &mut [usize], min: &mut [Option<f64>]) {
        if !cur.is_empty() && connected(f, cur) {
            let vars: BTreeSet<Var> = cur.iter().flat_map(|&c| f.clause_vars(c).iter().copied()).collect();
            let r = vars.len() as f64 / (f.k() * cur.len()) as f64;
            let i = cur.len() - 1;
            sets[i] += 1;
            min[i] = Some(min[i].map_or(r, |x: f64| x.min(r)));
        }
        if cur.len() == max {
            return;
        }
        for c in start..f.m() {
            cur.push(c);
            rec(f, max, c + 1, cur, sets, min);
            cur.pop();
        }
    }
    rec(f, max, 0, &mut Vec::new(), &mut sets, &mut min);
    (sets, min)
}

fn audit_check(f: &Formula, cls: &Classification, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let queries: Vec<(Vec<Var>, usize)> = (0..3)
        .map(|_| {
            let y: Vec<Var> = (1..=f.n() as Var).filter(|_| rng.gen_bool(0.3)).collect();
            (y, rng.gen_range(1..=f.k()))
        })
        .collect();
    let options = AuditOptions {
        overlap_queries: queries.clone(),
        expansion_size: 3,
        expansion_limit: usize::MAX,
        gamma_samples: 3,
        gamma_size: 5,
        seed: rng.gen(),
        depth: Some(4),
    };
    let report = audit(f, cls, &options);
    let (bad, bad_clauses, v0) = oracle_classify(f, cls.delta, &cls.bad_fraction);
    let count = |m: &[bool]| m.iter().filter(|&&b| b).count();
    if report.v0 != v0.len() || report.v_bad != count(&bad) || report.c_bad != count(&bad_clauses) {
        return Err("sizes of the bad part differ".into());
    }
    for comp in &report.components {
        let hd: Vec<Var> = comp.vars.iter().copied().filter(|v| v0.contains(v)).collect();
        let ratio = (!hd.is_empty()).then(|| comp.vars.len() as f64 / hd.len() as f64);
        let closure = oracle_closure(f, &hd, &cls.bad_fraction);
        let matches = closure == comp.vars.iter().copied().collect::<BTreeSet<Var>>();
        if comp.hd != hd || comp.ratio != ratio || comp.closure_matches != matches {
            return Err(format!("component at {} differs", comp.vars[0]));
        }
    }
    for (o, (y, b)) in report.overlaps.iter().zip(&queries) {
        let brute = f
            .clauses()
            .iter()
            .filter(|c| c.vars().iter().filter(|v| y.contains(v)).count() >= *b)
            .count();
        if o.count != brute || o.y != *y || o.b != *b {
            return Err("overlap count differs".into());
        }
    }
    let (sets, min) = brute_expansion(f, 3);
    if report.expansion.truncated || report.expansion.sets != sets || report.expansion.min_ratio != min {
        return Err(format!("expansion differs: {:?} vs {sets:?}", report.expansion.sets));
    }
    let k = f.k() as f64;
    for g in &report.gamma {
        let plus: BTreeSet<Var> = f
            .clauses()
            .iter()
            .filter(|c| c.vars().iter().any(|v| g.vars.contains(v)))
            .flat_map(|c| c.vars())
            .chain(g.vars.iter().copied())
            .collect();
        let bound = 3.0 * k.powi(3) * f.density() * (g.vars.len() as f64).max(k * (f.n() as f64).ln());
        if g.size != plus.len() || (g.bound - bound).abs() > 1e-9 * bound {
            return Err(format!("Γ⁺ of {:?} differs", g.vars));
        }
    }
    let (n, l) = (f.n() as f64, 4.0);
    let expected = [
        (report.bounds.v0, n / 2f64.powf(k.powi(10))),
        (report.bounds.v_bad, 4.0 * k * n / 2f64.powf(k.powi(10))),
        (report.bounds.component, 21600.0 * k * n.ln()),
        (
            report.bounds.v_set.unwrap_or(f64::NAN),
            3.0 * k.powi(3) * f.density() * l + 1.0,
        ),
    ];
    if expected.iter().any(|(a, b)| (a - b).abs() > 1e-12 * b.abs()) {
        return Err("bound formulas differ".into());
    }
    let largest = report.components.iter().map(|c| c.vars.len()).max().unwrap_or(0);
    Ok(format!(
        "k={} n={} α={:.2}: |V0| = {} vs n/2^(k^10) = {:.3e}; |V_bad| = {} vs 4kn/2^(k^10) = {:.3e}; \
         largest bad component {largest} vs 21600 k ln n = {:.0}; |V_set| bound 3k³αL+1 = {:.1} at L = 4",
        f.k(),
        f.n(),
        f.density(),
        report.v0,
        report.bounds.v0,
        report.v_bad,
        report.bounds.v_bad,
        report.bounds.component,
        report.bounds.v_set.unwrap_or(f64::NAN),
    ))
}

fn audit_sanity(pipeline: &[Fixture]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let (mut checked, mut wrong, mut sample) = (0, Vec::new(), None);
    for _ in 0..60 {
        let k = rng.gen_range(3..=5);
        let n = rng.gen_range(6..=20);
        let m = rng.gen_range(n / 2..=2 * n);
        let f = Formula::random(k, n, m, rng.gen());
        let cls = classify(&f, rng.gen_range(3..=10), Ratio::new(1, 10));
        match audit_check(&f, &cls, &mut rng) {
            Ok(line) => {
                if sample.is_none() && !cls.bad_vars.is_empty() {
                    sample = Some(line);
                }
            }
            Err(e) => wrong.push(format!("k={k} n={n} m={m}: {e}")),
        }
        checked += 1;
    }
    // Tree audits against the trees themselves.
    let mut trees = 0;
    for fx in pipeline.iter().take(40) {
        let tree = fx.tree_at(Depth::Finite(4));
        let mut report = audit(&fx.formula, &fx.cls, &AuditOptions::default());
        report.record_tree(&tree);
        let entry = report.trees.last().unwrap();
        let max = tree.nodes.iter().map(|n| n.v_set.len()).max().unwrap();
        if entry.nodes != tree.nodes.len() || entry.max_v_set != max || entry.pivot != fx.pivot {
            wrong.push(format!("{}: tree audit differs", fx.name));
        }
        trees += 1;
    }
    if let Some(line) = &sample {
        println!("    audit sample: {line}");
    }
    outcome(
        wrong.is_empty(),
        format!(
            "{checked} formulas (n ≤ 20) and {trees} trees recomputed by brute force, {} differ; bounds are reported, not asserted{}",
            wrong.len(),
            wrong.first().map(|w| format!(" (first: {w})")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance() {
    let tree_corpus = corpus(200);
    let lp_corpus = corpus(60);
    let pipeline = pipeline_fixtures(60);
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        (
            "end-to-end count within e^±0.2 of the exact count",
            Box::new(end_to_end),
        ),
        (
            "leaf ratios equal enumerated ratios",
            Box::new(|| leaf_exactness(&lp_corpus)),
        ),
        (
            "coupling-tree invariants P1-P9",
            Box::new(|| tree_invariants(&tree_corpus)),
        ),
        (
            "LP completeness and canonical solution",
            Box::new(|| completeness(&lp_corpus)),
        ),
        ("LP soundness", Box::new(|| soundness(&lp_corpus))),
        ("partition of unity", Box::new(|| partition(&lp_corpus))),
        (
            "classification fixed point, good/bad separation, closure of HD(S)",
            Box::new(classification),
        ),
        ("marking and Λ* verifiers", Box::new(marking_and_lambda)),
        ("component product equals enumeration", Box::new(oracle_consistency)),
        (
            "audit quantities equal brute force",
            Box::new(|| audit_sanity(&pipeline)),
        ),
    ];
    // ACCEPTANCE_ONLY=2,5 runs a subset.
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        println!(
            "criterion {:>2} {}: {name}: {} [{:.1}s]",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
        if !result.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
