//! Measured structure of a classified formula: sizes of the bad part,
//! bad components and their high-degree cores, clause overlaps, clause-set
//! expansion and variable neighbourhoods. Asymptotic bound formulas are
//! reported next to the measurements; nothing here asserts them.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::{bc_closure, Classification};
use crate::formula::{ClauseId, DependencyGraphs, Formula, Var};
use crate::tree::CouplingTree;

#[derive(Debug, Clone, Serialize)]
pub struct AuditOptions {
    /// `(Y, b)`: count the clauses with at least `b` variables from `Y`.
    pub overlap_queries: Vec<(Vec<Var>, usize)>,
    /// Largest connected clause set enumerated for the expansion audit.
    pub expansion_size: usize,
    /// Stop enumerating connected clause sets after this many.
    pub expansion_limit: usize,
    /// Number of connected variable sets sampled per size.
    pub gamma_samples: usize,
    /// Largest connected variable set sampled.
    pub gamma_size: usize,
    pub seed: u64,
    /// Depth parameter of the coupling trees, when finite.
    pub depth: Option<usize>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            overlap_queries: Vec::new(),
            expansion_size: 4,
            expansion_limit: 100_000,
            gamma_samples: 4,
            gamma_size: 6,
            seed: 0,
            depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentAudit {
    pub vars: Vec<Var>,
    /// High-degree variables of the component.
    pub hd: Vec<Var>,
    /// `|S| / |HD(S)|`, absent when `HD(S)` is empty.
    pub ratio: Option<f64>,
    /// Whether the closure of `HD(S)` gives back the component.
    pub closure_matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapAudit {
    pub y: Vec<Var>,
    pub b: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionAudit {
    pub max_size: usize,
    /// Connected clause sets examined, per size starting at 1.
    pub sets: Vec<usize>,
    /// Smallest `|var(Y)| / (k |Y|)` seen, per size.
    pub min_ratio: Vec<Option<f64>>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaAudit {
    pub vars: Vec<Var>,
    /// `|V ∪ N(V)|` in the variable co-occurrence graph.
    pub size: usize,
    /// `3 k^3 alpha max(|V|, k ln n)`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeAudit {
    pub pivot: Var,
    pub nodes: usize,
    pub max_v_set: usize,
    /// `3 k^3 alpha L + 1`, when the depth is finite.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bounds {
    /// `n / 2^(k^10)`.
    pub v0: f64,
    /// `4 k n / 2^(k^10)`.
    pub v_bad: f64,
    /// `21600 k ln n`.
    pub component: f64,
    /// `3 k^3 alpha L + 1`.
    pub v_set: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub delta: usize,
    pub v0: usize,
    pub v_bad: usize,
    pub c_bad: usize,
    pub components: Vec<ComponentAudit>,
    pub overlaps: Vec<OverlapAudit>,
    pub expansion: ExpansionAudit,
    pub gamma: Vec<GammaAudit>,
    pub trees: Vec<TreeAudit>,
    pub bounds: Bounds,
}

impl AuditReport {
    pub fn record_tree(&mut self, tree: &CouplingTree) {
        self.trees.push(TreeAudit {
            pivot: tree.pivot,
            nodes: tree.nodes.len(),
            max_v_set: tree.nodes.iter().map(|n| n.v_set.len()).max().unwrap_or(0),
            bound: self.bounds.v_set,
        });
    }
}

fn ln(n: usize) -> f64 {
    (n.max(1) as f64).ln()
}

pub fn overlap_count(formula: &Formula, y: &[Var], b: usize) -> usize {
    (0..formula.m())
        .filter(|&c| formula.clause_vars(c).iter().filter(|v| y.contains(v)).count() >= b)
        .count()
}

/// `V` together with every variable sharing a clause with it.
pub fn gamma_plus(graphs: &DependencyGraphs, vars: &[Var]) -> Vec<Var> {
    let mut out: Vec<Var> = vars.to_vec();
    for &v in vars {
        out.extend(&graphs.var_adjacency[v as usize]);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Visits every connected vertex set of size at most `max` exactly once,
/// extending each set only by vertices larger than its first element.
/// Returns false if `visit` asked to stop.
fn connected_sets(adjacency: &[Vec<usize>], max: usize, visit: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    fn extend(
        adjacency: &[Vec<usize>],
        max: usize,
        root: usize,
        set: &mut Vec<usize>,
        frontier: Vec<usize>,
        banned: &mut Vec<bool>,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if !visit(set) {
            return false;
        }
        if set.len() == max {
            return true;
        }
        let mut frontier = frontier;
        while let Some(w) = frontier.pop() {
            // Sets containing `w` come from this branch, so later branches
            // must exclude it.
            let mut next = frontier.clone();
            let mut added = Vec::new();
            for &x in &adjacency[w] {
                if x > root && !banned[x] {
                    banned[x] = true;
                    added.push(x);
                    next.push(x);
                }
            }
            set.push(w);
            let go = extend(adjacency, max, root, set, next, banned, visit);
            set.pop();
            for x in added {
                banned[x] = false;
            }
            if !go {
                return false;
            }
        }
        true
    }

    let mut banned = vec![false; adjacency.len()];
    for root in 0..adjacency.len() {
        banned[root] = true;
        let mut frontier = Vec::new();
        for &x in &adjacency[root] {
            if x > root && !banned[x] {
                banned[x] = true;
                frontier.push(x);
            }
        }
        let added = frontier.clone();
        let go = extend(adjacency, max, root, &mut vec![root], frontier, &mut banned, visit);
        for x in added {
            banned[x] = false;
        }
        banned[root] = false;
        if !go {
            return false;
        }
    }
    true
}

fn expansion(formula: &Formula, graphs: &DependencyGraphs, max: usize, limit: usize) -> ExpansionAudit {
    let k = formula.k() as f64;
    let mut sets = vec![0usize; max];
    let mut min_ratio: Vec<Option<f64>> = vec![None; max];
    let mut seen = 0usize;
    let mut vars = Vec::new();
    let complete = max == 0
        || connected_sets(&graphs.clause_adjacency, max, &mut |ys: &[ClauseId]| {
            if seen == limit {
                return false;
            }
            seen += 1;
            vars.clear();
            for &c in ys {
                vars.extend_from_slice(formula.clause_vars(c));
            }
            vars.sort_unstable();
            vars.dedup();
            let r = vars.len() as f64 / (k * ys.len() as f64);
            let i = ys.len() - 1;
            sets[i] += 1;
            min_ratio[i] = Some(min_ratio[i].map_or(r, |m| m.min(r)));
            true
        });
    ExpansionAudit {
        max_size: max,
        sets,
        min_ratio,
        truncated: !complete,
    }
}

/// A random connected variable set of `size` grown from `start`, or `None`
/// if its component is smaller.
fn grow(graphs: &DependencyGraphs, start: Var, size: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Var>> {
    let mut set = vec![start];
    while set.len() < size {
        let mut options: Vec<Var> = set
            .iter()
            .flat_map(|&v| graphs.var_adjacency[v as usize].iter().copied())
            .filter(|w| !set.contains(w))
            .collect();
        options.sort_unstable();
        options.dedup();
        set.push(*options.choose(rng)?);
    }
    set.sort_unstable();
    Some(set)
}

pub fn audit(formula: &Formula, cls: &Classification, options: &AuditOptions) -> AuditReport {
    let (k, n, m) = (formula.k(), formula.n(), formula.m());
    let alpha = formula.density();
    let graphs = DependencyGraphs::of(formula);
    let kf = k as f64;
    let k10 = 2f64.powf(kf.powi(10));

    let components = cls
        .bad_components
        .iter()
        .map(|s| {
            let hd = cls.high_degree_part(s);
            let ratio = (!hd.is_empty()).then(|| s.len() as f64 / hd.len() as f64);
            let closure_matches = bc_closure(formula, &hd, &cls.bad_fraction) == *s;
            ComponentAudit {
                vars: s.clone(),
                hd,
                ratio,
                closure_matches,
            }
        })
        .collect();

    let overlaps = options
        .overlap_queries
        .iter()
        .map(|(y, b)| OverlapAudit {
            y: y.clone(),
            b: *b,
            count: overlap_count(formula, y, *b),
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let vars: Vec<Var> = formula.vars().collect();
    let mut gamma = Vec::new();
    if !vars.is_empty() {
        for size in 1..=options.gamma_size.min(n) {
            for _ in 0..options.gamma_samples {
                let start = *vars.choose(&mut rng).expect("nonempty");
                let Some(set) = grow(&graphs, start, size, &mut rng) else {
                    continue;
                };
                let size_bound = (set.len() as f64).max(kf * ln(n));
                gamma.push(GammaAudit {
                    size: gamma_plus(&graphs, &set).len(),
                    bound: 3.0 * kf.powi(3) * alpha * size_bound,
                    vars: set,
                });
            }
        }
    }

    let v_set = options.depth.map(|l| 3.0 * kf.powi(3) * alpha * l as f64 + 1.0);
    AuditReport {
        k,
        n,
        m,
        delta: cls.delta,
        v0: cls.v0.len(),
        v_bad: cls.bad_vars.len(),
        c_bad: cls.bad_clauses.len(),
        components,
        overlaps,
        expansion: expansion(formula, &graphs, options.expansion_size, options.expansion_limit),
        gamma,
        trees: Vec::new(),
        bounds: Bounds {
            v0: n as f64 / k10,
            v_bad: 4.0 * kf * n as f64 / k10,
            component: 21600.0 * kf * ln(n),
            v_set,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::classify;
    use crate::formula::{Clause, Literal};
    use num_rational::Ratio;

    fn formula(k: usize, n: usize, clauses: &[&[i64]]) -> Formula {
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

    #[test]
    fn disjoint_clauses_expand_fully() {
        let f = formula(3, 9, &[&[1, 2, 3], &[4, -5, 6], &[-7, 8, 9]]);
        let cls = classify(&f, 100, Ratio::new(1, 10));
        let r = audit(&f, &cls, &AuditOptions::default());
        assert_eq!(r.expansion.sets, vec![3, 0, 0, 0]);
        assert_eq!(r.expansion.min_ratio[0], Some(1.0));
        assert!(!r.expansion.truncated);
    }

    #[test]
    fn clause_overlaps_itself() {
        let f = Formula::random(3, 8, 6, 1);
        let y = f.clause_vars(0).to_vec();
        assert!(overlap_count(&f, &y, 3) >= 1);
    }

    #[test]
    fn path_has_expected_connected_sets() {
        // Path 0-1-2-3: 4 singletons, 3 pairs, 2 triples, 1 quadruple.
        let adj = vec![vec![1], vec![0, 2], vec![1, 3], vec![2]];
        let mut by_size = [0; 4];
        connected_sets(&adj, 4, &mut |s| {
            by_size[s.len() - 1] += 1;
            true
        });
        assert_eq!(by_size, [4, 3, 2, 1]);
    }

    #[test]
    fn limit_truncates() {
        let f = Formula::random(3, 10, 15, 3);
        let cls = classify(&f, 100, Ratio::new(1, 10));
        let opts = AuditOptions {
            expansion_limit: 5,
            ..AuditOptions::default()
        };
        let r = audit(&f, &cls, &opts);
        assert!(r.expansion.truncated);
        assert_eq!(r.expansion.sets.iter().sum::<usize>(), 5);
    }
}
