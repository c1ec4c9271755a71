//! The coupling tree for a pivot variable v*: a greedy variable-by-variable
//! coupling of the formula conditioned on v* = T against v* = F, expanded
//! until every branch has separated its interior from the rest of the
//! formula (or has grown past the truncation depth).

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::classify::Classification;
use crate::enumerate::LocalCnf;
use crate::error::{Error, Result};
use crate::formula::{simplify_under, ClauseId, Formula, PartialAssignment, Var};
use crate::marking::Marking;

/// Why a clause was recorded as failed at a node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Reason {
    pub bad: bool,
    pub disagree: bool,
    pub one: bool,
    pub two: bool,
}

impl Reason {
    pub fn is_empty(&self) -> bool {
        !(self.bad || self.disagree || self.one || self.two)
    }

    pub fn has_side(&self, side: u8) -> bool {
        match side {
            1 => self.one,
            2 => self.two,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Internal,
    Leaf,
    Truncating,
}

/// The clause and variable a node branches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Branching {
    pub clause: ClauseId,
    pub var: Var,
}

/// Counts of satisfying extensions over `V_I \ V_set` of the clauses lying
/// inside `V_I ∪ V_set`, under each side's assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LeafCounts {
    pub n1: u64,
    pub n2: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeafRatio {
    pub n1: u64,
    pub n2: u64,
    #[serde(with = "crate::rational::serde_str")]
    pub r: BigRational,
}

/// Truncation depth: nodes with more than `L` interior variables stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Depth {
    Finite(usize),
    Infinite,
}

impl Depth {
    pub fn exceeded_by(self, size: usize) -> bool {
        match self {
            Depth::Finite(l) => size > l,
            Depth::Infinite => false,
        }
    }

    /// `C0 * 3k^2 Δ * ceil(ln(n/ε))`.
    pub fn paper(c0: usize, k: usize, delta: usize, n: usize, eps: f64) -> Depth {
        let log = (n as f64 / eps).ln().ceil().max(1.0) as usize;
        Depth::Finite(c0 * 3 * k * k * delta * log)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingNode {
    pub id: usize,
    pub parent: Option<usize>,
    /// Values (τ₁, τ₂) given to the parent's branching variable.
    pub branch: Option<(bool, bool)>,
    pub kind: NodeKind,
    pub a1: PartialAssignment,
    pub a2: PartialAssignment,
    pub v_i: Vec<Var>,
    pub v_set: Vec<Var>,
    pub c_rem: Vec<ClauseId>,
    pub failed: BTreeMap<ClauseId, Reason>,
    pub branching: Option<Branching>,
    /// Children in the order (T,T), (T,F), (F,T), (F,F).
    pub children: Option<[usize; 4]>,
    pub counts: Option<LeafCounts>,
}

impl CouplingNode {
    pub fn reason(&self, c: ClauseId) -> Reason {
        self.failed.get(&c).copied().unwrap_or_default()
    }

    pub fn side(&self, side: u8) -> &PartialAssignment {
        if side == 1 {
            &self.a1
        } else {
            &self.a2
        }
    }

    /// Child index for branch values (τ₁, τ₂).
    pub fn child_index(t1: bool, t2: bool) -> usize {
        (!t1 as usize) * 2 + !t2 as usize
    }
}

pub const BRANCHES: [(bool, bool); 4] = [(true, true), (true, false), (false, true), (false, false)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TreeParams {
    pub depth: Depth,
    pub node_cap: usize,
    /// Compute leaf counts while building.
    pub leaf_counts: bool,
    /// Cap on `|V_I \ V_set|` when counting.
    pub enumeration_cap: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            depth: Depth::Infinite,
            node_cap: 200_000,
            leaf_counts: true,
            enumeration_cap: 25,
        }
    }
}

/// The formula conditioned on a prefix Λ, with the per-clause data the tree
/// needs: surviving clauses, their unassigned variables and unassigned marked
/// variables.
#[derive(Debug, Clone)]
pub struct TreeContext<'a> {
    pub formula: &'a Formula,
    pub cls: &'a Classification,
    pub marking: &'a Marking,
    pub lambda: PartialAssignment,
    pub pivot: Var,
    /// Surviving clauses, ascending.
    pub live: Vec<ClauseId>,
    live_mask: Vec<bool>,
    free_mask: Vec<bool>,
    /// Unassigned variables of each surviving clause (empty otherwise).
    vars: Vec<Vec<Var>>,
    /// Unassigned marked variables of each surviving clause.
    marked: Vec<Vec<Var>>,
    /// All clauses containing each variable.
    occurrences: Vec<Vec<ClauseId>>,
}

impl<'a> TreeContext<'a> {
    pub fn new(
        formula: &'a Formula,
        cls: &'a Classification,
        marking: &'a Marking,
        lambda: &PartialAssignment,
        pivot: Var,
    ) -> Result<Self> {
        if lambda.contains(pivot) {
            return Err(Error::PivotAssigned(pivot));
        }
        if !marking.is_marked(pivot) || !cls.is_good_var(pivot) {
            return Err(Error::PivotNotMarked(pivot));
        }
        let simplified = simplify_under(formula, lambda);
        if simplified.is_unsatisfiable() {
            return Err(Error::Unsatisfiable);
        }
        let mut live_mask = vec![false; formula.m()];
        let mut vars = vec![Vec::new(); formula.m()];
        let mut marked = vec![Vec::new(); formula.m()];
        for rc in &simplified.clauses {
            live_mask[rc.id] = true;
            vars[rc.id] = rc.vars();
            marked[rc.id] = vars[rc.id].iter().copied().filter(|&v| marking.is_marked(v)).collect();
        }
        let mut free_mask = vec![false; formula.n() + 1];
        for &v in &simplified.free_vars {
            free_mask[v as usize] = true;
        }
        Ok(TreeContext {
            formula,
            cls,
            marking,
            lambda: lambda.clone(),
            pivot,
            live: simplified.clause_ids().collect(),
            live_mask,
            free_mask,
            vars,
            marked,
            occurrences: formula.var_occurrences(),
        })
    }

    pub fn is_live(&self, c: ClauseId) -> bool {
        self.live_mask[c]
    }

    pub fn is_free(&self, v: Var) -> bool {
        self.free_mask[v as usize]
    }

    /// Unassigned variables of a surviving clause.
    pub fn clause_vars(&self, c: ClauseId) -> &[Var] {
        &self.vars[c]
    }

    /// Unassigned marked variables of a surviving clause.
    pub fn clause_marked(&self, c: ClauseId) -> &[Var] {
        &self.marked[c]
    }

    pub fn satisfies(&self, a: &PartialAssignment, c: ClauseId) -> bool {
        self.formula.clause(c).is_satisfied_by(a)
    }
}

/// Mutable node contents while building.
#[derive(Clone)]
struct State {
    a1: PartialAssignment,
    a2: PartialAssignment,
    v_i: Vec<bool>,
    v_set: Vec<bool>,
    c_rem: Vec<bool>,
    failed: BTreeMap<ClauseId, Reason>,
}

impl State {
    fn crosses(&self, ctx: &TreeContext, c: ClauseId) -> bool {
        let vs = ctx.clause_vars(c);
        vs.iter().any(|&v| self.v_i[v as usize]) && vs.iter().any(|&v| !self.v_i[v as usize])
    }

    fn first_crossing(&self, ctx: &TreeContext) -> Option<ClauseId> {
        ctx.live
            .iter()
            .copied()
            .find(|&c| self.c_rem[c] && self.crosses(ctx, c))
    }

    fn mark_failed(&mut self, c: ClauseId, f: impl FnOnce(&mut Reason)) {
        f(self.failed.entry(c).or_default());
    }

    fn absorb(&mut self, ctx: &TreeContext, c: ClauseId) {
        for &v in ctx.clause_vars(c) {
            if !self.v_set[v as usize] {
                self.v_i[v as usize] = true;
            }
        }
        self.c_rem[c] = false;
    }

    /// Drops surviving clauses satisfied by both sides, then repeatedly
    /// absorbs (a) good clauses crossing V_I whose unassigned marked
    /// variables are all set and (b) bad clauses touching V_I, until neither
    /// applies.
    fn close(&mut self, ctx: &TreeContext) {
        for &c in &ctx.live {
            if self.c_rem[c] && ctx.satisfies(&self.a1, c) && ctx.satisfies(&self.a2, c) {
                self.c_rem[c] = false;
            }
        }
        loop {
            let mut changed = false;
            while let Some(c) = ctx.live.iter().copied().find(|&c| {
                self.c_rem[c]
                    && ctx.cls.is_good_clause(c)
                    && self.crosses(ctx, c)
                    && ctx.clause_marked(c).iter().all(|&v| self.v_set[v as usize])
            }) {
                let one = !ctx.satisfies(&self.a1, c);
                let two = !ctx.satisfies(&self.a2, c);
                self.mark_failed(c, |r| {
                    r.one |= one;
                    r.two |= two;
                });
                self.absorb(ctx, c);
                changed = true;
            }
            while let Some(c) = ctx.live.iter().copied().find(|&c| {
                self.c_rem[c] && ctx.cls.is_bad_clause(c) && ctx.clause_vars(c).iter().any(|&v| self.v_i[v as usize])
            }) {
                self.mark_failed(c, |r| r.bad = true);
                self.absorb(ctx, c);
                changed = true;
            }
            if !changed {
                break;
            }
        }
    }

    fn v_i_size(&self) -> usize {
        self.v_i.iter().filter(|&&b| b).count()
    }

    fn kind(&self, ctx: &TreeContext, depth: Depth) -> NodeKind {
        if depth.exceeded_by(self.v_i_size()) {
            NodeKind::Truncating
        } else if self.first_crossing(ctx).is_some() {
            NodeKind::Internal
        } else {
            NodeKind::Leaf
        }
    }

    fn branching(&self, ctx: &TreeContext) -> Result<Branching> {
        let clause = self
            .first_crossing(ctx)
            .ok_or_else(|| Error::InvariantViolation("internal node without a crossing clause".into()))?;
        let var = ctx
            .clause_marked(clause)
            .iter()
            .copied()
            .find(|&v| !self.v_set[v as usize])
            .ok_or_else(|| {
                Error::InvariantViolation(format!("crossing clause {clause} has no unset marked variable"))
            })?;
        Ok(Branching { clause, var })
    }

    fn child(&self, ctx: &TreeContext, u: Var, t1: bool, t2: bool) -> State {
        let mut s = self.clone();
        s.v_set[u as usize] = true;
        s.a1.set(u, t1);
        s.a2.set(u, t2);
        if t1 != t2 {
            s.v_i[u as usize] = true;
            for &c in &ctx.occurrences[u as usize] {
                s.mark_failed(c, |r| r.disagree = true);
            }
        }
        s.close(ctx);
        s
    }

    fn root(ctx: &TreeContext) -> State {
        let n = ctx.formula.n();
        let v = ctx.pivot;
        let mut s = State {
            a1: PartialAssignment::new().with(v, true),
            a2: PartialAssignment::new().with(v, false),
            v_i: vec![false; n + 1],
            v_set: vec![false; n + 1],
            c_rem: (0..ctx.formula.m()).map(|c| ctx.is_live(c)).collect(),
            failed: BTreeMap::new(),
        };
        s.v_i[v as usize] = true;
        s.v_set[v as usize] = true;
        for &c in &ctx.occurrences[v as usize] {
            s.mark_failed(c, |r| r.disagree = true);
        }
        s.close(ctx);
        s
    }

    fn inner_clauses<'c>(&'c self, ctx: &'c TreeContext) -> impl Iterator<Item = ClauseId> + 'c {
        ctx.live.iter().copied().filter(|&c| {
            ctx.clause_vars(c)
                .iter()
                .all(|&v| self.v_i[v as usize] || self.v_set[v as usize])
        })
    }

    fn counts(&self, ctx: &TreeContext, cap: usize) -> Result<LeafCounts> {
        let free: Vec<Var> = (1..=ctx.formula.n() as Var)
            .filter(|&v| self.v_i[v as usize] && !self.v_set[v as usize])
            .collect();
        if free.len() > cap {
            return Err(Error::EnumerationCapExceeded { free: free.len(), cap });
        }
        let inner: Vec<ClauseId> = self.inner_clauses(ctx).collect();
        let count = |a: &PartialAssignment| -> Result<u64> {
            let fixed = ctx.lambda.union(a).expect("sides assign only free variables");
            Ok(LocalCnf::new(ctx.formula, inner.iter().copied(), &fixed, &free)?.count())
        };
        Ok(LeafCounts {
            n1: count(&self.a1)?,
            n2: count(&self.a2)?,
        })
    }

    fn into_node(self, id: usize, parent: Option<usize>, branch: Option<(bool, bool)>, kind: NodeKind) -> CouplingNode {
        let collect = |mask: &[bool]| -> Vec<Var> {
            mask.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(v, _)| v as Var)
                .collect()
        };
        CouplingNode {
            id,
            parent,
            branch,
            kind,
            v_i: collect(&self.v_i),
            v_set: collect(&self.v_set),
            c_rem: self
                .c_rem
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(c, _)| c)
                .collect(),
            a1: self.a1,
            a2: self.a2,
            failed: self.failed,
            branching: None,
            children: None,
            counts: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingTree {
    pub pivot: Var,
    pub depth: Depth,
    pub lambda: PartialAssignment,
    /// Nodes in depth-first preorder; the root is node 0.
    pub nodes: Vec<CouplingNode>,
}

impl CouplingTree {
    pub fn root(&self) -> &CouplingNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &CouplingNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Leaf)
    }

    pub fn truncating(&self) -> impl Iterator<Item = &CouplingNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Truncating)
    }

    pub fn stats(&self) -> TreeStats {
        TreeStats {
            nodes: self.nodes.len(),
            leaves: self.leaves().count(),
            truncating: self.truncating().count(),
            max_v_set: self.nodes.iter().map(|n| n.v_set.len()).max().unwrap_or(0),
            max_v_i: self.nodes.iter().map(|n| n.v_i.len()).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TreeStats {
    pub nodes: usize,
    pub leaves: usize,
    pub truncating: usize,
    pub max_v_set: usize,
    pub max_v_i: usize,
}

/// The root node of the tree for `ctx.pivot`.
pub fn make_root(ctx: &TreeContext, depth: Depth) -> CouplingNode {
    let s = State::root(ctx);
    let kind = s.kind(ctx, depth);
    s.into_node(0, None, None, kind)
}

fn state_of(ctx: &TreeContext, node: &CouplingNode) -> State {
    let n = ctx.formula.n();
    let mut v_i = vec![false; n + 1];
    let mut v_set = vec![false; n + 1];
    for &v in &node.v_i {
        v_i[v as usize] = true;
    }
    for &v in &node.v_set {
        v_set[v as usize] = true;
    }
    let mut c_rem = vec![false; ctx.formula.m()];
    for &c in &node.c_rem {
        c_rem[c] = true;
    }
    State {
        a1: node.a1.clone(),
        a2: node.a2.clone(),
        v_i,
        v_set,
        c_rem,
        failed: node.failed.clone(),
    }
}

/// The four children of an internal node, in branch order, with their
/// branching choice. Ids and parents are left for the caller to fill in.
pub fn make_children(ctx: &TreeContext, node: &CouplingNode, depth: Depth) -> Result<(Branching, [CouplingNode; 4])> {
    let s = state_of(ctx, node);
    let b = s.branching(ctx)?;
    let children = BRANCHES.map(|(t1, t2)| {
        let c = s.child(ctx, b.var, t1, t2);
        let kind = c.kind(ctx, depth);
        c.into_node(0, Some(node.id), Some((t1, t2)), kind)
    });
    Ok((b, children))
}

/// Recomputes a node's kind from its contents.
pub fn classify_node(ctx: &TreeContext, node: &CouplingNode, depth: Depth) -> NodeKind {
    state_of(ctx, node).kind(ctx, depth)
}

/// `N₁/N₂` for any node. Both counts must be positive.
pub fn compute_r(ctx: &TreeContext, node: &CouplingNode, cap: usize) -> Result<LeafRatio> {
    let counts = state_of(ctx, node).counts(ctx, cap)?;
    if counts.n1 == 0 {
        return Err(Error::ZeroCount { node: node.id, side: 1 });
    }
    if counts.n2 == 0 {
        return Err(Error::ZeroCount { node: node.id, side: 2 });
    }
    Ok(LeafRatio {
        n1: counts.n1,
        n2: counts.n2,
        r: BigRational::new(BigInt::from(counts.n1), BigInt::from(counts.n2)),
    })
}

pub fn build_tree(ctx: &TreeContext, params: &TreeParams) -> Result<CouplingTree> {
    let mut nodes: Vec<CouplingNode> = Vec::new();
    let root = State::root(ctx);
    expand(ctx, params, root, None, None, &mut nodes)?;
    Ok(CouplingTree {
        pivot: ctx.pivot,
        depth: params.depth,
        lambda: ctx.lambda.clone(),
        nodes,
    })
}

fn expand(
    ctx: &TreeContext,
    params: &TreeParams,
    state: State,
    parent: Option<usize>,
    branch: Option<(bool, bool)>,
    nodes: &mut Vec<CouplingNode>,
) -> Result<usize> {
    if nodes.len() >= params.node_cap {
        return Err(Error::NodeCapExceeded {
            cap: params.node_cap,
            leaves: nodes.iter().filter(|n| n.kind == NodeKind::Leaf).count(),
            truncating: nodes.iter().filter(|n| n.kind == NodeKind::Truncating).count(),
        });
    }
    let id = nodes.len();
    let kind = state.kind(ctx, params.depth);
    let mut counts = None;
    let mut branching = None;
    let mut pending = None;
    match kind {
        NodeKind::Leaf if params.leaf_counts => {
            counts = Some(state.counts(ctx, params.enumeration_cap)?);
        }
        NodeKind::Internal => {
            let b = state.branching(ctx)?;
            branching = Some(b);
            pending = Some(BRANCHES.map(|(t1, t2)| state.child(ctx, b.var, t1, t2)));
        }
        _ => {}
    }
    let mut node = state.into_node(id, parent, branch, kind);
    node.counts = counts;
    node.branching = branching;
    nodes.push(node);
    if let Some(children) = pending {
        let mut ids = [0; 4];
        for (j, child) in children.into_iter().enumerate() {
            ids[j] = expand(ctx, params, child, Some(id), Some(BRANCHES[j]), nodes)?;
        }
        nodes[id].children = Some(ids);
    }
    Ok(id)
}
