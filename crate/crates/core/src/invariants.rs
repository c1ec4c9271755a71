//! Independent re-check of the coupling-tree properties. Everything is
//! recomputed from the formula, classification, marking and Λ; nothing is
//! shared with the builder beyond the node data being checked.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::formula::{connected_components, ClauseId, Var};
use crate::tree::{CouplingNode, CouplingTree, NodeKind, TreeContext, BRANCHES};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub node: usize,
    pub property: &'static str,
    pub detail: String,
}

struct View<'a> {
    ctx: &'a TreeContext<'a>,
    /// Unassigned variables of each clause not satisfied by Λ; `None` for
    /// satisfied clauses.
    live_vars: Vec<Option<Vec<Var>>>,
    var_adjacency: Vec<Vec<Var>>,
}

impl<'a> View<'a> {
    fn new(ctx: &'a TreeContext<'a>) -> Self {
        let f = ctx.formula;
        let live_vars = f
            .clauses()
            .iter()
            .map(|c| {
                if c.is_satisfied_by(&ctx.lambda) {
                    None
                } else {
                    Some(c.vars().into_iter().filter(|&v| !ctx.lambda.contains(v)).collect())
                }
            })
            .collect();
        let mut var_adjacency = vec![Vec::new(); f.n() + 1];
        for c in f.clauses() {
            let vs = c.vars();
            for &v in &vs {
                var_adjacency[v as usize].extend(vs.iter().copied().filter(|&w| w != v));
            }
        }
        View {
            ctx,
            live_vars,
            var_adjacency,
        }
    }

    fn marked_live(&self, c: ClauseId) -> Vec<Var> {
        self.live_vars[c]
            .iter()
            .flatten()
            .copied()
            .filter(|&v| self.ctx.marking.is_marked(v))
            .collect()
    }
}

fn set(xs: &[Var]) -> BTreeSet<Var> {
    xs.iter().copied().collect()
}

/// Checks every node of `tree` and the links between nodes.
pub fn check_tree(ctx: &TreeContext, tree: &CouplingTree) -> Vec<Violation> {
    let view = View::new(ctx);
    let mut out = Vec::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        if node.id != i {
            out.push(Violation {
                node: i,
                property: "ids",
                detail: format!("node at position {i} has id {}", node.id),
            });
        }
        check_node(&view, tree, node, &mut out);
    }
    check_root(&view, tree, &mut out);
    out
}

fn check_root(view: &View, tree: &CouplingTree, out: &mut Vec<Violation>) {
    let root = tree.root();
    let v = view.ctx.pivot;
    let mut bad = |detail: String| {
        out.push(Violation {
            node: 0,
            property: "root",
            detail,
        })
    };
    if root.parent.is_some() {
        bad("root has a parent".into());
    }
    if root.v_set != [v] {
        bad(format!("V_set = {:?}, expected [{v}]", root.v_set));
    }
    if root.a1.get(v) != Some(true) || root.a2.get(v) != Some(false) {
        bad("pivot must be T on side 1 and F on side 2".into());
    }
    for c in 0..view.ctx.formula.m() {
        if view.ctx.formula.clause_vars(c).contains(&v) && !root.reason(c).disagree {
            bad(format!("clause {c} contains the pivot but is not failed with disagree"));
        }
    }
}

fn check_node(view: &View, tree: &CouplingTree, node: &CouplingNode, out: &mut Vec<Violation>) {
    let ctx = view.ctx;
    let f = ctx.formula;
    let id = node.id;
    let mut fail = |property: &'static str, detail: String| {
        out.push(Violation {
            node: id,
            property,
            detail,
        })
    };
    let v_i = set(&node.v_i);
    let v_set = set(&node.v_set);
    let c_rem: BTreeSet<ClauseId> = node.c_rem.iter().copied().collect();
    let inside = |v: &Var| v_i.contains(v);

    // Domains.
    let d1: BTreeSet<Var> = node.a1.domain().collect();
    let d2: BTreeSet<Var> = node.a2.domain().collect();
    if d1 != v_set || d2 != v_set {
        fail("domain", "A1 and A2 must be defined exactly on V_set".into());
    }
    if node.v_i.iter().chain(&node.v_set).any(|&v| ctx.lambda.contains(v)) {
        fail("domain", "V_I or V_set contains a variable assigned by Λ".into());
    }

    // P1.
    if !v_i.contains(&ctx.pivot) || !v_set.contains(&ctx.pivot) {
        fail("P1", "pivot not in V_I ∩ V_set".into());
    }

    for &c in &c_rem {
        let Some(vars) = &view.live_vars[c] else {
            fail("C_rem", format!("clause {c} is satisfied by Λ yet remains"));
            continue;
        };
        let any_in = vars.iter().any(inside);
        let all_in = vars.iter().all(inside);
        // P2.
        let unset_marked = view.marked_live(c).iter().any(|v| !v_set.contains(v));
        if !(all_in || !any_in || unset_marked) {
            fail("P2", format!("clause {c} crosses V_I with all marked variables set"));
        }
        // P3.
        if ctx.cls.is_bad_clause(c) && any_in {
            fail("P3", format!("bad clause {c} remains but touches V_I"));
        }
    }

    // P4.
    for (c, vars) in view.live_vars.iter().enumerate() {
        let Some(vars) = vars else { continue };
        if c_rem.contains(&c) {
            continue;
        }
        let clause = f.clause(c);
        let both = clause.is_satisfied_by(&node.a1) && clause.is_satisfied_by(&node.a2);
        let enclosed = vars.iter().all(|v| v_i.contains(v) || v_set.contains(v));
        if !both && !enclosed {
            fail(
                "P4",
                format!("removed clause {c} is neither satisfied by both sides nor enclosed"),
            );
        }
    }

    // P5.
    if !node.v_i.is_empty() {
        let comps = connected_components(&view.var_adjacency, &node.v_i);
        if comps.len() != 1 {
            fail("P5", format!("V_I splits into {} components", comps.len()));
        }
    }

    // P6. A pivot that occurs in no clause is exempt: the root puts it in
    // V_I with no failed clause to cover it.
    let pivot_isolated = !f.clauses().iter().any(|c| c.contains_var(ctx.pivot));
    for &u in &node.v_i {
        if u == ctx.pivot && pivot_isolated {
            continue;
        }
        let covered = node.failed.keys().any(|&c| f.clause_vars(c).contains(&u));
        if !covered {
            fail("P6", format!("variable {u} of V_I lies in no failed clause"));
        }
    }

    // P7.
    for &u in v_set.difference(&v_i) {
        if node.a1.get(u) != node.a2.get(u) {
            fail("P7", format!("sides disagree on {u} outside V_I"));
        }
    }

    // P8: F is exactly the set of clauses with a nonempty reason.
    for (&c, r) in &node.failed {
        if r.is_empty() {
            fail("P8", format!("clause {c} is stored with an empty reason"));
        }
    }

    // P9.
    for (&c, r) in &node.failed {
        if r.bad != ctx.cls.is_bad_clause(c) {
            fail(
                "P9.1",
                format!(
                    "clause {c}: bad flag {} but clause bad = {}",
                    r.bad,
                    ctx.cls.is_bad_clause(c)
                ),
            );
        }
        let disagrees = f
            .clause_vars(c)
            .iter()
            .any(|&v| v_i.contains(&v) && v_set.contains(&v) && node.a1.get(v) != node.a2.get(v));
        if r.disagree != disagrees {
            fail(
                "P9.2",
                format!(
                    "clause {c}: disagree flag {} but disagreement = {disagrees}",
                    r.disagree
                ),
            );
        }
        for side in [1u8, 2] {
            if !r.has_side(side) {
                continue;
            }
            let ok = match &view.live_vars[c] {
                None => false,
                Some(vars) => {
                    vars.iter().all(|v| v_i.contains(v) || v_set.contains(v))
                        && view.marked_live(c).iter().all(|v| v_set.contains(v))
                        && !f.clause(c).is_satisfied_by(node.side(side))
                }
            };
            if !ok {
                fail(
                    "P9.3",
                    format!("clause {c} carries side {side} without meeting its conditions"),
                );
            }
        }
    }
    // Converse of P9.3 for good surviving clauses that left C_rem unsatisfied.
    for (c, vars) in view.live_vars.iter().enumerate() {
        let Some(vars) = vars else { continue };
        if c_rem.contains(&c) || !ctx.cls.is_good_clause(c) || !node.failed.contains_key(&c) {
            continue;
        }
        let r = node.reason(c);
        let crossed = vars.iter().any(inside);
        let marked_set = view.marked_live(c).iter().all(|v| v_set.contains(v));
        for side in [1u8, 2] {
            let unsat = !f.clause(c).is_satisfied_by(node.side(side));
            let enclosed = vars.iter().all(|v| v_i.contains(v) || v_set.contains(v));
            if crossed && marked_set && enclosed && unsat && !r.has_side(side) {
                fail(
                    "P9.3",
                    format!("clause {c} failed unsatisfied on side {side} without the side flag"),
                );
            }
        }
    }

    // Kind.
    let crossing = c_rem.iter().copied().find(|&c| {
        view.live_vars[c]
            .as_ref()
            .is_some_and(|vars| vars.iter().any(inside) && vars.iter().any(|v| !inside(v)))
    });
    let expected = if tree.depth.exceeded_by(node.v_i.len()) {
        NodeKind::Truncating
    } else if crossing.is_some() {
        NodeKind::Internal
    } else {
        NodeKind::Leaf
    };
    if node.kind != expected {
        fail("kind", format!("{:?} but the definition gives {expected:?}", node.kind));
    }

    match (node.kind, node.children) {
        (NodeKind::Internal, Some(children)) => {
            let Some(b) = node.branching else {
                fail("branching", "internal node without a branching choice".into());
                return;
            };
            if Some(b.clause) != crossing {
                fail(
                    "branching",
                    format!("branches on clause {} instead of {crossing:?}", b.clause),
                );
            }
            let first = view.marked_live(b.clause).into_iter().find(|v| !v_set.contains(v));
            if Some(b.var) != first {
                fail(
                    "branching",
                    format!("branches on variable {} instead of {first:?}", b.var),
                );
            }
            for (j, &cid) in children.iter().enumerate() {
                let child = &tree.nodes[cid];
                let (t1, t2) = BRANCHES[j];
                if child.parent != Some(id) || child.branch != Some((t1, t2)) {
                    fail("links", format!("child {cid} has wrong parent or branch values"));
                }
                check_growth(node, child, b.var, t1, t2, &mut fail);
            }
            let a1 = |j: usize| &tree.nodes[children[j]].a1;
            let a2 = |j: usize| &tree.nodes[children[j]].a2;
            if a1(0) != a1(1) || a1(2) != a1(3) || a2(0) != a2(2) || a2(1) != a2(3) {
                fail(
                    "siblings",
                    "sibling assignments differ where they should coincide".into(),
                );
            }
        }
        (NodeKind::Internal, None) => fail("links", "internal node without children".into()),
        (_, Some(_)) => fail("links", "leaf or truncating node with children".into()),
        (_, None) => {}
    }
}

fn check_growth(
    parent: &CouplingNode,
    child: &CouplingNode,
    u: Var,
    t1: bool,
    t2: bool,
    fail: &mut impl FnMut(&'static str, String),
) {
    let cid = child.id;
    let p_set = set(&parent.v_set);
    let mut expect_set = p_set.clone();
    expect_set.insert(u);
    if set(&child.v_set) != expect_set || p_set.contains(&u) {
        fail("growth", format!("child {cid}: V_set is not the parent's plus {u}"));
    }
    if !set(&parent.v_i).is_subset(&set(&child.v_i)) {
        fail("growth", format!("child {cid}: V_I shrank"));
    }
    if !set_c(&child.c_rem).is_subset(&set_c(&parent.c_rem)) {
        fail("growth", format!("child {cid}: C_rem grew"));
    }
    for (&c, r) in &parent.failed {
        let s = child.reason(c);
        if (r.bad && !s.bad) || (r.disagree && !s.disagree) || (r.one && !s.one) || (r.two && !s.two) {
            fail("growth", format!("child {cid}: reason of clause {c} shrank"));
        }
    }
    let extends = |pa: &crate::formula::PartialAssignment, ca: &crate::formula::PartialAssignment, t: bool| {
        pa.iter().all(|(v, b)| ca.get(v) == Some(b)) && ca.get(u) == Some(t) && ca.len() == pa.len() + 1
    };
    if !extends(&parent.a1, &child.a1, t1) || !extends(&parent.a2, &child.a2, t2) {
        fail(
            "growth",
            format!("child {cid}: assignments do not extend the parent's by the branch values"),
        );
    }
}

fn set_c(xs: &[ClauseId]) -> BTreeSet<ClauseId> {
    xs.iter().copied().collect()
}
