//! The feasible point the completeness argument constructs: the coupling
//! probabilities Q of every node, scaled by exact model counts. Used to
//! verify that the LP admits the solution it is supposed to.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::formula::PartialAssignment;
use crate::tree::{CouplingTree, NodeKind};

#[derive(Debug, Clone)]
pub struct CanonicalSolution {
    /// `|Ω^{A_i(ρ) ∪ Λ}|` for each node, sides 1 and 2.
    pub counts: Vec<[BigUint; 2]>,
    /// Probability that the greedy coupling visits each node.
    pub q: Vec<BigRational>,
    /// At internal nodes, the probability that the branching variable is T
    /// under each side's conditional distribution.
    pub psi: Vec<Option<[BigRational; 2]>>,
    /// LP point, indexed like the LP variables (`2 id` and `2 id + 1`).
    pub p: Vec<BigRational>,
}

fn frac(a: &BigUint, b: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(a.clone()), BigInt::from(b.clone()))
}

/// Builds the canonical solution, with `count(a)` returning the number of
/// models of the formula extending `a`. Every node's sides must have
/// models.
pub fn canonical_solution(
    tree: &CouplingTree,
    mut count: impl FnMut(&PartialAssignment) -> Result<BigUint>,
) -> Result<CanonicalSolution> {
    let mut counts = Vec::with_capacity(tree.nodes.len());
    for node in &tree.nodes {
        let mut pair: [BigUint; 2] = Default::default();
        for side in [1u8, 2] {
            let a = tree
                .lambda
                .union(node.side(side))
                .ok_or_else(|| Error::InvariantViolation(format!("node {} conflicts with Λ", node.id)))?;
            let c = count(&a)?;
            if c.is_zero() {
                return Err(Error::EmptyAssignmentSet { node: node.id, side });
            }
            pair[side as usize - 1] = c;
        }
        counts.push(pair);
    }

    let n = tree.nodes.len();
    let mut q = vec![BigRational::zero(); n];
    let mut psi = vec![None; n];
    q[0] = BigRational::one();
    // Preorder: parents precede children.
    for node in &tree.nodes {
        let (NodeKind::Internal, Some(ch)) = (node.kind, node.children) else {
            continue;
        };
        let id = node.id;
        // ψ_T,1 from the (T,·) children's side-1 count, ψ_T,2 from (·,T)'s side-2 count.
        let t1 = frac(&counts[ch[0]][0], &counts[id][0]);
        let t2 = frac(&counts[ch[0]][1], &counts[id][1]);
        let one = BigRational::one();
        let both_t = t1.clone().min(t2.clone());
        let both_f = (&one - &t1).min(&one - &t2);
        q[ch[0]] = &q[id] * &both_t;
        q[ch[1]] = &q[id] * (&t1 - &both_t);
        q[ch[3]] = &q[id] * &both_f;
        q[ch[2]] = &q[id] * ((&one - &t1) - &both_f);
        psi[id] = Some([t1, t2]);
    }

    let mut p = vec![BigRational::zero(); 2 * n];
    for id in 0..n {
        for side in 0..2 {
            p[2 * id + side] = &q[id] * frac(&counts[0][side], &counts[id][side]);
        }
    }
    Ok(CanonicalSolution { counts, q, psi, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::classify;
    use crate::counter::enumerate_count;
    use crate::formula::Formula;
    use crate::lp::{build_lp, violations, Bound};
    use crate::marking::Marking;
    use crate::tree::{build_tree, TreeContext, TreeParams};
    use num_rational::Ratio;

    #[test]
    fn canonical_point_is_feasible() {
        let mut checked = 0;
        for seed in 0..40 {
            let f = Formula::random(4, 9, 5, seed);
            let cls = classify(&f, 1000, Ratio::new(1, 10));
            let marking = Marking::from_vars(9, 1..=5);
            let Ok(ctx) = TreeContext::new(&f, &cls, &marking, &PartialAssignment::new(), 1) else {
                continue;
            };
            let tree = build_tree(&ctx, &TreeParams::default()).unwrap();
            let Ok(sol) = canonical_solution(&tree, |a| Ok(enumerate_count(&f, a)?.count)) else {
                continue;
            };
            checked += 1;
            assert_eq!(sol.q[0], BigRational::one());
            assert_eq!(sol.p[0], BigRational::one());
            assert_eq!(sol.p[1], BigRational::one());
            let total: BigRational = tree
                .nodes
                .iter()
                .filter(|n| n.kind != NodeKind::Internal)
                .map(|n| sol.q[n.id].clone())
                .sum();
            assert_eq!(total, BigRational::one());
            let ratio = frac(&sol.counts[0][0], &sol.counts[0][1]);
            let window = Bound::Finite(ratio);
            let lp = build_lp(&tree, &window, &window, &BigRational::one()).unwrap();
            assert!(violations(&lp, &sol.p).is_empty());
        }
        assert!(checked >= 10, "only {checked} trees had nonempty sides");
    }

    #[test]
    fn empty_side_is_reported() {
        // x1 forces x2 on every model: with pivot x1 = T and x2 = F on the
        // branch, side 1 is empty.
        let f = Formula::new(
            2,
            3,
            vec![crate::formula::Clause::new(vec![
                crate::formula::Literal::neg(1),
                crate::formula::Literal::pos(2),
            ])],
        )
        .unwrap();
        let cls = classify(&f, 1000, Ratio::new(1, 10));
        let marking = Marking::from_vars(3, [1, 2]);
        let ctx = TreeContext::new(&f, &cls, &marking, &PartialAssignment::new(), 1).unwrap();
        let tree = build_tree(&ctx, &TreeParams::default()).unwrap();
        assert!(matches!(
            canonical_solution(&tree, |a| Ok(enumerate_count(&f, a)?.count)),
            Err(Error::EmptyAssignmentSet { .. })
        ));
    }
}
