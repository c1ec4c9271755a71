//! Exact feasibility for the coupling-tree LP when the damping constraints
//! are vacuous (s <= 1). Every node's set of feasible (P1, P2) pairs is a
//! closed convex cone in the nonnegative quadrant, computed bottom-up from
//! the children's cones; the root is feasible iff (1, 1) lies in its cone.

use std::collections::HashMap;
use std::rc::Rc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{Bound, LpInstance};
use crate::tree::LeafCounts;

/// A nonzero primitive vector in the nonnegative quadrant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ray {
    pub x: BigInt,
    pub y: BigInt,
}

impl Ray {
    fn new(x: BigInt, y: BigInt) -> Ray {
        let g = x.gcd(&y);
        Ray { x: x / &g, y: y / &g }
    }
}

fn cross(ax: &BigInt, ay: &BigInt, bx: &BigInt, by: &BigInt) -> BigInt {
    ax * by - ay * bx
}

/// `{(x, y) >= 0}` cone spanned by two rays, `lo` not counter-clockwise of
/// `hi`; or the zero cone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cone {
    Zero,
    Span(Ray, Ray),
}

impl Cone {
    pub fn quadrant() -> Cone {
        Cone::Span(
            Ray::new(BigInt::one(), BigInt::zero()),
            Ray::new(BigInt::zero(), BigInt::one()),
        )
    }

    fn hull(rays: impl IntoIterator<Item = Ray>) -> Cone {
        let mut it = rays.into_iter();
        let Some(first) = it.next() else {
            return Cone::Zero;
        };
        let (mut lo, mut hi) = (first.clone(), first);
        for r in it {
            if cross(&r.x, &r.y, &lo.x, &lo.y).is_positive() {
                lo = r.clone();
            }
            if cross(&hi.x, &hi.y, &r.x, &r.y).is_positive() {
                hi = r;
            }
        }
        Cone::Span(lo, hi)
    }

    pub fn contains(&self, x: &BigRational, y: &BigRational) -> bool {
        match self {
            Cone::Zero => x.is_zero() && y.is_zero(),
            Cone::Span(lo, hi) => {
                let c = |a: &Ray, bx: &BigRational, by: &BigRational, flip: bool| {
                    let ax = BigRational::from_integer(a.x.clone());
                    let ay = BigRational::from_integer(a.y.clone());
                    let v = if flip { bx * ay - by * ax } else { ax * by - ay * bx };
                    !v.is_negative()
                };
                !x.is_negative() && !y.is_negative() && c(lo, x, y, false) && c(hi, x, y, true)
            }
        }
    }

    fn generators(&self) -> Vec<&Ray> {
        match self {
            Cone::Zero => Vec::new(),
            Cone::Span(lo, hi) if lo == hi => vec![lo],
            Cone::Span(lo, hi) => vec![lo, hi],
        }
    }
}

/// The cone `{(P1, P2) >= 0 : constraints}` at a leaf, where the lower
/// bound reads `N1 P1 >= r_l N2 P2` (or `N2 P2 <= 0` if r_l is infinite) and
/// the upper bound `N1 P1 <= r_u N2 P2` (absent if r_u is infinite).
pub fn leaf_cone(counts: LeafCounts, lower: &Bound, upper: &Bound) -> Cone {
    let n1 = BigInt::from(counts.n1);
    let n2 = BigInt::from(counts.n2);
    // Half-planes a x + b y >= 0.
    let mut halfplanes: Vec<(BigInt, BigInt)> = Vec::new();
    match lower {
        Bound::Finite(r) => halfplanes.push((&n1 * r.denom(), -(r.numer() * &n2))),
        Bound::Infinite => halfplanes.push((BigInt::zero(), -n2.clone())),
    }
    if let Bound::Finite(r) = upper {
        halfplanes.push((-(&n1 * r.denom()), r.numer() * &n2));
    }
    let mut candidates = vec![(BigInt::one(), BigInt::zero()), (BigInt::zero(), BigInt::one())];
    for (a, b) in &halfplanes {
        for d in [(b.clone(), -a.clone()), (-b.clone(), a.clone())] {
            if !d.0.is_negative() && !d.1.is_negative() && !(d.0.is_zero() && d.1.is_zero()) {
                candidates.push(d);
            }
        }
    }
    Cone::hull(
        candidates
            .into_iter()
            .filter(|(x, y)| halfplanes.iter().all(|(a, b)| !(a * x + b * y).is_negative()))
            .map(|(x, y)| Ray::new(x, y)),
    )
}

/// Sign of each child's P1 in the constraint `P1(T,T) + P1(T,F) = P1(F,T) +
/// P1(F,F)` and of each child's P2 in `P2(T,T) + P2(F,T) = P2(T,F) + P2(F,F)`.
const SIGN1: [i8; 4] = [1, 1, -1, -1];
const SIGN2: [i8; 4] = [1, -1, 1, -1];

/// An extreme feasible configuration of the four children: the vector each
/// child takes, and the parent's resulting (P1, P2).
#[derive(Debug, Clone)]
struct Extreme {
    parts: [(BigInt, BigInt); 4],
    image: (BigInt, BigInt),
}

#[derive(Debug)]
struct Combination {
    cone: Cone,
    lo: Option<Extreme>,
    hi: Option<Extreme>,
}

fn signed(s: i8, v: &BigInt) -> BigInt {
    if s > 0 {
        v.clone()
    } else {
        -v.clone()
    }
}

fn combine(children: &[Cone; 4]) -> Combination {
    // One column per (child, generator).
    let mut cols: Vec<(usize, &Ray, BigInt, BigInt)> = Vec::new();
    for (j, cone) in children.iter().enumerate() {
        for g in cone.generators() {
            cols.push((j, g, signed(SIGN1[j], &g.x), signed(SIGN2[j], &g.y)));
        }
    }
    let mut extremes: Vec<Extreme> = Vec::new();
    let mut push = |weights: &[(usize, BigInt)]| {
        let mut parts: [(BigInt, BigInt); 4] = Default::default();
        for (c, w) in weights {
            let (j, g, _, _) = &cols[*c];
            parts[*j].0 += w * &g.x;
            parts[*j].1 += w * &g.y;
        }
        let image = (&parts[0].0 + &parts[1].0, &parts[0].1 + &parts[2].1);
        extremes.push(Extreme { parts, image });
    };
    let n = cols.len();
    for a in 0..n {
        for b in a + 1..n {
            let (ca, cb) = (&cols[a], &cols[b]);
            if !cross(&ca.2, &ca.3, &cb.2, &cb.3).is_zero() {
                continue;
            }
            // Parallel: need opposite directions.
            let (u, w) = if !ca.2.is_zero() {
                (&ca.2, &cb.2)
            } else {
                (&ca.3, &cb.3)
            };
            if (u * w).is_negative() {
                push(&[(a, w.abs()), (b, u.abs())]);
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let (ca, cb, cc) = (&cols[a], &cols[b], &cols[c]);
                let la = cross(&cb.2, &cb.3, &cc.2, &cc.3);
                let lb = cross(&cc.2, &cc.3, &ca.2, &ca.3);
                let lc = cross(&ca.2, &ca.3, &cb.2, &cb.3);
                let pos = la.is_positive() && lb.is_positive() && lc.is_positive();
                let neg = la.is_negative() && lb.is_negative() && lc.is_negative();
                if pos || neg {
                    push(&[(a, la.abs()), (b, lb.abs()), (c, lc.abs())]);
                }
            }
        }
    }
    let cone = Cone::hull(extremes.iter().map(|e| Ray::new(e.image.0.clone(), e.image.1.clone())));
    let pick = |r: &Ray| {
        extremes
            .iter()
            .find(|e| cross(&e.image.0, &e.image.1, &r.x, &r.y).is_zero())
            .cloned()
    };
    let (lo, hi) = match &cone {
        Cone::Zero => (None, None),
        Cone::Span(l, h) => (pick(l), pick(h)),
    };
    Combination { cone, lo, hi }
}

/// Result of the bottom-up pass: each node's cone, and (if the root admits
/// (1, 1)) a witness assigning every variable.
pub struct ConeSolution {
    pub cones: Vec<Cone>,
    pub witness: Option<Vec<BigRational>>,
}

pub fn solve(lp: &LpInstance) -> ConeSolution {
    let nodes = &lp.nodes;
    let mut cones: Vec<Cone> = vec![Cone::Zero; nodes.len()];
    let mut combos: Vec<Option<Rc<Combination>>> = vec![None; nodes.len()];
    let mut leaf_memo: HashMap<LeafCounts, Cone> = HashMap::new();
    let mut memo: HashMap<[Cone; 4], Rc<Combination>> = HashMap::new();
    // Preorder ids: children come after their parent.
    for id in (0..nodes.len()).rev() {
        let node = &nodes[id];
        cones[id] = match (node.children, node.counts) {
            (Some(ch), _) => {
                let key = ch.map(|c| cones[c].clone());
                let combo = memo.entry(key).or_insert_with_key(|k| Rc::new(combine(k))).clone();
                let cone = combo.cone.clone();
                combos[id] = Some(combo);
                cone
            }
            (None, Some(counts)) => leaf_memo
                .entry(counts)
                .or_insert_with(|| leaf_cone(counts, &lp.r_lower, &lp.r_upper))
                .clone(),
            (None, None) => Cone::quadrant(),
        };
    }
    let one = BigRational::one();
    if !cones[0].contains(&one, &one) {
        return ConeSolution { cones, witness: None };
    }
    let mut x = vec![BigRational::zero(); 2 * nodes.len()];
    let mut stack = vec![(0usize, one.clone(), one)];
    while let Some((id, t1, t2)) = stack.pop() {
        x[2 * id] = t1.clone();
        x[2 * id + 1] = t2.clone();
        let (Some(ch), Some(combo)) = (nodes[id].children, &combos[id]) else {
            continue;
        };
        let (alpha, beta) = decompose(combo, &t1, &t2);
        let zero = (BigInt::zero(), BigInt::zero());
        for (j, &c) in ch.iter().enumerate() {
            let part = |e: &Option<Extreme>, w: &BigRational| -> (BigRational, BigRational) {
                let p = e.as_ref().map_or(&zero, |e| &e.parts[j]);
                (
                    w * BigRational::from_integer(p.0.clone()),
                    w * BigRational::from_integer(p.1.clone()),
                )
            };
            let (a1, a2) = part(&combo.lo, &alpha);
            let (b1, b2) = part(&combo.hi, &beta);
            stack.push((c, a1 + b1, a2 + b2));
        }
    }
    ConeSolution {
        cones,
        witness: Some(x),
    }
}

/// Weights (α, β) with `t = α·lo.image + β·hi.image`, both nonnegative.
fn decompose(combo: &Combination, t1: &BigRational, t2: &BigRational) -> (BigRational, BigRational) {
    let (Some(lo), Some(hi)) = (&combo.lo, &combo.hi) else {
        return (BigRational::zero(), BigRational::zero());
    };
    let q = |v: &BigInt| BigRational::from_integer(v.clone());
    let (lx, ly, hx, hy) = (q(&lo.image.0), q(&lo.image.1), q(&hi.image.0), q(&hi.image.1));
    let det = &lx * &hy - &ly * &hx;
    if det.is_zero() {
        let alpha = if lx.is_zero() { t2 / &ly } else { t1 / &lx };
        return (alpha, BigRational::zero());
    }
    let alpha = (t1 * &hy - t2 * &hx) / &det;
    let beta = (&lx * t2 - &ly * t1) / &det;
    (alpha, beta)
}
