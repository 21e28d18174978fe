#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use jindex::james::{q, qf, Body, SpaceNorm, Q};
use jindex::{BTree, Label, Node, Ordinal};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// All preorder depth sequences of forests with exactly `n` nodes.
pub fn depth_sequences(n: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        let top = cur.last().map_or(1, |&d| d + 1);
        for d in 1..=top {
            cur.push(d);
            go(n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, &mut Vec::new(), &mut out);
    out
}

/// Every nonempty ordered forest with at most `max` nodes.
pub fn all_trees(max: usize) -> Vec<BTree> {
    (1..=max)
        .flat_map(depth_sequences)
        .map(|d| BTree::from_depths(&d).unwrap())
        .collect()
}

pub fn random_tree(rng: &mut ChaCha8Rng, max_nodes: usize) -> BTree {
    let n = rng.gen_range(1..=max_nodes);
    let mut depths = Vec::with_capacity(n);
    for i in 0..n {
        let top = if i == 0 { 1 } else { depths[i - 1] + 1 };
        depths.push(rng.gen_range(1..=top));
    }
    BTree::from_depths(&depths).unwrap()
}

/// Order by repeated removal of maximal nodes from the raw node set.
pub fn order_by_derivation(nodes: &[Node]) -> usize {
    let mut set: HashSet<Node> = nodes.iter().cloned().collect();
    let mut count = 0;
    while !set.is_empty() {
        let parents: HashSet<Node> = set
            .iter()
            .filter(|n| n.len() > 1)
            .map(|n| n[..n.len() - 1].to_vec())
            .collect();
        set.retain(|n| parents.contains(n));
        count += 1;
    }
    count
}

/// Order as the longest chain of a finite tree.
pub fn order_by_chains(nodes: &[Node]) -> usize {
    nodes.iter().map(|n| n.len()).max().unwrap_or(0)
}

/// Whether some assignment `f` with `f(parent) ≺ f(child)` exists, by
/// trying every image for every node in preorder.
pub fn brute_force_map_exists(a: &BTree, b: &BTree) -> bool {
    fn go(a: &BTree, b: &BTree, i: usize, img: &mut Vec<usize>) -> bool {
        if i == a.len() {
            return true;
        }
        for c in 0..b.len() {
            let ok = match a.parent(i) {
                None => true,
                Some(p) => {
                    let pn = b.node(img[p]);
                    let cn = b.node(c);
                    cn.len() > pn.len() && cn[..pn.len()] == *pn
                }
            };
            if ok {
                img.push(c);
                if go(a, b, i + 1, img) {
                    return true;
                }
                img.pop();
            }
        }
        false
    }
    go(a, b, 0, &mut Vec::new())
}

/// `ω²·a + ω·b + c` as a triple.
pub type Triple = (u64, u64, u64);

pub fn triple_ordinal((a, b, c): Triple) -> Ordinal {
    let w = Ordinal::omega();
    let w2 = Ordinal::omega_power(&Ordinal::from(2));
    w2.mul(&Ordinal::from(a)).add(&w.mul(&Ordinal::from(b))).add(&Ordinal::from(c))
}

fn degree((a, b, c): Triple) -> Option<u64> {
    if a > 0 {
        Some(2)
    } else if b > 0 {
        Some(1)
    } else if c > 0 {
        Some(0)
    } else {
        None
    }
}

/// Ordinal sum on triples: the right summand absorbs every lower term of
/// the left one.
pub fn triple_add(x: Triple, y: Triple) -> Triple {
    match degree(y) {
        None => x,
        Some(2) => (x.0 + y.0, y.1, y.2),
        Some(1) => (x.0, x.1 + y.1, y.2),
        _ => (x.0, x.1, x.2 + y.2),
    }
}

/// Ordinal product on triples, or `None` when it reaches `ω³`:
/// `x·(ω²a + ωb + c) = x·ω²·a + x·ω·b + x·c`, where `x·ω^k = ω^{deg x + k}`
/// and `x·c` multiplies the leading coefficient.
pub fn triple_mul(x: Triple, y: Triple) -> Option<Triple> {
    let Some(dx) = degree(x) else {
        return Some((0, 0, 0));
    };
    let mut acc = (0, 0, 0);
    for (k, n) in [(2u64, y.0), (1, y.1)] {
        if n == 0 {
            continue;
        }
        let e = dx + k;
        if e > 2 {
            return None;
        }
        let term = if e == 2 { (n, 0, 0) } else { (0, n, 0) };
        acc = triple_add(acc, term);
    }
    if y.2 > 0 {
        let scaled = match dx {
            2 => (x.0 * y.2, x.1, x.2),
            1 => (0, x.1 * y.2, x.2),
            _ => (0, 0, x.2 * y.2),
        };
        acc = triple_add(acc, scaled);
    }
    Some(acc)
}

/// Natural sum oracle: coefficientwise addition of exponent maps.
pub fn coefficient_map(o: &Ordinal) -> BTreeMap<Ordinal, num_bigint::BigUint> {
    o.terms()
        .iter()
        .map(|t| (t.exponent.clone(), t.coefficient.clone()))
        .collect()
}

/// A random ordinal below `ω^(ω³)`: up to four terms with exponents below `ω³`.
pub fn random_big_ordinal(rng: &mut ChaCha8Rng) -> Ordinal {
    let mut exps: Vec<Ordinal> = (0..rng.gen_range(0..=4))
        .map(|_| {
            triple_ordinal((rng.gen_range(0..3), rng.gen_range(0..3), rng.gen_range(0..3)))
        })
        .collect();
    exps.sort();
    exps.dedup();
    let mut o = Ordinal::zero();
    for e in exps.iter().rev() {
        let c = Ordinal::from(rng.gen_range(1..5u64));
        o = o.add(&Ordinal::omega_power(e).mul(&c));
    }
    o
}

pub fn random_rat(rng: &mut ChaCha8Rng, lo: i64, hi: i64, den: i64) -> Q {
    qf(rng.gen_range(lo * den..=hi * den), den)
}

pub fn random_points(rng: &mut ChaCha8Rng, count: usize, d: usize, den: i64) -> Vec<Vec<Q>> {
    (0..count)
        .map(|_| (0..d).map(|_| random_rat(rng, -1, 1, den)).collect())
        .collect()
}

pub fn random_body(rng: &mut ChaCha8Rng, d: usize, max_vertices: usize) -> Body {
    let n = rng.gen_range(1..=max_vertices);
    Body::new(d, random_points(rng, n, d, 2)).unwrap()
}

/// A bounded polyhedral norm: the coordinate functionals plus random
/// extra ones.
pub fn random_norm(rng: &mut ChaCha8Rng, d: usize) -> SpaceNorm {
    let mut fs: Vec<Vec<Q>> = (0..d)
        .map(|i| (0..d).map(|j| q((i == j) as i64)).collect())
        .collect();
    for _ in 0..rng.gen_range(0..=2) {
        fs.push((0..d).map(|_| random_rat(rng, -1, 1, 2)).collect());
    }
    SpaceNorm::new(d, fs).unwrap()
}

/// Scales `x` into the unit ball of `norm`.
pub fn into_ball(norm: &SpaceNorm, x: Vec<Q>) -> Vec<Q> {
    let n = norm.norm(&x);
    if n > q(1) {
        x.iter().map(|v| v / &n).collect()
    } else {
        x
    }
}

pub fn int_labels(node: &[Label]) -> Vec<i64> {
    node.iter()
        .map(|l| match l {
            Label::Int(n) => *n,
            other => panic!("unexpected label {other}"),
        })
        .collect()
}
