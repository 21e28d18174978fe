//! James tree norms on finite trees and the cs-tree witness `x_t = e_t`.

use std::collections::HashMap;

use num_traits::Zero;

use super::cs::{split_margin, CsTree, NodeCertificate, SplitCertificate};
use super::{q, Q};
use crate::tree::BTree;

/// `max Σ (Σ_{u ∈ S} v_u)²` over families of pairwise disjoint segments
/// `S = {u : s ⪯ u ⪯ t}`. Exact dynamic program over (node, start of the
/// segment running through it).
pub fn jt_norm_squared(tree: &BTree, v: &[Q]) -> Q {
    assert_eq!(v.len(), tree.len(), "one value per node");
    let mut prefix = vec![q(0); tree.len()];
    for u in 0..tree.len() {
        prefix[u] = match tree.parent(u) {
            Some(p) => &prefix[p] + &v[u],
            None => v[u].clone(),
        };
    }
    let mut dp = Dp {
        tree,
        prefix,
        memo: HashMap::new(),
    };
    tree.roots().iter().map(|&r| dp.f(r, None)).fold(q(0), |a, b| a + b)
}

struct Dp<'a> {
    tree: &'a BTree,
    prefix: Vec<Q>,
    memo: HashMap<(usize, Option<usize>), Q>,
}

impl Dp<'_> {
    /// Sum of `v` over `s ⪯ w ⪯ t` along a chain.
    fn seg(&self, s: usize, t: usize) -> Q {
        match self.tree.parent(s) {
            Some(p) => &self.prefix[t] - &self.prefix[p],
            None => self.prefix[t].clone(),
        }
    }

    /// Best value inside the subtree of `u`, given that a segment started
    /// at `open` (an ancestor of `u`) may continue into `u`.
    fn f(&mut self, u: usize, open: Option<usize>) -> Q {
        if let Some(v) = self.memo.get(&(u, open)) {
            return v.clone();
        }
        let free_children = |dp: &mut Self| -> Vec<Q> {
            dp.tree.children(u).to_vec().into_iter().map(|c| dp.f(c, None)).collect()
        };
        let best = match open {
            None => {
                let skip: Q = free_children(self).into_iter().fold(q(0), |a, b| a + b);
                let start = self.g(u, u);
                skip.max(start)
            }
            Some(s) => {
                let p = self.tree.parent(u).expect("open segment has a parent");
                let closed = self.seg(s, p);
                let stop = &closed * &closed + self.f(u, None);
                let go_on = self.g(u, s);
                stop.max(go_on)
            }
        };
        self.memo.insert((u, open), best.clone());
        best
    }

    /// Best value when the segment from `s` contains `u`.
    fn g(&mut self, u: usize, s: usize) -> Q {
        let children = self.tree.children(u).to_vec();
        let free: Vec<Q> = children.iter().map(|&c| self.f(c, None)).collect();
        let total: Q = free.iter().fold(q(0), |a, b| a + b);
        let here = self.seg(s, u);
        let mut best = &here * &here + &total;
        for (i, &c) in children.iter().enumerate() {
            let cand = &total - &free[i] + self.f(c, Some(s));
            if cand > best {
                best = cand;
            }
        }
        best
    }
}

/// The witness for `J(I_T) ≥ o(T)`: points `e_t`, and for every maximal
/// `v` and split `m` the indicator of the segment `{v|1, ..., v|m}`, which
/// has dual norm at most 1 and margin exactly 1.
pub fn jt_witness(tree: &BTree) -> CsTree {
    let n = tree.len();
    let points: Vec<Vec<Q>> = (0..n)
        .map(|i| (0..n).map(|j| q((i == j) as i64)).collect())
        .collect();
    let mut certificates = Vec::new();
    for v in tree.maxima() {
        let path = tree.path(v);
        let seq: Vec<Vec<Q>> = path.iter().map(|&i| points[i].clone()).collect();
        let splits = (1..path.len())
            .map(|m| {
                let mut functional = vec![q(0); n];
                for &u in &path[..m] {
                    functional[u] = q(1);
                }
                let margin = split_margin(&functional, &seq, m);
                SplitCertificate {
                    m,
                    functional,
                    weights: None,
                    margin,
                }
            })
            .collect();
        certificates.push(NodeCertificate {
            node: tree.node(v).to_vec(),
            splits,
        });
    }
    CsTree {
        nodes: tree.clone(),
        points,
        certificates,
        eps: q(1),
    }
}

/// Whether `f` is the indicator of a segment of `tree` (so its dual JT
/// norm is at most 1).
pub fn is_segment_indicator(tree: &BTree, f: &[Q]) -> bool {
    let support: Vec<usize> = (0..tree.len()).filter(|&i| !f[i].is_zero()).collect();
    if support.iter().any(|&i| f[i] != q(1)) {
        return false;
    }
    let Some(&deepest) = support.iter().max_by_key(|&&i| tree.depth(i)) else {
        return true;
    };
    let top = support.iter().copied().min_by_key(|&i| tree.depth(i)).unwrap();
    let chain: Vec<usize> = tree
        .path(deepest)
        .into_iter()
        .filter(|&u| tree.depth(u) >= tree.depth(top))
        .collect();
    chain.len() == support.len() && chain.iter().all(|u| support.contains(u))
}
