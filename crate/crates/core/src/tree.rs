//! Finite B-trees: sets of nonempty label sequences closed under nonempty
//! initial segments.
//!
//! Nodes are stored sorted lexicographically, which is a depth-first
//! preorder: every node precedes its extensions and the proper extensions of
//! node `i` occupy the contiguous index range `i+1..end(i)`. All node handles
//! are indices into that order.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ordinal::{Kind, Ordinal};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("the empty sequence is not a B-tree node")]
    EmptySequence,
    #[error("node {0} is present but its parent is missing")]
    NotPrefixClosed(String),
    #[error("T_xi is undefined for xi = 0")]
    ZeroXi,
    #[error("cutoff list must be nonempty with positive entries")]
    BadCutoffs,
    #[error("product factors must be nonempty")]
    EmptyFactor,
    #[error("tree too large: {0} nodes exceeds the cap of {1}")]
    TooLarge(usize, usize),
    #[error("{0}")]
    Other(String),
}

/// A tree label: integer, ordinal, or a pair of labels.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Int(i64),
    Ord(Ordinal),
    Pair(Box<Label>, Box<Label>),
}

impl Label {
    pub fn pair(a: Label, b: Label) -> Label {
        Label::Pair(Box::new(a), Box::new(b))
    }

    pub fn ord(n: u64) -> Label {
        Label::Ord(Ordinal::from(n))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(n) => write!(f, "{n}"),
            Label::Ord(o) => write!(f, "{o}"),
            Label::Pair(a, b) => write!(f, "<{a},{b}>"),
        }
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

pub type Node = Vec<Label>;

pub fn show_node(node: &[Label]) -> String {
    let parts: Vec<String> = node.iter().map(|l| l.to_string()).collect();
    format!("({})", parts.join(","))
}

/// A finite B-tree.
#[derive(Clone, PartialEq, Eq)]
pub struct BTree {
    nodes: Vec<Node>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    end: Vec<usize>,
    height: Vec<usize>,
    roots: Vec<usize>,
}

impl BTree {
    /// Builds a tree from its node set, rejecting the empty sequence and
    /// sets that are not closed under nonempty initial segments. Duplicates
    /// are merged.
    pub fn new(nodes: impl IntoIterator<Item = Node>) -> Result<Self, TreeError> {
        let mut nodes: Vec<Node> = nodes.into_iter().collect();
        nodes.sort();
        nodes.dedup();
        if nodes.first().is_some_and(|n| n.is_empty()) {
            return Err(TreeError::EmptySequence);
        }
        let n = nodes.len();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut roots = Vec::new();
        // stack of ancestors along the current preorder path
        let mut stack: Vec<usize> = Vec::new();
        for i in 0..n {
            let len = nodes[i].len();
            while let Some(&top) = stack.last() {
                let t = &nodes[top];
                if t.len() < len && nodes[i].starts_with(t) {
                    break;
                }
                stack.pop();
            }
            match stack.last() {
                Some(&p) if nodes[p].len() + 1 == len => {
                    parent[i] = Some(p);
                    children[p].push(i);
                }
                None if len == 1 => roots.push(i),
                _ => return Err(TreeError::NotPrefixClosed(show_node(&nodes[i]))),
            }
            stack.push(i);
        }
        let mut end = vec![0; n];
        let mut height = vec![1; n];
        for i in (0..n).rev() {
            end[i] = children[i].last().map_or(i + 1, |&c| end[c]);
            height[i] = 1 + children[i].iter().map(|&c| height[c]).max().unwrap_or(0);
        }
        Ok(BTree {
            nodes,
            parent,
            children,
            end,
            height,
            roots,
        })
    }

    pub fn empty() -> Self {
        BTree::new(Vec::new()).unwrap()
    }

    /// Builds a tree from integer sequences.
    pub fn from_ints(seqs: &[&[i64]]) -> Result<Self, TreeError> {
        BTree::new(
            seqs.iter()
                .map(|s| s.iter().map(|&v| Label::Int(v)).collect()),
        )
    }

    /// The chain `(1), (1,2), ..., (1,...,n)`.
    pub fn chain(n: usize) -> Self {
        BTree::new((1..=n).map(|k| (1..=k as i64).map(Label::Int).collect())).unwrap()
    }

    /// Builds an ordered forest from its preorder depth sequence (depths
    /// start at 1 and grow by at most 1 per step). Children are labelled by
    /// their 1-based position among siblings.
    pub fn from_depths(depths: &[usize]) -> Result<Self, TreeError> {
        let mut nodes = Vec::with_capacity(depths.len());
        let mut path: Vec<i64> = Vec::new();
        for &d in depths {
            if d == 0 || d > path.len() + 1 {
                return Err(TreeError::Other(format!("invalid depth sequence at {d}")));
            }
            if d <= path.len() {
                path.truncate(d);
                *path.last_mut().unwrap() += 1;
            } else {
                path.push(1);
            }
            nodes.push(path.iter().map(|&v| Label::Int(v)).collect());
        }
        BTree::new(nodes)
    }

    /// `{(a)} ∪ {(a)⌢t : t ∈ self}`.
    pub fn rooted_at(&self, label: Label) -> BTree {
        let mut nodes = vec![vec![label.clone()]];
        for n in &self.nodes {
            let mut v = Vec::with_capacity(n.len() + 1);
            v.push(label.clone());
            v.extend(n.iter().cloned());
            nodes.push(v);
        }
        BTree::new(nodes).unwrap()
    }

    /// Union of trees whose root labels are pairwise distinct.
    pub fn union(trees: &[BTree]) -> BTree {
        BTree::new(trees.iter().flat_map(|t| t.nodes.iter().cloned())).unwrap()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &[Label] {
        &self.nodes[i]
    }

    pub fn index_of(&self, node: &[Label]) -> Option<usize> {
        self.nodes
            .binary_search_by(|probe| probe.as_slice().cmp(node))
            .ok()
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// Sequence length of node `i`.
    pub fn depth(&self, i: usize) -> usize {
        self.nodes[i].len()
    }

    /// Rank of node `i`: the length of the longest chain starting at `i`
    /// (1 for maximal nodes).
    pub fn height(&self, i: usize) -> usize {
        self.height[i]
    }

    pub fn is_maximal(&self, i: usize) -> bool {
        self.children[i].is_empty()
    }

    pub fn maxima(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_maximal(i)).collect()
    }

    /// Proper extensions of `i` as an index range.
    pub fn extensions(&self, i: usize) -> std::ops::Range<usize> {
        i + 1..self.end[i]
    }

    /// `a ⪯ b`.
    pub fn is_prefix(&self, a: usize, b: usize) -> bool {
        a <= b && b < self.end[a]
    }

    /// `a ≺ b`.
    pub fn is_strict_prefix(&self, a: usize, b: usize) -> bool {
        a < b && b < self.end[a]
    }

    pub fn comparable(&self, a: usize, b: usize) -> bool {
        self.is_prefix(a, b) || self.is_prefix(b, a)
    }

    /// The initial segment of `i` of length `len` (`1 ≤ len ≤ depth(i)`).
    pub fn ancestor_at(&self, mut i: usize, len: usize) -> usize {
        while self.depth(i) > len {
            i = self.parent[i].expect("ancestor above root");
        }
        i
    }

    /// Chain of initial segments `i|1, ..., i|depth(i)`.
    pub fn path(&self, i: usize) -> Vec<usize> {
        let mut p = vec![i];
        let mut cur = i;
        while let Some(q) = self.parent[cur] {
            p.push(q);
            cur = q;
        }
        p.reverse();
        p
    }

    /// Order (rank) of the tree; for finite trees this is the maximal node
    /// length.
    pub fn order(&self) -> usize {
        self.roots.iter().map(|&r| self.height[r]).max().unwrap_or(0)
    }

    /// The tree with its maximal nodes removed.
    pub fn derived(&self) -> BTree {
        self.filter(|i| !self.is_maximal(i))
    }

    pub fn iterated_derived(&self, times: usize) -> BTree {
        self.filter(|i| self.height[i] > times)
    }

    fn filter(&self, keep: impl Fn(usize) -> bool) -> BTree {
        BTree::new(
            (0..self.len())
                .filter(|&i| keep(i))
                .map(|i| self.nodes[i].clone()),
        )
        .unwrap()
    }

    /// Subtree on the given node ids, which must be closed under parents.
    pub fn restrict(&self, ids: &[usize]) -> Result<BTree, TreeError> {
        BTree::new(ids.iter().map(|&i| self.nodes[i].clone()))
    }

    /// Closure of `ids` under initial segments, sorted.
    pub fn down_closure(&self, ids: &[usize]) -> Vec<usize> {
        let mut mark = vec![false; self.len()];
        for &i in ids {
            let mut cur = Some(i);
            while let Some(c) = cur {
                if mark[c] {
                    break;
                }
                mark[c] = true;
                cur = self.parent[c];
            }
        }
        (0..self.len()).filter(|&i| mark[i]).collect()
    }

    /// Comparable pairs `(s,t)` with `s ≺ t`.
    pub fn lambda(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for s in 0..self.len() {
            for t in self.extensions(s) {
                out.push((s, t));
            }
        }
        out
    }

    /// Triples `(s,t,v)` with `s ≺ t ⪯ v` and `v` maximal.
    pub fn lambda_e(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (s, t) in self.lambda() {
            for v in t..self.end[t] {
                if self.is_maximal(v) {
                    out.push((s, t, v));
                }
            }
        }
        out
    }

    /// Pairs `(s,t)` with `s ⪯ t` and `t` maximal.
    pub fn e_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for s in 0..self.len() {
            for t in s..self.end[s] {
                if self.is_maximal(t) {
                    out.push((s, t));
                }
            }
        }
        out
    }

    /// Lexicographically least maximal node extending `i`.
    pub fn least_maximal_extension(&self, mut i: usize) -> usize {
        while let Some(&c) = self.children[i].first() {
            i = c;
        }
        i
    }

    /// Adds the empty root: the J-tree convention used by the `james`
    /// module. Returns the order of `{∅} ∪ self`, which is `order() + 1`.
    pub fn order_with_root(&self) -> usize {
        self.order() + 1
    }
}

impl fmt::Debug for BTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.nodes.iter().map(|n| show_node(n)).collect();
        write!(f, "BTree{{{}}}", parts.join(", "))
    }
}

impl Serialize for BTree {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.nodes.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BTree {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let nodes = Vec::<Node>::deserialize(deserializer)?;
        BTree::new(nodes).map_err(serde::de::Error::custom)
    }
}

/// Per-limit-stage cutoffs for truncating `T_ξ`: the `d`-th limit union
/// met on a branch keeps `get(d)` branches. The last entry repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cutoffs(pub Vec<u64>);

impl Cutoffs {
    pub fn uniform(c: u64) -> Self {
        Cutoffs(vec![c])
    }

    pub fn get(&self, depth: usize) -> u64 {
        self.0[depth.min(self.0.len() - 1)]
    }

    fn validate(&self) -> Result<(), TreeError> {
        if self.0.is_empty() || self.0.contains(&0) {
            return Err(TreeError::BadCutoffs);
        }
        Ok(())
    }
}

/// Explicit finite subtree of `T_ξ`: successor stages unfold exactly, and
/// a limit `λ` keeps `T_{λ[n]+1}` for `n < cutoff`, where `λ[n]` is the
/// standard fundamental sequence. For finite `ξ` this is `T_ξ` itself.
pub fn t_xi_truncate(xi: &Ordinal, cutoffs: &Cutoffs) -> Result<BTree, TreeError> {
    if xi.is_zero() {
        return Err(TreeError::ZeroXi);
    }
    cutoffs.validate()?;
    let mut out = Vec::new();
    gen_txi(xi, 0, &[], cutoffs, &mut out);
    BTree::new(out)
}

fn gen_txi(xi: &Ordinal, depth: usize, prefix: &[Label], cutoffs: &Cutoffs, out: &mut Vec<Node>) {
    match xi.classify() {
        Kind::Zero => {}
        Kind::Successor(pred) => {
            let mut node = prefix.to_vec();
            node.push(Label::Ord(xi.clone()));
            out.push(node.clone());
            gen_txi(&pred, depth, &node, cutoffs, out);
        }
        Kind::Limit => {
            for n in 0..cutoffs.get(depth) {
                let branch = xi.fundamental(n).expect("limit").successor();
                gen_txi(&branch, depth + 1, prefix, cutoffs, out);
            }
        }
    }
}

/// The order of `t_xi_truncate(xi, cutoffs)`, computed by the same
/// recursion on orders instead of node sets.
pub fn t_xi_truncated_order(xi: &Ordinal, cutoffs: &Cutoffs) -> u64 {
    fn go(xi: &Ordinal, depth: usize, cutoffs: &Cutoffs) -> u64 {
        match xi.classify() {
            Kind::Zero => 0,
            Kind::Successor(p) => 1 + go(&p, depth, cutoffs),
            Kind::Limit => (0..cutoffs.get(depth))
                .map(|n| go(&xi.fundamental(n).unwrap().successor(), depth + 1, cutoffs))
                .max()
                .unwrap_or(0),
        }
    }
    go(xi, 0, cutoffs)
}

/// Symbolic descriptor of `T_ξ` or a product of descriptors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolicTree {
    Txi(Ordinal),
    Product(Box<SymbolicTree>, Box<SymbolicTree>),
}

impl SymbolicTree {
    pub fn product(a: SymbolicTree, b: SymbolicTree) -> Self {
        SymbolicTree::Product(Box::new(a), Box::new(b))
    }

    /// `o(T_ξ) = ξ`, `o([A,B]) = o(A)·o(B)`.
    pub fn order(&self) -> Ordinal {
        match self {
            SymbolicTree::Txi(x) => x.clone(),
            SymbolicTree::Product(a, b) => a.order().mul(&b.order()),
        }
    }

    pub fn explicit(&self, cutoffs: &Cutoffs) -> Result<BTree, TreeError> {
        match self {
            SymbolicTree::Txi(x) => t_xi_truncate(x, cutoffs),
            SymbolicTree::Product(a, b) => {
                Ok(Product::new(&a.explicit(cutoffs)?, &b.explicit(cutoffs)?)?.tree)
            }
        }
    }

    /// Decides whether `node` belongs to the (untruncated) tree.
    pub fn contains(&self, node: &[Label]) -> bool {
        !node.is_empty() && self.scan(node).is_some()
    }

    /// Decides whether `node` is a maximal member.
    pub fn is_maximal(&self, node: &[Label]) -> bool {
        !node.is_empty() && self.scan(node) == Some(true)
    }

    /// `None` if not a member, otherwise whether it is maximal.
    fn scan(&self, node: &[Label]) -> Option<bool> {
        match self {
            SymbolicTree::Txi(xi) => {
                // each label is a successor a = p+1 admitted by the current
                // bound: equal to it if the bound is a successor, below it
                // if the bound is a limit; the next bound is p
                let mut bound = xi.clone();
                for l in node {
                    let Label::Ord(a) = l else { return None };
                    let Kind::Successor(pred) = a.classify() else {
                        return None;
                    };
                    let ok = match bound.classify() {
                        Kind::Successor(_) => *a == bound,
                        Kind::Limit => *a < bound,
                        Kind::Zero => false,
                    };
                    if !ok {
                        return None;
                    }
                    bound = pred;
                }
                Some(bound.is_zero())
            }
            SymbolicTree::Product(left, right) => {
                let mut xs: Vec<Label> = Vec::new();
                let mut s: Vec<Label> = Vec::new();
                let mut block_x: Option<Label> = None;
                let mut closed = true;
                for l in node {
                    let Label::Pair(a, x) = l else { return None };
                    if closed {
                        xs.push((**x).clone());
                        block_x = Some((**x).clone());
                        s.clear();
                    } else if block_x.as_ref() != Some(&**x) {
                        return None;
                    }
                    s.push((**a).clone());
                    closed = left.scan(&s)?;
                }
                let x_max = right.scan(&xs)?;
                Some(closed && x_max)
            }
        }
    }
}

/// The explicit product `[T0, T1]` together with its block structure.
///
/// A node is `(s_1, x_1^(|s_1|)) ⌢ ... ⌢ (s_k, x_k^(|s_k|))` with labels
/// `Pair(s_i[j], x_i)`; every block but the last has `s_i ∈ MAX(T0)` and
/// `(x_1..x_k) ∈ T1`. The decomposition is unique because a block closes
/// exactly when its `s` becomes maximal.
#[derive(Clone, Debug)]
pub struct Product {
    pub tree: BTree,
    pub left: BTree,
    pub right: BTree,
    info: Vec<BlockInfo>,
    by_blocks: HashMap<(usize, Vec<usize>), usize>,
}

#[derive(Clone, Debug)]
struct BlockInfo {
    /// T0 node ids of the blocks, in order.
    blocks: Vec<usize>,
    /// T1 node `(x_1, ..., x_k)`.
    xnode: usize,
    /// The last node of the previous level (end of completed blocks).
    base: Option<usize>,
}

/// Default cap on materialized product sizes.
pub const PRODUCT_CAP: usize = 2_000_000;

impl Product {
    pub fn new(t0: &BTree, t1: &BTree) -> Result<Self, TreeError> {
        Product::with_cap(t0, t1, PRODUCT_CAP)
    }

    pub fn with_cap(t0: &BTree, t1: &BTree, cap: usize) -> Result<Self, TreeError> {
        if t0.is_empty() || t1.is_empty() {
            return Err(TreeError::EmptyFactor);
        }
        let size = product_size(t0, t1);
        if size > cap as u128 {
            return Err(TreeError::TooLarge(size.min(usize::MAX as u128) as usize, cap));
        }
        let mut raw: Vec<(Node, Vec<usize>, usize)> = Vec::with_capacity(size as usize);
        fn gen(
            t0: &BTree,
            t1: &BTree,
            prefix: &Node,
            blocks: &mut Vec<usize>,
            x: usize,
            raw: &mut Vec<(Node, Vec<usize>, usize)>,
        ) {
            let xl = t1.node(x).last().unwrap().clone();
            for s in 0..t0.len() {
                let mut node = prefix.clone();
                node.extend(t0.node(s).iter().map(|a| Label::pair(a.clone(), xl.clone())));
                blocks.push(s);
                raw.push((node.clone(), blocks.clone(), x));
                if t0.is_maximal(s) {
                    for &c in t1.children(x) {
                        gen(t0, t1, &node, blocks, c, raw);
                    }
                }
                blocks.pop();
            }
        }
        for &r in t1.roots() {
            gen(t0, t1, &Vec::new(), &mut Vec::new(), r, &mut raw);
        }
        let tree = BTree::new(raw.iter().map(|(n, _, _)| n.clone()))?;
        let mut info: Vec<Option<BlockInfo>> = vec![None; tree.len()];
        let mut by_blocks = HashMap::with_capacity(tree.len());
        for (node, blocks, xnode) in raw {
            let id = tree.index_of(&node).unwrap();
            let completed: usize = blocks[..blocks.len() - 1]
                .iter()
                .map(|&b| t0.depth(b))
                .sum();
            let base = (completed > 0).then(|| tree.ancestor_at(id, completed));
            by_blocks.insert((xnode, blocks.clone()), id);
            info[id] = Some(BlockInfo {
                blocks,
                xnode,
                base,
            });
        }
        Ok(Product {
            tree,
            left: t0.clone(),
            right: t1.clone(),
            info: info.into_iter().map(|i| i.unwrap()).collect(),
            by_blocks,
        })
    }

    /// Number of blocks of node `i` (its level).
    pub fn level_of(&self, i: usize) -> usize {
        self.info[i].blocks.len()
    }

    /// The node beneath which the unit of `i` sits (`None` for the first
    /// level).
    pub fn unit_of(&self, i: usize) -> Option<usize> {
        self.info[i].base
    }

    /// Whether the last block of `i` is maximal in `T0`.
    pub fn is_regular(&self, i: usize) -> bool {
        self.left.is_maximal(*self.info[i].blocks.last().unwrap())
    }

    /// T0 node ids of the blocks of `i`.
    pub fn blocks(&self, i: usize) -> &[usize] {
        &self.info[i].blocks
    }

    /// T1 node `(x_1..x_k)` of `i`.
    pub fn xnode(&self, i: usize) -> usize {
        self.info[i].xnode
    }

    /// T0 node of the last block of `i`.
    pub fn unit_coordinate(&self, i: usize) -> usize {
        *self.info[i].blocks.last().unwrap()
    }

    pub fn find(&self, xnode: usize, blocks: &[usize]) -> Option<usize> {
        self.by_blocks.get(&(xnode, blocks.to_vec())).copied()
    }

    /// Members of the unit beneath `base` (or of the first-level unit with
    /// the given root x-label when `base` is `None`), indexed by their T0
    /// coordinate.
    pub fn unit_members(&self, base: Option<usize>) -> Vec<usize> {
        (0..self.tree.len())
            .filter(|&i| self.info[i].base == base)
            .collect()
    }

    /// The node `base ⌢ (s, x)` of the unit beneath `base` whose last block
    /// is `s` and x-node is `xnode`.
    pub fn unit_node(&self, base: Option<usize>, xnode: usize, s: usize) -> Option<usize> {
        let mut blocks = base.map(|b| self.info[b].blocks.clone()).unwrap_or_default();
        blocks.push(s);
        self.find(xnode, &blocks)
    }
}

/// Node count of `[T0, T1]` without materializing it.
pub fn product_size(t0: &BTree, t1: &BTree) -> u128 {
    let n0 = t0.len() as u128;
    let m0 = t0.maxima().len() as u128;
    // blocks(x) = number of product nodes whose x-node lies at or below x
    fn go(t1: &BTree, x: usize, n0: u128, m0: u128) -> u128 {
        let below: u128 = t1
            .children(x)
            .iter()
            .map(|&c| go(t1, c, n0, m0))
            .fold(0u128, |a, b| a.saturating_add(b));
        n0.saturating_add(m0.saturating_mul(below))
    }
    t1.roots()
        .iter()
        .map(|&r| go(t1, r, n0, m0))
        .fold(0u128, |a, b| a.saturating_add(b))
}

/// Order of `[T0, T1]` by structural height recursion over states
/// `(s, x)`, without materializing the product.
pub fn product_order_implicit(t0: &BTree, t1: &BTree) -> usize {
    if t0.is_empty() || t1.is_empty() {
        return 0;
    }
    // h(s, x) = 1 + max(h(s', x) for children s' of s,
    //                   h(r, x') for roots r of T0 and children x' of x if s is maximal)
    let mut memo = vec![vec![0usize; t1.len()]; t0.len()];
    let mut root_best = vec![0usize; t1.len()];
    for x in (0..t1.len()).rev() {
        let below = t1
            .children(x)
            .iter()
            .map(|&c| root_best[c])
            .max()
            .unwrap_or(0);
        for s in (0..t0.len()).rev() {
            let within = t0.children(s).iter().map(|&c| memo[c][x]).max().unwrap_or(0);
            let next = if t0.is_maximal(s) { below } else { 0 };
            memo[s][x] = 1 + within.max(next);
        }
        root_best[x] = t0.roots().iter().map(|&r| memo[r][x]).max().unwrap_or(0);
    }
    t1.roots().iter().map(|&x| root_best[x]).max().unwrap_or(0)
}

/// Order-preserving node map `s ≺ t ⟹ θ(s) ≺ θ(t)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonotoneMap {
    pub domain: BTree,
    pub codomain: BTree,
    pub assignment: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("assignment length {0} does not match domain size {1}")]
    Length(usize, usize),
    #[error("image index {0} out of range")]
    Range(usize),
    #[error("monotonicity fails between {0} and {1}")]
    NotMonotone(String, String),
    #[error("extension of {0} is not a maximal extension of its image")]
    BadExtension(String),
    #[error("maps do not compose: codomain and domain differ")]
    Mismatch,
}

impl MonotoneMap {
    pub fn new(domain: BTree, codomain: BTree, assignment: Vec<usize>) -> Result<Self, MapError> {
        let m = MonotoneMap {
            domain,
            codomain,
            assignment,
        };
        m.verify()?;
        Ok(m)
    }

    pub fn identity(t: &BTree) -> Self {
        MonotoneMap {
            domain: t.clone(),
            codomain: t.clone(),
            assignment: (0..t.len()).collect(),
        }
    }

    pub fn apply(&self, i: usize) -> usize {
        self.assignment[i]
    }

    /// Checks every parent/child edge, which suffices by transitivity.
    pub fn verify(&self) -> Result<(), MapError> {
        if self.assignment.len() != self.domain.len() {
            return Err(MapError::Length(self.assignment.len(), self.domain.len()));
        }
        if let Some(&bad) = self.assignment.iter().find(|&&a| a >= self.codomain.len()) {
            return Err(MapError::Range(bad));
        }
        for i in 0..self.domain.len() {
            if let Some(p) = self.domain.parent(i) {
                if !self
                    .codomain
                    .is_strict_prefix(self.assignment[p], self.assignment[i])
                {
                    return Err(MapError::NotMonotone(
                        show_node(self.domain.node(p)),
                        show_node(self.domain.node(i)),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &MonotoneMap) -> Result<MonotoneMap, MapError> {
        if self.codomain != next.domain {
            return Err(MapError::Mismatch);
        }
        Ok(MonotoneMap {
            domain: self.domain.clone(),
            codomain: next.codomain.clone(),
            assignment: self.assignment.iter().map(|&a| next.assignment[a]).collect(),
        })
    }

    /// `(node, image)` pairs in domain order.
    pub fn pairs(&self) -> Vec<(Node, Node)> {
        (0..self.domain.len())
            .map(|i| {
                (
                    self.domain.node(i).to_vec(),
                    self.codomain.node(self.assignment[i]).to_vec(),
                )
            })
            .collect()
    }
}

/// Greedy rank-guided monotone map: each node goes to the lexicographically
/// least admissible codomain node whose height is at least its own. Exists
/// iff `o(t0) ≤ o(t1)`.
pub fn find_monotone_map(t0: &BTree, t1: &BTree) -> Option<MonotoneMap> {
    if t0.order() > t1.order() {
        return None;
    }
    let mut assignment = vec![usize::MAX; t0.len()];
    for i in 0..t0.len() {
        let need = t0.height(i);
        let image = match t0.parent(i) {
            None => t1.roots().iter().copied().find(|&r| t1.height(r) >= need)?,
            Some(p) => t1
                .children(assignment[p])
                .iter()
                .copied()
                .find(|&c| t1.height(c) >= need)?,
        };
        assignment[i] = image;
    }
    let m = MonotoneMap {
        domain: t0.clone(),
        codomain: t1.clone(),
        assignment,
    };
    debug_assert!(m.verify().is_ok());
    Some(m)
}

/// Rank-guided monotone map whose image lies in `allowed` (a mask over
/// `t1`). Ranks are taken in the tree induced on the allowed nodes, so the
/// map exists iff `o(t0)` is at most the order of that induced tree.
pub fn find_monotone_map_into(t0: &BTree, t1: &BTree, allowed: &[bool]) -> Option<MonotoneMap> {
    assert_eq!(allowed.len(), t1.len(), "one mask entry per codomain node");
    let n = t1.len();
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut roots = Vec::new();
    for i in 0..n {
        let mut p = t1.parent(i);
        while let Some(q) = p {
            if allowed[q] {
                break;
            }
            p = t1.parent(q);
        }
        if allowed[i] {
            match p {
                Some(q) => kids[q].push(i),
                None => roots.push(i),
            }
        }
    }
    let mut h = vec![0usize; n];
    for i in (0..n).rev() {
        if allowed[i] {
            h[i] = 1 + kids[i].iter().map(|&c| h[c]).max().unwrap_or(0);
        }
    }
    let mut assignment = vec![usize::MAX; t0.len()];
    for i in 0..t0.len() {
        let need = t0.height(i);
        let pool = match t0.parent(i) {
            None => &roots,
            Some(p) => &kids[assignment[p]],
        };
        assignment[i] = pool.iter().copied().find(|&c| h[c] >= need)?;
    }
    let m = MonotoneMap {
        domain: t0.clone(),
        codomain: t1.clone(),
        assignment,
    };
    debug_assert!(m.verify().is_ok());
    Some(m)
}

/// A monotone map with an extension `e: MAX(domain) → MAX(codomain)` such
/// that `θ(s) ⪯ e(s)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendedMonotoneMap {
    pub map: MonotoneMap,
    /// Indexed by domain node; `Some` exactly on maximal nodes.
    pub extension: Vec<Option<usize>>,
}

impl ExtendedMonotoneMap {
    pub fn identity(t: &BTree) -> Self {
        ExtendedMonotoneMap {
            map: MonotoneMap::identity(t),
            extension: (0..t.len())
                .map(|i| t.is_maximal(i).then_some(i))
                .collect(),
        }
    }

    pub fn ext(&self, s: usize) -> usize {
        self.extension[s].expect("extension is defined on maximal nodes")
    }

    pub fn verify(&self) -> Result<(), MapError> {
        self.map.verify()?;
        let (d, c) = (&self.map.domain, &self.map.codomain);
        if self.extension.len() != d.len() {
            return Err(MapError::Length(self.extension.len(), d.len()));
        }
        for s in 0..d.len() {
            match (d.is_maximal(s), self.extension[s]) {
                (false, None) => {}
                (true, Some(e)) if e < c.len() && c.is_maximal(e) => {
                    if !c.is_prefix(self.map.assignment[s], e) {
                        return Err(MapError::BadExtension(show_node(d.node(s))));
                    }
                }
                _ => return Err(MapError::BadExtension(show_node(d.node(s)))),
            }
        }
        Ok(())
    }

    /// Componentwise composition `next ∘ self`; the extension is
    /// `e_next ∘ e_self`.
    pub fn then(&self, next: &ExtendedMonotoneMap) -> Result<ExtendedMonotoneMap, MapError> {
        Ok(ExtendedMonotoneMap {
            map: self.map.then(&next.map)?,
            extension: self
                .extension
                .iter()
                .map(|e| e.map(|e| next.ext(e)))
                .collect(),
        })
    }
}

/// Extends `θ` by the lexicographically least maximal extension of each
/// image of a maximal node.
pub fn extend(theta: &MonotoneMap) -> ExtendedMonotoneMap {
    let extension = (0..theta.domain.len())
        .map(|s| {
            theta
                .domain
                .is_maximal(s)
                .then(|| theta.codomain.least_maximal_extension(theta.assignment[s]))
        })
        .collect();
    ExtendedMonotoneMap {
        map: theta.clone(),
        extension,
    }
}

/// Monotone maps `θ1: [T_ξ, T_ζ] → T_{ξζ}` and `θ2: T_{ξζ} → [T_ξ, T_ζ]`
/// between explicit truncations, found by rank-guided search.
pub fn canonical_product_maps(
    xi: &Ordinal,
    zeta: &Ordinal,
    cutoffs: &Cutoffs,
) -> Result<(MonotoneMap, MonotoneMap), TreeError> {
    let a = t_xi_truncate(xi, cutoffs)?;
    let b = t_xi_truncate(zeta, cutoffs)?;
    let prod = Product::new(&a, &b)?.tree;
    let target = t_xi_truncate(&xi.mul(zeta), cutoffs)?;
    let too_small = || {
        TreeError::Other(format!(
            "truncation too small: o([T_xi,T_zeta]) = {} but o(T_xi*zeta) = {}",
            prod.order(),
            target.order()
        ))
    };
    let m1 = find_monotone_map(&prod, &target).ok_or_else(too_small)?;
    let m2 = find_monotone_map(&target, &prod).ok_or_else(too_small)?;
    Ok((m1, m2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(seqs: &[&[i64]]) -> BTree {
        BTree::from_ints(seqs).unwrap()
    }

    fn ord_node(xs: &[u64]) -> Node {
        xs.iter().map(|&x| Label::ord(x)).collect()
    }

    #[test]
    fn construction_checks_prefix_closure() {
        assert!(BTree::from_ints(&[&[1, 2]]).is_err());
        assert!(BTree::new(vec![vec![]]).is_err());
        let t = ints(&[&[2, 1], &[1], &[2]]);
        assert_eq!(t.len(), 3);
        assert_eq!(t.roots(), &[0, 1]);
        assert_eq!(t.children(1), &[2]);
        assert!(t.is_strict_prefix(1, 2));
        assert!(!t.comparable(0, 2));
    }

    #[test]
    fn derived_examples() {
        assert_eq!(ints(&[&[1], &[1, 2]]).derived(), ints(&[&[1]]));
        assert_eq!(ints(&[&[1], &[2], &[2, 1]]).derived(), ints(&[&[2]]));
        assert!(BTree::empty().derived().is_empty());
    }

    #[test]
    fn order_examples() {
        assert_eq!(BTree::chain(3).order(), 3);
        assert_eq!(ints(&[&[1], &[2], &[2, 1]]).order(), 2);
        let p = SymbolicTree::product(
            SymbolicTree::Txi(Ordinal::omega()),
            SymbolicTree::Txi(Ordinal::from(2)),
        );
        assert_eq!(p.order(), Ordinal::parse("w*2").unwrap());
    }

    #[test]
    fn lambda_sets_examples() {
        let c = BTree::chain(2);
        assert_eq!(c.lambda(), vec![(0, 1)]);
        assert_eq!(c.lambda_e(), vec![(0, 1, 1)]);
        assert_eq!(c.e_pairs(), vec![(0, 1), (1, 1)]);
        assert!(ints(&[&[1], &[2]]).lambda().is_empty());
        let c3 = BTree::chain(3);
        assert_eq!(c3.lambda().len(), 3);
        assert_eq!(c3.lambda_e().len(), 3);
        assert_eq!(c3.e_pairs().len(), 3);
    }

    #[test]
    fn txi_examples() {
        let t3 = t_xi_truncate(&Ordinal::from(3), &Cutoffs::uniform(1)).unwrap();
        let want = BTree::new(vec![ord_node(&[3]), ord_node(&[3, 2]), ord_node(&[3, 2, 1])]).unwrap();
        assert_eq!(t3, want);
        let t1 = t_xi_truncate(&Ordinal::one(), &Cutoffs::uniform(1)).unwrap();
        assert_eq!(t1, BTree::new(vec![ord_node(&[1])]).unwrap());
        let tw = t_xi_truncate(&Ordinal::omega(), &Cutoffs::uniform(3)).unwrap();
        let parts: Vec<BTree> = (1..=3)
            .map(|k| t_xi_truncate(&Ordinal::from(k), &Cutoffs::uniform(1)).unwrap())
            .collect();
        assert_eq!(tw, BTree::union(&parts));
        assert_eq!(tw.order(), 3);
        assert_eq!(tw.roots().len(), 3);
        assert!(t_xi_truncate(&Ordinal::zero(), &Cutoffs::uniform(1)).is_err());
    }

    #[test]
    fn txi_membership_is_symbolic() {
        let w2 = Ordinal::parse("w^2").unwrap();
        let cut = Cutoffs(vec![3, 2]);
        let t = t_xi_truncate(&w2, &cut).unwrap();
        let sym = SymbolicTree::Txi(w2.clone());
        for i in 0..t.len() {
            assert!(sym.contains(t.node(i)));
            assert_eq!(sym.is_maximal(t.node(i)), t.is_maximal(i));
        }
        assert_eq!(t.order() as u64, t_xi_truncated_order(&w2, &cut));
        assert!(!sym.contains(&[Label::Ord(w2.clone())]));
        assert!(!sym.contains(&ord_node(&[3, 1])));
    }

    #[test]
    fn finite_txi_has_order_xi() {
        for k in 1..=12u64 {
            let t = t_xi_truncate(&Ordinal::from(k), &Cutoffs::uniform(1)).unwrap();
            assert_eq!(t.order() as u64, k);
        }
    }

    #[test]
    fn product_examples() {
        let p = Product::new(&BTree::chain(2), &BTree::chain(3)).unwrap();
        assert_eq!(p.tree.order(), 6);
        let t = ints(&[&[1], &[2], &[2, 1]]);
        let single = Product::new(&t, &BTree::chain(1)).unwrap();
        assert_eq!(single.tree.len(), t.len());
        let iso = find_monotone_map(&t, &single.tree).unwrap();
        assert!(find_monotone_map(&single.tree, &t).is_some());
        assert!(iso.verify().is_ok());
    }

    #[test]
    fn product_symbolic_membership() {
        let a = SymbolicTree::Txi(Ordinal::from(2));
        let b = SymbolicTree::Txi(Ordinal::from(3));
        let sym = SymbolicTree::product(a, b);
        let t = sym.explicit(&Cutoffs::uniform(1)).unwrap();
        assert_eq!(t.order(), 6);
        for i in 0..t.len() {
            assert!(sym.contains(t.node(i)));
            assert_eq!(sym.is_maximal(t.node(i)), t.is_maximal(i));
        }
        let bad = vec![Label::pair(Label::ord(2), Label::ord(3)), Label::pair(Label::ord(1), Label::ord(2))];
        assert!(!sym.contains(&bad));
    }

    #[test]
    fn unit_beneath_first_level_max_is_t2() {
        let t2 = t_xi_truncate(&Ordinal::from(2), &Cutoffs::uniform(1)).unwrap();
        let p = Product::new(&t2, &t2).unwrap();
        let top = (0..p.tree.len())
            .find(|&i| p.level_of(i) == 1 && !p.tree.is_maximal(i) && p.is_regular(i))
            .unwrap();
        let unit = p.unit_members(Some(top));
        let sub = BTree::new(unit.iter().map(|&i| p.tree.node(i)[2..].to_vec())).unwrap();
        assert_eq!(sub.len(), t2.len());
        assert_eq!(sub.order(), t2.order());
        for &u in &unit {
            assert_eq!(p.level_of(u), 2);
            assert_eq!(p.unit_of(u), Some(top));
        }
    }

    #[test]
    fn levels_and_units_of_txi_products() {
        let t = t_xi_truncate(&Ordinal::omega(), &Cutoffs::uniform(2)).unwrap();
        let p = Product::new(&t, &BTree::chain(3)).unwrap();
        for a in 0..p.tree.len() {
            for b in p.tree.extensions(a) {
                if p.level_of(a) == p.level_of(b) {
                    assert_eq!(p.unit_of(a), p.unit_of(b));
                }
            }
        }
    }

    #[test]
    fn product_size_matches() {
        let t0 = ints(&[&[1], &[2], &[2, 1]]);
        let t1 = ints(&[&[1], &[1, 1], &[1, 2]]);
        let p = Product::new(&t0, &t1).unwrap();
        assert_eq!(product_size(&t0, &t1), p.tree.len() as u128);
        assert_eq!(product_order_implicit(&t0, &t1), p.tree.order());
    }

    #[test]
    fn monotone_examples() {
        assert!(find_monotone_map(&BTree::chain(2), &BTree::chain(3)).is_some());
        assert!(find_monotone_map(&BTree::chain(3), &BTree::chain(2)).is_none());
    }

    #[test]
    fn extend_examples() {
        let id = MonotoneMap::identity(&BTree::chain(2));
        let e = extend(&id);
        assert_eq!(e.extension, vec![None, Some(1)]);
        let m = MonotoneMap::new(BTree::chain(1), BTree::chain(3), vec![0]).unwrap();
        let e = extend(&m);
        assert_eq!(e.ext(0), 2);
        assert!(e.verify().is_ok());
    }

    #[test]
    fn canonical_maps_small() {
        let (m1, m2) =
            canonical_product_maps(&Ordinal::from(2), &Ordinal::from(3), &Cutoffs::uniform(1)).unwrap();
        assert!(m1.verify().is_ok() && m2.verify().is_ok());
        assert_eq!(m1.domain.order(), 6);
        let (a, b) =
            canonical_product_maps(&Ordinal::one(), &Ordinal::from(4), &Cutoffs::uniform(1)).unwrap();
        assert_eq!(a.domain.len(), a.codomain.len());
        assert_eq!(b.domain.len(), b.codomain.len());
        let (c, d) =
            canonical_product_maps(&Ordinal::from(2), &Ordinal::from(2), &Cutoffs::uniform(1)).unwrap();
        let round = c.then(&d).unwrap();
        assert!(round.verify().is_ok());
    }

    #[test]
    fn json_roundtrip() {
        let t = BTree::new(vec![
            vec![Label::Int(1)],
            vec![Label::Int(1), Label::pair(Label::ord(2), Label::Int(-1))],
        ])
        .unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"pair\""));
        let back: BTree = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let sym = SymbolicTree::product(SymbolicTree::Txi(Ordinal::omega()), SymbolicTree::Txi(Ordinal::from(2)));
        let js = serde_json::to_string(&sym).unwrap();
        assert!(js.starts_with("{\"product\""));
        assert_eq!(serde_json::from_str::<SymbolicTree>(&js).unwrap(), sym);
    }
}
