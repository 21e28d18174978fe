//! Finite homogenization on trees: chain Ramsey, color reduction,
//! dependence dropping for extension colorings, level and unit
//! homogenization in products, shuffle maps, and sharpness colorings.
//!
//! Every construction returns maps that are re-checked against the input
//! coloring before being handed back.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::Hash;
use std::rc::Rc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ordinal::Ordinal;
use crate::tree::{
    extend, find_monotone_map, find_monotone_map_into, show_node, t_xi_truncate, BTree, Cutoffs,
    ExtendedMonotoneMap, Label, MapError, MonotoneMap, Node, Product, TreeError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RamseyError {
    #[error("the coloring's tree is not a chain")]
    NotChain,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("product height must be {expected}, got {got}")]
    WrongK { expected: usize, got: usize },
    #[error("node coloring is not constant on the unit beneath {0}")]
    NotUnitConstant(String),
    #[error("invalid coloring: {0}")]
    Coloring(String),
    #[error("insufficient at stage {stage}: {detail}")]
    Insufficient { stage: String, detail: String },
    #[error("search cap exceeded: {0}")]
    Cap(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// A colored simplex of a tree: a comparable pair `s ≺ t` or a triple
/// `s ≺ t ⪯ v` with `v` maximal.
pub trait Simplex: Copy + Eq + Hash + Ord + fmt::Debug {
    fn enumerate(tree: &BTree) -> Vec<Self>;
    fn ids(self) -> Vec<usize>;
    fn from_ids(tree: &BTree, ids: &[usize]) -> Option<Self>;
}

impl Simplex for (usize, usize) {
    fn enumerate(tree: &BTree) -> Vec<Self> {
        tree.lambda()
    }

    fn ids(self) -> Vec<usize> {
        vec![self.0, self.1]
    }

    fn from_ids(tree: &BTree, ids: &[usize]) -> Option<Self> {
        match *ids {
            [s, t] if tree.is_strict_prefix(s, t) => Some((s, t)),
            _ => None,
        }
    }
}

impl Simplex for (usize, usize, usize) {
    fn enumerate(tree: &BTree) -> Vec<Self> {
        tree.lambda_e()
    }

    fn ids(self) -> Vec<usize> {
        vec![self.0, self.1, self.2]
    }

    fn from_ids(tree: &BTree, ids: &[usize]) -> Option<Self> {
        match *ids {
            [s, t, v] if tree.is_strict_prefix(s, t) && tree.is_prefix(t, v) && tree.is_maximal(v) => {
                Some((s, t, v))
            }
            _ => None,
        }
    }
}

/// A total coloring of the simplices of a tree by a finite color set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coloring<K: Simplex> {
    tree: BTree,
    colors: Vec<u32>,
    table: HashMap<K, u32>,
}

/// Coloring of `Λ(T)`.
pub type PairColoring = Coloring<(usize, usize)>;
/// Coloring of `Λᵉ(T)`.
pub type TripleColoring = Coloring<(usize, usize, usize)>;

impl<K: Simplex> Coloring<K> {
    /// The color set is the set of values taken (`{0}` if there are no
    /// simplices).
    pub fn from_fn(tree: BTree, mut f: impl FnMut(K) -> u32) -> Self {
        let table: HashMap<K, u32> = K::enumerate(&tree).into_iter().map(|k| (k, f(k))).collect();
        let mut colors: Vec<u32> = table.values().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if colors.is_empty() {
            colors.push(0);
        }
        Coloring { tree, colors, table }
    }

    pub fn with_colors(tree: BTree, colors: Vec<u32>, mut f: impl FnMut(K) -> u32) -> Result<Self, RamseyError> {
        let colors = normalize_colors(colors)?;
        let mut table = HashMap::new();
        for k in K::enumerate(&tree) {
            let c = f(k);
            if colors.binary_search(&c).is_err() {
                return Err(RamseyError::Coloring(format!("color {c} is not in the color set")));
            }
            table.insert(k, c);
        }
        Ok(Coloring { tree, colors, table })
    }

    /// Builds a coloring from explicit `(nodes, color)` entries, which must
    /// cover every simplex exactly once.
    pub fn from_entries(tree: BTree, colors: Vec<u32>, entries: &[(Vec<Node>, u32)]) -> Result<Self, RamseyError> {
        let colors = normalize_colors(colors)?;
        let mut table = HashMap::new();
        for (nodes, c) in entries {
            let ids: Option<Vec<usize>> = nodes.iter().map(|n| tree.index_of(n)).collect();
            let key = ids
                .and_then(|ids| K::from_ids(&tree, &ids))
                .ok_or_else(|| {
                    let shown: Vec<String> = nodes.iter().map(|n| show_node(n)).collect();
                    RamseyError::Coloring(format!("[{}] is not a simplex of the tree", shown.join(", ")))
                })?;
            if colors.binary_search(c).is_err() {
                return Err(RamseyError::Coloring(format!("color {c} is not in the color set")));
            }
            if table.insert(key, *c).is_some() {
                return Err(RamseyError::Coloring(format!("duplicate entry for {key:?}")));
            }
        }
        let total = K::enumerate(&tree).len();
        if table.len() != total {
            return Err(RamseyError::Coloring(format!(
                "coloring is not total: {} of {total} simplices colored",
                table.len()
            )));
        }
        Ok(Coloring { tree, colors, table })
    }

    pub fn tree(&self) -> &BTree {
        &self.tree
    }

    pub fn colors(&self) -> &[u32] {
        &self.colors
    }

    /// Colors that actually occur, ascending.
    pub fn used_colors(&self) -> Vec<u32> {
        self.table.values().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn get(&self, k: K) -> u32 {
        *self
            .table
            .get(&k)
            .unwrap_or_else(|| panic!("{k:?} is not a simplex of the colored tree"))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Entries sorted by simplex.
    pub fn entries(&self) -> Vec<(Vec<Node>, u32)> {
        let mut keys: Vec<K> = self.table.keys().copied().collect();
        keys.sort();
        keys.into_iter()
            .map(|k| {
                let nodes = k.ids().into_iter().map(|i| self.tree.node(i).to_vec()).collect();
                (nodes, self.table[&k])
            })
            .collect()
    }
}

impl PairColoring {
    /// `f'(s,t) = f(θs, θt)` on the domain of `θ`.
    pub fn pull_back(&self, map: &MonotoneMap) -> PairColoring {
        assert_eq!(map.codomain, self.tree, "map must land in the colored tree");
        let table = map
            .domain
            .lambda()
            .into_iter()
            .map(|(s, t)| ((s, t), self.get((map.apply(s), map.apply(t)))))
            .collect();
        Coloring {
            tree: map.domain.clone(),
            colors: self.colors.clone(),
            table,
        }
    }
}

fn normalize_colors(mut colors: Vec<u32>) -> Result<Vec<u32>, RamseyError> {
    colors.sort_unstable();
    colors.dedup();
    if colors.is_empty() {
        return Err(RamseyError::Coloring("the color set is empty".into()));
    }
    Ok(colors)
}

#[derive(Serialize, Deserialize)]
struct RawColoring {
    tree: BTree,
    colors: Vec<u32>,
    entries: Vec<(Vec<Node>, u32)>,
}

impl<K: Simplex> Serialize for Coloring<K> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawColoring {
            tree: self.tree.clone(),
            colors: self.colors.clone(),
            entries: self.entries(),
        }
        .serialize(serializer)
    }
}

impl<'de, K: Simplex> Deserialize<'de> for Coloring<K> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawColoring::deserialize(deserializer)?;
        Coloring::from_entries(raw.tree, raw.colors, &raw.entries).map_err(serde::de::Error::custom)
    }
}

/// One step of a pipeline: it needed `required` nodes (or levels), had
/// `available`, and produced `produced`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stage {
    pub name: String,
    pub required: u64,
    pub available: u64,
    pub produced: u64,
}

/// A monotone image on which the coloring is constant.
#[derive(Clone, Debug)]
pub struct HomogeneousWitness {
    /// Domain is the homogeneous tree; the extension is used for triples.
    pub map: ExtendedMonotoneMap,
    pub color: u32,
    /// Number of simplices re-checked against the original coloring.
    pub checked: usize,
    pub stages: Vec<Stage>,
}

impl HomogeneousWitness {
    pub fn domain(&self) -> &BTree {
        &self.map.map.domain
    }

    /// Re-checks every pair of the domain; returns the number checked.
    pub fn verify_pairs(&self, f: &PairColoring) -> Result<usize, RamseyError> {
        self.map.map.verify()?;
        if self.map.map.codomain != *f.tree() {
            return Err(RamseyError::Verification("witness does not land in the colored tree".into()));
        }
        let theta = &self.map.map;
        let pairs = theta.domain.lambda();
        for &(s, t) in &pairs {
            let c = f.get((theta.apply(s), theta.apply(t)));
            if c != self.color {
                return Err(RamseyError::Verification(format!(
                    "pair {} {} has color {c}, expected {}",
                    show_node(theta.domain.node(s)),
                    show_node(theta.domain.node(t)),
                    self.color
                )));
            }
        }
        Ok(pairs.len())
    }

    /// Re-checks every triple `f(θs, θt, e(v))`; returns the number checked.
    pub fn verify_triples(&self, f: &TripleColoring) -> Result<usize, RamseyError> {
        self.map.verify()?;
        if self.map.map.codomain != *f.tree() {
            return Err(RamseyError::Verification("witness does not land in the colored tree".into()));
        }
        let theta = &self.map.map;
        let triples = theta.domain.lambda_e();
        for &(s, t, v) in &triples {
            let c = f.get((theta.apply(s), theta.apply(t), self.map.ext(v)));
            if c != self.color {
                return Err(RamseyError::Verification(format!(
                    "triple ending at {} has color {c}, expected {}",
                    show_node(theta.domain.node(v)),
                    self.color
                )));
            }
        }
        Ok(triples.len())
    }
}

impl Serialize for HomogeneousWitness {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw<'a> {
            domain: &'a BTree,
            images: Vec<Node>,
            extensions: Vec<Option<Node>>,
            color: u32,
            checked: usize,
            stages: &'a [Stage],
        }
        let m = &self.map.map;
        Raw {
            domain: &m.domain,
            images: m.assignment.iter().map(|&a| m.codomain.node(a).to_vec()).collect(),
            extensions: self
                .map
                .extension
                .iter()
                .map(|e| e.map(|e| m.codomain.node(e).to_vec()))
                .collect(),
            color: self.color,
            checked: self.checked,
            stages: &self.stages,
        }
        .serialize(serializer)
    }
}

pub fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// `C(2n−2, n−1)`: a chain this long always has a homogeneous `n`-set.
pub fn ramsey_bound(n: usize) -> u64 {
    if n == 0 {
        return 0;
    }
    binom(2 * n as u64 - 2, n as u64 - 1)
}

/// Largest exhaustive subset search attempted below the Ramsey bound.
pub const EXHAUSTIVE_CAP: u64 = 20_000_000;

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum ChainOutcome {
    Homogeneous {
        /// 1-based chain positions `l_1 < ... < l_n`.
        levels: Vec<usize>,
        witness: HomogeneousWitness,
    },
    /// Exhaustive search over all `searched` subsets found none.
    Insufficient { searched: u64 },
}

fn chain_check(tree: &BTree) -> Result<(), RamseyError> {
    if tree.roots().len() != 1 || (0..tree.len()).any(|i| tree.children(i).len() > 1) {
        return Err(RamseyError::NotChain);
    }
    Ok(())
}

/// Homogeneous `n`-subsets of a 2-colored chain: the constructive
/// Erdős–Szekeres recursion first, then exhaustive search in lexicographic
/// order. Succeeds whenever the chain has at least `C(2n−2, n−1)` nodes.
pub fn homogenize_chain(n: usize, coloring: &PairColoring) -> Result<ChainOutcome, RamseyError> {
    if n == 0 {
        return Err(RamseyError::Parameter("target size must be positive".into()));
    }
    let tree = coloring.tree();
    chain_check(tree)?;
    let mut cols = coloring.used_colors();
    if cols.is_empty() {
        cols.push(coloring.colors()[0]);
    }
    if cols.len() > 2 {
        return Err(RamseyError::Parameter(format!(
            "chain homogenization takes at most 2 colors, got {}",
            cols.len()
        )));
    }
    let c0 = cols[0];
    let c1 = cols.get(1).copied().unwrap_or(c0);
    let verts: Vec<usize> = (0..tree.len()).collect();
    let found = split_search(coloring, &verts, n, n, c0).map(|(set, first)| (set, if first { c0 } else { c1 }));
    let found = match found {
        Some(x) => Some(x),
        None => {
            let total = binom(verts.len() as u64, n as u64);
            if total > EXHAUSTIVE_CAP {
                return Err(RamseyError::Cap(format!("{total} subsets exceed the exhaustive cap")));
            }
            match exhaustive_homogeneous(coloring, verts.len(), n) {
                Some(x) => Some(x),
                None => return Ok(ChainOutcome::Insufficient { searched: total }),
            }
        }
    };
    let (set, color) = found.expect("handled above");
    let map = MonotoneMap::new(BTree::chain(n), tree.clone(), set.clone())?;
    let mut witness = HomogeneousWitness {
        map: extend(&map),
        color,
        checked: 0,
        stages: Vec::new(),
    };
    witness.checked = witness.verify_pairs(coloring)?;
    Ok(ChainOutcome::Homogeneous {
        levels: set.iter().map(|&i| i + 1).collect(),
        witness,
    })
}

/// A set of size `s` in color `c0` (flag `true`) or of size `t` in the
/// other color (flag `false`), among `verts` in chain order.
fn split_search(f: &PairColoring, verts: &[usize], s: usize, t: usize, c0: u32) -> Option<(Vec<usize>, bool)> {
    let (&v, rest) = verts.split_first()?;
    if s == 1 {
        return Some((vec![v], true));
    }
    if t == 1 {
        return Some((vec![v], false));
    }
    let (a, b): (Vec<usize>, Vec<usize>) = rest.iter().partition(|&&w| f.get((v, w)) == c0);
    let try_a = || {
        split_search(f, &a, s - 1, t, c0).map(|(mut set, first)| {
            if first {
                set.insert(0, v);
            }
            (set, first)
        })
    };
    let try_b = || {
        split_search(f, &b, s, t - 1, c0).map(|(mut set, first)| {
            if !first {
                set.insert(0, v);
            }
            (set, first)
        })
    };
    if a.len() as u64 >= binom((s + t - 3) as u64, (s - 2) as u64) {
        try_a().or_else(try_b)
    } else {
        try_b().or_else(try_a)
    }
}

fn exhaustive_homogeneous(f: &PairColoring, m: usize, n: usize) -> Option<(Vec<usize>, u32)> {
    if n > m {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let c = if n >= 2 { f.get((idx[0], idx[1])) } else { f.colors()[0] };
        let ok = (0..n).all(|i| (i + 1..n).all(|j| f.get((idx[i], idx[j])) == c));
        if ok {
            return Some((idx, c));
        }
        let mut i = n;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if idx[i] < m - n + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Reduces a coloring with `|S|` colors to a single color by halving `S`
/// (the first half takes the extra color) and applying a 2-color
/// homogenizer `⌈log₂|S|⌉` times; with two colors the coloring is handed to
/// the homogenizer unchanged. The homogenizer receives the coloring and the
/// 0-based stage index and must return a verified witness for it.
pub fn reduce_colors<H>(coloring: &PairColoring, mut homogenizer: H) -> Result<HomogeneousWitness, RamseyError>
where
    H: FnMut(&PairColoring, usize) -> Result<HomogeneousWitness, RamseyError>,
{
    let mut current = coloring.clone();
    let mut acc = MonotoneMap::identity(coloring.tree());
    let mut palette = coloring.used_colors();
    let mut stages = Vec::new();
    let mut stage = 0;
    while palette.len() > 2 {
        let cut = palette.len().div_ceil(2);
        let first: BTreeSet<u32> = palette[..cut].iter().copied().collect();
        let two = PairColoring::with_colors(current.tree().clone(), vec![0, 1], |k| {
            if first.contains(&current.get(k)) {
                0
            } else {
                1
            }
        })?;
        let w = homogenizer(&two, stage)?;
        stages.extend(w.stages.iter().cloned());
        current = current.pull_back(&w.map.map);
        acc = w.map.map.then(&acc)?;
        palette = current.used_colors();
        stage += 1;
    }
    let (map, color) = if palette.len() == 2 {
        let w = homogenizer(&current, stage)?;
        stages.extend(w.stages.iter().cloned());
        (w.map.map.then(&acc)?, w.color)
    } else {
        let color = palette.first().copied().unwrap_or(coloring.colors()[0]);
        (acc, color)
    };
    let mut witness = HomogeneousWitness {
        map: extend(&map),
        color,
        checked: 0,
        stages,
    };
    witness.checked = witness.verify_pairs(coloring)?;
    Ok(witness)
}

/// Number of halving stages for `colors` colors.
pub fn halving_stages(colors: usize) -> usize {
    let mut k = 0;
    while (1usize << k) < colors {
        k += 1;
    }
    k
}

/// Chain sizes needed before each halving stage to end with `n` nodes:
/// `n_k = n` and `n_{i−1} = C(2n_i − 2, n_i − 1)`. Entry `i` is the target
/// of stage `i`; the last entry is `n`.
pub fn chain_targets(n: usize, stages: usize) -> Vec<usize> {
    let mut t = vec![n; stages];
    for i in (1..stages).rev() {
        t[i - 1] = ramsey_bound(t[i]).min(usize::MAX as u64) as usize;
    }
    t
}

/// `reduce_colors` on a chain with `homogenize_chain` as the 2-color step,
/// trimmed to the chain of length `n`.
pub fn reduce_colors_chain(coloring: &PairColoring, n: usize) -> Result<HomogeneousWitness, RamseyError> {
    if n == 0 {
        return Err(RamseyError::Parameter("target size must be positive".into()));
    }
    chain_check(coloring.tree())?;
    let stages = halving_stages(coloring.used_colors().len());
    let targets = chain_targets(n, stages);
    let w = reduce_colors(coloring, |c, stage| {
        let target = targets[stage];
        let name = format!("color halving {}", stage + 1);
        let available = c.tree().len();
        match homogenize_chain(target, c)? {
            ChainOutcome::Homogeneous { mut witness, .. } => {
                witness.stages.push(Stage {
                    name,
                    required: ramsey_bound(target),
                    available: available as u64,
                    produced: target as u64,
                });
                Ok(witness)
            }
            ChainOutcome::Insufficient { .. } => Err(RamseyError::Insufficient {
                stage: name,
                detail: format!(
                    "no homogeneous {target}-set in a chain of {available} (guaranteed from {})",
                    ramsey_bound(target)
                ),
            }),
        }
    })?;
    let have = w.domain().len();
    if have < n {
        return Err(RamseyError::Insufficient {
            stage: "trim".into(),
            detail: format!("homogeneous chain has {have} nodes, {n} requested"),
        });
    }
    let prefix = MonotoneMap::new(BTree::chain(n), w.domain().clone(), (0..n).collect())?;
    let map = prefix.then(&w.map.map)?;
    let mut out = HomogeneousWitness {
        map: extend(&map),
        color: w.color,
        checked: 0,
        stages: w.stages,
    };
    out.checked = out.verify_pairs(coloring)?;
    Ok(out)
}

/// Result of removing the dependence on the maximal node from a coloring
/// of `E(T) = {(s,v) : s ⪯ v, v maximal}`: `g(s) = f(θs, e(v))` for all
/// `(s,v) ∈ E(D)`.
#[derive(Clone, Debug)]
pub struct EReduction {
    pub map: ExtendedMonotoneMap,
    /// Indexed by domain node.
    pub g: Vec<u32>,
}

impl EReduction {
    pub fn verify(&self, f: impl Fn(usize, usize) -> u32) -> Result<usize, RamseyError> {
        self.map.verify()?;
        let d = &self.map.map.domain;
        let pairs = d.e_pairs();
        for &(s, v) in &pairs {
            if f(self.map.map.apply(s), self.map.ext(v)) != self.g[s] {
                return Err(RamseyError::Verification(format!(
                    "reduced color of {} depends on the maximal node {}",
                    show_node(d.node(s)),
                    show_node(d.node(v))
                )));
            }
        }
        Ok(pairs.len())
    }
}

struct EEntry {
    node: Node,
    theta: usize,
    ext: Option<usize>,
    g: u32,
}

/// Drops the dependence on the maximal node. At each node `r` the maximal
/// nodes above it are split by `f(r, ·)`; the class whose reduced forest
/// has the largest (order, size) is kept, and the other child subtrees are
/// re-attached by monotone maps into it when their order allows. On chains
/// the maps are identities.
pub fn drop_dependence_e(tree: &BTree, f: impl Fn(usize, usize) -> u32) -> EReduction {
    let allowed = vec![true; tree.len()];
    let entries = e_forest(tree, &f, tree.roots(), &allowed);
    let domain = BTree::new(entries.iter().map(|e| e.node.clone())).expect("prefix closed by construction");
    let mut assignment = vec![0; domain.len()];
    let mut extension = vec![None; domain.len()];
    let mut g = vec![0; domain.len()];
    for e in &entries {
        let i = domain.index_of(&e.node).unwrap();
        assignment[i] = e.theta;
        extension[i] = e.ext;
        g[i] = e.g;
    }
    let out = EReduction {
        map: ExtendedMonotoneMap {
            map: MonotoneMap {
                domain,
                codomain: tree.clone(),
                assignment,
            },
            extension,
        },
        g,
    };
    debug_assert!(out.verify(&f).is_ok());
    out
}

fn e_forest(t: &BTree, f: &dyn Fn(usize, usize) -> u32, roots: &[usize], allowed: &[bool]) -> Vec<EEntry> {
    let mut out = Vec::new();
    for (j, &c) in roots.iter().enumerate() {
        for mut e in e_rooted(t, f, c, allowed) {
            e.node.insert(0, Label::Int(j as i64 + 1));
            out.push(e);
        }
    }
    out
}

/// Entries of the reduced tree below `r`, with nodes relative to `r` (the
/// entry for `r` itself has the empty node).
fn e_rooted(t: &BTree, f: &dyn Fn(usize, usize) -> u32, r: usize, allowed: &[bool]) -> Vec<EEntry> {
    let kids: Vec<usize> = t.children(r).iter().copied().filter(|&c| allowed[c]).collect();
    if kids.is_empty() {
        return vec![EEntry {
            node: Vec::new(),
            theta: r,
            ext: Some(r),
            g: f(r, r),
        }];
    }
    let mut classes: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for m in t.extensions(r) {
        if allowed[m] && t.children(m).iter().all(|&c| !allowed[c]) {
            classes.entry(f(r, m)).or_default().push(m);
        }
    }
    let mut best: Option<((usize, usize), u32, Vec<EEntry>, Vec<bool>)> = None;
    for (x, maxima) in classes {
        let mut mask = vec![false; t.len()];
        for i in t.down_closure(&maxima) {
            if allowed[i] && t.is_strict_prefix(r, i) {
                mask[i] = true;
            }
        }
        let roots: Vec<usize> = kids.iter().copied().filter(|&c| mask[c]).collect();
        let dom = e_forest(t, f, &roots, &mask);
        let score = (dom.iter().map(|e| e.node.len()).max().unwrap_or(0), dom.len());
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, x, dom, mask));
        }
    }
    let (_, x, dom, mask) = best.expect("a node with children has maximal extensions");
    let dom_tree = BTree::new(dom.iter().map(|e| e.node.clone())).expect("prefix closed by construction");
    let mut by_index = vec![0; dom.len()];
    for (k, e) in dom.iter().enumerate() {
        by_index[dom_tree.index_of(&e.node).unwrap()] = k;
    }
    let mut out = vec![EEntry {
        node: Vec::new(),
        theta: r,
        ext: None,
        g: x,
    }];
    let mut next = dom_tree.roots().len();
    let base = t.depth(r);
    for &c in &kids {
        if mask[c] {
            continue;
        }
        let ids: Vec<usize> = std::iter::once(c).chain(t.extensions(c)).filter(|&i| allowed[i]).collect();
        let comp = BTree::new(ids.iter().map(|&i| t.node(i)[base..].to_vec())).expect("subtree");
        let Some(phi) = find_monotone_map(&comp, &dom_tree) else {
            continue;
        };
        next += 1;
        for ci in 0..comp.len() {
            let d = phi.apply(ci);
            let de = &dom[by_index[d]];
            let ext = comp
                .is_maximal(ci)
                .then(|| dom[by_index[dom_tree.least_maximal_extension(d)]].ext.expect("leaf"));
            let mut node = vec![Label::Int(next as i64)];
            node.extend_from_slice(&comp.node(ci)[1..]);
            out.push(EEntry {
                node,
                theta: de.theta,
                ext,
                g: de.g,
            });
        }
    }
    out.extend(dom);
    out
}

/// Result of removing the dependence on the third argument of a `Λᵉ`
/// coloring: `g(s,t) = f(θs, θt, e(v))` for all `(s,t,v) ∈ Λᵉ(D)`.
#[derive(Clone, Debug)]
pub struct LambdaEReduction {
    pub map: ExtendedMonotoneMap,
    pub g: PairColoring,
}

impl LambdaEReduction {
    pub fn verify(&self, f: &TripleColoring) -> Result<usize, RamseyError> {
        self.map.verify()?;
        let theta = &self.map.map;
        let triples = theta.domain.lambda_e();
        for &(s, t, v) in &triples {
            if f.get((theta.apply(s), theta.apply(t), self.map.ext(v))) != self.g.get((s, t)) {
                return Err(RamseyError::Verification(format!(
                    "reduced color of {} {} depends on the maximal node {}",
                    show_node(theta.domain.node(s)),
                    show_node(theta.domain.node(t)),
                    show_node(theta.domain.node(v))
                )));
            }
        }
        Ok(triples.len())
    }
}

struct LPart {
    tree: BTree,
    theta: Vec<usize>,
    ext: Vec<Option<usize>>,
    g: HashMap<(usize, usize), u32>,
}

/// Drops the dependence on `v`: recursively reduce the forest above a node
/// `r`, then reduce `(t, v) ↦ f(r, θt, e(v))` with `drop_dependence_e` and
/// put `r` back on top.
pub fn drop_dependence_lambda_e(coloring: &TripleColoring) -> LambdaEReduction {
    let t = coloring.tree();
    let allowed = vec![true; t.len()];
    let part = le_forest(t, coloring, t.roots(), &allowed);
    let g = PairColoring::with_colors(part.tree.clone(), coloring.colors().to_vec(), |k| part.g[&k])
        .expect("colors come from the input coloring");
    let out = LambdaEReduction {
        map: ExtendedMonotoneMap {
            map: MonotoneMap {
                domain: part.tree,
                codomain: t.clone(),
                assignment: part.theta,
            },
            extension: part.ext,
        },
        g,
    };
    debug_assert!(out.verify(coloring).is_ok());
    out
}

fn le_forest(t: &BTree, f: &TripleColoring, roots: &[usize], allowed: &[bool]) -> LPart {
    let parts: Vec<LPart> = roots.iter().map(|&c| le_rooted(t, f, c, allowed)).collect();
    let relabel = |j: usize, node: &[Label]| -> Node {
        let mut v = node.to_vec();
        v[0] = Label::Int(j as i64 + 1);
        v
    };
    let tree = BTree::new(
        parts
            .iter()
            .enumerate()
            .flat_map(|(j, p)| p.tree.nodes().iter().map(move |n| relabel(j, n))),
    )
    .expect("prefix closed by construction");
    let mut theta = vec![0; tree.len()];
    let mut ext = vec![None; tree.len()];
    let mut g = HashMap::new();
    for (j, p) in parts.iter().enumerate() {
        let idx: Vec<usize> = p
            .tree
            .nodes()
            .iter()
            .map(|n| tree.index_of(&relabel(j, n)).unwrap())
            .collect();
        for i in 0..p.tree.len() {
            theta[idx[i]] = p.theta[i];
            ext[idx[i]] = p.ext[i];
        }
        for (&(a, b), &c) in &p.g {
            g.insert((idx[a], idx[b]), c);
        }
    }
    LPart { tree, theta, ext, g }
}

fn le_rooted(t: &BTree, f: &TripleColoring, r: usize, allowed: &[bool]) -> LPart {
    let kids: Vec<usize> = t.children(r).iter().copied().filter(|&c| allowed[c]).collect();
    if kids.is_empty() {
        return LPart {
            tree: BTree::chain(1),
            theta: vec![r],
            ext: vec![Some(r)],
            g: HashMap::new(),
        };
    }
    let sub = le_forest(t, f, &kids, allowed);
    let red = drop_dependence_e(&sub.tree, |a, v| f.get((r, sub.theta[a], sub.ext[v].expect("maximal"))));
    let d2 = &red.map.map.domain;
    let tree = d2.rooted_at(Label::Int(1));
    let mut theta = vec![r];
    let mut ext = vec![None];
    let mut g = HashMap::new();
    for i in 0..d2.len() {
        theta.push(sub.theta[red.map.map.apply(i)]);
        ext.push(red.map.extension[i].map(|v| sub.ext[v].expect("maximal")));
        g.insert((0, i + 1), red.g[i]);
    }
    for (a, b) in d2.lambda() {
        let key = (red.map.map.apply(a), red.map.map.apply(b));
        g.insert((a + 1, b + 1), sub.g[&key]);
    }
    LPart { tree, theta, ext, g }
}

/// Homogenizes a `Λᵉ` coloring onto the chain of length `n`: drop the
/// dependence on the maximal node, restrict to the lexicographically least
/// longest branch, then reduce colors with chain Ramsey stages. The
/// extension of the top node is the least maximal extension of its image.
pub fn homogenize_lambda_e(coloring: &TripleColoring, n: usize) -> Result<HomogeneousWitness, RamseyError> {
    if n == 0 {
        return Err(RamseyError::Parameter("target size must be positive".into()));
    }
    let t = coloring.tree();
    if t.is_empty() {
        return Err(RamseyError::Insufficient {
            stage: "input".into(),
            detail: "the colored tree is empty".into(),
        });
    }
    let red = drop_dependence_lambda_e(coloring);
    let d = &red.map.map.domain;
    let top = d
        .maxima()
        .into_iter()
        .max_by_key(|&v| (d.depth(v), std::cmp::Reverse(v)))
        .expect("nonempty");
    let branch = d.path(top);
    let len = branch.len();
    let mut stages = vec![Stage {
        name: "drop dependence".into(),
        required: n as u64,
        available: t.order() as u64,
        produced: len as u64,
    }];
    if len < n {
        return Err(RamseyError::Insufficient {
            stage: "drop dependence".into(),
            detail: format!("longest reduced branch has {len} nodes, {n} requested"),
        });
    }
    let chain = BTree::chain(len);
    let on_chain = PairColoring::with_colors(chain.clone(), coloring.colors().to_vec(), |(i, j)| {
        red.g.get((branch[i], branch[j]))
    })?;
    let w = reduce_colors_chain(&on_chain, n)?;
    stages.extend(w.stages.iter().cloned());
    let psi = &w.map.map;
    let assignment: Vec<usize> = (0..n).map(|i| red.map.map.apply(branch[psi.apply(i)])).collect();
    let top_image = branch[psi.apply(n - 1)];
    let mut extension = vec![None; n];
    extension[n - 1] = Some(red.map.ext(d.least_maximal_extension(top_image)));
    let mut out = HomogeneousWitness {
        map: ExtendedMonotoneMap {
            map: MonotoneMap::new(BTree::chain(n), t.clone(), assignment)?,
            extension,
        },
        color: w.color,
        checked: 0,
        stages,
    };
    out.checked = out.verify_triples(coloring)?;
    Ok(out)
}

/// `T_k` for finite `k`: the chain `(k), (k,k−1), ..., (k,...,1)`.
pub fn finite_txi(k: usize) -> BTree {
    t_xi_truncate(&Ordinal::from(k as u64), &Cutoffs::uniform(1)).expect("k is positive")
}

/// Levels of `[T, T_k]` needed for `n` homogeneous levels: `2^{2n−2}`.
pub fn levels_required(n: usize) -> usize {
    1usize << (2 * n - 2)
}

/// A monotone map `[T, T_n] → [T, T_k]` whose cross-level pairs all
/// receive `color`.
#[derive(Clone, Debug)]
pub struct LevelWitness {
    pub map: MonotoneMap,
    pub color: u32,
    /// Colors `ε_1, ..., ε_{m−1}` produced by the stabilization recursion.
    pub epsilons: Vec<u32>,
    /// Recursion levels selected for the `n` output levels.
    pub levels: Vec<usize>,
    /// Number of cross-level pairs re-checked.
    pub checked: usize,
}

struct ProductCache {
    t: BTree,
    cache: HashMap<usize, Rc<Product>>,
}

impl ProductCache {
    fn get(&mut self, k: usize) -> Result<Rc<Product>, RamseyError> {
        if let Some(p) = self.cache.get(&k) {
            return Ok(p.clone());
        }
        let p = Rc::new(Product::new(&self.t, &finite_txi(k))?);
        self.cache.insert(k, p.clone());
        Ok(p)
    }
}

/// Cross-level homogenization in `[T, T_k]` with `k = 2^{2n−2}`.
///
/// A recursion over `m = 2n−1` stages maps `[T, T_m]` in: the first level
/// is kept, and above each of its maximal nodes the later levels are
/// replaced by a monotone image of `[T, T_{2^{m−2}}]` inside the class of
/// nodes whose colors against every node of the first level (in every
/// parallel copy) equal one value `ε`. Among `ε_1..ε_{2n−2}` some color
/// occurs `n−1` times; those levels and the one after the last are
/// selected. For `T = T_1` the class always has the required size; for
/// larger `T` a missing class is reported as insufficient.
pub fn homogenize_levels(t: &BTree, k: usize, coloring: &PairColoring, n: usize) -> Result<LevelWitness, RamseyError> {
    if n == 0 {
        return Err(RamseyError::Parameter("target size must be positive".into()));
    }
    if t.is_empty() {
        return Err(RamseyError::Parameter("the unit tree must be nonempty".into()));
    }
    let expected = levels_required(n);
    if k != expected {
        return Err(RamseyError::WrongK { expected, got: k });
    }
    let mut pc = ProductCache {
        t: t.clone(),
        cache: HashMap::new(),
    };
    let top = pc.get(k)?;
    if top.tree != *coloring.tree() {
        return Err(RamseyError::Coloring(format!("the coloring is not on [T, T_{k}]")));
    }
    let m = 2 * n - 1;
    let lane: Vec<usize> = (0..top.tree.len()).collect();
    let (cmap, epsilons) = claim(&mut pc, coloring, m, k, &[lane])?;
    let mut tally: BTreeMap<u32, usize> = BTreeMap::new();
    for &e in &epsilons {
        *tally.entry(e).or_default() += 1;
    }
    let mut color = coloring.colors()[0];
    let mut best = 0;
    for (&c, &cnt) in &tally {
        if cnt > best {
            best = cnt;
            color = c;
        }
    }
    if best < n - 1 {
        return Err(RamseyError::Insufficient {
            stage: "level pigeonhole".into(),
            detail: format!("no color occurs {} times among {epsilons:?}", n - 1),
        });
    }
    let mut levels: Vec<usize> = epsilons
        .iter()
        .enumerate()
        .filter(|&(_, &e)| e == color)
        .map(|(i, _)| i + 1)
        .take(n - 1)
        .collect();
    levels.push(levels.last().map_or(1, |&l| l + 1));
    let dn = pc.get(n)?;
    let dm = pc.get(m)?;
    let select = level_select(t, &dn, &dm, &levels);
    let assignment: Vec<usize> = select.iter().map(|&i| cmap[i]).collect();
    let map = MonotoneMap::new(dn.tree.clone(), coloring.tree().clone(), assignment)?;
    let mut checked = 0;
    for (s, u) in dn.tree.lambda() {
        if dn.level_of(s) == dn.level_of(u) {
            continue;
        }
        checked += 1;
        let c = coloring.get((map.apply(s), map.apply(u)));
        if c != color {
            return Err(RamseyError::Verification(format!(
                "cross-level pair {} {} has color {c}, expected {color}",
                show_node(dn.tree.node(s)),
                show_node(dn.tree.node(u))
            )));
        }
    }
    Ok(LevelWitness {
        map,
        color,
        epsilons,
        levels,
        checked,
    })
}

/// Maps `[T, T_m]` into `[T, T_k]` (`k = 2^{m−1}`) so that, in every lane
/// (a monotone copy of `[T, T_k]` in the colored tree), a node on level
/// `i` and any node above it on a later level get color `ε_i`.
fn claim(
    pc: &mut ProductCache,
    f: &PairColoring,
    m: usize,
    k: usize,
    lanes: &[Vec<usize>],
) -> Result<(Vec<usize>, Vec<u32>), RamseyError> {
    let t = pc.t.clone();
    let p = pc.get(k)?;
    let dm = pc.get(m)?;
    let level1 = |s: usize| p.find(0, &[s]).expect("first-level node");
    if m == 1 {
        let map = (0..dm.tree.len()).map(|d| level1(dm.blocks(d)[0])).collect();
        return Ok((map, Vec::new()));
    }
    let q = pc.get(k - 1)?;
    let q2 = pc.get(1usize << (m - 2))?;
    let dm1 = pc.get(m - 1)?;
    let tmax = t.maxima();
    let pos = |sb: usize, qi: usize| -> usize {
        let mut blocks = vec![sb];
        blocks.extend_from_slice(q.blocks(qi));
        p.find(q.xnode(qi) + 1, &blocks).expect("node above a first-level maximum")
    };
    let mut class: Vec<Option<u32>> = Vec::with_capacity(q.tree.len());
    for qi in 0..q.tree.len() {
        let mut val: Option<u32> = None;
        let mut uniform = true;
        'lanes: for lane in lanes {
            for &sb in &tmax {
                let target = lane[pos(sb, qi)];
                for s in t.path(sb) {
                    let c = f.get((lane[level1(s)], target));
                    match val {
                        None => val = Some(c),
                        Some(v) if v != c => {
                            uniform = false;
                            break 'lanes;
                        }
                        _ => {}
                    }
                }
            }
        }
        class.push(if uniform { val } else { None });
    }
    let candidates: BTreeSet<u32> = class.iter().flatten().copied().collect();
    for eps in candidates {
        let mask: Vec<bool> = class.iter().map(|c| *c == Some(eps)).collect();
        let Some(phi) = find_monotone_map_into(&q2.tree, &q.tree, &mask) else {
            continue;
        };
        let mut new_lanes = Vec::with_capacity(lanes.len() * tmax.len());
        for lane in lanes {
            for &sb in &tmax {
                new_lanes.push((0..q2.tree.len()).map(|i| lane[pos(sb, phi.apply(i))]).collect());
            }
        }
        let (sub, mut rest) = match claim(pc, f, m - 1, 1usize << (m - 2), &new_lanes) {
            Ok(x) => x,
            Err(RamseyError::Insufficient { .. }) => continue,
            Err(e) => return Err(e),
        };
        let map = (0..dm.tree.len())
            .map(|d| {
                let bl = dm.blocks(d);
                if bl.len() == 1 {
                    level1(bl[0])
                } else {
                    let qd = dm1.find(dm.xnode(d) - 1, &bl[1..]).expect("node of the smaller product");
                    pos(bl[0], phi.apply(sub[qd]))
                }
            })
            .collect();
        rest.insert(0, eps);
        return Ok((map, rest));
    }
    Err(RamseyError::Insufficient {
        stage: format!("level stabilization with {m} levels to go"),
        detail: format!(
            "no uniform color class above the first level admits [T, T_{}]",
            1usize << (m - 2)
        ),
    })
}

/// The map `[T, T_n] → [T, T_m]` sending level `j` onto level `levels[j]`
/// unit by unit, passing through skipped levels along the least maximal
/// node of `T`.
fn level_select(t: &BTree, dn: &Product, dm: &Product, levels: &[usize]) -> Vec<usize> {
    let m0 = t.least_maximal_extension(t.roots()[0]);
    (0..dn.tree.len())
        .map(|d| {
            let mut img = Vec::new();
            let mut prev = 0;
            for (j, &s) in dn.blocks(d).iter().enumerate() {
                let l = levels[j];
                img.extend(std::iter::repeat_n(m0, l - prev - 1));
                img.push(s);
                prev = l;
            }
            dm.find(img.len() - 1, &img).expect("selected node exists")
        })
        .collect()
}

/// A unit-isomorphic map `[T, T_n] → [T, T_k]` onto levels
/// `l_1 < ... < l_n` on which the node coloring is constant.
#[derive(Clone, Debug)]
pub struct LevelSelection {
    pub map: MonotoneMap,
    pub value: u32,
    /// 1-based target levels.
    pub levels: Vec<usize>,
}

/// Level selection for a node coloring `g` of `[T, T_{n|S|}]` that is
/// constant on units. Level sets are tried pigeonhole-first along the
/// least branch (the first value of `S` occurring `n` times, at its first
/// `n` levels), then all level sets in lexicographic order. Between
/// selected levels the path through each skipped unit is searched so that
/// the next unit has the chosen value.
pub fn select_levels(prod: &Product, g: &[u32], n: usize, s: &[u32]) -> Result<LevelSelection, RamseyError> {
    if n == 0 || s.is_empty() {
        return Err(RamseyError::Parameter("need n ≥ 1 and a nonempty value set".into()));
    }
    let k = prod.right.len();
    let is_chain = prod.right.roots().len() == 1 && (0..k).all(|i| prod.right.children(i).len() <= 1);
    if !is_chain {
        return Err(RamseyError::Parameter("the second factor must be T_k".into()));
    }
    if k != n * s.len() {
        return Err(RamseyError::WrongK {
            expected: n * s.len(),
            got: k,
        });
    }
    if g.len() != prod.tree.len() {
        return Err(RamseyError::Coloring(format!(
            "{} node values for {} nodes",
            g.len(),
            prod.tree.len()
        )));
    }
    if let Some(bad) = g.iter().find(|v| !s.contains(v)) {
        return Err(RamseyError::Coloring(format!("value {bad} is not in S")));
    }
    let mut unit_value: HashMap<Option<usize>, u32> = HashMap::new();
    for i in 0..prod.tree.len() {
        let b = prod.unit_of(i);
        if *unit_value.entry(b).or_insert(g[i]) != g[i] {
            let shown = b.map_or("the root".to_string(), |b| show_node(prod.tree.node(b)));
            return Err(RamseyError::NotUnitConstant(shown));
        }
    }
    let t = &prod.left;
    let m0 = t.least_maximal_extension(t.roots()[0]);
    let mut base = None;
    let mut canonical = Vec::with_capacity(k);
    for _ in 0..k {
        canonical.push(unit_value[&base]);
        let x = base.map_or(0, |b| prod.xnode(b) + 1);
        base = prod.unit_node(base, x, m0);
    }
    let dn = Product::new(t, &finite_txi(n))?;
    let mut tried: HashSet<(u32, Vec<usize>)> = HashSet::new();
    let mut attempt = |x: u32, levels: Vec<usize>| -> Option<LevelSelection> {
        if !tried.insert((x, levels.clone())) {
            return None;
        }
        let assignment = build_selection(prod, &unit_value, &dn, x, &levels)?;
        let map = MonotoneMap::new(dn.tree.clone(), prod.tree.clone(), assignment).ok()?;
        Some(LevelSelection { map, value: x, levels })
    };
    let mut found = None;
    for &x in s {
        let hits: Vec<usize> = (0..k).filter(|&i| canonical[i] == x).map(|i| i + 1).collect();
        if hits.len() >= n {
            found = attempt(x, hits[..n].to_vec());
            if found.is_some() {
                break;
            }
        }
    }
    if found.is_none() {
        'outer: for &x in s {
            let mut idx: Vec<usize> = (1..=n).collect();
            loop {
                if let Some(sel) = attempt(x, idx.clone()) {
                    found = Some(sel);
                    break 'outer;
                }
                let mut i = n;
                loop {
                    if i == 0 {
                        continue 'outer;
                    }
                    i -= 1;
                    if idx[i] < k - n + i + 1 {
                        break;
                    }
                }
                idx[i] += 1;
                for j in i + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
    }
    let sel = found.ok_or_else(|| RamseyError::Insufficient {
        stage: "level selection".into(),
        detail: format!("no {n} levels carry a common value along unit paths"),
    })?;
    for d in 0..dn.tree.len() {
        let img = sel.map.apply(d);
        if g[img] != sel.value
            || prod.level_of(img) != sel.levels[dn.level_of(d) - 1]
            || prod.unit_coordinate(img) != dn.unit_coordinate(d)
        {
            return Err(RamseyError::Verification(format!(
                "selected image of {} is not valid",
                show_node(dn.tree.node(d))
            )));
        }
    }
    Ok(sel)
}

fn build_selection(
    prod: &Product,
    unit_value: &HashMap<Option<usize>, u32>,
    dn: &Product,
    x: u32,
    levels: &[usize],
) -> Option<Vec<usize>> {
    let t = &prod.left;
    let tmax = t.maxima();
    let mut assignment = vec![usize::MAX; dn.tree.len()];
    let mut reached: HashMap<Option<usize>, Option<usize>> = HashMap::new();
    let mut dead: HashSet<usize> = HashSet::new();
    for d in 0..dn.tree.len() {
        let j = dn.level_of(d);
        let dbase = dn.unit_of(d);
        if !reached.contains_key(&dbase) {
            let start = dbase.map(|b| assignment[b]);
            let from = if j == 1 { 0 } else { levels[j - 2] };
            let cb = reach(prod, unit_value, &tmax, start, from, levels[j - 1], x, &mut dead)?;
            reached.insert(dbase, cb);
        }
        let cb = reached[&dbase];
        let xc = cb.map_or(0, |b| prod.xnode(b) + 1);
        assignment[d] = prod.unit_node(cb, xc, dn.unit_coordinate(d))?;
    }
    Some(assignment)
}

/// A base at level `target − 1` reachable from `base` (at level `level`)
/// through maximal nodes of the skipped units, whose unit has value `x`.
#[allow(clippy::too_many_arguments)]
fn reach(
    prod: &Product,
    unit_value: &HashMap<Option<usize>, u32>,
    tmax: &[usize],
    base: Option<usize>,
    level: usize,
    target: usize,
    x: u32,
    dead: &mut HashSet<usize>,
) -> Option<Option<usize>> {
    if level + 1 == target {
        return (unit_value.get(&base) == Some(&x)).then_some(base);
    }
    if let Some(b) = base {
        if dead.contains(&b) {
            return None;
        }
    }
    let xc = base.map_or(0, |b| prod.xnode(b) + 1);
    for &s in tmax {
        let nb = prod.unit_node(base, xc, s)?;
        if let Some(r) = reach(prod, unit_value, tmax, Some(nb), level + 1, target, x, dead) {
            return Some(r);
        }
    }
    if let Some(b) = base {
        dead.insert(b);
    }
    None
}

/// The two shuffle maps `p, q: T → [T_2, T]`.
#[derive(Clone, Debug)]
pub struct Shuffle {
    pub p: MonotoneMap,
    pub q: MonotoneMap,
}

impl Shuffle {
    /// `p(s) ≺ q(s)` for all `s`, and `q(s) ≺ p(t)` whenever `s ≺ t`.
    pub fn interleaves(&self) -> bool {
        let t = &self.p.domain;
        let c = &self.p.codomain;
        (0..t.len()).all(|s| c.is_strict_prefix(self.p.apply(s), self.q.apply(s)))
            && t.lambda()
                .into_iter()
                .all(|(s, u)| c.is_strict_prefix(self.q.apply(s), self.p.apply(u)))
    }
}

/// For `s = (ξ_1, ..., ξ_n)`: `p(s)` is the blocks `(2,1)×ξ_1, ...,
/// (2,1)×ξ_{n−1}` followed by `(2)×ξ_n`, and `q(s) = p(s) ⌢ (1, ξ_n)`.
pub fn shuffle_maps(t: &BTree) -> Result<Shuffle, RamseyError> {
    if t.is_empty() {
        return Err(RamseyError::Parameter("the tree must be nonempty".into()));
    }
    let t2 = finite_txi(2);
    let prod = Product::new(&t2, t)?;
    let two = Label::ord(2);
    let one = Label::ord(1);
    let mut ps = Vec::with_capacity(t.len());
    let mut qs = Vec::with_capacity(t.len());
    for s in 0..t.len() {
        let labels = t.node(s);
        let mut node = Vec::with_capacity(2 * labels.len());
        for (i, xi) in labels.iter().enumerate() {
            node.push(Label::pair(two.clone(), xi.clone()));
            if i + 1 < labels.len() {
                node.push(Label::pair(one.clone(), xi.clone()));
            }
        }
        ps.push(prod.tree.index_of(&node).expect("p(s) lies in [T_2, T]"));
        node.push(Label::pair(one.clone(), labels.last().unwrap().clone()));
        qs.push(prod.tree.index_of(&node).expect("q(s) lies in [T_2, T]"));
    }
    Ok(Shuffle {
        p: MonotoneMap::new(t.clone(), prod.tree.clone(), ps)?,
        q: MonotoneMap::new(t.clone(), prod.tree.clone(), qs)?,
    })
}

/// A tree of order `c^ξ` (the surrogate of `ω^ξ`) with a 2-coloring whose
/// longest `ε`-homogeneous chains have exactly `bounds[ε] = c^{ζ_ε}` nodes.
#[derive(Clone, Debug, Serialize)]
pub struct SharpInstance {
    pub tree: BTree,
    pub coloring: PairColoring,
    pub bounds: [u64; 2],
}

/// Sharpness colorings: `T(0) = T_1`, and `T(ξ+1)` is the incomparable
/// union of `[T(ξ), T_k]` for `k = 1..c`, colored 0 across levels when
/// `ζ_0 > 0` (1 otherwise) and within units by the coloring for
/// `(ζ_0 − 1, ζ_1)` (resp. `(0, ζ_1 − 1)`).
pub fn sharp_coloring(xi: &Ordinal, zeta0: &Ordinal, zeta1: &Ordinal, cutoff: usize) -> Result<SharpInstance, RamseyError> {
    let (Some(x), Some(z0), Some(z1)) = (xi.to_u64(), zeta0.to_u64(), zeta1.to_u64()) else {
        return Err(RamseyError::Parameter("sharpness colorings need finite ordinals".into()));
    };
    if zeta0.natural_sum(zeta1) != *xi {
        return Err(RamseyError::Parameter(format!("{zeta0} ⊕ {zeta1} is not {xi}")));
    }
    if cutoff == 0 {
        return Err(RamseyError::Parameter("cutoff must be positive".into()));
    }
    debug_assert_eq!(z0 + z1, x);
    let (tree, coloring) = sharp(z0, z1, cutoff)?;
    let c = cutoff as u64;
    Ok(SharpInstance {
        tree,
        coloring,
        bounds: [c.pow(z0 as u32), c.pow(z1 as u32)],
    })
}

fn sharp(z0: u64, z1: u64, c: usize) -> Result<(BTree, PairColoring), RamseyError> {
    if z0 + z1 == 0 {
        let t = finite_txi(1);
        let f = PairColoring::with_colors(t.clone(), vec![0, 1], |_| 0)?;
        return Ok((t, f));
    }
    let (cross, (it, ig)) = if z0 > 0 {
        (0, sharp(z0 - 1, z1, c)?)
    } else {
        (1, sharp(0, z1 - 1, c)?)
    };
    let prods: Vec<Product> = (1..=c)
        .map(|k| Product::new(&it, &finite_txi(k)))
        .collect::<Result<_, _>>()?;
    let trees: Vec<BTree> = prods.iter().map(|p| p.tree.clone()).collect();
    let tree = BTree::union(&trees);
    let loc: Vec<(usize, usize)> = tree
        .nodes()
        .iter()
        .map(|nd| {
            prods
                .iter()
                .enumerate()
                .find_map(|(j, p)| p.tree.index_of(nd).map(|i| (j, i)))
                .expect("node of some product")
        })
        .collect();
    let f = PairColoring::with_colors(tree.clone(), vec![0, 1], |(s, t)| {
        let (j, si) = loc[s];
        let (_, ti) = loc[t];
        let p = &prods[j];
        if p.level_of(si) != p.level_of(ti) {
            cross
        } else {
            ig.get((p.unit_coordinate(si), p.unit_coordinate(ti)))
        }
    })?;
    Ok((tree, f))
}

/// A longest chain of nodes all of whose pairs have the given color, found
/// by exhaustive branch-and-bound along every maximal branch. Its length is
/// the largest order of a homogeneous monotone image in that color.
pub fn longest_homogeneous_chain(f: &PairColoring, color: u32) -> Vec<usize> {
    let t = f.tree();
    let mut best: Vec<usize> = Vec::new();
    for v in t.maxima() {
        let path = t.path(v);
        if path.len() <= best.len() {
            continue;
        }
        let mut chosen = Vec::new();
        clique(f, color, &path, 0, &mut chosen, &mut best);
    }
    best
}

fn clique(f: &PairColoring, color: u32, path: &[usize], i: usize, chosen: &mut Vec<usize>, best: &mut Vec<usize>) {
    if chosen.len() > best.len() {
        *best = chosen.clone();
    }
    if i == path.len() || chosen.len() + (path.len() - i) <= best.len() {
        return;
    }
    let u = path[i];
    if chosen.iter().all(|&s| f.get((s, u)) == color) {
        chosen.push(u);
        clique(f, color, path, i + 1, chosen, best);
        chosen.pop();
    }
    clique(f, color, path, i + 1, chosen, best);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_coloring(m: usize, f: impl Fn(usize, usize) -> u32) -> PairColoring {
        PairColoring::with_colors(BTree::chain(m), vec![0, 1], |(s, t)| f(s, t)).unwrap()
    }

    fn pentagon() -> PairColoring {
        chain_coloring(5, |s, t| matches!(t - s, 1 | 4) as u32)
    }

    #[test]
    fn bound_values() {
        assert_eq!(ramsey_bound(1), 1);
        assert_eq!(ramsey_bound(2), 2);
        assert_eq!(ramsey_bound(3), 6);
        assert_eq!(ramsey_bound(4), 20);
        assert_eq!(chain_targets(2, 2), vec![2, 2]);
        assert_eq!(chain_targets(3, 2), vec![6, 3]);
        assert_eq!(halving_stages(1), 0);
        assert_eq!(halving_stages(4), 2);
        assert_eq!(halving_stages(5), 3);
    }

    #[test]
    fn chain_two_nodes() {
        let f = chain_coloring(2, |_, _| 1);
        match homogenize_chain(2, &f).unwrap() {
            ChainOutcome::Homogeneous { levels, witness } => {
                assert_eq!(levels, vec![1, 2]);
                assert_eq!(witness.color, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pentagon_is_insufficient() {
        match homogenize_chain(3, &pentagon()).unwrap() {
            ChainOutcome::Insufficient { searched } => assert_eq!(searched, 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_chain_rejected() {
        let t = BTree::from_ints(&[&[1], &[1, 1], &[1, 2]]).unwrap();
        let f = PairColoring::from_fn(t, |_| 0);
        assert_eq!(homogenize_chain(2, &f).unwrap_err(), RamseyError::NotChain);
    }

    #[test]
    fn coloring_json_round_trip() {
        let f = pentagon();
        let s = serde_json::to_string(&f).unwrap();
        let g: PairColoring = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        let mut v: serde_json::Value = serde_json::from_str(&s).unwrap();
        v["entries"].as_array_mut().unwrap().pop();
        assert!(serde_json::from_value::<PairColoring>(v).is_err());
    }

    #[test]
    fn reduce_constant_is_identity() {
        let f = PairColoring::with_colors(BTree::chain(4), vec![0, 1, 2, 3], |_| 2).unwrap();
        let w = reduce_colors(&f, |_, _| panic!("no stage needed")).unwrap();
        assert_eq!(w.color, 2);
        assert_eq!(w.map.map.assignment, vec![0, 1, 2, 3]);
    }

    #[test]
    fn reduce_two_colors_delegates() {
        let f = chain_coloring(6, |s, t| ((s + t) % 2) as u32);
        let mut calls = 0;
        let w = reduce_colors(&f, |c, stage| {
            calls += 1;
            assert_eq!(stage, 0);
            assert_eq!(c, &f);
            match homogenize_chain(3, c)? {
                ChainOutcome::Homogeneous { witness, .. } => Ok(witness),
                _ => unreachable!(),
            }
        })
        .unwrap();
        assert_eq!(calls, 1);
        assert_eq!(w.domain().len(), 3);
    }

    #[test]
    fn reduce_four_colors_on_18_chain() {
        let f = PairColoring::with_colors(BTree::chain(18), vec![0, 1, 2, 3], |(s, t)| ((s * 7 + t * 3) % 4) as u32)
            .unwrap();
        let w = reduce_colors_chain(&f, 2).unwrap();
        assert_eq!(w.domain().len(), 2);
        assert!(w.verify_pairs(&f).is_ok());
        assert!(!w.stages.is_empty() && w.stages.len() <= 2);
    }

    #[test]
    fn drop_dependence_on_chain_is_identity() {
        let t = BTree::chain(4);
        let f = |s: usize, v: usize| (s * 3 + v) as u32 % 5;
        let r = drop_dependence_e(&t, f);
        assert_eq!(r.map.map.assignment, vec![0, 1, 2, 3]);
        assert_eq!(r.map.ext(3), 3);
        assert_eq!(r.g, (0..4).map(|s| f(s, 3)).collect::<Vec<_>>());
        assert!(r.verify(f).is_ok());
    }

    #[test]
    fn drop_dependence_pigeonholes_maxima() {
        // root with three chain children of lengths 1, 2, 3
        let t = BTree::from_ints(&[&[0], &[0, 1], &[0, 2], &[0, 2, 1], &[0, 3], &[0, 3, 1], &[0, 3, 1, 1]]).unwrap();
        let f = |s: usize, v: usize| if s == 0 { (v % 2) as u32 } else { 0 };
        let r = drop_dependence_e(&t, f);
        r.verify(f).unwrap();
        let d = &r.map.map.domain;
        assert!(d.children(d.roots()[0]).len() >= 2);
        let constant = drop_dependence_e(&t, |_, _| 4);
        assert_eq!(constant.map.map.assignment, (0..t.len()).collect::<Vec<_>>());
        assert!(constant.g.iter().all(|&g| g == 4));
    }

    #[test]
    fn lambda_e_reduction_verifies() {
        let t = BTree::from_ints(&[&[1], &[1, 1], &[1, 1, 1], &[1, 1, 2], &[1, 2], &[1, 2, 1]]).unwrap();
        let f = TripleColoring::from_fn(t, |(s, u, v)| ((s + 2 * u + v) % 3) as u32);
        let r = drop_dependence_lambda_e(&f);
        assert!(r.verify(&f).unwrap() > 0);
    }

    #[test]
    fn lambda_e_examples() {
        let f = TripleColoring::from_fn(BTree::chain(3), |_| 7);
        let w = homogenize_lambda_e(&f, 3).unwrap();
        assert_eq!(w.color, 7);
        let g = TripleColoring::from_fn(BTree::chain(6), |(s, t, _)| ((s + t) % 2) as u32);
        let w = homogenize_lambda_e(&g, 3).unwrap();
        assert_eq!(w.verify_triples(&g).unwrap(), w.checked);
        let h = TripleColoring::from_fn(BTree::chain(6), |(_, _, v)| (v % 2) as u32);
        let w = homogenize_lambda_e(&h, 6).unwrap();
        assert_eq!(w.color, 1);
        assert_eq!(w.map.map.assignment, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn levels_on_t1() {
        let t1 = finite_txi(1);
        let prod = Product::new(&t1, &finite_txi(4)).unwrap();
        let f = PairColoring::with_colors(prod.tree.clone(), vec![0, 1], |_| 1).unwrap();
        let w = homogenize_levels(&t1, 4, &f, 2).unwrap();
        assert_eq!(w.color, 1);
        assert_eq!(w.checked, 1);
        assert_eq!(
            homogenize_levels(&t1, 3, &f, 2).unwrap_err(),
            RamseyError::WrongK { expected: 4, got: 3 }
        );
        let single = Product::new(&t1, &finite_txi(1)).unwrap();
        let g = PairColoring::from_fn(single.tree.clone(), |_| 0);
        let w = homogenize_levels(&t1, 1, &g, 1).unwrap();
        assert_eq!(w.checked, 0);
    }

    #[test]
    fn levels_on_t1_all_colorings() {
        let t1 = finite_txi(1);
        let prod = Product::new(&t1, &finite_txi(4)).unwrap();
        let pairs = prod.tree.lambda();
        for mask in 0..1u32 << pairs.len() {
            let f = PairColoring::with_colors(prod.tree.clone(), vec![0, 1], |k| {
                let i = pairs.iter().position(|&p| p == k).unwrap();
                mask >> i & 1
            })
            .unwrap();
            let w = homogenize_levels(&t1, 4, &f, 2).unwrap();
            assert_eq!(w.checked, 1);
        }
    }

    #[test]
    fn levels_on_two_node_chain_unit() {
        let t = finite_txi(2);
        let prod = Product::new(&t, &finite_txi(4)).unwrap();
        let f = PairColoring::with_colors(prod.tree.clone(), vec![0, 1], |(s, u)| {
            (prod.level_of(s) + prod.level_of(u)) as u32 % 2
        })
        .unwrap();
        let w = homogenize_levels(&t, 4, &f, 2).unwrap();
        assert!(w.checked > 0);
    }

    fn node_values(prod: &Product, by_level: &[u32]) -> Vec<u32> {
        (0..prod.tree.len()).map(|i| by_level[prod.level_of(i) - 1]).collect()
    }

    #[test]
    fn select_levels_examples() {
        let t1 = finite_txi(1);
        let p2 = Product::new(&t1, &finite_txi(2)).unwrap();
        let sel = select_levels(&p2, &node_values(&p2, &[5, 6]), 1, &[5, 6]).unwrap();
        assert_eq!((sel.value, sel.levels.clone()), (5, vec![1]));
        let t = finite_txi(2);
        let p4 = Product::new(&t, &finite_txi(4)).unwrap();
        let sel = select_levels(&p4, &node_values(&p4, &[5, 6, 5, 6]), 2, &[5, 6]).unwrap();
        assert_eq!((sel.value, sel.levels.clone()), (5, vec![1, 3]));
        let sel = select_levels(&p4, &node_values(&p4, &[6, 6, 6, 6]), 2, &[5, 6]).unwrap();
        assert_eq!((sel.value, sel.levels), (6, vec![1, 2]));
        let mut bad = node_values(&p4, &[5, 6, 5, 6]);
        bad[1] = 6;
        assert!(matches!(
            select_levels(&p4, &bad, 2, &[5, 6]),
            Err(RamseyError::NotUnitConstant(_))
        ));
    }

    #[test]
    fn select_levels_branch_dependent() {
        // T has two maxima; the units above them carry different values
        let t = BTree::from_ints(&[&[1], &[1, 1], &[1, 2]]).unwrap();
        let p = Product::new(&t, &finite_txi(4)).unwrap();
        let g: Vec<u32> = (0..p.tree.len())
            .map(|i| {
                let b = p.blocks(i);
                if b.len() == 1 {
                    0
                } else {
                    (b[..b.len() - 1].iter().filter(|&&s| s == 1).count() % 2) as u32
                }
            })
            .collect();
        let sel = select_levels(&p, &g, 2, &[0, 1]).unwrap();
        assert!(sel.map.verify().is_ok());
    }

    #[test]
    fn shuffle_examples() {
        let t = BTree::from_ints(&[&[7], &[7, 8]]).unwrap();
        let sh = shuffle_maps(&t).unwrap();
        let c = &sh.p.codomain;
        let two = |x: i64| Label::pair(Label::ord(2), Label::Int(x));
        let one = |x: i64| Label::pair(Label::ord(1), Label::Int(x));
        assert_eq!(c.node(sh.p.apply(0)), &[two(7)]);
        assert_eq!(c.node(sh.q.apply(0)), &[two(7), one(7)]);
        assert_eq!(c.node(sh.p.apply(1)), &[two(7), one(7), two(8)]);
        assert!(sh.interleaves());
    }

    #[test]
    fn sharp_small_cases() {
        let w = |n: u64| Ordinal::from(n);
        let a = sharp_coloring(&w(1), &w(1), &w(0), 3).unwrap();
        assert_eq!(a.tree.order(), 3);
        assert_eq!(a.coloring.used_colors(), vec![0]);
        let b = sharp_coloring(&w(1), &w(0), &w(1), 3).unwrap();
        assert_eq!(b.coloring.used_colors(), vec![1]);
        let c = sharp_coloring(&w(2), &w(1), &w(1), 2).unwrap();
        assert_eq!(c.tree.order(), 4);
        assert_eq!(c.bounds, [2, 2]);
        for e in 0..2 {
            assert_eq!(longest_homogeneous_chain(&c.coloring, e).len() as u64, c.bounds[e as usize]);
        }
        assert!(sharp_coloring(&w(2), &w(1), &w(0), 2).is_err());
    }
}
