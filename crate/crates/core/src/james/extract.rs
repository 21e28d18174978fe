//! Summand extraction: from a cs-tree for `K + L` at `eps`, a cs-tree for
//! `K` or for `L` at `eps/3`, through cell colorings, two `Λᵉ`
//! homogenizations and the shuffle maps.

use std::collections::HashMap;
use std::rc::Rc;

use num_traits::Signed;
use serde::Serialize;

use super::body::{Body, MinkowskiSum};
use super::cs::{is_cs, split_margin, CsTree, NodeCertificate, SplitCertificate, WeightVec};
use super::lp::{Lp, LpOutcome, Relation};
use super::{dot, q, JamesError, Q};
use crate::ramsey::{homogenize_lambda_e, shuffle_maps, RamseyError, Stage, TripleColoring};
use crate::tree::{show_node, BTree};

/// Cell partition of `[−R, R]` into `cells` intervals of width `δ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExtractionConfig {
    #[serde(with = "super::rat")]
    pub r: Q,
    #[serde(with = "super::rat")]
    pub delta: Q,
    pub cells: usize,
}

impl ExtractionConfig {
    /// `δ = eps/24` and `R` the largest `|⟨v, x⟩|` over vertices of both
    /// bodies and all points (at least 1).
    pub fn new(k: &Body, l: &Body, eps: &Q, points: &[Vec<Q>]) -> Self {
        let mut r = q(1);
        for v in k.vertices.iter().chain(&l.vertices) {
            for x in points {
                let a = dot(v, x).abs();
                if a > r {
                    r = a;
                }
            }
        }
        let delta = eps / q(24);
        let cells = ((&r * q(2)) / &delta).ceil().to_integer();
        let cells = usize::try_from(cells).unwrap_or(usize::MAX).max(1);
        ExtractionConfig { r, delta, cells }
    }

    pub fn cell(&self, x: &Q) -> usize {
        let i = ((x + &self.r) / &self.delta).floor().to_integer();
        if i.is_negative() {
            return 0;
        }
        usize::try_from(i).unwrap_or(usize::MAX).min(self.cells - 1)
    }

    /// Left endpoint of cell `i`; every value in the cell lies within `δ`
    /// above it.
    pub fn lower(&self, i: usize) -> Q {
        -&self.r + Q::from_integer((i as u64).into()) * &self.delta
    }

    fn pair_color(&self, a: &Q, b: &Q) -> u32 {
        (self.cell(a) * self.cells + self.cell(b)) as u32
    }

    fn unpair(&self, c: u32) -> (usize, usize) {
        let c = c as usize;
        (c / self.cells, c % self.cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    First,
    Second,
}

/// A verified cs-tree for one summand with the quantities behind it.
#[derive(Debug, Clone, Serialize)]
pub struct Extraction {
    pub side: Side,
    pub tree: CsTree,
    /// Order of the output index tree counting the empty root.
    pub order: usize,
    /// Order of the input index tree counting the empty root.
    pub input_order: usize,
    pub config: ExtractionConfig,
    /// `λ − μ` for the chosen side, from the cell endpoints.
    #[serde(with = "super::rat")]
    pub gap: Q,
    /// Smallest certified margin of the output (none for a single point).
    #[serde(with = "super::rat::opt")]
    pub min_margin: Option<Q>,
    pub stages: Vec<Stage>,
}

/// Split functional `x* = y* + z*` with `y* ∈ K`, `z* ∈ L`.
#[derive(Debug, Clone)]
struct Split {
    y: Vec<Q>,
    yw: Vec<Q>,
    z: Vec<Q>,
    zw: Vec<Q>,
}

impl Split {
    fn zero(k: &Body, l: &Body) -> Self {
        Split {
            y: vec![q(0); k.dim],
            yw: uniform(k.vertices.len()),
            z: vec![q(0); l.dim],
            zw: uniform(l.vertices.len()),
        }
    }

    fn values(&self, x: &[Q]) -> (Q, Q) {
        (dot(&self.y, x), dot(&self.z, x))
    }
}

/// Uniform weights over a symmetric vertex list give the zero functional.
fn uniform(n: usize) -> Vec<Q> {
    vec![Q::new(1.into(), (n as i64).into()); n]
}

/// Convex weights over the sum vertices representing `f`, taken from the
/// certificate when they reproduce it, otherwise solved for.
fn sum_weights(sum: &MinkowskiSum, cert: &SplitCertificate) -> Option<Vec<Q>> {
    if let Some(WeightVec(w)) = &cert.weights {
        if w.len() == sum.body.vertices.len()
            && w.iter().all(|x| !x.is_negative())
            && sum.body.functional(w) == cert.functional
        {
            return Some(w.clone());
        }
    }
    let n = sum.body.vertices.len();
    let mut lp = Lp::new(n, false);
    for i in 0..sum.body.dim {
        lp.add(
            sum.body.vertices.iter().map(|v| v[i].clone()).collect(),
            Relation::Eq,
            cert.functional[i].clone(),
        );
    }
    lp.add(vec![q(1); n], Relation::Eq, q(1));
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    }
}

/// Chain-indexed family after homogenization: points along a chain and
/// the split functional for every node against the top.
struct Family {
    points: Vec<Vec<Q>>,
    funcs: Vec<Rc<Split>>,
}

fn ramsey_err(e: RamseyError) -> JamesError {
    match e {
        RamseyError::Insufficient { stage, detail } => JamesError::Insufficient { stage, detail },
        RamseyError::Cap(s) => JamesError::Cap(s),
        other => JamesError::Verification(other.to_string()),
    }
}

/// Extracts a `(K, eps/3)`- or `(L, eps/3)`-cs tree from a `(K+L, eps)`-cs
/// tree `w`. The functional `x*_{t,v}` is the certificate of the maximal
/// node `v` at split `|t|`; for `t = v` the last split of `v` is reused
/// (the zero functional for a single point). Sizes are tried from the
/// largest down; the first choice whose output re-verifies is returned,
/// with `first` preferred when both sides reach the margin.
pub fn extract_summand(k: &Body, l: &Body, eps: &Q, w: &CsTree) -> Result<Extraction, JamesError> {
    if !eps.is_positive() {
        return Err(JamesError::Parameter("eps must be positive".into()));
    }
    if k.dim != l.dim {
        return Err(JamesError::Dimension {
            expected: k.dim,
            got: l.dim,
        });
    }
    let t = &w.nodes;
    if t.is_empty() {
        return Err(JamesError::Empty("cs tree"));
    }
    if w.points.len() != t.len() {
        return Err(JamesError::Parameter("point count differs from node count".into()));
    }
    for p in &w.points {
        if p.len() != k.dim {
            return Err(JamesError::Dimension {
                expected: k.dim,
                got: p.len(),
            });
        }
    }
    let sum = k.minkowski(l)?;
    let mut stages = Vec::new();

    let mut funcs: HashMap<(usize, usize), Rc<Split>> = HashMap::new();
    let zero = Rc::new(Split::zero(k, l));
    let mut split_count = 0;
    for v in t.maxima() {
        let node = t.node(v);
        let cert = w
            .certificates
            .iter()
            .find(|c| c.node == node)
            .ok_or_else(|| JamesError::Split(format!("no certificate for {}", show_node(node))))?;
        let path = t.path(v);
        let seq: Vec<Vec<Q>> = path.iter().map(|&i| w.points[i].clone()).collect();
        let mut last = zero.clone();
        for m in 1..path.len() {
            let c = cert
                .splits
                .iter()
                .find(|s| s.m == m)
                .ok_or_else(|| JamesError::Split(format!("{}: missing split {m}", show_node(node))))?;
            if c.functional.len() != k.dim {
                return Err(JamesError::Dimension {
                    expected: k.dim,
                    got: c.functional.len(),
                });
            }
            if split_margin(&c.functional, &seq, m) < *eps {
                return Err(JamesError::Parameter(format!(
                    "{}: split {m} does not separate at eps",
                    show_node(node)
                )));
            }
            let weights = sum_weights(&sum, c).ok_or_else(|| {
                JamesError::Split(format!(
                    "{}: split {m} functional is not in the Minkowski sum",
                    show_node(node)
                ))
            })?;
            let (a, b) = sum.split(&weights);
            let s = Rc::new(Split {
                y: k.functional(&a),
                yw: a,
                z: l.functional(&b),
                zw: b,
            });
            debug_assert_eq!(
                s.y.iter().zip(&s.z).map(|(p, r)| p + r).collect::<Vec<_>>(),
                c.functional
            );
            funcs.insert((path[m - 1], v), s.clone());
            last = s;
            split_count += 1;
        }
        funcs.insert((v, v), last);
    }
    stages.push(Stage {
        name: "certificate split".into(),
        required: split_count,
        available: split_count,
        produced: split_count,
    });

    let config = ExtractionConfig::new(k, l, eps, &w.points);
    let input_order = t.order_with_root();
    let depth = t.order();

    let f1 = TripleColoring::from_fn(t.clone(), |(s, u, v)| {
        let (a, b) = funcs[&(u, v)].values(&w.points[s]);
        config.pair_color(&a, &b)
    });

    if depth < 2 {
        return trivial(k, eps, w, config, input_order, stages);
    }

    for n3 in (1..=depth / 2).rev() {
        let n2 = 2 * n3;
        for n1 in (n2..=depth).rev() {
            match attempt(k, l, eps, &config, w, &funcs, &f1, n1, n2, n3) {
                Ok((tree, side, gap, mut more)) => {
                    let mut all = stages.clone();
                    all.append(&mut more);
                    let min_margin = tree.min_margin();
                    return Ok(Extraction {
                        side,
                        order: tree.order_with_root(),
                        tree,
                        input_order,
                        config,
                        gap,
                        min_margin,
                        stages: all,
                    });
                }
                Err(JamesError::Insufficient { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    trivial(k, eps, w, config, input_order, stages)
}

/// A single point is cs for every body.
fn trivial(
    k: &Body,
    eps: &Q,
    w: &CsTree,
    config: ExtractionConfig,
    input_order: usize,
    mut stages: Vec<Stage>,
) -> Result<Extraction, JamesError> {
    let root = w.nodes.roots()[0];
    let nodes = BTree::chain(1);
    let tree = CsTree {
        certificates: vec![NodeCertificate {
            node: nodes.node(0).to_vec(),
            splits: Vec::new(),
        }],
        nodes,
        points: vec![w.points[root].clone()],
        eps: eps / q(3),
    };
    tree.verify(Some(k)).map_err(JamesError::Verification)?;
    stages.push(Stage {
        name: "single point".into(),
        required: 1,
        available: 1,
        produced: 1,
    });
    Ok(Extraction {
        side: Side::First,
        order: tree.order_with_root(),
        tree,
        input_order,
        config,
        gap: q(0),
        min_margin: None,
        stages,
    })
}

#[allow(clippy::too_many_arguments)]
fn attempt(
    k: &Body,
    l: &Body,
    eps: &Q,
    config: &ExtractionConfig,
    w: &CsTree,
    funcs: &HashMap<(usize, usize), Rc<Split>>,
    f1: &TripleColoring,
    n1: usize,
    n2: usize,
    n3: usize,
) -> Result<(CsTree, Side, Q, Vec<Stage>), JamesError> {
    let mut stages = Vec::new();
    let h1 = homogenize_lambda_e(f1, n1).map_err(ramsey_err)?;
    stages.extend(h1.stages.iter().cloned());
    let (u_cell, v_cell) = config.unpair(h1.color);
    let top1 = h1.map.ext(n1 - 1);
    let fam1 = Family {
        points: (0..n1).map(|i| w.points[h1.map.map.apply(i)].clone()).collect(),
        funcs: (0..n1).map(|i| funcs[&(h1.map.map.apply(i), top1)].clone()).collect(),
    };

    let chain1 = BTree::chain(n1);
    let f2 = TripleColoring::from_fn(chain1, |(s, u, _)| {
        let (a, b) = fam1.funcs[s].values(&fam1.points[u]);
        config.pair_color(&a, &b)
    });
    let h2 = homogenize_lambda_e(&f2, n2).map_err(ramsey_err)?;
    stages.extend(h2.stages.iter().cloned());
    let (u2_cell, v2_cell) = config.unpair(h2.color);
    let fam2 = Family {
        points: (0..n2).map(|i| fam1.points[h2.map.map.apply(i)].clone()).collect(),
        funcs: (0..n2).map(|i| fam1.funcs[h2.map.map.apply(i)].clone()).collect(),
    };

    let sh = shuffle_maps(&BTree::chain(n3)).map_err(ramsey_err)?;
    debug_assert_eq!(sh.p.codomain.len(), n2);
    stages.push(Stage {
        name: "shuffle".into(),
        required: n2 as u64,
        available: n2 as u64,
        produced: n3 as u64,
    });

    let lambda1 = config.lower(u_cell) - config.lower(u2_cell);
    let lambda2 = config.lower(v_cell) - config.lower(v2_cell);
    let threshold = eps / q(2) - q(2) * &config.delta;
    let points: Vec<Vec<Q>> = (0..n3).map(|i| fam2.points[sh.p.apply(i)].clone()).collect();
    let target = eps / q(3);
    let mut sides = Vec::new();
    if lambda1 >= threshold {
        sides.push((Side::First, lambda1.clone()));
    }
    if lambda2 >= threshold {
        sides.push((Side::Second, lambda2.clone()));
    }
    if sides.is_empty() && n3 < 2 {
        sides.push((Side::First, lambda1.clone()));
    }
    if sides.is_empty() {
        return Err(JamesError::Verification(format!(
            "neither side reaches eps/2 − 2δ (gaps {lambda1}, {lambda2})"
        )));
    }
    let mut failure = String::new();
    for (side, gap) in sides {
        let body = if side == Side::First { k } else { l };
        let splits: Vec<SplitCertificate> = (1..n3)
            .map(|m| {
                let s = &fam2.funcs[sh.q.apply(m - 1)];
                let (f, wts) = match side {
                    Side::First => (s.y.clone(), s.yw.clone()),
                    Side::Second => (s.z.clone(), s.zw.clone()),
                };
                SplitCertificate {
                    m,
                    margin: split_margin(&f, &points, m),
                    functional: f,
                    weights: Some(WeightVec(wts)),
                }
            })
            .collect();
        let nodes = BTree::chain(n3);
        let top = nodes.node(n3 - 1).to_vec();
        let tree = CsTree {
            nodes,
            points: points.clone(),
            certificates: vec![NodeCertificate { node: top, splits }],
            eps: target.clone(),
        };
        if let Err(e) = tree.verify(Some(body)) {
            failure = e;
            continue;
        }
        let check = is_cs(body, &target, &points)?;
        if !check.holds {
            failure = format!("is_cs rejects the output at split {:?}", check.failing_split);
            continue;
        }
        stages.push(Stage {
            name: "verify".into(),
            required: n3 as u64,
            available: n3 as u64,
            produced: n3 as u64,
        });
        return Ok((tree, side, gap, stages));
    }
    Err(JamesError::Verification(failure))
}
