//! Convexly separated sequences: hull distances, separating functionals,
//! certificates, and the tree of all cs-sequences over a finite alphabet.

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use super::body::{Body, SpaceNorm};
use super::lp::{Lp, LpOutcome, Relation};
use super::{dot, q, sub, JamesError, Q};
use crate::tree::{show_node, BTree, Label, Node};

fn check_points(k: &Body, pts: &[Vec<Q>]) -> Result<(), JamesError> {
    for p in pts {
        if p.len() != k.dim {
            return Err(JamesError::Dimension {
                expected: k.dim,
                got: p.len(),
            });
        }
    }
    Ok(())
}

/// `min |x − y|_K` over `x ∈ co(s1)`, `y ∈ co(s2)`, by the epigraph LP
/// over convex weights.
pub fn hull_distance(k: &Body, s1: &[Vec<Q>], s2: &[Vec<Q>]) -> Result<Q, JamesError> {
    if s1.is_empty() || s2.is_empty() {
        return Err(JamesError::Empty("hull_distance point set"));
    }
    check_points(k, s1)?;
    check_points(k, s2)?;
    let (a, b) = (s1.len(), s2.len());
    // variables: λ (a), μ (b), r
    let n = a + b + 1;
    let mut lp = Lp::new(n, false);
    lp.objective[n - 1] = q(1);
    let mut row = vec![q(0); n];
    row[..a].iter_mut().for_each(|v| *v = q(1));
    lp.add(row, Relation::Eq, q(1));
    let mut row = vec![q(0); n];
    row[a..a + b].iter_mut().for_each(|v| *v = q(1));
    lp.add(row, Relation::Eq, q(1));
    for v in &k.vertices {
        let mut row: Vec<Q> = s1.iter().map(|x| dot(v, x)).collect();
        row.extend(s2.iter().map(|y| -dot(v, y)));
        row.push(q(-1));
        lp.add(row, Relation::Le, q(0));
    }
    match lp.solve() {
        LpOutcome::Optimal { value, .. } => Ok(value),
        other => unreachable!("hull distance LP is feasible and bounded: {other:?}"),
    }
}

/// `max_{x* ∈ K} min_{i,j} x*(x_i − y_j)` with the maximizing convex
/// weights over the vertices of `K`.
pub fn separation_margin(
    k: &Body,
    s1: &[Vec<Q>],
    s2: &[Vec<Q>],
) -> Result<(Q, Vec<Q>), JamesError> {
    if s1.is_empty() || s2.is_empty() {
        return Err(JamesError::Empty("separation point set"));
    }
    check_points(k, s1)?;
    check_points(k, s2)?;
    let nv = k.vertices.len();
    // variables: w (nv), τ free
    let mut lp = Lp::new(nv + 1, true);
    lp.set_free(nv);
    lp.objective[nv] = q(1);
    let mut row = vec![q(1); nv + 1];
    row[nv] = q(0);
    lp.add(row, Relation::Eq, q(1));
    for x in s1 {
        for y in s2 {
            let d = sub(x, y);
            let mut row: Vec<Q> = k.vertices.iter().map(|v| dot(v, &d)).collect();
            row.push(q(-1));
            lp.add(row, Relation::Ge, q(0));
        }
    }
    match lp.solve() {
        LpOutcome::Optimal { value, x } => Ok((value, x[..nv].to_vec())),
        other => unreachable!("separation LP is feasible and bounded: {other:?}"),
    }
}

/// Convex weights `w` with `Σ w_k ⟨v_k, x_i − y_j⟩ ≥ eps` for all pairs,
/// if any exist.
pub fn separating_weights(
    k: &Body,
    s1: &[Vec<Q>],
    s2: &[Vec<Q>],
    eps: &Q,
) -> Result<Option<Vec<Q>>, JamesError> {
    check_points(k, s1)?;
    check_points(k, s2)?;
    let nv = k.vertices.len();
    let mut lp = Lp::new(nv, false);
    lp.add(vec![q(1); nv], Relation::Eq, q(1));
    for x in s1 {
        for y in s2 {
            let d = sub(x, y);
            lp.add(
                k.vertices.iter().map(|v| dot(v, &d)).collect(),
                Relation::Ge,
                eps.clone(),
            );
        }
    }
    Ok(match lp.solve() {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    })
}

/// Separating functional for one split `m` of a sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCertificate {
    pub m: usize,
    #[serde(with = "super::rat::vec")]
    pub functional: Vec<Q>,
    /// Convex weights over the body vertices producing `functional`, when
    /// the certificate lives in a polytope.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightVec>,
    #[serde(with = "super::rat")]
    pub margin: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVec(#[serde(with = "super::rat::vec")] pub Vec<Q>);

impl SplitCertificate {
    fn from_weights(k: &Body, m: usize, weights: Vec<Q>, seq: &[Vec<Q>]) -> Self {
        let functional = k.functional(&weights);
        let margin = split_margin(&functional, seq, m);
        SplitCertificate {
            m,
            functional,
            weights: Some(WeightVec(weights)),
            margin,
        }
    }
}

/// `min_{i ≤ m < j} f(x_i − x_j)` (1-based `m`).
pub fn split_margin(f: &[Q], seq: &[Vec<Q>], m: usize) -> Q {
    let vals: Vec<Q> = seq.iter().map(|x| dot(f, x)).collect();
    let lo = vals[..m].iter().min().expect("nonempty prefix");
    let hi = vals[m..].iter().max().expect("nonempty suffix");
    lo - hi
}

/// Functional certificates for every split of one sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsCertificate {
    #[serde(with = "super::rat::mat")]
    pub points: Vec<Vec<Q>>,
    pub splits: Vec<SplitCertificate>,
}

impl CsCertificate {
    /// Re-checks by direct arithmetic: weights are convex and produce the
    /// functional, margins are recomputed and at least `eps`.
    pub fn verify(&self, body: Option<&Body>, eps: &Q) -> Result<(), String> {
        verify_splits(body, eps, &self.points, &self.splits)
    }
}

fn verify_splits(
    body: Option<&Body>,
    eps: &Q,
    seq: &[Vec<Q>],
    splits: &[SplitCertificate],
) -> Result<(), String> {
    let n = seq.len();
    let ms: Vec<usize> = splits.iter().map(|s| s.m).collect();
    if ms != (1..n.max(1)).collect::<Vec<_>>() {
        return Err(format!("splits {ms:?} do not cover 1..{n}"));
    }
    for s in splits {
        if let (Some(k), Some(WeightVec(w))) = (body, &s.weights) {
            if w.len() != k.vertices.len() {
                return Err(format!("split {}: weight count mismatch", s.m));
            }
            if w.iter().any(|x| x.is_negative()) {
                return Err(format!("split {}: negative weight", s.m));
            }
            if w.iter().fold(q(0), |a, b| a + b) != q(1) {
                return Err(format!("split {}: weights do not sum to 1", s.m));
            }
            if k.functional(w) != s.functional {
                return Err(format!("split {}: functional does not match weights", s.m));
            }
        }
        let margin = split_margin(&s.functional, seq, s.m);
        if margin != s.margin {
            return Err(format!("split {}: recorded margin differs from recomputed", s.m));
        }
        if margin < *eps {
            return Err(format!("split {}: margin below eps", s.m));
        }
    }
    Ok(())
}

/// Outcome of a cs check.
#[derive(Debug, Clone)]
pub struct CsCheck {
    pub holds: bool,
    pub certificate: Option<CsCertificate>,
    /// First split (1-based) where separation fails.
    pub failing_split: Option<usize>,
    /// Hull distances of the splits examined, in order.
    pub distances: Vec<Q>,
}

/// Decides whether `seq` is `(K, eps)`-cs. Every split is solved twice:
/// as the hull-distance LP and as the max-margin separating-functional LP.
/// The two optima must coincide exactly, and the maximizing functional is
/// the certificate.
pub fn is_cs(k: &Body, eps: &Q, seq: &[Vec<Q>]) -> Result<CsCheck, JamesError> {
    if !eps.is_positive() {
        return Err(JamesError::Parameter("eps must be positive".into()));
    }
    check_points(k, seq)?;
    let mut splits = Vec::new();
    let mut distances = Vec::new();
    for m in 1..seq.len() {
        let (pre, suf) = seq.split_at(m);
        let (ok, d, w) = decide_split(k, eps, pre, suf)?;
        distances.push(d);
        if !ok {
            return Ok(CsCheck {
                holds: false,
                certificate: None,
                failing_split: Some(m),
                distances,
            });
        }
        splits.push(SplitCertificate::from_weights(k, m, w.unwrap(), seq));
    }
    Ok(CsCheck {
        holds: true,
        certificate: Some(CsCertificate {
            points: seq.to_vec(),
            splits,
        }),
        failing_split: None,
        distances,
    })
}

fn decide_split(
    k: &Body,
    eps: &Q,
    pre: &[Vec<Q>],
    suf: &[Vec<Q>],
) -> Result<(bool, Q, Option<Vec<Q>>), JamesError> {
    let d = hull_distance(k, pre, suf)?;
    let (tau, w) = separation_margin(k, pre, suf)?;
    assert_eq!(d, tau, "primal distance and dual separation margin disagree");
    Ok(if tau >= *eps {
        (true, d, Some(w))
    } else {
        (false, d, None)
    })
}

/// Certificates for the root-to-`node` path of a maximal node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCertificate {
    pub node: Node,
    pub splits: Vec<SplitCertificate>,
}

/// A tree-indexed family of points with separating functionals for every
/// maximal path. The empty root is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsTree {
    pub nodes: BTree,
    /// `points[i]` is the point at node `i` of `nodes`.
    #[serde(with = "super::rat::mat")]
    pub points: Vec<Vec<Q>>,
    pub certificates: Vec<NodeCertificate>,
    #[serde(with = "super::rat")]
    pub eps: Q,
}

impl CsTree {
    pub fn path_points(&self, i: usize) -> Vec<Vec<Q>> {
        self.nodes
            .path(i)
            .into_iter()
            .map(|j| self.points[j].clone())
            .collect()
    }

    /// Order of the index tree including the empty root.
    pub fn order_with_root(&self) -> usize {
        self.nodes.order_with_root()
    }

    /// Every maximal node has a certificate for every split of its path,
    /// and every certificate re-verifies at `eps` (with weights checked
    /// against `body` when given).
    pub fn verify(&self, body: Option<&Body>) -> Result<(), String> {
        if self.points.len() != self.nodes.len() {
            return Err("point count differs from node count".into());
        }
        for i in self.nodes.maxima() {
            let node = self.nodes.node(i);
            let cert = self
                .certificates
                .iter()
                .find(|c| c.node == node)
                .ok_or_else(|| format!("no certificate for {}", show_node(node)))?;
            verify_splits(body, &self.eps, &self.path_points(i), &cert.splits)
                .map_err(|e| format!("{}: {e}", show_node(node)))?;
        }
        Ok(())
    }

    /// Smallest recorded margin over all certificates.
    pub fn min_margin(&self) -> Option<Q> {
        self.certificates
            .iter()
            .flat_map(|c| c.splits.iter().map(|s| s.margin.clone()))
            .min()
    }
}

/// The tree of all `(K, eps)`-cs sequences over the alphabet `P`.
#[derive(Debug, Clone)]
pub struct CsTreeResult {
    /// Index tree over 1-based labels into `P`, with certificates.
    pub tree: CsTree,
    /// Order counting the empty root.
    pub order_with_root: usize,
    /// Whether the depth cap cut the enumeration short.
    pub truncated: bool,
}

/// Enumerates all cs-sequences over `P` (depth at most `|P|`, since a
/// repeated point is never separated). Every point must lie in `ball` when
/// one is given. A parent's functional is reused for a split whenever it
/// still separates; otherwise the split is decided by both LPs.
pub fn cs_tree(
    k: &Body,
    eps: &Q,
    pts: &[Vec<Q>],
    ball: Option<&SpaceNorm>,
    depth_cap: Option<usize>,
) -> Result<CsTreeResult, JamesError> {
    if !eps.is_positive() {
        return Err(JamesError::Parameter("eps must be positive".into()));
    }
    check_points(k, pts)?;
    if let Some(b) = ball {
        for (i, p) in pts.iter().enumerate() {
            if !b.contains(p) {
                return Err(JamesError::OutsideBall(i + 1));
            }
        }
    }
    let mut st = Enum {
        k,
        eps,
        pts,
        cap: depth_cap.unwrap_or(usize::MAX),
        nodes: Vec::new(),
        certs: Vec::new(),
        truncated: false,
    };
    let mut seq = Vec::new();
    st.grow(&mut seq, &[])?;
    let nodes = BTree::new(st.nodes.iter().map(|s| s.iter().map(|&i| Label::Int(i as i64 + 1)).collect()))
        .expect("prefix closed by construction");
    let points = (0..nodes.len())
        .map(|i| match nodes.node(i).last() {
            Some(Label::Int(n)) => pts[*n as usize - 1].clone(),
            _ => unreachable!(),
        })
        .collect();
    let certificates = st
        .certs
        .into_iter()
        .filter(|(node, _)| {
            let n: Node = node.iter().map(|&i| Label::Int(i as i64 + 1)).collect();
            nodes.index_of(&n).is_some_and(|id| nodes.is_maximal(id))
        })
        .map(|(node, splits)| NodeCertificate {
            node: node.iter().map(|&i| Label::Int(i as i64 + 1)).collect(),
            splits,
        })
        .collect();
    let tree = CsTree {
        nodes,
        points,
        certificates,
        eps: eps.clone(),
    };
    Ok(CsTreeResult {
        order_with_root: tree.order_with_root(),
        tree,
        truncated: st.truncated,
    })
}

struct Enum<'a> {
    k: &'a Body,
    eps: &'a Q,
    pts: &'a [Vec<Q>],
    cap: usize,
    nodes: Vec<Vec<usize>>,
    certs: Vec<(Vec<usize>, Vec<SplitCertificate>)>,
    truncated: bool,
}

impl Enum<'_> {
    fn grow(&mut self, seq: &mut Vec<usize>, splits: &[SplitCertificate]) -> Result<(), JamesError> {
        if seq.len() >= self.cap {
            if !self.truncated {
                for p in (0..self.pts.len()).filter(|p| !seq.contains(p)) {
                    let mut points: Vec<Vec<Q>> = seq.iter().map(|&i| self.pts[i].clone()).collect();
                    points.push(self.pts[p].clone());
                    if self.extend(&points, splits)?.is_some() {
                        self.truncated = true;
                        break;
                    }
                }
            }
            if !seq.is_empty() {
                self.certs.push((seq.clone(), splits.to_vec()));
            }
            return Ok(());
        }
        let mut any_child = false;
        for p in 0..self.pts.len() {
            if seq.contains(&p) {
                continue;
            }
            seq.push(p);
            let points: Vec<Vec<Q>> = seq.iter().map(|&i| self.pts[i].clone()).collect();
            if let Some(new_splits) = self.extend(&points, splits)? {
                any_child = true;
                self.nodes.push(seq.clone());
                self.grow(seq, &new_splits)?;
            }
            seq.pop();
        }
        if !any_child && !seq.is_empty() {
            self.certs.push((seq.clone(), splits.to_vec()));
        }
        Ok(())
    }

    /// Certificates for `points` (parent's splits plus the new last point),
    /// or `None` if some split fails.
    fn extend(
        &self,
        points: &[Vec<Q>],
        parent: &[SplitCertificate],
    ) -> Result<Option<Vec<SplitCertificate>>, JamesError> {
        let n = points.len();
        let mut out = Vec::with_capacity(n.saturating_sub(1));
        for m in 1..n {
            if let Some(old) = parent.get(m - 1) {
                let margin = split_margin(&old.functional, points, m);
                if margin >= *self.eps {
                    out.push(SplitCertificate {
                        m,
                        functional: old.functional.clone(),
                        weights: old.weights.clone(),
                        margin,
                    });
                    continue;
                }
            }
            let (pre, suf) = points.split_at(m);
            // cheap necessary condition: every pair must already be far apart
            let last = &points[n - 1];
            if pre
                .iter()
                .any(|x| self.k.support(&sub(x, last)).map(|d| d < *self.eps).unwrap_or(true))
            {
                return Ok(None);
            }
            let (ok, _, w) = decide_split(self.k, self.eps, pre, suf)?;
            if !ok {
                return Ok(None);
            }
            out.push(SplitCertificate::from_weights(self.k, m, w.unwrap(), points));
        }
        Ok(Some(out))
    }
}
