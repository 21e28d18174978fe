//! Trees of sequences with a lower l1 estimate, and their inclusion in
//! cs-trees.

use serde::Serialize;

use super::body::SpaceNorm;
use super::cs::is_cs;
use super::lp::{Lp, LpOutcome, Relation};
use super::operator::{operator_body, Matrix};
use super::{dot, q, JamesError, Q};
use crate::tree::{show_node, BTree, Label};

/// Whether `‖Σ a_i y_i‖ ≥ c⁻¹ Σ |a_i|` for all scalars. By homogeneity
/// it suffices to minimize the norm over each facet of the l1 sphere; a
/// sign pattern and its negation give the same facet value.
pub fn lower_l1_holds(ys: &[Vec<Q>], c: &Q, y_norm: &SpaceNorm) -> bool {
    let n = ys.len();
    if n == 0 {
        return true;
    }
    let threshold = c.recip();
    for mask in 0..1u64 << (n - 1) {
        let signs: Vec<Q> = (0..n)
            .map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { q(-1) } else { q(1) })
            .collect();
        if facet_min(ys, &signs, y_norm) < threshold {
            return false;
        }
    }
    true
}

/// `min ‖Σ σ_i b_i y_i‖` over `b ≥ 0`, `Σ b_i = 1`.
fn facet_min(ys: &[Vec<Q>], signs: &[Q], y_norm: &SpaceNorm) -> Q {
    let n = ys.len();
    // variables: b (n), r
    let mut lp = Lp::new(n + 1, false);
    lp.objective[n] = q(1);
    let mut row = vec![q(1); n + 1];
    row[n] = q(0);
    lp.add(row, Relation::Eq, q(1));
    for f in &y_norm.functionals {
        let coef: Vec<Q> = ys.iter().zip(signs).map(|(y, s)| s * dot(f, y)).collect();
        let mut up = coef.clone();
        up.push(q(-1));
        lp.add(up, Relation::Le, q(0));
        let mut lo = coef;
        lo.push(q(1));
        lp.add(lo, Relation::Ge, q(0));
    }
    match lp.solve() {
        LpOutcome::Optimal { value, .. } => value,
        other => unreachable!("facet LP is feasible and bounded: {other:?}"),
    }
}

/// The tree of sequences over `P` (1-based labels) whose images under `A`
/// satisfy the lower l1 estimate with constant `c ≥ 1`.
pub fn l1_tree(a: &Matrix, c: &Q, pts: &[Vec<Q>], y_norm: &SpaceNorm) -> Result<BTree, JamesError> {
    if *c < q(1) {
        return Err(JamesError::Parameter("the l1 constant must be at least 1".into()));
    }
    if y_norm.dim != a.rows() {
        return Err(JamesError::Dimension {
            expected: a.rows(),
            got: y_norm.dim,
        });
    }
    if let Some(p) = pts.iter().find(|p| p.len() != a.cols()) {
        return Err(JamesError::Dimension {
            expected: a.cols(),
            got: p.len(),
        });
    }
    let images: Vec<Vec<Q>> = pts.iter().map(|p| a.apply(p)).collect();
    let mut nodes = Vec::new();
    let mut seq = Vec::new();
    grow(&images, c, y_norm, &mut seq, &mut nodes);
    Ok(BTree::new(nodes).expect("prefix closed by construction"))
}

fn grow(images: &[Vec<Q>], c: &Q, y_norm: &SpaceNorm, seq: &mut Vec<usize>, nodes: &mut Vec<Vec<Label>>) {
    for p in 0..images.len() {
        if seq.contains(&p) {
            continue;
        }
        seq.push(p);
        let ys: Vec<Vec<Q>> = seq.iter().map(|&i| images[i].clone()).collect();
        if lower_l1_holds(&ys, c, y_norm) {
            nodes.push(seq.iter().map(|&i| Label::Int(i as i64 + 1)).collect());
            grow(images, c, y_norm, seq, nodes);
        }
        seq.pop();
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionReport {
    pub nodes_checked: usize,
    pub violations: Vec<String>,
}

/// Checks every node of `T₁(A, c)` is `(A* B_{Y*}, c⁻¹)`-cs.
pub fn np1_inclusion_check(
    a: &Matrix,
    c: &Q,
    pts: &[Vec<Q>],
    y_norm: &SpaceNorm,
) -> Result<InclusionReport, JamesError> {
    let t1 = l1_tree(a, c, pts, y_norm)?;
    let k = operator_body(a, &y_norm.dual_ball())?;
    let eps = c.recip();
    let mut rep = InclusionReport {
        nodes_checked: 0,
        violations: Vec::new(),
    };
    for node in t1.nodes() {
        rep.nodes_checked += 1;
        let seq: Vec<Vec<Q>> = node
            .iter()
            .map(|l| match l {
                Label::Int(n) => pts[*n as usize - 1].clone(),
                _ => unreachable!(),
            })
            .collect();
        if !is_cs(&k, &eps, &seq)?.holds {
            rep.violations.push(format!("{} is not cs", show_node(node)));
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[i64]) -> Vec<Q> {
        xs.iter().map(|&x| q(x)).collect()
    }

    #[test]
    fn identity_on_l1() {
        let l1 = SpaceNorm::l1(2);
        assert!(lower_l1_holds(&[v(&[1, 0]), v(&[0, 1])], &q(1), &l1));
        assert!(!lower_l1_holds(&[v(&[1, 0]), v(&[1, 0])], &q(1), &l1));
        let t = l1_tree(&Matrix::identity(2), &q(1), &[v(&[1, 0]), v(&[0, 1])], &l1).unwrap();
        assert_eq!(t.order(), 2);
    }

    #[test]
    fn linf_needs_larger_constant() {
        // (1,1) and (1,-1) in l-infinity: ‖a(1,1) + b(1,-1)‖ = |a|+|b|
        let linf = SpaceNorm::linf(2);
        assert!(lower_l1_holds(&[v(&[1, 1]), v(&[1, -1])], &q(1), &linf));
        // e1, e2 in l-infinity: ‖(a,b)‖ = max ≥ (|a|+|b|)/2
        assert!(!lower_l1_holds(&[v(&[1, 0]), v(&[0, 1])], &q(1), &linf));
        assert!(lower_l1_holds(&[v(&[1, 0]), v(&[0, 1])], &q(2), &linf));
    }

    #[test]
    fn inclusion_small() {
        let l1 = SpaceNorm::l1(2);
        let pts = vec![v(&[1, 0]), v(&[0, 1]), v(&[-1, 0])];
        let rep = np1_inclusion_check(&Matrix::identity(2), &q(2), &pts, &l1).unwrap();
        assert!(rep.violations.is_empty());
        assert!(rep.nodes_checked >= 3);
    }
}
