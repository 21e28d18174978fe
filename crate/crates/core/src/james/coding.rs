//! The coding tree of an operator: `{∅} ∪ {(k)} ∪ {k⌢(n_i) : (d_{n_i})
//! is (A*B_{Y*}, 1/k)-cs}` over a finite selector list `d`.

use serde::Serialize;

use super::body::SpaceNorm;
use super::cs::cs_tree;
use super::operator::{operator_body, Matrix};
use super::{q, JamesError, Q};
use crate::tree::{BTree, Label};

#[derive(Debug, Clone, Serialize)]
pub struct CodingTree {
    /// Nodes `(k)` and `(k, n_1, ..., n_p)`; the empty root is implicit.
    pub tree: BTree,
    /// Order of the coding tree including its root.
    pub order_with_root: usize,
    /// `order_with_root` of the cs-tree at threshold `1/k`, for `k = 1..kmax`.
    pub cs_orders: Vec<usize>,
    /// 1-based selector indices dropped because they lie outside `B_X`.
    pub excluded: Vec<usize>,
    /// Whether the depth cap cut some branch short.
    pub truncated: bool,
}

impl CodingTree {
    /// The finite analogue of `o(f) = J + 1`.
    pub fn identity_holds(&self) -> bool {
        self.order_with_root == 1 + self.cs_orders.iter().copied().max().unwrap_or(0)
    }
}

pub fn coding_tree(
    a: &Matrix,
    x_norm: &SpaceNorm,
    y_norm: &SpaceNorm,
    selectors: &[Vec<Q>],
    kmax: usize,
    depth_cap: Option<usize>,
) -> Result<CodingTree, JamesError> {
    if kmax == 0 {
        return Err(JamesError::Parameter("kmax must be positive".into()));
    }
    if x_norm.dim != a.cols() || y_norm.dim != a.rows() {
        return Err(JamesError::Dimension {
            expected: a.cols(),
            got: x_norm.dim,
        });
    }
    let k_body = operator_body(a, &y_norm.dual_ball())?;
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (i, p) in selectors.iter().enumerate() {
        if p.len() != a.cols() {
            return Err(JamesError::Dimension {
                expected: a.cols(),
                got: p.len(),
            });
        }
        if x_norm.contains(p) {
            kept.push(i);
        } else {
            excluded.push(i + 1);
        }
    }
    let pts: Vec<Vec<Q>> = kept.iter().map(|&i| selectors[i].clone()).collect();
    let mut nodes = Vec::new();
    let mut cs_orders = Vec::new();
    let mut truncated = false;
    for k in 1..=kmax {
        let head = Label::Int(k as i64);
        nodes.push(vec![head.clone()]);
        let eps = q(1) / q(k as i64);
        let r = cs_tree(&k_body, &eps, &pts, None, depth_cap)?;
        truncated |= r.truncated;
        cs_orders.push(r.order_with_root);
        for node in r.tree.nodes.nodes() {
            let mut full = vec![head.clone()];
            full.extend(node.iter().map(|l| match l {
                Label::Int(j) => Label::Int(kept[*j as usize - 1] as i64 + 1),
                _ => unreachable!(),
            }));
            nodes.push(full);
        }
    }
    let tree = BTree::new(nodes).expect("prefix closed by construction");
    Ok(CodingTree {
        order_with_root: tree.order_with_root(),
        tree,
        cs_orders,
        excluded,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_on_the_line() {
        let n = SpaceNorm::linf(1);
        let sel = vec![vec![q(1)], vec![q(-1)]];
        let c = coding_tree(&Matrix::identity(1), &n, &n, &sel, 1, None).unwrap();
        let want = BTree::from_ints(&[&[1], &[1, 1], &[1, 2], &[1, 1, 2], &[1, 2, 1]]).unwrap();
        assert_eq!(c.tree, want);
        assert_eq!(c.cs_orders, vec![3]);
        assert!(c.identity_holds());
    }

    #[test]
    fn zero_operator_keeps_singletons() {
        let n = SpaceNorm::linf(1);
        let sel = vec![vec![q(1)], vec![q(-1)], vec![q(2)]];
        let c = coding_tree(&Matrix::zero(1, 1), &n, &n, &sel, 2, None).unwrap();
        assert_eq!(c.excluded, vec![3]);
        assert_eq!(c.tree.len(), 2 + 2 * 2);
        assert_eq!(c.order_with_root, 3);
        assert!(c.identity_holds());
    }
}
