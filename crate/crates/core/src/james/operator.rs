//! Operators between polyhedral spaces: operator bodies, exact operator
//! norms, and the ideal-property checks on cs-trees.

use std::collections::HashMap;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use super::body::{Body, SpaceNorm};
use super::cs::{cs_tree, is_cs};
use super::lp::{Lp, LpOutcome, Relation};
use super::{dot, q, JamesError, Q};
use crate::tree::{show_node, BTree, Label};

/// Row-major matrix of a map `R^cols → R^rows`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matrix(#[serde(with = "super::rat::mat")] pub Vec<Vec<Q>>);

impl Matrix {
    pub fn new(rows: Vec<Vec<Q>>) -> Result<Self, JamesError> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.is_empty() || cols == 0 {
            return Err(JamesError::Empty("matrix"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(JamesError::Dimension {
                expected: cols,
                got: r.len(),
            });
        }
        Ok(Matrix(rows))
    }

    pub fn identity(n: usize) -> Self {
        Matrix((0..n).map(|i| (0..n).map(|j| q((i == j) as i64)).collect()).collect())
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Matrix(vec![vec![q(0); cols]; rows])
    }

    pub fn rows(&self) -> usize {
        self.0.len()
    }

    pub fn cols(&self) -> usize {
        self.0[0].len()
    }

    pub fn apply(&self, x: &[Q]) -> Vec<Q> {
        self.0.iter().map(|r| dot(r, x)).collect()
    }

    pub fn apply_transpose(&self, y: &[Q]) -> Vec<Q> {
        (0..self.cols())
            .map(|j| self.0.iter().zip(y).map(|(r, yi)| &r[j] * yi).fold(q(0), |a, b| a + b))
            .collect()
    }

    /// `self · other`.
    pub fn compose(&self, other: &Matrix) -> Result<Matrix, JamesError> {
        if self.cols() != other.rows() {
            return Err(JamesError::Dimension {
                expected: self.cols(),
                got: other.rows(),
            });
        }
        Ok(Matrix(
            self.0
                .iter()
                .map(|r| {
                    (0..other.cols())
                        .map(|j| r.iter().zip(&other.0).map(|(a, row)| a * &row[j]).fold(q(0), |s, v| s + v))
                        .collect()
                })
                .collect(),
        ))
    }

    pub fn minus(&self, other: &Matrix) -> Matrix {
        Matrix(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
        )
    }
}

/// `A* K` for a body `K` in the dual of the target: vertices `Aᵀ g`,
/// symmetrized.
pub fn operator_body(a: &Matrix, dual_ball: &Body) -> Result<Body, JamesError> {
    if dual_ball.dim != a.rows() {
        return Err(JamesError::Dimension {
            expected: a.rows(),
            got: dual_ball.dim,
        });
    }
    Body::new(
        a.cols(),
        dual_ball.vertices.iter().map(|g| a.apply_transpose(g)).collect(),
    )
}

/// `‖A‖_{X→Y} = max_{g ∈ F_Y} max_{x ∈ B_X} ⟨Aᵀg, x⟩`, one LP per
/// functional of `Y`.
pub fn operator_norm(a: &Matrix, x: &SpaceNorm, y: &SpaceNorm) -> Result<Q, JamesError> {
    if x.dim != a.cols() || y.dim != a.rows() {
        return Err(JamesError::Dimension {
            expected: a.cols(),
            got: x.dim,
        });
    }
    if !x.is_bounded() {
        return Err(JamesError::Parameter("domain ball is unbounded".into()));
    }
    let mut best = q(0);
    for g in &y.functionals {
        for sign in [1, -1] {
            let c: Vec<Q> = a.apply_transpose(g).into_iter().map(|v| v * q(sign)).collect();
            let v = max_over_ball(&c, x);
            if v > best {
                best = v;
            }
        }
    }
    Ok(best)
}

fn max_over_ball(c: &[Q], x: &SpaceNorm) -> Q {
    let mut lp = Lp::new(x.dim, true);
    for j in 0..x.dim {
        lp.set_free(j);
    }
    lp.objective = c.to_vec();
    for f in &x.functionals {
        lp.add(f.clone(), Relation::Le, q(1));
        lp.add(f.clone(), Relation::Ge, q(-1));
    }
    match lp.solve() {
        LpOutcome::Optimal { value, .. } => value,
        other => unreachable!("bounded ball gives a bounded LP: {other:?}"),
    }
}

/// Outcome of the ideal-property checks.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IdealReport {
    /// `J(AB, eps)` nodes whose `B`-image was checked in `J(A, eps)`.
    pub composition_nodes: usize,
    /// `J(CA, eps)` nodes checked in `J(A, eps)` (left composition).
    pub left_composition_nodes: usize,
    /// `J(A, eps)` nodes checked in `J(B', eps − 2δ₁)`.
    pub perturbation_nodes: usize,
    #[serde(with = "super::rat::opt")]
    pub perturbation_distance: Option<Q>,
    #[serde(with = "super::rat::opt")]
    pub delta2: Option<Q>,
    pub violations: Vec<String>,
}

impl IdealReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Spaces and maps for [`ideal_checks`]: `B: W → X`, `A, A': X → Y`,
/// `C: Y → Z` with polyhedral norms on each space.
#[derive(Debug, Clone)]
pub struct IdealInstance {
    pub a: Matrix,
    pub b: Matrix,
    pub a_perturbed: Matrix,
    pub c: Matrix,
    pub w_norm: SpaceNorm,
    pub x_norm: SpaceNorm,
    pub y_norm: SpaceNorm,
    pub z_norm: SpaceNorm,
    /// Candidate points in `B_W` for the composition check.
    pub w_points: Vec<Vec<Q>>,
    /// Candidate points in `B_X`.
    pub x_points: Vec<Vec<Q>>,
}

/// Checks, over finite candidate sets:
/// - composition: each node of `J(AB, eps)` over `P_W` maps under `B` to a
///   node of `J(A, eps)` over `B(P_W)` (requires `‖B‖ ≤ 1`);
/// - left composition: `J(CA, eps) ⊆ J(A, eps)` over `P_X` (requires
///   `‖C‖ ≤ 1`, so that `(CA)* B_{Z*} ⊂ A* B_{Y*}`);
/// - perturbation: with `‖A − A'‖ < δ₁`, `J(A, eps) ⊆ J(A', eps − 2δ₁)`.
pub fn ideal_checks(inst: &IdealInstance, eps: &Q, delta1: &Q) -> Result<IdealReport, JamesError> {
    let mut rep = IdealReport::default();
    let y_dual = inst.y_norm.dual_ball();
    let ka = operator_body(&inst.a, &y_dual)?;

    // composition on the right
    let nb = operator_norm(&inst.b, &inst.w_norm, &inst.x_norm)?;
    if nb > q(1) {
        return Err(JamesError::Parameter("composition check needs ‖B‖ ≤ 1".into()));
    }
    let ab = inst.a.compose(&inst.b)?;
    let kab = operator_body(&ab, &y_dual)?;
    let jab = cs_tree(&kab, eps, &inst.w_points, Some(&inst.w_norm), None)?;
    let images: Vec<Vec<Q>> = inst.w_points.iter().map(|w| inst.b.apply(w)).collect();
    for (i, img) in images.iter().enumerate() {
        if !inst.x_norm.contains(img) {
            rep.violations
                .push(format!("composition: B maps point {} outside B_X", i + 1));
        }
    }
    for id in 0..jab.tree.nodes.len() {
        rep.composition_nodes += 1;
        let seq: Vec<Vec<Q>> = indices(jab.tree.nodes.node(id))
            .into_iter()
            .map(|i| images[i].clone())
            .collect();
        if !is_cs(&ka, eps, &seq)?.holds {
            rep.violations.push(format!(
                "composition: image of {} is not cs for A",
                show_node(jab.tree.nodes.node(id))
            ));
        }
    }

    // composition on the left: body inclusion gives tree inclusion
    let nc = operator_norm(&inst.c, &inst.y_norm, &inst.z_norm)?;
    if nc > q(1) {
        return Err(JamesError::Parameter("left composition check needs ‖C‖ ≤ 1".into()));
    }
    let ca = inst.c.compose(&inst.a)?;
    let kca = operator_body(&ca, &inst.z_norm.dual_ball())?;
    if !kca.is_subset_of(&ka)? {
        rep.violations
            .push("left composition: (CA)*B is not inside A*B".into());
    }
    let jca = cs_tree(&kca, eps, &inst.x_points, Some(&inst.x_norm), None)?;
    let ja = cs_tree(&ka, eps, &inst.x_points, Some(&inst.x_norm), None)?;
    rep.left_composition_nodes = jca.tree.nodes.len();
    rep.violations.extend(missing_nodes(&jca.tree.nodes, &ja.tree.nodes, "left composition"));

    // perturbation
    let diff = inst.a.minus(&inst.a_perturbed);
    let dist = operator_norm(&diff, &inst.x_norm, &inst.y_norm)?;
    if dist >= *delta1 {
        return Err(JamesError::Parameter(format!(
            "‖A − A'‖ = {} is not below delta1",
            super::rat::to_string(&dist)
        )));
    }
    let delta2 = eps - q(2) * delta1;
    if !delta2.is_positive() {
        return Err(JamesError::Parameter("eps − 2·delta1 must be positive".into()));
    }
    let kp = operator_body(&inst.a_perturbed, &y_dual)?;
    let jp = cs_tree(&kp, &delta2, &inst.x_points, Some(&inst.x_norm), None)?;
    rep.perturbation_nodes = ja.tree.nodes.len();
    rep.violations.extend(missing_nodes(&ja.tree.nodes, &jp.tree.nodes, "perturbation"));
    rep.perturbation_distance = Some(dist);
    rep.delta2 = Some(delta2);
    Ok(rep)
}

fn indices(node: &[Label]) -> Vec<usize> {
    node.iter()
        .map(|l| match l {
            Label::Int(n) => *n as usize - 1,
            _ => unreachable!("cs-tree labels are indices"),
        })
        .collect()
}

fn missing_nodes(small: &BTree, big: &BTree, what: &str) -> Vec<String> {
    let have: HashMap<&[Label], ()> = big.nodes().iter().map(|n| (n.as_slice(), ())).collect();
    small
        .nodes()
        .iter()
        .filter(|n| !have.contains_key(n.as_slice()))
        .map(|n| format!("{what}: {} missing from the larger tree", show_node(n)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::james::qf;

    #[test]
    fn operator_body_examples() {
        let k = Body::cross(2);
        assert_eq!(operator_body(&Matrix::identity(2), &k).unwrap(), k);
        let a = Matrix(vec![vec![q(1), q(0)], vec![q(0), qf(1, 2)]]);
        let kb = operator_body(&a, &k).unwrap();
        let want = Body::new(2, vec![vec![q(1), q(0)], vec![q(0), qf(1, 2)]]).unwrap();
        assert_eq!(kb, want);
        let z = operator_body(&Matrix::zero(2, 2), &k).unwrap();
        assert_eq!(z.vertices, vec![vec![q(0), q(0)]]);
        let r = is_cs(&z, &qf(1, 100), &[vec![q(1), q(0)], vec![q(0), q(1)]]).unwrap();
        assert!(!r.holds);
    }

    #[test]
    fn operator_norm_examples() {
        let a = Matrix(vec![vec![q(1), q(0)], vec![q(0), qf(1, 2)]]);
        let linf = SpaceNorm::linf(2);
        assert_eq!(operator_norm(&a, &linf, &linf).unwrap(), q(1));
        let b = Matrix(vec![vec![q(1), q(1)], vec![q(0), q(0)]]);
        assert_eq!(operator_norm(&b, &linf, &linf).unwrap(), q(2));
        assert_eq!(operator_norm(&b, &SpaceNorm::l1(2), &linf).unwrap(), q(1));
    }

    #[test]
    fn ideal_checks_trivial_cases() {
        let linf = SpaceNorm::linf(2);
        let a = Matrix(vec![vec![q(1), qf(1, 3)], vec![q(0), qf(1, 2)]]);
        let pts = vec![
            vec![q(1), q(0)],
            vec![q(-1), q(0)],
            vec![q(0), q(1)],
            vec![qf(1, 2), q(-1)],
        ];
        let inst = IdealInstance {
            a: a.clone(),
            b: Matrix::identity(2),
            a_perturbed: a.clone(),
            c: Matrix::identity(2),
            w_norm: linf.clone(),
            x_norm: linf.clone(),
            y_norm: linf.clone(),
            z_norm: linf.clone(),
            w_points: pts.clone(),
            x_points: pts,
        };
        let rep = ideal_checks(&inst, &qf(1, 2), &qf(1, 8)).unwrap();
        assert!(rep.ok(), "{:?}", rep.violations);
        assert_eq!(rep.composition_nodes, rep.perturbation_nodes);
    }
}
