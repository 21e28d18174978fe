//! Symmetric rational polytopes and polyhedral unit balls.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize};

use super::lp::{Lp, LpOutcome, Relation};
use super::{add, dot, q, JamesError, Q};

/// `K = conv(vertices)`, closed under negation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Body {
    pub dim: usize,
    #[serde(with = "super::rat::mat")]
    pub vertices: Vec<Vec<Q>>,
}

#[derive(Deserialize)]
struct BodyRepr {
    dim: usize,
    #[serde(with = "super::rat::mat")]
    vertices: Vec<Vec<Q>>,
}

impl<'de> Deserialize<'de> for Body {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = BodyRepr::deserialize(d)?;
        Body::new(r.dim, r.vertices).map_err(serde::de::Error::custom)
    }
}

impl Body {
    /// Symmetrizes and deduplicates the vertex list (first occurrence
    /// order, each followed by its negation when new).
    pub fn new(dim: usize, vertices: Vec<Vec<Q>>) -> Result<Self, JamesError> {
        if vertices.is_empty() {
            return Err(JamesError::Empty("body vertices"));
        }
        let mut out: Vec<Vec<Q>> = Vec::new();
        for v in vertices {
            if v.len() != dim {
                return Err(JamesError::Dimension {
                    expected: dim,
                    got: v.len(),
                });
            }
            let neg: Vec<Q> = v.iter().map(|x| -x).collect();
            if !out.contains(&v) {
                out.push(v);
            }
            if !out.contains(&neg) {
                out.push(neg);
            }
        }
        Ok(Body { dim, vertices: out })
    }

    /// A vertex list taken verbatim (duplicates kept); it must already be
    /// symmetric as a set.
    pub fn raw(dim: usize, vertices: Vec<Vec<Q>>) -> Result<Self, JamesError> {
        if vertices.is_empty() {
            return Err(JamesError::Empty("body vertices"));
        }
        for v in &vertices {
            if v.len() != dim {
                return Err(JamesError::Dimension {
                    expected: dim,
                    got: v.len(),
                });
            }
            let neg: Vec<Q> = v.iter().map(|x| -x).collect();
            if !vertices.contains(&neg) {
                return Err(JamesError::Parameter("vertex list is not symmetric".into()));
            }
        }
        Ok(Body { dim, vertices })
    }

    /// `conv{±e_i}`.
    pub fn cross(dim: usize) -> Self {
        let vs = (0..dim)
            .map(|i| (0..dim).map(|j| q((i == j) as i64)).collect())
            .collect();
        Body::new(dim, vs).unwrap()
    }

    fn check_dim(&self, x: &[Q]) -> Result<(), JamesError> {
        if x.len() != self.dim {
            return Err(JamesError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `|x|_K = max_{v ∈ K} ⟨v, x⟩`, attained at a vertex.
    pub fn support(&self, x: &[Q]) -> Result<Q, JamesError> {
        self.check_dim(x)?;
        Ok(self
            .vertices
            .iter()
            .map(|v| dot(v, x))
            .max()
            .expect("nonempty body"))
    }

    /// The functional `Σ w_k v_k`.
    pub fn functional(&self, weights: &[Q]) -> Vec<Q> {
        let mut f = vec![q(0); self.dim];
        for (w, v) in weights.iter().zip(&self.vertices) {
            if !w.is_zero() {
                for (fi, vi) in f.iter_mut().zip(v) {
                    *fi += w * vi;
                }
            }
        }
        f
    }

    /// Exact membership `x ∈ conv(vertices)` by a feasibility LP.
    pub fn contains(&self, x: &[Q]) -> Result<bool, JamesError> {
        self.check_dim(x)?;
        let n = self.vertices.len();
        let mut lp = Lp::new(n, false);
        for i in 0..self.dim {
            lp.add(
                self.vertices.iter().map(|v| v[i].clone()).collect(),
                Relation::Eq,
                x[i].clone(),
            );
        }
        lp.add(vec![q(1); n], Relation::Eq, q(1));
        Ok(matches!(lp.solve(), LpOutcome::Optimal { .. }))
    }

    /// Whether every vertex of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &Body) -> Result<bool, JamesError> {
        for v in &self.vertices {
            if !other.contains(v)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All pairwise vertex sums, unpruned, with their provenance.
    pub fn minkowski(&self, other: &Body) -> Result<MinkowskiSum, JamesError> {
        if self.dim != other.dim {
            return Err(JamesError::Dimension {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut vertices = Vec::new();
        let mut pairs = Vec::new();
        for (i, a) in self.vertices.iter().enumerate() {
            for (j, b) in other.vertices.iter().enumerate() {
                vertices.push(add(a, b));
                pairs.push((i, j));
            }
        }
        Ok(MinkowskiSum {
            body: Body::raw(self.dim, vertices)?,
            pairs,
            first: self.clone(),
            second: other.clone(),
        })
    }

    pub fn max_abs_coordinate(&self) -> Q {
        self.vertices
            .iter()
            .flat_map(|v| v.iter().map(|x| x.abs()))
            .max()
            .unwrap_or_else(|| q(0))
    }
}

/// `K + L` with vertex `k` equal to `first[pairs[k].0] + second[pairs[k].1]`.
#[derive(Debug, Clone)]
pub struct MinkowskiSum {
    pub body: Body,
    pub pairs: Vec<(usize, usize)>,
    pub first: Body,
    pub second: Body,
}

impl MinkowskiSum {
    /// Splits convex weights over sum vertices into weights over the
    /// factors: `x* = y* + z*`.
    pub fn split(&self, weights: &[Q]) -> (Vec<Q>, Vec<Q>) {
        let mut a = vec![q(0); self.first.vertices.len()];
        let mut b = vec![q(0); self.second.vertices.len()];
        for (w, &(i, j)) in weights.iter().zip(&self.pairs) {
            a[i] += w;
            b[j] += w;
        }
        (a, b)
    }
}

/// `B_X = {x : |⟨f,x⟩| ≤ 1 for all f ∈ F}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceNorm {
    pub dim: usize,
    #[serde(with = "super::rat::mat")]
    pub functionals: Vec<Vec<Q>>,
}

impl SpaceNorm {
    pub fn new(dim: usize, functionals: Vec<Vec<Q>>) -> Result<Self, JamesError> {
        if functionals.is_empty() {
            return Err(JamesError::Empty("norm functionals"));
        }
        if let Some(f) = functionals.iter().find(|f| f.len() != dim) {
            return Err(JamesError::Dimension {
                expected: dim,
                got: f.len(),
            });
        }
        Ok(SpaceNorm { dim, functionals })
    }

    /// The l-infinity ball, dual to the l1 body `conv{±e_i}`.
    pub fn linf(dim: usize) -> Self {
        SpaceNorm::new(dim, Body::cross(dim).vertices).unwrap()
    }

    /// The l1 ball: functionals are all sign vectors.
    pub fn l1(dim: usize) -> Self {
        let fs = (0..1u32 << dim)
            .map(|m| {
                (0..dim)
                    .map(|i| if m >> i & 1 == 1 { q(-1) } else { q(1) })
                    .collect()
            })
            .collect();
        SpaceNorm::new(dim, fs).unwrap()
    }

    pub fn norm(&self, x: &[Q]) -> Q {
        self.functionals
            .iter()
            .map(|f| dot(f, x).abs())
            .max()
            .expect("nonempty")
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        x.len() == self.dim && self.norm(x) <= q(1)
    }

    /// The dual unit ball `conv(±F)`.
    pub fn dual_ball(&self) -> Body {
        Body::new(self.dim, self.functionals.clone()).unwrap()
    }

    /// Whether `F` spans the dual (so that `B_X` is bounded).
    pub fn is_bounded(&self) -> bool {
        rank(&self.functionals) == self.dim
    }
}

/// Exact rank by Gaussian elimination.
pub fn rank(rows: &[Vec<Q>]) -> usize {
    let mut m: Vec<Vec<Q>> = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][c].clone();
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = &m[i][c] / &pivot;
                for j in c..cols {
                    let d = &f * &m[r][j];
                    m[i][j] -= d;
                }
            }
        }
        r += 1;
    }
    r
}
