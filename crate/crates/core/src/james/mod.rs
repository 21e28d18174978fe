//! Exact-rational convex separation: polyhedral bodies, cs-sequences and
//! their trees, operator bodies, lower-l1 trees, James tree norms, the
//! coding tree, and summand extraction.

pub mod body;
pub mod coding;
pub mod cs;
pub mod extract;
pub mod jt;
pub mod l1;
pub mod lp;
pub mod operator;
pub mod rat;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

pub use body::{Body, MinkowskiSum, SpaceNorm};
pub use coding::{coding_tree, CodingTree};
pub use extract::{extract_summand, Extraction, ExtractionConfig, Side};
pub use cs::{cs_tree, hull_distance, is_cs, separation_margin, CsCertificate, CsCheck, CsTree, SplitCertificate};
pub use jt::{jt_norm_squared, jt_witness};
pub use l1::{l1_tree, lower_l1_holds, np1_inclusion_check};
pub use operator::{ideal_checks, operator_body, operator_norm, IdealInstance, IdealReport, Matrix};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).map(|(x, y)| x * y).fold(q(0), |acc, v| acc + v)
}

pub fn sub(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(c: &Q, a: &[Q]) -> Vec<Q> {
    a.iter().map(|x| c * x).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JamesError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("point {0} lies outside the unit ball")]
    OutsideBall(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("cap exceeded: {0}")]
    Cap(String),
    #[error("pipeline insufficient at stage {stage}: {detail}")]
    Insufficient { stage: String, detail: String },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("certificate splitting failed: {0}")]
    Split(String),
}
