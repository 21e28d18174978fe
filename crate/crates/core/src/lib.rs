//! Exact ordinal arithmetic, finite well-founded tree combinatorics,
//! Ramsey-type homogenization on trees, and exact convex-separation indices
//! of polyhedral operators.

pub mod james;
pub mod ordinal;
pub mod ramsey;
pub mod tree;

pub use ordinal::{Kind, Ordinal, OrdinalError};
pub use tree::{
    extend, find_monotone_map, find_monotone_map_into, t_xi_truncate, BTree, Cutoffs, ExtendedMonotoneMap, Label,
    MonotoneMap, Node, Product, SymbolicTree, TreeError,
};
