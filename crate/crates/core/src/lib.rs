//! Compact dynamic Euler-tour trees.
//!
//! A planar-embedded forest on `n` vertices is stored as clusters of
//! succinct micro-trees (balanced parentheses plus a ports bitvector) glued
//! together by macro-trees over the inter-cluster edges. Tour navigation,
//! distance and subtree-size queries and link/cut updates work on
//! label-free edge handles.

pub mod succinct;
pub mod oracle;
pub mod macro_tree;
pub mod clustering;
pub mod micro_tree;
pub mod forest;
pub mod workload;
