//! Bit-level primitives: packed bits, rank/select bitvectors and
//! balanced-parentheses navigation.

mod bits;
mod bitvector;
mod bp;
mod sparse;

pub use bits::{bits_for, BitBuf};
pub use bitvector::{Bitvector, RankSelect};
pub use bp::{BalancedParens, BpOp};
pub use sparse::SparseBitvector;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SuccinctError {
    #[error("index {index} out of bounds for length {len}")]
    OutOfBounds { index: usize, len: usize },
    #[error("rank {rank} not present (only {available} matching bits)")]
    NoSuchRank { rank: usize, available: usize },
    #[error("parentheses unbalanced at position {position}")]
    Unbalanced { position: usize },
    #[error("position {position} is not an open parenthesis")]
    NotAnOpen { position: usize },
}
