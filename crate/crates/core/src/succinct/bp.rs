//! Balanced-parentheses encoding of ordinal trees (1 = open, 0 = close).
//!
//! Navigation scans for excess targets, skipping whole bytes through
//! lookup tables. Sequences here are cluster-sized, so the scans stay within
//! a polylogarithmic number of bytes.

use super::bits::BitBuf;
use super::SuccinctError;

const fn forward_tables() -> ([i8; 256], [i8; 256]) {
    let mut min = [0i8; 256];
    let mut delta = [0i8; 256];
    let mut b = 0;
    while b < 256 {
        let mut e: i8 = 0;
        let mut m: i8 = i8::MAX;
        let mut i = 0;
        while i < 8 {
            e += if (b >> i) & 1 == 1 { 1 } else { -1 };
            if e < m {
                m = e;
            }
            i += 1;
        }
        min[b] = m;
        delta[b] = e;
        b += 1;
    }
    (min, delta)
}

const fn backward_min_table() -> [i8; 256] {
    let mut min = [0i8; 256];
    let mut b = 0;
    while b < 256 {
        let mut e: i8 = 0;
        let mut m: i8 = i8::MAX;
        let mut i: i32 = 7;
        while i >= 0 {
            e += if (b >> i) & 1 == 1 { -1 } else { 1 };
            if e < m {
                m = e;
            }
            i -= 1;
        }
        min[b] = m;
        b += 1;
    }
    min
}

const FWD: ([i8; 256], [i8; 256]) = forward_tables();
const BWD_MIN: [i8; 256] = backward_min_table();

/// Navigation queries accepted by [`BalancedParens::navigate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BpOp {
    Parent,
    FirstChild,
    NextSibling,
    Match,
    SubtreeSize,
}

#[derive(Clone, PartialEq, Eq)]
pub struct BalancedParens {
    bits: BitBuf,
}

impl std::fmt::Debug for BalancedParens {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: String = self.bits.iter().map(|b| if b { '(' } else { ')' }).collect();
        write!(f, "BalancedParens({s})")
    }
}

impl BalancedParens {
    /// Validates balance and wraps the bits.
    pub fn new(bits: BitBuf) -> Result<Self, SuccinctError> {
        let mut excess: i64 = 0;
        for (i, b) in bits.iter().enumerate() {
            excess += if b { 1 } else { -1 };
            if excess < 0 {
                return Err(SuccinctError::Unbalanced { position: i });
            }
        }
        if excess != 0 {
            return Err(SuccinctError::Unbalanced { position: bits.len() });
        }
        Ok(Self { bits })
    }

    pub(crate) fn new_unchecked(bits: BitBuf) -> Self {
        debug_assert!(Self::new(bits.clone()).is_ok());
        Self { bits }
    }

    pub fn parse(s: &str) -> Result<Self, SuccinctError> {
        Self::new(BitBuf::from_str_bits(s))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.bits.len() / 2
    }

    pub fn bits(&self) -> &BitBuf {
        &self.bits
    }

    #[inline]
    pub fn is_open(&self, i: usize) -> bool {
        self.bits.get(i)
    }

    /// Preorder index of the node whose open parenthesis is at `i`.
    pub fn preorder(&self, i: usize) -> usize {
        debug_assert!(self.is_open(i));
        self.bits.count_ones_before(i)
    }

    /// Open parenthesis of the node with preorder index `pre`.
    pub fn open_of(&self, pre: usize) -> usize {
        self.bits.select1_scan(pre + 1).expect("preorder index in range")
    }

    /// First position `p >= from` where the running excess, starting at
    /// `excess` and adding +1/-1 per open/close, reaches zero.
    fn forward_search(&self, from: usize, mut excess: i32) -> Option<usize> {
        let len = self.bits.len();
        let mut p = from;
        while p < len && !p.is_multiple_of(8) {
            excess += if self.bits.get(p) { 1 } else { -1 };
            if excess == 0 {
                return Some(p);
            }
            p += 1;
        }
        while p + 8 <= len {
            let byte = self.bits.byte(p / 8) as usize;
            if excess + (FWD.0[byte] as i32) > 0 {
                excess += FWD.1[byte] as i32;
                p += 8;
                continue;
            }
            for q in p..p + 8 {
                excess += if self.bits.get(q) { 1 } else { -1 };
                if excess == 0 {
                    return Some(q);
                }
            }
            unreachable!("byte table promised a zero crossing");
        }
        while p < len {
            excess += if self.bits.get(p) { 1 } else { -1 };
            if excess == 0 {
                return Some(p);
            }
            p += 1;
        }
        None
    }

    /// Last position `p < before` where the running excess, scanning leftwards
    /// and adding +1/-1 per close/open, reaches zero.
    fn backward_search(&self, before: usize, mut excess: i32) -> Option<usize> {
        let mut p = before;
        while p > 0 && !p.is_multiple_of(8) {
            p -= 1;
            excess += if self.bits.get(p) { -1 } else { 1 };
            if excess == 0 {
                return Some(p);
            }
        }
        while p >= 8 {
            let byte = self.bits.byte(p / 8 - 1) as usize;
            if excess + (BWD_MIN[byte] as i32) > 0 {
                excess -= FWD.1[byte] as i32;
                p -= 8;
                continue;
            }
            for q in (p - 8..p).rev() {
                excess += if self.bits.get(q) { -1 } else { 1 };
                if excess == 0 {
                    return Some(q);
                }
            }
            unreachable!("byte table promised a zero crossing");
        }
        None
    }

    /// Position of the parenthesis matching `i`.
    pub fn find_match(&self, i: usize) -> usize {
        if self.is_open(i) {
            self.forward_search(i + 1, 1).expect("balanced sequence")
        } else {
            self.backward_search(i, 1).expect("balanced sequence")
        }
    }

    /// Open parenthesis of the parent of the node opened at `i`; `None` for a root.
    pub fn enclose(&self, i: usize) -> Option<usize> {
        debug_assert!(self.is_open(i));
        self.backward_search(i, 1)
    }

    pub fn first_child(&self, i: usize) -> Option<usize> {
        debug_assert!(self.is_open(i));
        (i + 1 < self.len() && self.is_open(i + 1)).then_some(i + 1)
    }

    pub fn next_sibling(&self, i: usize) -> Option<usize> {
        let c = self.find_match(i) + 1;
        (c < self.len() && self.is_open(c)).then_some(c)
    }

    pub fn subtree_size(&self, i: usize) -> usize {
        (self.find_match(i) - i).div_ceil(2)
    }

    /// Open parenthesis of the innermost node containing position `i`
    /// (the node itself for an open, the parent for a close).
    pub fn enclosing_node(&self, i: usize) -> Option<usize> {
        if self.is_open(i) {
            Some(i)
        } else {
            self.enclose(self.find_match(i))
        }
    }

    /// Uniform entry point; `i` must be an open parenthesis except for `Match`.
    /// Returns `None` when the relative does not exist.
    pub fn navigate(&self, op: BpOp, i: usize) -> Result<Option<usize>, SuccinctError> {
        if i >= self.len() {
            return Err(SuccinctError::OutOfBounds { index: i, len: self.len() });
        }
        if op != BpOp::Match && !self.is_open(i) {
            return Err(SuccinctError::NotAnOpen { position: i });
        }
        Ok(match op {
            BpOp::Parent => self.enclose(i),
            BpOp::FirstChild => self.first_child(i),
            BpOp::NextSibling => self.next_sibling(i),
            BpOp::Match => Some(self.find_match(i)),
            BpOp::SubtreeSize => Some(self.subtree_size(i)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let p = BalancedParens::parse("(())").unwrap();
        assert_eq!(p.navigate(BpOp::Match, 0).unwrap(), Some(3));
        assert_eq!(p.navigate(BpOp::Match, 2).unwrap(), Some(1));
        let q = BalancedParens::parse("(()())").unwrap();
        assert_eq!(q.navigate(BpOp::SubtreeSize, 0).unwrap(), Some(3));
        assert_eq!(q.navigate(BpOp::Parent, 0).unwrap(), None);
        assert_eq!(q.navigate(BpOp::Parent, 3).unwrap(), Some(0));
        assert_eq!(q.navigate(BpOp::FirstChild, 0).unwrap(), Some(1));
        assert_eq!(q.navigate(BpOp::NextSibling, 1).unwrap(), Some(3));
        assert_eq!(q.navigate(BpOp::NextSibling, 3).unwrap(), None);
        assert_eq!(q.navigate(BpOp::FirstChild, 1).unwrap(), None);
        assert_eq!(q.enclosing_node(2), Some(0));
    }

    #[test]
    fn rejects_unbalanced() {
        assert!(BalancedParens::parse("())(").is_err());
        assert!(BalancedParens::parse("((").is_err());
    }

    #[test]
    fn long_sequences_cross_bytes() {
        // A path of 40 nodes: 40 opens then 40 closes.
        let s: String = "(".repeat(40) + &")".repeat(40);
        let p = BalancedParens::parse(&s).unwrap();
        for i in 0..40 {
            assert_eq!(p.find_match(i), 79 - i);
            assert_eq!(p.find_match(79 - i), i);
            assert_eq!(p.enclose(i), i.checked_sub(1));
        }
    }
}
