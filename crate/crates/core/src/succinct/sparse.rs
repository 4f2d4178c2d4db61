use super::bits::{bits_for, BitBuf};
use super::bitvector::RankSelect;

/// A bitvector with few ones, stored as the sorted list of one-positions.
///
/// Ports bitvectors hold `2(n_C - 1)` zeros but only a handful of ones, so
/// this form costs `(ones + 1) * ceil(lg(len + 1))` bits instead of `len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparseBitvector {
    ones: Vec<u32>,
    len: usize,
}

impl SparseBitvector {
    pub fn new(bits: &BitBuf) -> Self {
        let ones = (0..bits.len()).filter(|&i| bits.get(i)).map(|i| i as u32).collect();
        Self { ones, len: bits.len() }
    }

    /// Builds from strictly increasing one-positions.
    pub fn from_positions(len: usize, ones: Vec<u32>) -> Self {
        debug_assert!(ones.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(ones.last().is_none_or(|&p| (p as usize) < len));
        Self { ones, len }
    }

    pub fn from_str_bits(s: &str) -> Self {
        Self::new(&BitBuf::from_str_bits(s))
    }

    pub fn one_positions(&self) -> &[u32] {
        &self.ones
    }

    pub fn to_bitbuf(&self) -> BitBuf {
        let mut out = BitBuf::with_capacity(self.len);
        let mut next = self.ones.iter().peekable();
        for i in 0..self.len {
            let one = next.peek().is_some_and(|&&p| p as usize == i);
            if one {
                next.next();
            }
            out.push(one);
        }
        out
    }

    pub fn space_bits(&self) -> usize {
        (self.ones.len() + 1) * bits_for(self.len)
    }
}

impl RankSelect for SparseBitvector {
    fn len(&self) -> usize {
        self.len
    }

    fn count_ones(&self) -> usize {
        self.ones.len()
    }

    fn get(&self, i: usize) -> bool {
        self.ones.binary_search(&(i as u32)).is_ok()
    }

    fn rank1(&self, i: usize) -> usize {
        self.ones.partition_point(|&p| (p as usize) < i)
    }

    fn select1(&self, k: usize) -> usize {
        self.ones[k - 1] as usize
    }

    fn select0(&self, k: usize) -> usize {
        // The answer is k - 1 + r, where r is the number of ones before it:
        // the smallest r with ones[r] > k - 1 + r (ones[r] - r is non-decreasing).
        let (mut lo, mut hi) = (0usize, self.ones.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.ones[mid] as usize > k - 1 + mid {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        k - 1 + lo
    }
}
