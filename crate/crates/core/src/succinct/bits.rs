//! Packed bit buffer shared by the succinct structures.

/// A growable, packed sequence of bits (LSB-first within each word).
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitBuf {
    words: Vec<u64>,
    len: usize,
}

impl BitBuf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(64)),
            len: 0,
        }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut buf = Self::new();
        for b in bits {
            buf.push(b);
        }
        buf
    }

    /// Parses a string of `0`/`1` (or `(`/`)`) characters; other characters are ignored.
    pub fn from_str_bits(s: &str) -> Self {
        Self::from_bits(s.chars().filter_map(|c| match c {
            '1' | '(' => Some(true),
            '0' | ')' => Some(false),
            _ => None,
        }))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        if bit {
            self.words[self.len / 64] |= 1 << (self.len % 64);
        }
        self.len += 1;
    }

    pub fn extend_from(&mut self, other: &BitBuf) {
        for i in 0..other.len {
            self.push(other.get(i));
        }
    }

    /// Copies bits `[start, end)` into a new buffer.
    pub fn slice(&self, start: usize, end: usize) -> BitBuf {
        let mut out = BitBuf::with_capacity(end - start);
        for i in start..end {
            out.push(self.get(i));
        }
        out
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Byte `j` of the packed representation (bits `8j..8j+8`).
    #[inline]
    pub(crate) fn byte(&self, j: usize) -> u8 {
        (self.words[j / 8] >> ((j % 8) * 8)) as u8
    }

    /// Number of ones in `[0, i)`, by popcount over whole words.
    pub fn count_ones_before(&self, i: usize) -> usize {
        debug_assert!(i <= self.len);
        let full = i / 64;
        let mut total: usize = self.words[..full].iter().map(|w| w.count_ones() as usize).sum();
        let rem = i % 64;
        if rem > 0 {
            total += (self.words[full] & ((1u64 << rem) - 1)).count_ones() as usize;
        }
        total
    }

    pub fn count_ones(&self) -> usize {
        self.count_ones_before(self.len)
    }

    /// Position of the `k`-th one (1-based), by scanning word popcounts.
    pub fn select1_scan(&self, mut k: usize) -> Option<usize> {
        for (w, &word) in self.words.iter().enumerate() {
            let c = word.count_ones() as usize;
            if k > c {
                k -= c;
                continue;
            }
            let mut x = word;
            for _ in 1..k {
                x &= x - 1;
            }
            let p = w * 64 + x.trailing_zeros() as usize;
            return (p < self.len).then_some(p);
        }
        None
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_string_bits(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }
}

impl std::fmt::Debug for BitBuf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitBuf({})", self.to_string_bits())
    }
}

/// Bits needed to store any value in `0..=max`.
pub fn bits_for(max: usize) -> usize {
    (usize::BITS - max.leading_zeros()).max(1) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_get_and_counts() {
        let b = BitBuf::from_str_bits("0010001001001000");
        assert_eq!(b.len(), 16);
        assert!(b.get(2));
        assert!(!b.get(3));
        assert_eq!(b.count_ones(), 4);
        assert_eq!(b.count_ones_before(7), 2);
        assert_eq!(b.to_string_bits(), "0010001001001000");
    }

    #[test]
    fn bits_for_small_values() {
        assert_eq!(bits_for(0), 1);
        assert_eq!(bits_for(1), 1);
        assert_eq!(bits_for(2), 2);
        assert_eq!(bits_for(255), 8);
        assert_eq!(bits_for(256), 9);
    }
}
