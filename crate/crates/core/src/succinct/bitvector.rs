use super::bits::{bits_for, BitBuf};
use super::SuccinctError;

const SUPERBLOCK: usize = 512;
const WORDS_PER_SUPER: usize = SUPERBLOCK / 64;
const SELECT_SAMPLE: usize = 512;

/// Rank and select over a static bit sequence.
///
/// `rank(sym, i)` counts `sym` bits in `[0, i)`; `select(sym, k)` is the 0-based
/// position of the `k`-th `sym` bit (1-based `k`).
pub trait RankSelect {
    fn len(&self) -> usize;
    fn count_ones(&self) -> usize;
    fn get(&self, i: usize) -> bool;
    /// Unchecked: `i <= len`.
    fn rank1(&self, i: usize) -> usize;
    /// Unchecked: `1 <= k <= count_ones`.
    fn select1(&self, k: usize) -> usize;
    /// Unchecked: `1 <= k <= count_zeros`.
    fn select0(&self, k: usize) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn count_zeros(&self) -> usize {
        self.len() - self.count_ones()
    }

    fn rank0(&self, i: usize) -> usize {
        i - self.rank1(i)
    }

    fn count(&self, sym: bool) -> usize {
        if sym {
            self.count_ones()
        } else {
            self.count_zeros()
        }
    }

    fn rank(&self, sym: bool, i: usize) -> Result<usize, SuccinctError> {
        if i > self.len() {
            return Err(SuccinctError::OutOfBounds { index: i, len: self.len() });
        }
        Ok(if sym { self.rank1(i) } else { self.rank0(i) })
    }

    fn select(&self, sym: bool, k: usize) -> Result<usize, SuccinctError> {
        let avail = self.count(sym);
        if k == 0 || k > avail {
            return Err(SuccinctError::NoSuchRank { rank: k, available: avail });
        }
        Ok(if sym { self.select1(k) } else { self.select0(k) })
    }
}

/// Plain bitvector with a two-level rank directory (512-bit superblocks,
/// 64-bit blocks) and sampled select.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitvector {
    bits: BitBuf,
    ones: usize,
    super_ranks: Vec<u64>,
    block_ranks: Vec<u16>,
    select1_samples: Vec<u32>,
    select0_samples: Vec<u32>,
}

impl Bitvector {
    pub fn new(bits: BitBuf) -> Self {
        let words = bits.words();
        let mut super_ranks = Vec::with_capacity(words.len().div_ceil(WORDS_PER_SUPER) + 1);
        let mut block_ranks = Vec::with_capacity(words.len());
        let mut total = 0u64;
        let mut in_super = 0u16;
        for (w, word) in words.iter().enumerate() {
            if w % WORDS_PER_SUPER == 0 {
                super_ranks.push(total);
                in_super = 0;
            }
            block_ranks.push(in_super);
            let c = word.count_ones();
            total += c as u64;
            in_super += c as u16;
        }
        let ones = total as usize;
        let len = bits.len();
        let mut select1_samples = Vec::new();
        let mut select0_samples = Vec::new();
        let (mut seen1, mut seen0) = (0usize, 0usize);
        for i in 0..len {
            if bits.get(i) {
                if seen1 % SELECT_SAMPLE == 0 {
                    select1_samples.push(i as u32);
                }
                seen1 += 1;
            } else {
                if seen0 % SELECT_SAMPLE == 0 {
                    select0_samples.push(i as u32);
                }
                seen0 += 1;
            }
        }
        Self {
            bits,
            ones,
            super_ranks,
            block_ranks,
            select1_samples,
            select0_samples,
        }
    }

    pub fn from_str_bits(s: &str) -> Self {
        Self::new(BitBuf::from_str_bits(s))
    }

    pub fn bits(&self) -> &BitBuf {
        &self.bits
    }

    /// Directory bits, with counters stored at their minimal widths.
    pub fn aux_bits(&self) -> usize {
        let w = bits_for(self.bits.len());
        self.super_ranks.len() * w
            + self.block_ranks.len() * bits_for(SUPERBLOCK)
            + (self.select1_samples.len() + self.select0_samples.len()) * w
    }

    fn word_rank1(&self, w: usize) -> usize {
        self.super_ranks[w / WORDS_PER_SUPER] as usize + self.block_ranks[w] as usize
    }

    fn word_rank0(&self, w: usize) -> usize {
        w * 64 - self.word_rank1(w)
    }

    fn select_generic(&self, k: usize, ones: bool) -> usize {
        let samples = if ones { &self.select1_samples } else { &self.select0_samples };
        let start = samples[(k - 1) / SELECT_SAMPLE] as usize / 64;
        let words = self.bits.words();
        let rank_at = |w: usize| if ones { self.word_rank1(w) } else { self.word_rank0(w) };
        // Largest word index w >= start with rank_at(w) < k.
        let mut lo = start;
        let mut hi = words.len();
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if rank_at(mid) < k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut remaining = k - rank_at(lo);
        let mut word = if ones { words[lo] } else { !words[lo] };
        loop {
            let tz = word.trailing_zeros() as usize;
            remaining -= 1;
            if remaining == 0 {
                return lo * 64 + tz;
            }
            word &= word - 1;
        }
    }
}

impl RankSelect for Bitvector {
    fn len(&self) -> usize {
        self.bits.len()
    }

    fn count_ones(&self) -> usize {
        self.ones
    }

    fn get(&self, i: usize) -> bool {
        self.bits.get(i)
    }

    fn rank1(&self, i: usize) -> usize {
        debug_assert!(i <= self.bits.len());
        if i == self.bits.len() {
            return self.ones;
        }
        let w = i / 64;
        let rem = i % 64;
        let mut r = self.word_rank1(w);
        if rem > 0 {
            r += (self.bits.words()[w] & ((1u64 << rem) - 1)).count_ones() as usize;
        }
        r
    }

    fn select1(&self, k: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.ones);
        self.select_generic(k, true)
    }

    fn select0(&self, k: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.count_zeros());
        self.select_generic(k, false)
    }
}
