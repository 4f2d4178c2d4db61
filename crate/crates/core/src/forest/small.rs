//! Blocked store for trees below the tiny threshold: each block is one
//! string of balanced parentheses, the concatenation of its trees.

use crate::macro_tree::MacroId;
use crate::micro_tree::Cluster;
use crate::oracle::Label;
use crate::succinct::{bits_for, BalancedParens, BitBuf, SparseBitvector};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub(crate) struct Block {
    pub epoch: u32,
    pub bits: BitBuf,
    /// Bit offset of every tree.
    pub starts: Vec<u32>,
    /// Labels of all trees in preorder, concatenated (side table).
    pub labels: Vec<Label>,
}

impl Block {
    pub fn tree_count(&self) -> usize {
        self.starts.len()
    }

    pub fn range(&self, t: usize) -> (usize, usize) {
        let s = self.starts[t] as usize;
        let e = self.starts.get(t + 1).map_or(self.bits.len(), |&x| x as usize);
        (s, e)
    }

    /// Label offset of tree `t`: its start bit halved.
    pub fn label_range(&self, t: usize) -> (usize, usize) {
        let (s, e) = self.range(t);
        (s / 2, e / 2)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub(crate) struct SmallStore {
    pub blocks: Vec<Block>,
    pub free: Vec<u32>,
    pub open: Option<u32>,
    pub cap: usize,
}

impl SmallStore {
    pub fn new(cap: usize) -> Self {
        Self { cap: cap.max(2), ..Self::default() }
    }

    pub fn valid(&self, b: u32, t: u32, epoch: u32) -> bool {
        self.blocks.get(b as usize).is_some_and(|blk| blk.epoch == epoch && (t as usize) < blk.tree_count())
    }

    /// The tree as a portless cluster.
    pub fn cluster(&self, b: u32, t: u32) -> Cluster<MacroId> {
        let blk = &self.blocks[b as usize];
        let (s, e) = blk.range(t as usize);
        let bp = BalancedParens::new_unchecked(blk.bits.slice(s, e));
        let steps = (e - s).saturating_sub(2);
        Cluster::from_parts(bp, SparseBitvector::from_positions(steps, Vec::new()), Vec::new())
    }

    pub fn node_count(&self, b: u32, t: u32) -> usize {
        let (s, e) = self.blocks[b as usize].range(t as usize);
        (e - s) / 2
    }

    pub fn labels(&self, b: u32, t: u32) -> &[Label] {
        let blk = &self.blocks[b as usize];
        let (s, e) = blk.label_range(t as usize);
        &blk.labels[s..e]
    }

    fn take_block(&mut self) -> u32 {
        match self.free.pop() {
            Some(b) => b,
            None => {
                self.blocks.push(Block::default());
                (self.blocks.len() - 1) as u32
            }
        }
    }

    /// Appends a tree; returns its (block, index).
    pub fn insert(&mut self, bp: &BitBuf, labels: &[Label]) -> (u32, u32) {
        let b = match self.open {
            Some(b) if self.blocks[b as usize].bits.len() + bp.len() <= self.cap => b,
            _ => {
                let b = self.take_block();
                self.open = Some(b);
                b
            }
        };
        let blk = &mut self.blocks[b as usize];
        blk.starts.push(blk.bits.len() as u32);
        blk.bits.extend_from(bp);
        blk.labels.extend_from_slice(labels);
        (b, (blk.starts.len() - 1) as u32)
    }

    /// Rewrites every block holding one of `items` without those trees.
    /// Returns the touched blocks; their surviving trees are renumbered.
    pub fn remove(&mut self, items: &[(u32, u32)]) -> Vec<u32> {
        let mut touched: Vec<u32> = items.iter().map(|x| x.0).collect();
        touched.sort_unstable();
        touched.dedup();
        for &b in &touched {
            let old = std::mem::take(&mut self.blocks[b as usize]);
            let mut blk = Block { epoch: old.epoch.wrapping_add(1), ..Block::default() };
            for t in 0..old.tree_count() {
                if items.contains(&(b, t as u32)) {
                    continue;
                }
                let (s, e) = old.range(t);
                let (ls, le) = old.label_range(t);
                blk.starts.push(blk.bits.len() as u32);
                blk.bits.extend_from(&old.bits.slice(s, e));
                blk.labels.extend_from_slice(&old.labels[ls..le]);
            }
            let empty = blk.starts.is_empty();
            self.blocks[b as usize] = blk;
            if empty && self.open != Some(b) {
                self.free.push(b);
            }
        }
        touched
    }

    pub fn payload_bits(&self) -> usize {
        self.blocks.iter().map(|b| b.bits.len()).sum()
    }

    /// Offsets, epochs and block headers.
    pub fn aux_bits(&self) -> usize {
        let w = bits_for(self.cap.max(2));
        self.blocks.iter().map(|b| b.starts.len() * w + 32 + 2 * 64).sum::<usize>() + self.free.len() * 32
    }
}
