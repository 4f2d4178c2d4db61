//! Versioned little-endian binary dump.
//!
//! Layout: magic, version, header (n, epsilon, mode, thresholds), counters,
//! cluster table, macro arena and tours, tiny-tree blocks, label table,
//! fingers. Everything is written in a canonical order, so a dump read back
//! and written again is byte-identical.

use std::collections::HashMap;

use super::small::{Block, SmallStore};
use super::{
    ClusterData, ClusterSlot, CompactForest, EdgeHandle, EdgeLoc, FingerEntry, FingerTarget, ForestError, NodeLoc,
    Result, UpdateStats, VertexHandle,
};
use crate::clustering::{ForestParams, Mode};
use crate::macro_tree::{DumpEdge, EdgeKind, MacroDump, MacroForest, MacroId};
use crate::micro_tree::Cluster;
use crate::succinct::{BalancedParens, BitBuf, RankSelect, SparseBitvector};

const MAGIC: &[u8; 4] = b"CETT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Default)]
struct W(Vec<u8>);

impl W {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn len(&mut self, x: usize) {
        self.u64(x as u64);
    }
    fn bits(&mut self, b: &BitBuf) {
        self.len(b.len());
        for &w in b.words() {
            self.u64(w);
        }
    }
    fn mid(&mut self, m: MacroId) {
        self.u32(m.index());
        self.u32(m.generation());
    }
    fn edge(&mut self, e: EdgeHandle) {
        match e.loc {
            EdgeLoc::Intra { cluster, step } => {
                self.u8(0);
                self.u32(cluster);
                self.u32(step);
                self.u32(0);
            }
            EdgeLoc::Macro(m) => {
                self.u8(1);
                self.mid(m);
                self.u32(0);
            }
            EdgeLoc::Tiny { block, tree, step } => {
                self.u8(2);
                self.u32(block);
                self.u32(tree);
                self.u32(step);
            }
        }
        self.u32(e.stamp);
        self.u32(e.era);
    }
}

struct R<'a> {
    b: &'a [u8],
    at: usize,
}

fn bad(what: &str) -> ForestError {
    ForestError::Corrupt(what.to_string())
}

impl R<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.at + n > self.b.len() {
            return Err(bad("truncated"));
        }
        let s = &self.b[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > self.b.len() as u64 * 64 + 64 {
            return Err(bad("length out of range"));
        }
        Ok(n as usize)
    }
    fn bits(&mut self) -> Result<BitBuf> {
        let n = self.len()?;
        let mut words = Vec::with_capacity(n.div_ceil(64));
        for _ in 0..n.div_ceil(64) {
            words.push(self.u64()?);
        }
        Ok(BitBuf::from_bits((0..n).map(|i| (words[i / 64] >> (i % 64)) & 1 == 1)))
    }
    fn mid(&mut self) -> Result<MacroId> {
        let idx = self.u32()?;
        Ok(MacroId::from_parts(idx, self.u32()?))
    }
    fn edge(&mut self) -> Result<EdgeHandle> {
        let tag = self.u8()?;
        let loc = match tag {
            0 => {
                let (cluster, step, _) = (self.u32()?, self.u32()?, self.u32()?);
                EdgeLoc::Intra { cluster, step }
            }
            1 => {
                let m = self.mid()?;
                self.u32()?;
                EdgeLoc::Macro(m)
            }
            2 => EdgeLoc::Tiny { block: self.u32()?, tree: self.u32()?, step: self.u32()? },
            _ => return Err(bad("edge tag")),
        };
        Ok(EdgeHandle { loc, stamp: self.u32()?, era: self.u32()? })
    }
}

impl CompactForest {
    pub fn serialize(&self) -> Vec<u8> {
        let mut w = W::default();
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.len(self.n);
        w.len(self.n0);
        w.u64(self.epsilon.to_bits());
        w.u8(match self.mode {
            Mode::Bounded => 0,
            Mode::Unbounded => 1,
        });
        w.len(self.degree_bound);
        let p = &self.params;
        for x in [p.n, p.d, p.lower, p.upper, p.tiny] {
            w.len(x);
        }
        w.u64(p.epsilon.to_bits());
        w.u32(self.era);
        let s = &self.stats;
        for x in [s.updates, s.rebuilt_vertices, s.global_rebuilds, s.global_rebuild_vertices, s.absorbed_clusters, s.decompositions] {
            w.u64(x);
        }

        w.len(self.clusters.len());
        for slot in &self.clusters {
            w.u32(slot.epoch);
            match &slot.data {
                None => w.u8(0),
                Some(d) => {
                    w.u8(1);
                    w.bits(d.micro.bp().bits());
                    w.len(d.micro.ports().len());
                    let ones = d.micro.ports().one_positions();
                    w.len(ones.len());
                    for &o in ones {
                        w.u32(o);
                    }
                    for &k in d.micro.port_keys() {
                        w.mid(k);
                    }
                    w.len(d.labels.len());
                    for &l in &d.labels {
                        w.u32(l);
                    }
                }
            }
        }
        w.len(self.free_clusters.len());
        for &c in &self.free_clusters {
            w.u32(c);
        }

        let md = self.mac.export();
        w.len(md.slots.len());
        for &(g, a) in &md.slots {
            w.u32(g);
            w.u8(a as u8);
        }
        w.len(md.free.len());
        for &f in &md.free {
            w.u32(f);
        }
        w.len(md.tours.len());
        for t in &md.tours {
            w.len(t.len());
            for e in t {
                w.u32(e.idx);
                w.u32(e.rev);
                w.u8((e.kind == EdgeKind::False) as u8);
                w.u64(e.pre_weight);
                w.u32(e.payload.0);
                w.u32(e.payload.1);
            }
        }

        let sm = &self.small;
        w.len(sm.cap);
        w.u32(sm.open.map_or(u32::MAX, |b| b));
        w.len(sm.blocks.len());
        for b in &sm.blocks {
            w.u32(b.epoch);
            w.bits(&b.bits);
            w.len(b.starts.len());
            for &s in &b.starts {
                w.u32(s);
            }
            w.len(b.labels.len());
            for &l in &b.labels {
                w.u32(l);
            }
        }
        w.len(sm.free.len());
        for &f in &sm.free {
            w.u32(f);
        }

        let mut labels: Vec<_> = self.labels.iter().collect();
        labels.sort_unstable_by_key(|(l, _)| **l);
        w.len(labels.len());
        for (&l, &loc) in labels {
            w.u32(l);
            match loc {
                NodeLoc::Cluster { cluster, pre } => {
                    w.u8(0);
                    w.u32(cluster);
                    w.u32(0);
                    w.u32(pre);
                }
                NodeLoc::Tiny { block, tree, pre } => {
                    w.u8(1);
                    w.u32(block);
                    w.u32(tree);
                    w.u32(pre);
                }
            }
        }

        w.len(self.fingers.len());
        for f in &self.fingers {
            let Some(f) = f else {
                w.u8(0);
                continue;
            };
            w.u8(1);
            w.u32(f.tail);
            w.u32(f.head.unwrap_or(u32::MAX));
            w.u8(f.head.is_some() as u8);
            match f.target {
                None => w.u8(0),
                Some(FingerTarget::Edge(e)) => {
                    w.u8(1);
                    w.edge(e);
                }
                Some(FingerTarget::Vertex(VertexHandle::Edge(e))) => {
                    w.u8(2);
                    w.edge(e);
                }
                Some(FingerTarget::Vertex(VertexHandle::Isolated { block, tree, stamp, era })) => {
                    w.u8(3);
                    for x in [block, tree, stamp, era] {
                        w.u32(x);
                    }
                }
            }
        }
        w.0
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = R { b: bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(bad("magic"));
        }
        if r.u32()? != FORMAT_VERSION {
            return Err(bad("version"));
        }
        let n = r.len()?;
        let n0 = r.len()?;
        let epsilon = f64::from_bits(r.u64()?);
        let mode = match r.u8()? {
            0 => Mode::Bounded,
            1 => Mode::Unbounded,
            _ => return Err(bad("mode")),
        };
        let degree_bound = r.len()?;
        let (pn, pd, lower, upper, tiny) = (r.len()?, r.len()?, r.len()?, r.len()?, r.len()?);
        let pe = f64::from_bits(r.u64()?);
        let params = ForestParams { n: pn, epsilon: pe, mode, d: pd, lower, upper, tiny };
        let era = r.u32()?;
        let stats = UpdateStats {
            updates: r.u64()?,
            rebuilt_vertices: r.u64()?,
            global_rebuilds: r.u64()?,
            global_rebuild_vertices: r.u64()?,
            absorbed_clusters: r.u64()?,
            decompositions: r.u64()?,
        };

        let mut clusters = Vec::new();
        for _ in 0..r.len()? {
            let epoch = r.u32()?;
            let data = match r.u8()? {
                0 => None,
                1 => {
                    let bp = BalancedParens::new(r.bits()?).map_err(|_| bad("parentheses"))?;
                    let plen = r.len()?;
                    let k = r.len()?;
                    let mut ones = Vec::with_capacity(k);
                    for _ in 0..k {
                        ones.push(r.u32()?);
                    }
                    if ones.windows(2).any(|w| w[0] >= w[1]) || ones.last().is_some_and(|&o| o as usize >= plen) {
                        return Err(bad("ports"));
                    }
                    let mut keys = Vec::with_capacity(k);
                    for _ in 0..k {
                        keys.push(r.mid()?);
                    }
                    let mut labels = Vec::new();
                    for _ in 0..r.len()? {
                        labels.push(r.u32()?);
                    }
                    if plen != k + bp.len().saturating_sub(2) || labels.len() != bp.node_count() {
                        return Err(bad("cluster shape"));
                    }
                    let micro = Cluster::from_parts(bp, SparseBitvector::from_positions(plen, ones), keys);
                    Some(ClusterData { micro, labels })
                }
                _ => return Err(bad("cluster tag")),
            };
            clusters.push(ClusterSlot { epoch, data });
        }
        let mut free_clusters = Vec::new();
        for _ in 0..r.len()? {
            free_clusters.push(r.u32()?);
        }

        let mut md = MacroDump { slots: Vec::new(), free: Vec::new(), tours: Vec::new() };
        for _ in 0..r.len()? {
            let g = r.u32()?;
            md.slots.push((g, r.u8()? != 0));
        }
        for _ in 0..r.len()? {
            md.free.push(r.u32()?);
        }
        for _ in 0..r.len()? {
            let mut t = Vec::new();
            for _ in 0..r.len()? {
                let idx = r.u32()?;
                let rev = r.u32()?;
                let kind = if r.u8()? == 1 { EdgeKind::False } else { EdgeKind::True };
                let pre_weight = r.u64()?;
                let payload = (r.u32()?, r.u32()?);
                t.push(DumpEdge { idx, rev, kind, pre_weight, payload });
            }
            md.tours.push(t);
        }
        let mac = MacroForest::restore(&md).map_err(ForestError::Corrupt)?;

        let cap = r.len()?;
        let open = match r.u32()? {
            u32::MAX => None,
            b => Some(b),
        };
        let mut blocks = Vec::new();
        for _ in 0..r.len()? {
            let epoch = r.u32()?;
            let bits = r.bits()?;
            let mut starts = Vec::new();
            for _ in 0..r.len()? {
                starts.push(r.u32()?);
            }
            let mut labels = Vec::new();
            for _ in 0..r.len()? {
                labels.push(r.u32()?);
            }
            if labels.len() * 2 != bits.len() || starts.iter().any(|&s| s as usize > bits.len()) {
                return Err(bad("block shape"));
            }
            blocks.push(Block { epoch, bits, starts, labels });
        }
        let mut free = Vec::new();
        for _ in 0..r.len()? {
            free.push(r.u32()?);
        }
        let small = SmallStore { blocks, free, open, cap };

        let mut labels = HashMap::new();
        for _ in 0..r.len()? {
            let l = r.u32()?;
            let tag = r.u8()?;
            let (a, b, c) = (r.u32()?, r.u32()?, r.u32()?);
            let loc = match tag {
                0 => NodeLoc::Cluster { cluster: a, pre: c },
                1 => NodeLoc::Tiny { block: a, tree: b, pre: c },
                _ => return Err(bad("label tag")),
            };
            labels.insert(l, loc);
        }

        let mut fingers = Vec::new();
        let mut finger_count = 0;
        for _ in 0..r.len()? {
            if r.u8()? == 0 {
                fingers.push(None);
                continue;
            }
            finger_count += 1;
            let tail = r.u32()?;
            let h = r.u32()?;
            let head = (r.u8()? == 1).then_some(h);
            let target = match r.u8()? {
                0 => None,
                1 => Some(FingerTarget::Edge(r.edge()?)),
                2 => Some(FingerTarget::Vertex(VertexHandle::Edge(r.edge()?))),
                3 => Some(FingerTarget::Vertex(VertexHandle::Isolated {
                    block: r.u32()?,
                    tree: r.u32()?,
                    stamp: r.u32()?,
                    era: r.u32()?,
                })),
                _ => return Err(bad("finger tag")),
            };
            fingers.push(Some(FingerEntry { tail, head, target }));
        }
        if r.at != bytes.len() {
            return Err(bad("trailing bytes"));
        }

        let cf = Self {
            epsilon,
            mode,
            degree_bound,
            params,
            n,
            n0,
            era,
            clusters,
            free_clusters,
            mac,
            small,
            labels,
            fingers,
            finger_count,
            stats,
        };
        cf.check_consistency().map_err(ForestError::Corrupt)?;
        Ok(cf)
    }
}
