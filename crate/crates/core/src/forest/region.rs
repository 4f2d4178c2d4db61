//! Updates. Every update decodes the clusters and tiny trees it touches into
//! an explicit region, edits it, grows it until the size rules hold, and
//! re-encodes it. Macro edges leaving the region keep their identity: the
//! tour segment behind each of them is cut out and spliced into the new tour.

use std::collections::{BTreeMap, HashMap};

use super::{
    ClusterData, ClusterSlot, CompactForest, CornerHandle, EdgeHandle, EdgeLoc, ForestError, NodeLoc, Result,
    VertexHandle,
};
use crate::clustering::{decompose, tour_walk, ForestParams, LocalTree, Mode, Partition, Slot, WalkState};
use crate::macro_tree::{EdgeKind, MacroId, Seq};
use crate::micro_tree::{build, FragSlot, Fragment, RootChoice};
use crate::oracle::{EmbeddedForest, Label};
use crate::succinct::BitBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RSlot {
    Node(u32),
    Port(MacroId),
}

#[derive(Default)]
struct Region {
    rot: Vec<Vec<RSlot>>,
    label: Vec<Label>,
    alias: Vec<u32>,
    cluster_base: BTreeMap<u32, u32>,
    tiny_base: BTreeMap<(u32, u32), u32>,
    internal: Vec<MacroId>,
}

impl Region {
    fn find(&self, mut x: u32) -> u32 {
        while self.alias[x as usize] != x {
            x = self.alias[x as usize];
        }
        x
    }

    fn alive(&self, x: u32) -> bool {
        self.alias[x as usize] == x
    }

    fn push(&mut self, rot: Vec<RSlot>, label: Label) {
        self.alias.push(self.rot.len() as u32);
        self.rot.push(rot);
        self.label.push(label);
    }

    /// Components over live nodes.
    fn components(&self) -> Vec<Vec<u32>> {
        let mut seen = vec![false; self.rot.len()];
        let mut out = Vec::new();
        for s in 0..self.rot.len() as u32 {
            if seen[s as usize] || !self.alive(s) {
                continue;
            }
            seen[s as usize] = true;
            let mut comp = vec![s];
            let mut i = 0;
            while i < comp.len() {
                let x = comp[i];
                i += 1;
                for slot in &self.rot[x as usize] {
                    if let RSlot::Node(y) = *slot {
                        if !seen[y as usize] {
                            seen[y as usize] = true;
                            comp.push(y);
                        }
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    fn ports(&self, comp: &[u32]) -> impl Iterator<Item = MacroId> + '_ {
        let nodes: Vec<u32> = comp.to_vec();
        nodes.into_iter().flat_map(move |x| {
            self.rot[x as usize].iter().filter_map(|s| match *s {
                RSlot::Port(m) => Some(m),
                RSlot::Node(_) => None,
            })
        })
    }
}

impl CompactForest {
    // ----- region assembly -------------------------------------------------

    fn add_cluster(&self, reg: &mut Region, c: u32) {
        if reg.cluster_base.contains_key(&c) {
            return;
        }
        let base = reg.rot.len() as u32;
        reg.cluster_base.insert(c, base);
        let d = self.data(c);
        let frag = d.micro.decode();
        for (i, rot) in frag.rot.into_iter().enumerate() {
            let rot = rot
                .into_iter()
                .map(|s| match s {
                    FragSlot::Node(y) => RSlot::Node(base + y),
                    FragSlot::Port(m) => RSlot::Port(m),
                })
                .collect();
            reg.push(rot, d.labels[i]);
        }
    }

    fn add_tiny(&self, reg: &mut Region, b: u32, t: u32) {
        if reg.tiny_base.contains_key(&(b, t)) {
            return;
        }
        let base = reg.rot.len() as u32;
        reg.tiny_base.insert((b, t), base);
        let frag = self.small.cluster(b, t).decode();
        let labels = self.small.labels(b, t);
        for (i, rot) in frag.rot.into_iter().enumerate() {
            let rot = rot
                .into_iter()
                .map(|s| match s {
                    FragSlot::Node(y) => RSlot::Node(base + y),
                    FragSlot::Port(_) => unreachable!("tiny trees have no ports"),
                })
                .collect();
            reg.push(rot, labels[i]);
        }
    }

    fn add_loc(&self, reg: &mut Region, loc: EdgeLoc) {
        match loc {
            EdgeLoc::Intra { cluster, .. } => self.add_cluster(reg, cluster),
            EdgeLoc::Macro(m) => {
                self.add_cluster(reg, self.pay(m).0);
                self.add_cluster(reg, self.pay(self.rev(m)).0);
            }
            EdgeLoc::Tiny { block, tree, .. } => self.add_tiny(reg, block, tree),
        }
    }

    /// Region node at the head of macro edge `m`, if its cluster is in the region.
    fn head_node(&self, reg: &Region, m: MacroId) -> Option<u32> {
        let (c, r) = self.pay(self.rev(m));
        let base = *reg.cluster_base.get(&c)?;
        Some(reg.find(base + self.micro(c).port_node(r as usize)))
    }

    /// Turns macro edges with both ends in the region into plain adjacency,
    /// fusing clones joined by false edges.
    fn resolve(&self, reg: &mut Region) {
        let mut x = 0u32;
        while (x as usize) < reg.rot.len() {
            if !reg.alive(x) {
                x += 1;
                continue;
            }
            let hit = reg.rot[x as usize].iter().enumerate().find_map(|(i, s)| match *s {
                RSlot::Port(m) if !self.is_true(m) => self.head_node(reg, m).map(|y| (i, m, y)),
                _ => None,
            });
            let Some((i, m, y)) = hit else {
                x += 1;
                continue;
            };
            let back = self.rev(m);
            let ry = std::mem::take(&mut reg.rot[y as usize]);
            let j = ry.iter().position(|s| *s == RSlot::Port(back)).expect("false edge has two ends");
            let rx = std::mem::take(&mut reg.rot[x as usize]);
            let moved: Vec<RSlot> = ry[j + 1..].iter().chain(&ry[..j]).copied().collect();
            for s in &moved {
                if let RSlot::Node(z) = *s {
                    for t in reg.rot[z as usize].iter_mut() {
                        if *t == RSlot::Node(y) {
                            *t = RSlot::Node(x);
                        }
                    }
                }
            }
            reg.rot[x as usize] = rx[..i].iter().chain(&moved).chain(&rx[i + 1..]).copied().collect();
            reg.alias[y as usize] = x;
            reg.internal.push(m);
        }
        for x in 0..reg.rot.len() {
            if !reg.alive(x as u32) {
                continue;
            }
            for i in 0..reg.rot[x].len() {
                if let RSlot::Port(m) = reg.rot[x][i] {
                    if let Some(y) = self.head_node(reg, m) {
                        reg.rot[x][i] = RSlot::Node(y);
                        reg.internal.push(m);
                    }
                }
            }
        }
    }

    /// Region nodes (tail, head) of an edge whose clusters are in the region.
    fn ends(&self, reg: &Region, loc: EdgeLoc) -> (u32, u32) {
        match loc {
            EdgeLoc::Intra { cluster, step } => {
                let base = reg.cluster_base[&cluster];
                let (t, h) = self.micro(cluster).step_endpoints(step as usize);
                (reg.find(base + t), reg.find(base + h))
            }
            EdgeLoc::Macro(m) => (
                self.head_node(reg, self.rev(m)).expect("tail in region"),
                self.head_node(reg, m).expect("head in region"),
            ),
            EdgeLoc::Tiny { block, tree, step } => {
                let base = reg.tiny_base[&(block, tree)];
                let (t, h) = self.small.cluster(block, tree).step_endpoints(step as usize);
                (reg.find(base + t), reg.find(base + h))
            }
        }
    }

    /// Region node and insertion index for a corner.
    fn corner_slot(&self, reg: &Region, c: Corner2) -> (u32, usize) {
        match c {
            Corner2::After(loc) => {
                let (h, key) = match loc {
                    EdgeLoc::Macro(m) => {
                        let h = self.head_node(reg, m).expect("head in region");
                        match self.head_node(reg, self.rev(m)) {
                            Some(t) => (h, RSlot::Node(t)),
                            None => (h, RSlot::Port(self.rev(m))),
                        }
                    }
                    _ => {
                        let (t, h) = self.ends(reg, loc);
                        (h, RSlot::Node(t))
                    }
                };
                let i = reg.rot[h as usize].iter().position(|s| *s == key).expect("edge at its head");
                (h, i + 1)
            }
            Corner2::Lone(b, t) => (reg.tiny_base[&(b, t)], 0),
        }
    }

    // ----- public updates --------------------------------------------------

    /// Removes edge `e`; returns its two former endpoints.
    pub fn cut(&mut self, e: EdgeHandle) -> Result<(VertexHandle, VertexHandle)> {
        let loc = self.check(e)?;
        let (lu, lv) = (self.head_label_loc(self.reverse_loc(loc)), self.head_label_loc(loc));
        let mut reg = Region::default();
        self.add_loc(&mut reg, loc);
        self.resolve(&mut reg);
        let (x, y) = self.ends(&reg, loc);
        reg.rot[x as usize].retain(|s| *s != RSlot::Node(y));
        reg.rot[y as usize].retain(|s| *s != RSlot::Node(x));
        self.finish(reg)?;
        self.stats.updates += 1;
        Ok((self.vertex_of(lu)?, self.vertex_of(lv)?))
    }

    fn corner2(&self, c: CornerHandle) -> Result<Corner2> {
        match c {
            CornerHandle::After(e) => Ok(Corner2::After(self.check(e)?)),
            CornerHandle::At(VertexHandle::Isolated { block, tree, stamp, era }) => {
                if era != self.era || !self.small.valid(block, tree, stamp) {
                    return Err(ForestError::StaleHandle);
                }
                if self.small.node_count(block, tree) != 1 {
                    return Err(ForestError::BadCorner);
                }
                Ok(Corner2::Lone(block, tree))
            }
            CornerHandle::At(VertexHandle::Edge(e)) => {
                self.check(e)?;
                Err(ForestError::BadCorner)
            }
        }
    }

    /// Inserts an edge from the vertex of `c1` to the vertex of `c2`,
    /// bisecting both corners. Returns the new edge directed that way.
    pub fn link(&mut self, c1: CornerHandle, c2: CornerHandle) -> Result<EdgeHandle> {
        let (a, b) = (self.corner2(c1)?, self.corner2(c2)?);
        let key = |c: Corner2| match c {
            Corner2::After(loc) => self.tree_key(loc),
            Corner2::Lone(b, t) => super::TreeKey::Tiny(b, t),
        };
        if key(a) == key(b) {
            return Err(ForestError::WouldCreateCycle);
        }
        let mut reg = Region::default();
        for c in [a, b] {
            match c {
                Corner2::After(loc) => match loc {
                    EdgeLoc::Macro(m) => self.add_cluster(&mut reg, self.pay(self.rev(m)).0),
                    _ => self.add_loc(&mut reg, loc),
                },
                Corner2::Lone(b, t) => self.add_tiny(&mut reg, b, t),
            }
        }
        self.resolve(&mut reg);
        let (x, i) = self.corner_slot(&reg, a);
        let (y, j) = self.corner_slot(&reg, b);
        if self.mode == Mode::Bounded {
            let deg = reg.rot[x as usize].len().max(reg.rot[y as usize].len()) + 1;
            if deg > self.degree_bound {
                return Err(ForestError::DegreeExceeded { degree: deg, bound: self.degree_bound });
            }
        }
        let (lu, lv) = (reg.label[x as usize], reg.label[y as usize]);
        reg.rot[x as usize].insert(i, RSlot::Node(y));
        reg.rot[y as usize].insert(j, RSlot::Node(x));
        self.finish(reg)?;
        self.stats.updates += 1;
        self.edge_of(lu, lv)
    }

    /// Adds an isolated vertex under label `v`.
    pub fn add_vertex(&mut self, v: Label) -> Result<VertexHandle> {
        if self.labels.contains_key(&v) {
            return Err(ForestError::DuplicateLabel(v));
        }
        let (b, t) = self.small.insert(&BitBuf::from_str_bits("10"), &[v]);
        self.labels.insert(v, NodeLoc::Tiny { block: b, tree: t, pre: 0 });
        self.n += 1;
        self.stats.updates += 1;
        self.stats.rebuilt_vertices += 1;
        self.maybe_global_rebuild()?;
        self.remap_fingers();
        self.vertex_of(v)
    }

    /// Removes an isolated vertex.
    pub fn remove_vertex(&mut self, v: VertexHandle) -> Result<()> {
        let label = self.vertex_label(v)?;
        let VertexHandle::Isolated { block, tree, .. } = v else {
            return Err(ForestError::NotIsolated);
        };
        self.labels.remove(&label);
        self.remove_tinies(&[(block, tree)]);
        self.n -= 1;
        self.stats.updates += 1;
        self.maybe_global_rebuild()?;
        self.remap_fingers();
        Ok(())
    }

    pub fn cut_labels(&mut self, u: Label, v: Label) -> Result<()> {
        let e = self.edge_of(u, v)?;
        self.cut(e).map(|_| ())
    }

    pub fn link_labels(&mut self, c1: crate::oracle::Corner, c2: crate::oracle::Corner) -> Result<EdgeHandle> {
        let (a, b) = (self.corner_of(c1)?, self.corner_of(c2)?);
        self.link(a, b)
    }

    pub fn remove_vertex_label(&mut self, v: Label) -> Result<()> {
        let h = self.vertex_of(v)?;
        self.remove_vertex(h)
    }

    fn maybe_global_rebuild(&mut self) -> Result<()> {
        if self.n > 2 * self.n0 || 2 * self.n < self.n0 {
            self.global_rebuild()?;
        }
        Ok(())
    }

    /// Re-derives the thresholds from the current size and re-encodes everything.
    pub fn global_rebuild(&mut self) -> Result<()> {
        let f = self.to_embedded();
        let params = ForestParams::new(self.n.max(2), self.epsilon, self.mode, self.degree_bound)?;
        let mut fresh = Self::empty(params, self.epsilon, self.mode, self.degree_bound, self.n, self.era.wrapping_add(1));
        fresh.load(&f, None)?;
        fresh.stats = self.stats;
        fresh.stats.global_rebuilds += 1;
        fresh.stats.global_rebuild_vertices += self.n as u64;
        fresh.fingers = std::mem::take(&mut self.fingers);
        fresh.finger_count = self.finger_count;
        *self = fresh;
        self.remap_fingers();
        Ok(())
    }

    /// Decodes the whole structure into an explicit forest.
    pub fn to_embedded(&self) -> EmbeddedForest {
        let mut reg = Region::default();
        for c in 0..self.clusters.len() as u32 {
            if self.clusters[c as usize].data.is_some() {
                self.add_cluster(&mut reg, c);
            }
        }
        for (b, blk) in self.small.blocks.iter().enumerate() {
            for t in 0..blk.tree_count() {
                self.add_tiny(&mut reg, b as u32, t as u32);
            }
        }
        self.resolve(&mut reg);
        let mut rot = BTreeMap::new();
        for x in 0..reg.rot.len() {
            if !reg.alive(x as u32) {
                continue;
            }
            let r = reg.rot[x]
                .iter()
                .map(|s| match *s {
                    RSlot::Node(y) => reg.label[reg.find(y) as usize],
                    RSlot::Port(_) => unreachable!("all clusters are in the region"),
                })
                .collect();
            rot.insert(reg.label[x], r);
        }
        EmbeddedForest::from_rotations(rot).expect("decoded forest is valid")
    }

    // ----- re-encoding -----------------------------------------------------

    /// Encodes every tree of `f` from scratch.
    pub(super) fn load(&mut self, f: &EmbeddedForest, assign: Option<&HashMap<Label, u32>>) -> Result<()> {
        let (lt, labels) = LocalTree::from_forest(f);
        let mut reg = Region::default();
        for (x, rot) in lt.rot.into_iter().enumerate() {
            reg.push(
                rot.into_iter().map(|s| RSlot::Node(s.target().expect("plain forest"))).collect(),
                labels[x],
            );
        }
        let mut segs = HashMap::new();
        for comp in reg.components() {
            self.materialize(&reg, &comp, &mut segs, assign)?;
        }
        Ok(())
    }

    fn tree_size(&self, reg: &Region, comp: &[u32]) -> u64 {
        let mut n = comp.len() as u64;
        for b in reg.ports(comp) {
            let s = self.mac.range_inclusive(b, self.rev(b)).expect("live");
            n += (s.steps + s.weight - self.mac.pre_weight(b).expect("live")) / 2;
        }
        n
    }

    /// Grows the region until every component satisfies the size rules,
    /// then re-encodes it.
    fn finish(&mut self, mut reg: Region) -> Result<()> {
        let (lower, upper) = (self.params.lower, self.params.upper);
        loop {
            let mut grow = None;
            for comp in reg.components() {
                let Some(b) = reg.ports(&comp).min() else { continue };
                if comp.len() < lower || self.tree_size(&reg, &comp) <= upper as u64 {
                    grow = Some(b);
                    break;
                }
            }
            let Some(b) = grow else { break };
            self.add_cluster(&mut reg, self.pay(self.rev(b)).0);
            self.resolve(&mut reg);
            self.stats.absorbed_clusters += 1;
        }
        let mut segs: HashMap<MacroId, Seq> = HashMap::new();
        for x in 0..reg.rot.len() {
            if !reg.alive(x as u32) {
                continue;
            }
            for s in &reg.rot[x] {
                if let RSlot::Port(b) = *s {
                    let seg = self.mac.extract_range(b, self.rev(b)).expect("live boundary");
                    segs.insert(b, seg);
                }
            }
        }
        for &m in &reg.internal {
            if self.mac.is_valid(m) {
                self.mac.free_tour(m).expect("live");
            }
        }
        for &c in reg.cluster_base.keys() {
            let slot = &mut self.clusters[c as usize];
            slot.data = None;
            slot.epoch = slot.epoch.wrapping_add(1);
            self.free_clusters.push(c);
        }
        let tinies: Vec<(u32, u32)> = reg.tiny_base.keys().copied().collect();
        self.remove_tinies(&tinies);
        for comp in reg.components() {
            self.materialize(&reg, &comp, &mut segs, None)?;
        }
        debug_assert!(segs.is_empty());
        self.remap_fingers();
        Ok(())
    }

    fn remove_tinies(&mut self, items: &[(u32, u32)]) {
        if items.is_empty() {
            return;
        }
        for b in self.small.remove(items) {
            for t in 0..self.small.blocks[b as usize].tree_count() as u32 {
                for (pre, &v) in self.small.labels(b, t).iter().enumerate() {
                    self.labels.insert(v, NodeLoc::Tiny { block: b, tree: t, pre: pre as u32 });
                }
            }
        }
    }

    fn alloc_cluster(&mut self, data: ClusterData) -> u32 {
        match self.free_clusters.pop() {
            Some(c) => {
                self.clusters[c as usize].data = Some(data);
                c
            }
            None => {
                self.clusters.push(ClusterSlot { epoch: 0, data: Some(data) });
                (self.clusters.len() - 1) as u32
            }
        }
    }

    /// Encodes one region component as clusters (or a tiny tree) and splices
    /// its macro edges, including the saved boundary segments, into one tour.
    fn materialize(
        &mut self,
        reg: &Region,
        comp: &[u32],
        segs: &mut HashMap<MacroId, Seq>,
        assign: Option<&HashMap<Label, u32>>,
    ) -> Result<()> {
        let mut idx: HashMap<u32, u32> = HashMap::with_capacity(comp.len());
        for (i, &x) in comp.iter().enumerate() {
            idx.insert(x, i as u32);
        }
        let mut exts = Vec::new();
        let lt = LocalTree {
            rot: comp
                .iter()
                .map(|&x| {
                    reg.rot[x as usize]
                        .iter()
                        .map(|s| match *s {
                            RSlot::Node(y) => Slot::Node(idx[&y]),
                            RSlot::Port(m) => {
                                exts.push(m);
                                Slot::Ext((exts.len() - 1) as u32)
                            }
                        })
                        .collect()
                })
                .collect(),
        };
        let labels: Vec<Label> = comp.iter().map(|&x| reg.label[x as usize]).collect();
        self.stats.rebuilt_vertices += comp.len() as u64;

        if exts.is_empty() && comp.len() < self.params.tiny {
            let frag = Fragment::<MacroId> {
                rot: lt.rot.iter().map(|r| r.iter().map(|s| FragSlot::Node(s.target().unwrap())).collect()).collect(),
            };
            let (cl, pre) = build(&frag, RootChoice { node: 0, start: 0 }).expect("connected component");
            let mut by_pre = vec![0; comp.len()];
            for (i, &p) in pre.iter().enumerate() {
                by_pre[p as usize] = labels[i];
            }
            let (b, t) = self.small.insert(cl.bp().bits(), &by_pre);
            for (p, &v) in by_pre.iter().enumerate() {
                self.labels.insert(v, NodeLoc::Tiny { block: b, tree: t, pre: p as u32 });
            }
            return Ok(());
        }

        let part = match assign {
            Some(a) => {
                let piece: Vec<u32> = labels.iter().map(|v| a[v]).collect();
                let mut ids: Vec<u32> = piece.clone();
                ids.sort_unstable();
                ids.dedup();
                let piece: Vec<u32> = piece.iter().map(|p| ids.binary_search(p).unwrap() as u32).collect();
                let mut pieces = vec![Vec::new(); ids.len()];
                for (x, &p) in piece.iter().enumerate() {
                    pieces[p as usize].push(x as u32);
                }
                Partition { tree: lt, origin: (0..comp.len() as u32).collect(), piece, pieces }
            }
            None if comp.len() > self.params.upper => {
                self.stats.decompositions += 1;
                decompose(&lt, &self.params)?
            }
            None => Partition {
                tree: lt,
                origin: (0..comp.len() as u32).collect(),
                piece: vec![0; comp.len()],
                pieces: vec![(0..comp.len() as u32).collect()],
            },
        };
        let t = &part.tree;

        // macro edge leaving every crossing slot
        let mut out: Vec<Vec<Option<MacroId>>> = t.rot.iter().map(|r| vec![None; r.len()]).collect();
        for x in 0..t.len() {
            for i in 0..t.rot[x].len() {
                match t.rot[x][i] {
                    Slot::Ext(k) => out[x][i] = Some(exts[k as usize]),
                    Slot::Node(y) | Slot::Twin(y) => {
                        let twin = matches!(t.rot[x][i], Slot::Twin(_));
                        if out[x][i].is_some() || (!twin && part.piece[x] == part.piece[y as usize]) {
                            continue;
                        }
                        let j = t.back_index(x as u32, y);
                        let kind = if twin { EdgeKind::False } else { EdgeKind::True };
                        let (m, r) = self.mac.new_pair(kind, (0, 0), (0, 0));
                        out[x][i] = Some(m);
                        out[y as usize][j] = Some(r);
                    }
                }
            }
        }

        for nodes in &part.pieces {
            let mut local: HashMap<u32, u32> = HashMap::with_capacity(nodes.len());
            for (i, &x) in nodes.iter().enumerate() {
                local.insert(x, i as u32);
            }
            let mut root = RootChoice { node: 0, start: 0 };
            let mut best: Option<MacroId> = None;
            let rot = nodes
                .iter()
                .enumerate()
                .map(|(li, &x)| {
                    t.rot[x as usize]
                        .iter()
                        .enumerate()
                        .map(|(i, s)| match out[x as usize][i] {
                            Some(m) => {
                                if best.is_none_or(|b| m < b) {
                                    best = Some(m);
                                    root = RootChoice { node: li as u32, start: i };
                                }
                                FragSlot::Port(m)
                            }
                            None => FragSlot::Node(local[&s.target().unwrap()]),
                        })
                        .collect()
                })
                .collect();
            let (cl, pre) = build(&Fragment { rot }, root).expect("pieces are connected");
            let mut by_pre = vec![0; nodes.len()];
            for (i, &p) in pre.iter().enumerate() {
                by_pre[p as usize] = labels[part.origin[nodes[i] as usize] as usize];
            }
            let keys = cl.port_keys().to_vec();
            let c = self.alloc_cluster(ClusterData { micro: cl, labels: by_pre.clone() });
            for (r, m) in keys.into_iter().enumerate() {
                self.mac.set_payload(m, (c, r as u32)).expect("live");
            }
            for (p, &v) in by_pre.iter().enumerate() {
                self.labels.insert(v, NodeLoc::Cluster { cluster: c, pre: p as u32 });
            }
        }

        if out.iter().all(|r| r.iter().all(Option::is_none)) {
            return Ok(());
        }
        let start = (0..t.len()).find(|&x| !t.rot[x].is_empty()).expect("an edge exists");
        let walk = tour_walk(t, WalkState { node: start as u32, slot: 0 });
        let mut parts = Vec::new();
        let mut first = None;
        let mut run = 0u64;
        for w in walk {
            let (x, i) = (w.node as usize, w.slot);
            match out[x][i] {
                None => run += 1,
                Some(m) => {
                    let seq = match t.rot[x][i] {
                        Slot::Ext(_) => segs.remove(&m).expect("segment saved"),
                        _ => self.mac.singleton(m),
                    };
                    self.mac.set_pre_weight(m, run).expect("weights fit");
                    first.get_or_insert(m);
                    parts.push(seq);
                    run = 0;
                }
            }
        }
        let f = first.unwrap();
        let w = self.mac.pre_weight(f).unwrap();
        self.mac.set_pre_weight(f, w + run).expect("weights fit");
        self.mac.join_cyclic(&parts);
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Corner2 {
    After(EdgeLoc),
    Lone(u32, u32),
}
