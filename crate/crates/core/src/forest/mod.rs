//! The compact forest: clusters of micro-trees glued by macro-trees, plus a
//! blocked store for tiny trees.
//!
//! Handles are label-free. Vertex labels live in a side dictionary that maps
//! each label to its node inside a cluster or tiny tree; it is excluded from
//! the space report.

mod region;
mod serial;
mod small;

use std::collections::HashMap;

use crate::clustering::{ClusterError, ForestParams, Mode};
use crate::macro_tree::{EdgeKind, MacroError, MacroForest, MacroId, SearchMode};
use crate::micro_tree::{Cluster, Dir, Local};
use crate::oracle::{Corner, DirectedEdge, EmbeddedForest, Label};
use crate::succinct::{bits_for, RankSelect};

pub use serial::FORMAT_VERSION;
use small::SmallStore;

/// Tail side of a macro edge: (cluster, port rank).
type Payload = (u32, u32);

/// Pointer width charged for every stored reference or counter.
const WORD: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForestError {
    #[error("stale or invalid handle")]
    StaleHandle,
    #[error("edges lie in different trees")]
    NotConnected,
    #[error("linking these corners would create a cycle")]
    WouldCreateCycle,
    #[error("vertex is not isolated")]
    NotIsolated,
    #[error("corner handle does not name an isolated vertex")]
    BadCorner,
    #[error("degree {degree} would exceed the bound {bound}")]
    DegreeExceeded { degree: usize, bound: usize },
    #[error("unknown vertex {0}")]
    UnknownLabel(Label),
    #[error("no edge ({0},{1})")]
    UnknownEdge(Label, Label),
    #[error("vertex {0} already exists")]
    DuplicateLabel(Label),
    #[error("finger budget of {budget} exhausted")]
    FingerBudget { budget: usize },
    #[error("unknown finger")]
    UnknownFinger,
    #[error("finger target no longer exists")]
    FingerLost,
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("corrupt dump: {0}")]
    Corrupt(String),
}

impl From<MacroError> for ForestError {
    fn from(e: MacroError) -> Self {
        match e {
            MacroError::NotConnected => ForestError::NotConnected,
            _ => ForestError::StaleHandle,
        }
    }
}

pub type Result<T, E = ForestError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum EdgeLoc {
    Intra { cluster: u32, step: u32 },
    Macro(MacroId),
    Tiny { block: u32, tree: u32, step: u32 },
}

/// A directed edge: a step inside a cluster or tiny tree, or a macro edge,
/// stamped with the epoch it was issued under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EdgeHandle {
    loc: EdgeLoc,
    stamp: u32,
    era: u32,
}

/// A vertex, named by an edge leaving it, or a lone vertex in the tiny store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VertexHandle {
    Edge(EdgeHandle),
    Isolated { block: u32, tree: u32, stamp: u32, era: u32 },
}

/// Where a new edge is inserted: after an edge entering the vertex, or at an
/// isolated vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CornerHandle {
    After(EdgeHandle),
    At(VertexHandle),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FingerId(u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FingerTarget {
    Edge(EdgeHandle),
    Vertex(VertexHandle),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct FingerEntry {
    tail: Label,
    head: Option<Label>,
    target: Option<FingerTarget>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum NodeLoc {
    Cluster { cluster: u32, pre: u32 },
    Tiny { block: u32, tree: u32, pre: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct ClusterData {
    pub micro: Cluster<MacroId>,
    /// Side table: label of every node by preorder index.
    pub labels: Vec<Label>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub(crate) struct ClusterSlot {
    pub epoch: u32,
    pub data: Option<ClusterData>,
}

/// Work counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateStats {
    pub updates: u64,
    /// Vertices placed into rebuilt clusters or tiny trees by link/cut/vertex updates.
    pub rebuilt_vertices: u64,
    pub global_rebuilds: u64,
    pub global_rebuild_vertices: u64,
    pub absorbed_clusters: u64,
    pub decompositions: u64,
}

/// Bit counts per component. Everything except `bp_payload` is auxiliary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpaceReport {
    pub vertices: usize,
    /// Two parentheses per vertex.
    pub bp_payload: usize,
    /// Parentheses of clone nodes.
    pub clone_bp: usize,
    pub ports: usize,
    /// Navigation works by table-driven scans; only the shared byte tables count.
    pub rank_select: usize,
    pub mappings: usize,
    pub macro_tree: usize,
    pub small_store: usize,
    pub fingers: usize,
    pub cluster_table: usize,
    pub fixed: usize,
}

impl SpaceReport {
    pub fn auxiliary(&self) -> usize {
        self.clone_bp
            + self.ports
            + self.rank_select
            + self.mappings
            + self.macro_tree
            + self.small_store
            + self.fingers
            + self.cluster_table
            + self.fixed
    }

    pub fn total(&self) -> usize {
        self.bp_payload + self.auxiliary()
    }
}

/// A cluster that breaks its size bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SizeViolation {
    pub cluster: u32,
    pub size: usize,
    pub tree_size: usize,
}

/// Per-cluster summary for reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClusterInfo {
    pub id: u32,
    pub nodes: usize,
    pub ports: usize,
    pub tree_size: usize,
}

/// Distance along the tour, combining in-cluster steps with a macro jump.
pub fn combine(pre: u64, post: u64, macro_distance: u64, macro_weight: u64) -> u64 {
    pre + post + macro_distance + macro_weight
}

#[derive(Clone, Debug)]
pub struct CompactForest {
    epsilon: f64,
    mode: Mode,
    degree_bound: usize,
    params: ForestParams,
    n: usize,
    n0: usize,
    era: u32,
    clusters: Vec<ClusterSlot>,
    free_clusters: Vec<u32>,
    mac: MacroForest<Payload>,
    small: SmallStore,
    labels: HashMap<Label, NodeLoc>,
    fingers: Vec<Option<FingerEntry>>,
    finger_count: usize,
    stats: UpdateStats,
}

enum Pos {
    Flat { key: (u8, u32, u32), step: u64, total: u64 },
    Mac { m: MacroId, j: u64 },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum TreeKey {
    Tour(u32),
    Cluster(u32),
    Tiny(u32, u32),
}

impl CompactForest {
    /// Encodes `f`. In bounded mode the degree bound is the larger of the
    /// forest's maximum degree and 2.
    pub fn new(f: &EmbeddedForest, epsilon: f64, mode: Mode) -> Result<Self> {
        let d = f.max_degree().max(2);
        let params = ForestParams::new(f.vertex_count().max(2), epsilon, mode, d)?;
        let mut cf = Self::empty(params, epsilon, mode, d, f.vertex_count(), 0);
        cf.load(f, None)?;
        Ok(cf)
    }

    /// Encodes `f` with explicit thresholds and, optionally, a fixed
    /// assignment of vertices to clusters (each group must be connected).
    pub fn with_params(f: &EmbeddedForest, params: ForestParams, groups: Option<&[Vec<Label>]>) -> Result<Self> {
        let d = params.d.max(f.max_degree()).max(2);
        let mut cf = Self::empty(params, params.epsilon, params.mode, d, f.vertex_count(), 0);
        let assign = groups.map(|g| {
            g.iter()
                .enumerate()
                .flat_map(|(i, vs)| vs.iter().map(move |&v| (v, i as u32)))
                .collect::<HashMap<Label, u32>>()
        });
        cf.load(f, assign.as_ref())?;
        Ok(cf)
    }

    fn empty(params: ForestParams, epsilon: f64, mode: Mode, d: usize, n: usize, era: u32) -> Self {
        let cap = params.upper.max(2 * params.tiny);
        Self {
            epsilon,
            mode,
            degree_bound: d,
            params,
            n,
            n0: n.max(1),
            era,
            clusters: Vec::new(),
            free_clusters: Vec::new(),
            mac: MacroForest::new(),
            small: SmallStore::new(cap),
            labels: HashMap::new(),
            fingers: Vec::new(),
            finger_count: 0,
            stats: UpdateStats::default(),
        }
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn stats(&self) -> UpdateStats {
        self.stats
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.iter().filter(|c| c.data.is_some()).count()
    }

    pub fn macro_edge_count(&self) -> usize {
        self.mac.edge_count()
    }

    pub fn false_edge_count(&self) -> usize {
        self.mac.live_edges().filter(|&m| self.mac.kind(m) == Ok(EdgeKind::False)).count() / 2
    }

    // ----- internal access -------------------------------------------------

    fn data(&self, c: u32) -> &ClusterData {
        self.clusters[c as usize].data.as_ref().expect("live cluster")
    }

    fn micro(&self, c: u32) -> &Cluster<MacroId> {
        &self.data(c).micro
    }

    fn pay(&self, m: MacroId) -> Payload {
        self.mac.payload(m).expect("live macro edge")
    }

    fn rev(&self, m: MacroId) -> MacroId {
        self.mac.reverse(m).expect("live macro edge")
    }

    fn is_true(&self, m: MacroId) -> bool {
        self.mac.kind(m).expect("live macro edge") == EdgeKind::True
    }

    fn handle(&self, loc: EdgeLoc) -> EdgeHandle {
        let stamp = match loc {
            EdgeLoc::Intra { cluster, .. } => self.clusters[cluster as usize].epoch,
            EdgeLoc::Macro(_) => 0,
            EdgeLoc::Tiny { block, .. } => self.small.blocks[block as usize].epoch,
        };
        EdgeHandle { loc, stamp, era: self.era }
    }

    fn valid_loc(&self, e: EdgeHandle) -> bool {
        if e.era != self.era {
            return false;
        }
        match e.loc {
            EdgeLoc::Intra { cluster, step } => match self.clusters.get(cluster as usize) {
                Some(ClusterSlot { epoch, data: Some(d) }) => {
                    *epoch == e.stamp && step >= 1 && (step as usize) <= d.micro.zero_count()
                }
                _ => false,
            },
            EdgeLoc::Macro(m) => self.mac.is_valid(m) && self.is_true(m),
            EdgeLoc::Tiny { block, tree, step } => {
                self.small.valid(block, tree, e.stamp)
                    && step >= 1
                    && (step as usize) <= 2 * (self.small.node_count(block, tree) - 1)
            }
        }
    }

    fn check(&self, e: EdgeHandle) -> Result<EdgeLoc> {
        if self.valid_loc(e) {
            Ok(e.loc)
        } else {
            Err(ForestError::StaleHandle)
        }
    }

    pub fn is_valid(&self, e: EdgeHandle) -> bool {
        self.valid_loc(e)
    }

    // ----- tour navigation -------------------------------------------------

    /// Continue after leaving cluster `c` at port `r`.
    fn leave(&self, c: u32, r: usize) -> EdgeLoc {
        let m = self.micro(c).port_key(r);
        if self.is_true(m) {
            EdgeLoc::Macro(m)
        } else {
            self.arrive(m)
        }
    }

    /// The step after macro edge `m`, skipping false edges.
    fn arrive(&self, mut m: MacroId) -> EdgeLoc {
        loop {
            let (c, r) = self.pay(self.rev(m));
            let cl = self.micro(c);
            match cl.port_step(r as usize, Dir::Fwd) {
                Local::Zero(k) => return EdgeLoc::Intra { cluster: c, step: k as u32 },
                Local::Port(r2) => {
                    let m2 = cl.port_key(r2);
                    if self.is_true(m2) {
                        return EdgeLoc::Macro(m2);
                    }
                    m = m2;
                }
            }
        }
    }

    /// The step before the traversal passes port `r` of cluster `c`.
    fn enter_before(&self, mut c: u32, mut r: usize) -> EdgeLoc {
        loop {
            let m = self.rev(self.micro(c).port_key(r));
            if self.is_true(m) {
                return EdgeLoc::Macro(m);
            }
            let (c2, r2) = self.pay(m);
            match self.micro(c2).port_step(r2 as usize, Dir::Back) {
                Local::Zero(k) => return EdgeLoc::Intra { cluster: c2, step: k as u32 },
                Local::Port(r3) => {
                    c = c2;
                    r = r3;
                }
            }
        }
    }

    fn succ_loc(&self, loc: EdgeLoc) -> EdgeLoc {
        match loc {
            EdgeLoc::Intra { cluster, step } => match self.micro(cluster).local_step(step as usize, Dir::Fwd) {
                Local::Zero(k) => EdgeLoc::Intra { cluster, step: k as u32 },
                Local::Port(r) => self.leave(cluster, r),
            },
            EdgeLoc::Macro(m) => self.arrive(m),
            EdgeLoc::Tiny { block, tree, step } => {
                let z = 2 * (self.small.node_count(block, tree) as u32 - 1);
                EdgeLoc::Tiny { block, tree, step: step % z + 1 }
            }
        }
    }

    fn pred_loc(&self, loc: EdgeLoc) -> EdgeLoc {
        match loc {
            EdgeLoc::Intra { cluster, step } => match self.micro(cluster).local_step(step as usize, Dir::Back) {
                Local::Zero(k) => EdgeLoc::Intra { cluster, step: k as u32 },
                Local::Port(r) => self.enter_before(cluster, r),
            },
            EdgeLoc::Macro(m) => {
                let (c, r) = self.pay(m);
                match self.micro(c).port_step(r as usize, Dir::Back) {
                    Local::Zero(k) => EdgeLoc::Intra { cluster: c, step: k as u32 },
                    Local::Port(r2) => self.enter_before(c, r2),
                }
            }
            EdgeLoc::Tiny { block, tree, step } => {
                let z = 2 * (self.small.node_count(block, tree) as u32 - 1);
                EdgeLoc::Tiny { block, tree, step: if step == 1 { z } else { step - 1 } }
            }
        }
    }

    fn reverse_loc(&self, loc: EdgeLoc) -> EdgeLoc {
        match loc {
            EdgeLoc::Intra { cluster, step } => {
                EdgeLoc::Intra { cluster, step: self.micro(cluster).reverse_step(step as usize) as u32 }
            }
            EdgeLoc::Macro(m) => EdgeLoc::Macro(self.rev(m)),
            EdgeLoc::Tiny { block, tree, step } => {
                let cl = self.small.cluster(block, tree);
                EdgeLoc::Tiny { block, tree, step: cl.reverse_step(step as usize) as u32 }
            }
        }
    }

    pub fn reverse(&self, e: EdgeHandle) -> Result<EdgeHandle> {
        let loc = self.check(e)?;
        Ok(self.handle(self.reverse_loc(loc)))
    }

    pub fn tour_succ(&self, e: EdgeHandle) -> Result<EdgeHandle> {
        let loc = self.check(e)?;
        Ok(self.handle(self.succ_loc(loc)))
    }

    pub fn tour_pred(&self, e: EdgeHandle) -> Result<EdgeHandle> {
        let loc = self.check(e)?;
        Ok(self.handle(self.pred_loc(loc)))
    }

    /// For an inter-cluster edge, the in-cluster steps taken since the tour
    /// last crossed an inter-cluster edge; `None` for edges inside a cluster.
    pub fn corner_weight_before(&self, e: EdgeHandle) -> Result<Option<u64>> {
        let EdgeLoc::Macro(mut m) = self.check(e)? else { return Ok(None) };
        let mut w = 0;
        loop {
            w += self.mac.pre_weight(m)?;
            m = self.mac.pred(m)?;
            if self.is_true(m) {
                return Ok(Some(w));
            }
        }
    }

    pub fn tour_pred_succ(&self, e: EdgeHandle) -> Result<(EdgeHandle, EdgeHandle)> {
        let loc = self.check(e)?;
        Ok((self.handle(self.pred_loc(loc)), self.handle(self.succ_loc(loc))))
    }

    /// Next edge counter-clockwise around the tail of `e`.
    pub fn rotation_succ(&self, e: EdgeHandle) -> Result<EdgeHandle> {
        let loc = self.check(e)?;
        Ok(self.handle(self.succ_loc(self.reverse_loc(loc))))
    }

    /// Previous edge counter-clockwise around the tail of `e`.
    pub fn rotation_pred(&self, e: EdgeHandle) -> Result<EdgeHandle> {
        let loc = self.check(e)?;
        Ok(self.handle(self.reverse_loc(self.pred_loc(loc))))
    }

    pub fn rotation_pred_succ(&self, e: EdgeHandle) -> Result<(EdgeHandle, EdgeHandle)> {
        Ok((self.rotation_pred(e)?, self.rotation_succ(e)?))
    }

    // ----- distances -------------------------------------------------------

    fn pos(&self, loc: EdgeLoc) -> Pos {
        match loc {
            EdgeLoc::Intra { cluster, step } => {
                let cl = self.micro(cluster);
                match cl.steps_to_port(step as usize, Dir::Back) {
                    Some((r, s)) => Pos::Mac { m: self.rev(cl.port_key(r)), j: s as u64 + 1 },
                    None => Pos::Flat { key: (0, cluster, 0), step: step as u64, total: cl.zero_count() as u64 },
                }
            }
            EdgeLoc::Macro(m) => Pos::Mac { m, j: 0 },
            EdgeLoc::Tiny { block, tree, step } => Pos::Flat {
                key: (1, block, tree),
                step: step as u64,
                total: 2 * (self.small.node_count(block, tree) as u64 - 1),
            },
        }
    }

    fn tour_len(&self, m: MacroId) -> u64 {
        let t = self.mac.tour_total(m).expect("live macro edge");
        t.steps + t.weight
    }

    /// Number of edges strictly between `e` and `e2` going forward along the tour;
    /// 0 when they coincide.
    pub fn tour_distance(&self, e: EdgeHandle, e2: EdgeHandle) -> Result<u64> {
        let (a, b) = (self.check(e)?, self.check(e2)?);
        if a == b {
            return Ok(0);
        }
        let diff = match (self.pos(a), self.pos(b)) {
            (Pos::Flat { key: ka, step: sa, total }, Pos::Flat { key: kb, step: sb, .. }) if ka == kb => {
                (sb + total - sa) % total
            }
            (Pos::Mac { m: ma, j: ja }, Pos::Mac { m: mb, j: jb }) => {
                if !self.mac.same_tour(ma, mb)? {
                    return Err(ForestError::NotConnected);
                }
                let len = self.tour_len(ma);
                let off = if ma == mb {
                    0
                } else {
                    let dw = self.mac.distance_and_weight(ma, mb)?;
                    dw.steps + dw.weight
                };
                (off + jb + len - ja % len) % len
            }
            _ => return Err(ForestError::NotConnected),
        };
        Ok(diff - 1)
    }

    /// The zero `j` places after arriving through macro edge `m`.
    fn zero_after(&self, m: MacroId, j: u64) -> EdgeLoc {
        let (c, r) = self.pay(self.rev(m));
        let cl = self.micro(c);
        let z = cl.zero_count() as u64;
        let mut k = cl.ports().rank0(cl.port_position(r as usize)) as u64 + j;
        if k > z {
            k -= z;
        }
        EdgeLoc::Intra { cluster: c, step: k as u32 }
    }

    /// The edge `t` steps after `e` (cyclically).
    pub fn edge_at_distance(&self, e: EdgeHandle, t: u64) -> Result<EdgeHandle> {
        let loc = self.check(e)?;
        if t == 0 {
            return Ok(e);
        }
        let out = match self.pos(loc) {
            Pos::Flat { step, total, .. } => {
                let k = (step - 1 + t % total) % total + 1;
                match loc {
                    EdgeLoc::Intra { cluster, .. } => EdgeLoc::Intra { cluster, step: k as u32 },
                    EdgeLoc::Tiny { block, tree, .. } => EdgeLoc::Tiny { block, tree, step: k as u32 },
                    EdgeLoc::Macro(_) => unreachable!("macro edges have macro positions"),
                }
            }
            Pos::Mac { m, j } => {
                let len = self.tour_len(m);
                let mut x = (j + t % len) % len;
                if x == 0 {
                    x = len;
                }
                let (hit, v) = self.mac.edge_at_combined(m, x, SearchMode::AtLeast)?;
                let pre = self.mac.pre_weight(hit)?;
                let steps = if self.is_true(hit) { 1 } else { 0 };
                let before = v - pre - steps;
                if x <= before + pre {
                    let p = self.mac.pred(hit)?;
                    self.zero_after(p, x - before)
                } else {
                    EdgeLoc::Macro(hit)
                }
            }
        };
        Ok(self.handle(out))
    }

    /// Vertex counts of the two trees left by removing `e`: (tail side, head side).
    pub fn side_sizes(&self, e: EdgeHandle) -> Result<(u64, u64)> {
        let r = self.reverse(e)?;
        let head = self.tour_distance(e, r)? / 2 + 1;
        let tail = self.tour_distance(r, e)? / 2 + 1;
        Ok((tail, head))
    }

    fn tree_key(&self, loc: EdgeLoc) -> TreeKey {
        match loc {
            EdgeLoc::Intra { cluster, .. } => {
                let cl = self.micro(cluster);
                if cl.port_count() > 0 {
                    TreeKey::Tour(self.mac.tour_root(cl.port_key(0)).expect("live"))
                } else {
                    TreeKey::Cluster(cluster)
                }
            }
            EdgeLoc::Macro(m) => TreeKey::Tour(self.mac.tour_root(m).expect("live")),
            EdgeLoc::Tiny { block, tree, .. } => TreeKey::Tiny(block, tree),
        }
    }

    /// Whether two edges lie in the same tree.
    pub fn same_tree(&self, e: EdgeHandle, e2: EdgeHandle) -> Result<bool> {
        let (a, b) = (self.check(e)?, self.check(e2)?);
        Ok(self.tree_key(a) == self.tree_key(b))
    }

    // ----- labels (side dictionary) ----------------------------------------

    fn head_label_loc(&self, loc: EdgeLoc) -> Label {
        match loc {
            EdgeLoc::Intra { cluster, step } => {
                let d = self.data(cluster);
                d.labels[d.micro.step_endpoints(step as usize).1 as usize]
            }
            EdgeLoc::Macro(m) => {
                let (c, r) = self.pay(self.rev(m));
                let d = self.data(c);
                d.labels[d.micro.port_node(r as usize) as usize]
            }
            EdgeLoc::Tiny { block, tree, step } => {
                let cl = self.small.cluster(block, tree);
                self.small.labels(block, tree)[cl.step_endpoints(step as usize).1 as usize]
            }
        }
    }

    pub fn head_label(&self, e: EdgeHandle) -> Result<Label> {
        Ok(self.head_label_loc(self.check(e)?))
    }

    pub fn tail_label(&self, e: EdgeHandle) -> Result<Label> {
        let loc = self.check(e)?;
        Ok(self.head_label_loc(self.reverse_loc(loc)))
    }

    pub fn edge_labels(&self, e: EdgeHandle) -> Result<DirectedEdge> {
        Ok(DirectedEdge::new(self.tail_label(e)?, self.head_label(e)?))
    }

    pub fn vertex_label(&self, v: VertexHandle) -> Result<Label> {
        match v {
            VertexHandle::Edge(e) => self.tail_label(e),
            VertexHandle::Isolated { block, tree, stamp, era } => {
                if era != self.era || !self.small.valid(block, tree, stamp) || self.small.node_count(block, tree) != 1 {
                    return Err(ForestError::StaleHandle);
                }
                Ok(self.small.labels(block, tree)[0])
            }
        }
    }

    pub fn contains_vertex(&self, v: Label) -> bool {
        self.labels.contains_key(&v)
    }

    /// All labels, unordered.
    pub fn vertex_labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.labels.keys().copied()
    }

    /// An edge leaving cluster node `pre`, following false edges out of
    /// clones that hold no true edge.
    fn out_edge(&self, mut c: u32, mut pre: u32) -> EdgeLoc {
        loop {
            let cl = self.micro(c);
            if pre != 0 {
                return EdgeLoc::Intra { cluster: c, step: cl.bp().find_match(cl.bp().open_of(pre as usize)) as u32 };
            }
            let mut hop = None;
            for s in cl.rotation(0) {
                match s {
                    Local::Zero(k) => return EdgeLoc::Intra { cluster: c, step: k as u32 },
                    Local::Port(r) => {
                        let m = cl.port_key(r);
                        if self.is_true(m) {
                            return EdgeLoc::Macro(m);
                        }
                        hop.get_or_insert(m);
                    }
                }
            }
            let (c2, r2) = self.pay(self.rev(hop.expect("clone has an edge")));
            c = c2;
            pre = self.micro(c2).port_node(r2 as usize);
        }
    }

    pub fn vertex_of(&self, v: Label) -> Result<VertexHandle> {
        match *self.labels.get(&v).ok_or(ForestError::UnknownLabel(v))? {
            NodeLoc::Cluster { cluster, pre } => Ok(VertexHandle::Edge(self.handle(self.out_edge(cluster, pre)))),
            NodeLoc::Tiny { block, tree, pre } => {
                if self.small.node_count(block, tree) == 1 {
                    return Ok(VertexHandle::Isolated {
                        block,
                        tree,
                        stamp: self.small.blocks[block as usize].epoch,
                        era: self.era,
                    });
                }
                let step = if pre == 0 {
                    1
                } else {
                    let cl = self.small.cluster(block, tree);
                    cl.bp().find_match(cl.bp().open_of(pre as usize)) as u32
                };
                Ok(VertexHandle::Edge(self.handle(EdgeLoc::Tiny { block, tree, step })))
            }
        }
    }

    /// The directed edge `(u, v)`, found by walking both rotations in step.
    pub fn edge_of(&self, u: Label, v: Label) -> Result<EdgeHandle> {
        let missing = ForestError::UnknownEdge(u, v);
        let (VertexHandle::Edge(a0), VertexHandle::Edge(b0)) = (self.vertex_of(u)?, self.vertex_of(v)?) else {
            return Err(missing);
        };
        let (mut a, mut b) = (a0.loc, b0.loc);
        loop {
            if self.head_label_loc(a) == v {
                return Ok(self.handle(a));
            }
            if self.head_label_loc(b) == u {
                return Ok(self.handle(self.reverse_loc(b)));
            }
            a = self.succ_loc(self.reverse_loc(a));
            b = self.succ_loc(self.reverse_loc(b));
            if a == a0.loc || b == b0.loc {
                return Err(missing);
            }
        }
    }

    pub fn degree(&self, v: Label) -> Result<usize> {
        let VertexHandle::Edge(e) = self.vertex_of(v)? else {
            return Ok(0);
        };
        let mut d = 1;
        let mut x = self.succ_loc(self.reverse_loc(e.loc));
        while x != e.loc {
            d += 1;
            x = self.succ_loc(self.reverse_loc(x));
        }
        Ok(d)
    }

    /// Labels of the neighbours of `v` in counter-clockwise order.
    pub fn rotation_labels(&self, v: Label) -> Result<Vec<Label>> {
        let VertexHandle::Edge(e) = self.vertex_of(v)? else {
            return Ok(Vec::new());
        };
        let mut out = vec![self.head_label_loc(e.loc)];
        let mut x = self.succ_loc(self.reverse_loc(e.loc));
        while x != e.loc {
            out.push(self.head_label_loc(x));
            x = self.succ_loc(self.reverse_loc(x));
        }
        Ok(out)
    }

    pub fn corner_of(&self, c: Corner) -> Result<CornerHandle> {
        Ok(match c {
            Corner::After(e) => CornerHandle::After(self.edge_of(e.tail, e.head)?),
            Corner::Isolated(v) => CornerHandle::At(self.vertex_of(v)?),
        })
    }

    // ----- fingers ---------------------------------------------------------

    pub fn finger_budget(&self) -> usize {
        (4 * self.n / self.params.lower.max(1)).max(4)
    }

    pub fn finger_count(&self) -> usize {
        self.finger_count
    }

    fn finger_key(&self, t: FingerTarget) -> Result<(Label, Option<Label>)> {
        Ok(match t {
            FingerTarget::Edge(e) => (self.tail_label(e)?, Some(self.head_label(e)?)),
            FingerTarget::Vertex(v) => (self.vertex_label(v)?, None),
        })
    }

    pub fn register_finger(&mut self, t: FingerTarget) -> Result<FingerId> {
        let budget = self.finger_budget();
        if self.finger_count >= budget {
            return Err(ForestError::FingerBudget { budget });
        }
        let (tail, head) = self.finger_key(t)?;
        let entry = FingerEntry { tail, head, target: Some(t) };
        self.finger_count += 1;
        match self.fingers.iter().position(Option::is_none) {
            Some(i) => {
                self.fingers[i] = Some(entry);
                Ok(FingerId(i as u32))
            }
            None => {
                self.fingers.push(Some(entry));
                Ok(FingerId((self.fingers.len() - 1) as u32))
            }
        }
    }

    pub fn drop_finger(&mut self, id: FingerId) -> Result<()> {
        match self.fingers.get_mut(id.0 as usize) {
            Some(slot @ Some(_)) => {
                *slot = None;
                self.finger_count -= 1;
                Ok(())
            }
            _ => Err(ForestError::UnknownFinger),
        }
    }

    pub fn finger(&self, id: FingerId) -> Result<FingerTarget> {
        match self.fingers.get(id.0 as usize) {
            Some(Some(f)) => f.target.ok_or(ForestError::FingerLost),
            _ => Err(ForestError::UnknownFinger),
        }
    }

    fn target_valid(&self, t: FingerTarget) -> bool {
        match t {
            FingerTarget::Edge(e) => self.valid_loc(e),
            FingerTarget::Vertex(v) => self.vertex_label(v).is_ok(),
        }
    }

    fn remap_fingers(&mut self) {
        for i in 0..self.fingers.len() {
            let Some(f) = &self.fingers[i] else { continue };
            if f.target.is_some_and(|t| self.target_valid(t)) {
                // a vertex named by an edge must still leave that vertex
                if let Some(FingerTarget::Vertex(VertexHandle::Edge(e))) = f.target {
                    if self.tail_label(e).ok() == Some(f.tail) {
                        continue;
                    }
                } else {
                    continue;
                }
            }
            let target = match f.head {
                Some(h) => self.edge_of(f.tail, h).ok().map(FingerTarget::Edge),
                None => self.vertex_of(f.tail).ok().map(FingerTarget::Vertex),
            };
            self.fingers[i].as_mut().unwrap().target = target;
        }
    }

    // ----- reports ---------------------------------------------------------

    fn tree_size_of(&self, c: u32) -> usize {
        let cl = self.micro(c);
        if cl.port_count() == 0 {
            cl.node_count()
        } else {
            (self.mac.tour_total(cl.port_key(0)).expect("live").steps / 2 + 1) as usize
        }
    }

    pub fn clusters(&self) -> Vec<ClusterInfo> {
        (0..self.clusters.len() as u32)
            .filter(|&c| self.clusters[c as usize].data.is_some())
            .map(|c| ClusterInfo {
                id: c,
                nodes: self.micro(c).node_count(),
                ports: self.micro(c).port_count(),
                tree_size: self.tree_size_of(c),
            })
            .collect()
    }

    /// Clusters above `upper`, or below `lower` inside a tree larger than `upper`.
    pub fn audit(&self) -> Vec<SizeViolation> {
        self.clusters()
            .into_iter()
            .filter(|c| c.nodes > self.params.upper || (c.tree_size > self.params.upper && c.nodes < self.params.lower))
            .map(|c| SizeViolation { cluster: c.id, size: c.nodes, tree_size: c.tree_size })
            .collect()
    }

    /// Number of trees held in the tiny store.
    pub fn tiny_tree_count(&self) -> usize {
        self.small.blocks.iter().map(|b| b.tree_count()).sum()
    }

    pub fn space_report(&self) -> SpaceReport {
        let mut r = SpaceReport { vertices: self.n, ..SpaceReport::default() };
        let mut cluster_nodes = 0;
        let mut live = 0;
        for slot in &self.clusters {
            if let Some(d) = &slot.data {
                live += 1;
                cluster_nodes += d.micro.node_count();
                r.ports += d.micro.ports_bits();
                r.mappings += d.micro.mapping_bits(WORD);
            }
        }
        let small_nodes = self.small.payload_bits() / 2;
        let originals = self.n - small_nodes;
        r.bp_payload = 2 * self.n;
        r.clone_bp = 2 * (cluster_nodes - originals);
        r.rank_select = 3 * 256 * 8;
        // payload on the reverse edge of each macro edge: cluster id and port rank
        r.macro_tree = self.mac.space_bits(WORD) + self.mac.edge_count() * 2 * bits_for(self.clusters.len().max(2));
        r.small_store = self.small.aux_bits();
        r.fingers = self.fingers.len() + self.finger_count * (2 * WORD);
        r.cluster_table = self.clusters.len() * (32 + WORD) + live * WORD + self.free_clusters.len() * 32;
        r.fixed = 16 * WORD;
        r
    }

    /// Deep consistency check between the cluster, macro and label layers.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        self.mac.check_invariants()?;
        let mut ports_seen = 0usize;
        for (c, slot) in self.clusters.iter().enumerate() {
            let Some(d) = &slot.data else { continue };
            let cl = &d.micro;
            if d.labels.len() != cl.node_count() {
                return Err(format!("cluster {c}: label table size"));
            }
            let w = cl.corner_weights();
            let k = cl.port_count();
            ports_seen += k;
            for r in 0..k {
                let m = cl.port_key(r);
                if !self.mac.is_valid(m) {
                    return Err(format!("cluster {c} port {r}: dead macro edge"));
                }
                if self.pay(m) != (c as u32, r as u32) {
                    return Err(format!("cluster {c} port {r}: payload {:?}", self.pay(m)));
                }
                let back = self.rev(m);
                let next = self.mac.succ(back).unwrap();
                if next != cl.port_key((r + 1) % k) {
                    return Err(format!("cluster {c} port {r}: tour order differs from ports"));
                }
                if self.mac.pre_weight(next).unwrap() != w[r] {
                    return Err(format!("cluster {c} port {r}: weight {} vs {}", self.mac.pre_weight(next).unwrap(), w[r]));
                }
            }
        }
        if ports_seen != self.mac.edge_count() {
            return Err(format!("{} ports for {} macro edges", ports_seen, self.mac.edge_count()));
        }
        let mut count = 0;
        for (&v, &loc) in &self.labels {
            count += 1;
            let l = match loc {
                NodeLoc::Cluster { cluster, pre } => self
                    .clusters
                    .get(cluster as usize)
                    .and_then(|s| s.data.as_ref())
                    .and_then(|d| d.labels.get(pre as usize).copied()),
                NodeLoc::Tiny { block, tree, pre } => self
                    .small
                    .blocks
                    .get(block as usize)
                    .filter(|b| (tree as usize) < b.tree_count())
                    .and_then(|_| self.small.labels(block, tree).get(pre as usize).copied()),
            };
            if l != Some(v) {
                return Err(format!("label {v} maps to {loc:?}"));
            }
        }
        if count != self.n {
            return Err(format!("{count} labels for {} vertices", self.n));
        }
        Ok(())
    }
}
