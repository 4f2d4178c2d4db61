//! Euler tours as circular doubly-linked lists of directed edges with
//! weighted corners, indexed by an augmented balanced search tree.
//!
//! Every edge carries the weight of the corner *before* it in the tour, so
//! an edge together with its preceding corner forms one indexed element.
//! The corner after edge `e` is therefore stored on `succ(e)`. False edges
//! (joining two clones of one vertex) contribute zero tour steps.
//!
//! Sums "from `e` to `e2`" range over the elements in `(e, e2]`: the
//! true-edge crossings after `e` up to and including `e2`, and the corners
//! passed on the way.

mod treap;

use std::collections::HashMap;

use crate::oracle::{DirectedEdge, EmbeddedForest, Label};
pub use treap::{EdgeKind, Metric};
use treap::{Agg, Treap, NIL};

/// Stable handle to a directed macro edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacroId {
    idx: u32,
    generation: u32,
}

impl MacroId {
    pub fn index(self) -> u32 {
        self.idx
    }

    pub fn generation(self) -> u32 {
        self.generation
    }

    pub(crate) fn from_parts(idx: u32, generation: u32) -> Self {
        Self { idx, generation }
    }
}

/// Handle to a tour with no edges (a lone vertex) and its single corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IsolatedId {
    idx: u32,
    generation: u32,
}

/// The corner after a directed edge, or the sole corner of a lone vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CornerRef {
    After(MacroId),
    Isolated(IsolatedId),
}

/// A whole tour: any of its edges, or a lone vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TourRef {
    Edge(MacroId),
    Isolated(IsolatedId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    /// Farthest reach not exceeding the target.
    AtMost,
    /// Nearest reach not below the target.
    AtLeast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct StepsAndWeight {
    pub steps: u64,
    pub weight: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Side {
    pub vertices: u64,
    pub weight: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SideSummary {
    pub tail_side: Side,
    pub head_side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MacroError {
    #[error("stale or unknown macro handle")]
    StaleHandle,
    #[error("edges lie in different tours")]
    NotConnected,
    #[error("corners lie in the same tour; inserting would create a cycle")]
    WouldCreateCycle,
    #[error("target {target} exceeds the tour total {total}")]
    Exhausted { target: u64, total: u64 },
    #[error("corner weight overflow")]
    WeightOverflow,
    #[error("corners belong to different vertices")]
    DistinctVertices,
    #[error("split needs two distinct corners")]
    SameCorner,
}

/// A sequence of edges held by one treap root. Linear until closed into a tour.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Seq(u32);

impl Seq {
    pub const EMPTY: Seq = Seq(NIL);

    pub fn is_empty(self) -> bool {
        self.0 == NIL
    }
}

#[derive(Clone, Debug)]
pub struct DumpEdge<P> {
    pub idx: u32,
    pub rev: u32,
    pub kind: EdgeKind,
    pub pre_weight: u64,
    pub payload: P,
}

#[derive(Clone, Debug)]
pub struct MacroDump<P> {
    pub slots: Vec<(u32, bool)>,
    pub free: Vec<u32>,
    pub tours: Vec<Vec<DumpEdge<P>>>,
}

/// A forest of macro-trees sharing one arena.
#[derive(Clone, Debug, Default)]
pub struct MacroForest<P = ()> {
    treap: Treap<P>,
    isolated: Vec<(u64, u32, bool)>,
    isolated_free: Vec<u32>,
}

impl<P: Copy + Default> MacroForest<P> {
    pub fn new() -> Self {
        Self { treap: Treap::default(), isolated: Vec::new(), isolated_free: Vec::new() }
    }

    // ----- handles -------------------------------------------------------

    fn id(&self, x: u32) -> MacroId {
        MacroId { idx: x, generation: self.treap.nodes[x as usize].generation }
    }

    fn ix(&self, m: MacroId) -> Result<u32, MacroError> {
        match self.treap.nodes.get(m.idx as usize) {
            Some(n) if n.alive && n.generation == m.generation => Ok(m.idx),
            _ => Err(MacroError::StaleHandle),
        }
    }

    pub fn is_valid(&self, m: MacroId) -> bool {
        self.ix(m).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.treap.live_count()
    }

    pub fn new_isolated(&mut self, weight: u64) -> IsolatedId {
        match self.isolated_free.pop() {
            Some(i) => {
                let e = &mut self.isolated[i as usize];
                e.1 = e.1.wrapping_add(1);
                e.0 = weight;
                e.2 = true;
                IsolatedId { idx: i, generation: e.1 }
            }
            None => {
                self.isolated.push((weight, 0, true));
                IsolatedId { idx: (self.isolated.len() - 1) as u32, generation: 0 }
            }
        }
    }

    fn iso(&self, v: IsolatedId) -> Result<u32, MacroError> {
        match self.isolated.get(v.idx as usize) {
            Some(&(_, g, true)) if g == v.generation => Ok(v.idx),
            _ => Err(MacroError::StaleHandle),
        }
    }

    fn drop_isolated(&mut self, v: IsolatedId) -> Result<u64, MacroError> {
        let i = self.iso(v)?;
        self.isolated[i as usize].2 = false;
        self.isolated_free.push(i);
        Ok(self.isolated[i as usize].0)
    }

    // ----- element accessors ---------------------------------------------

    pub fn reverse(&self, m: MacroId) -> Result<MacroId, MacroError> {
        let x = self.ix(m)?;
        Ok(self.id(self.treap.nodes[x as usize].rev))
    }

    pub fn kind(&self, m: MacroId) -> Result<EdgeKind, MacroError> {
        Ok(self.treap.nodes[self.ix(m)? as usize].kind)
    }

    pub fn payload(&self, m: MacroId) -> Result<P, MacroError> {
        Ok(self.treap.nodes[self.ix(m)? as usize].payload)
    }

    pub fn set_payload(&mut self, m: MacroId, p: P) -> Result<(), MacroError> {
        let x = self.ix(m)?;
        self.treap.nodes[x as usize].payload = p;
        Ok(())
    }

    pub fn succ(&self, m: MacroId) -> Result<MacroId, MacroError> {
        Ok(self.id(self.treap.nodes[self.ix(m)? as usize].succ))
    }

    pub fn pred(&self, m: MacroId) -> Result<MacroId, MacroError> {
        Ok(self.id(self.treap.nodes[self.ix(m)? as usize].pred))
    }

    /// Weight of the corner before `m`.
    pub fn pre_weight(&self, m: MacroId) -> Result<u64, MacroError> {
        Ok(self.treap.nodes[self.ix(m)? as usize].pre_weight)
    }

    /// Weight of the corner after `m`.
    pub fn corner_weight(&self, c: CornerRef) -> Result<u64, MacroError> {
        match c {
            CornerRef::After(m) => self.pre_weight(self.succ(m)?),
            CornerRef::Isolated(v) => Ok(self.isolated[self.iso(v)? as usize].0),
        }
    }

    /// Nearest strict successor that is a true edge (walks the list).
    pub fn true_succ(&self, m: MacroId) -> Result<Option<MacroId>, MacroError> {
        let start = self.ix(m)?;
        let mut x = self.treap.nodes[start as usize].succ;
        loop {
            if self.treap.nodes[x as usize].kind == EdgeKind::True {
                return Ok(Some(self.id(x)));
            }
            if x == start {
                return Ok(None);
            }
            x = self.treap.nodes[x as usize].succ;
        }
    }

    /// Nearest strict predecessor that is a true edge (walks the list).
    pub fn true_pred(&self, m: MacroId) -> Result<Option<MacroId>, MacroError> {
        let start = self.ix(m)?;
        let mut x = self.treap.nodes[start as usize].pred;
        loop {
            if self.treap.nodes[x as usize].kind == EdgeKind::True {
                return Ok(Some(self.id(x)));
            }
            if x == start {
                return Ok(None);
            }
            x = self.treap.nodes[x as usize].pred;
        }
    }

    pub fn same_tour(&self, a: MacroId, b: MacroId) -> Result<bool, MacroError> {
        Ok(self.treap.root_of(self.ix(a)?) == self.treap.root_of(self.ix(b)?))
    }

    /// Tour totals: true-edge crossings and corner weights.
    pub fn tour_total(&self, m: MacroId) -> Result<StepsAndWeight, MacroError> {
        let a = self.treap.agg(self.treap.root_of(self.ix(m)?));
        Ok(StepsAndWeight { steps: a.steps, weight: a.weight })
    }

    pub fn tour_size(&self, m: MacroId) -> Result<usize, MacroError> {
        Ok(self.treap.agg(self.treap.root_of(self.ix(m)?)).size as usize)
    }

    /// The tour containing `m`, starting at `m`.
    pub fn tour_edges(&self, m: MacroId) -> Result<Vec<MacroId>, MacroError> {
        let start = self.ix(m)?;
        let mut out = vec![m];
        let mut x = self.treap.nodes[start as usize].succ;
        while x != start {
            out.push(self.id(x));
            x = self.treap.nodes[x as usize].succ;
        }
        Ok(out)
    }

    /// One representative edge per tour.
    pub fn tour_representatives(&self) -> Vec<MacroId> {
        (0..self.treap.nodes.len() as u32)
            .filter(|&x| {
                let n = &self.treap.nodes[x as usize];
                n.alive && n.parent == NIL
            })
            .map(|x| self.id(x))
            .collect()
    }

    // ----- tour operations ------------------------------------------------

    /// Predecessor and successor in the tour.
    pub fn tour_neighbors(&self, m: MacroId) -> Result<(MacroId, MacroId), MacroError> {
        Ok((self.pred(m)?, self.succ(m)?))
    }

    /// Counter-clockwise neighbours of `(u, v)` among the edges leaving `u`.
    pub fn rotation_neighbors(&self, m: MacroId) -> Result<(MacroId, MacroId), MacroError> {
        let succ = self.succ(self.reverse(m)?)?;
        let pred = self.reverse(self.pred(m)?)?;
        Ok((pred, succ))
    }

    /// Metric accumulated over `(m, m2]`; zero when equal.
    fn range_sum(&self, x: u32, y: u32) -> Agg {
        if x == y {
            return Agg::default();
        }
        let root = self.treap.root_of(x);
        let total = self.treap.agg(root);
        let px = self.treap.prefix_through(x);
        let py = self.treap.prefix_through(y);
        let sub = |a: u64, b: u64, t: u64| if b >= a && py.size > px.size { b - a } else { t - a + b };
        Agg {
            size: if py.size > px.size { py.size - px.size } else { total.size - px.size + py.size },
            steps: sub(px.steps, py.steps, total.steps),
            weight: sub(px.weight, py.weight, total.weight),
        }
    }

    /// First element `x` in cyclic order after `m` (ending at `m` itself
    /// with the full total) whose accumulated metric reaches `target >= 1`.
    fn reach(&self, x: u32, metric: Metric, target: u64) -> Option<(u32, u64)> {
        let root = self.treap.root_of(x);
        let total = self.treap.agg(root).get(metric);
        if target > total {
            return None;
        }
        let base = self.treap.prefix_through(x).get(metric);
        if let Some((y, v)) = self.treap.find_first_reaching(root, metric, base + target) {
            if self.treap.index_of(y) > self.treap.index_of(x) {
                return Some((y, v - base));
            }
        }
        let (y, v) = self
            .treap
            .find_first_reaching(root, metric, base + target - total)
            .expect("target within total");
        Some((y, total - base + v))
    }

    fn search(&self, m: MacroId, metric: Metric, t: u64, mode: SearchMode) -> Result<(MacroId, u64), MacroError> {
        let x = self.ix(m)?;
        if t == 0 {
            return Ok((m, 0));
        }
        let total = self.treap.agg(self.treap.root_of(x)).get(metric);
        match mode {
            SearchMode::AtLeast => match self.reach(x, metric, t) {
                Some((y, v)) => Ok((self.id(y), v)),
                None => Err(MacroError::Exhausted { target: t, total }),
            },
            SearchMode::AtMost => {
                let best = match self.reach(x, metric, t + 1) {
                    None => total,
                    Some((y, v)) => {
                        let n = &self.treap.nodes[y as usize];
                        v - n.own().get(metric)
                    }
                };
                if best == 0 {
                    return Ok((m, 0));
                }
                let (y, v) = self.reach(x, metric, best).expect("value attained");
                Ok((self.id(y), v))
            }
        }
    }

    /// The edge exactly `t` true-edge crossings after `m`, wrapping around.
    pub fn edge_at_distance(&self, m: MacroId, t: u64) -> Result<MacroId, MacroError> {
        let total = self.tour_total(m)?.steps;
        if total == 0 {
            return Ok(m);
        }
        let t = t % total;
        Ok(self.search(m, Metric::Distance, t, SearchMode::AtLeast)?.0)
    }

    /// The edge whose corner-weight sum from `m` is closest to `t` in the given direction.
    pub fn edge_at_weight(&self, m: MacroId, t: u64, mode: SearchMode) -> Result<MacroId, MacroError> {
        Ok(self.search(m, Metric::Weight, t, mode)?.0)
    }

    /// As [`edge_at_weight`](Self::edge_at_weight) with crossings plus corner weights,
    /// also returning the reached value.
    pub fn edge_at_combined(&self, m: MacroId, t: u64, mode: SearchMode) -> Result<(MacroId, u64), MacroError> {
        self.search(m, Metric::Combined, t, mode)
    }

    /// True-edge crossings and corner weight from `m` to `m2`.
    pub fn distance_and_weight(&self, m: MacroId, m2: MacroId) -> Result<StepsAndWeight, MacroError> {
        let (x, y) = (self.ix(m)?, self.ix(m2)?);
        if self.treap.root_of(x) != self.treap.root_of(y) {
            return Err(MacroError::NotConnected);
        }
        let a = self.range_sum(x, y);
        Ok(StepsAndWeight { steps: a.steps, weight: a.weight })
    }

    /// Vertex counts and corner weights on either side of the undirected edge of `m`.
    pub fn side_summary(&self, m: MacroId) -> Result<SideSummary, MacroError> {
        let x = self.ix(m)?;
        let r = self.treap.nodes[x as usize].rev;
        let side = |from: u32, to: u32| {
            let a = self.range_sum(from, to);
            let inner = a.steps - self.treap.nodes[to as usize].kind.steps();
            Side { vertices: inner / 2 + 1, weight: a.weight }
        };
        Ok(SideSummary { head_side: side(x, r), tail_side: side(r, x) })
    }

    fn check_total_fits(&self, root: u32, delta: u64) -> Result<(), MacroError> {
        let a = self.treap.agg(root);
        a.weight
            .checked_add(delta)
            .and_then(|w| w.checked_add(a.steps))
            .map(|_| ())
            .ok_or(MacroError::WeightOverflow)
    }

    pub(crate) fn set_pre_weight_ix(&mut self, x: u32, w: u64) -> Result<(), MacroError> {
        let old = self.treap.nodes[x as usize].pre_weight;
        if w > old {
            self.check_total_fits(self.treap.root_of(x), w - old)?;
        }
        self.treap.nodes[x as usize].pre_weight = w;
        self.treap.refresh_path(x);
        Ok(())
    }

    /// Sets the weight of the corner after `c`.
    pub fn set_corner_weight(&mut self, c: CornerRef, w: u64) -> Result<(), MacroError> {
        match c {
            CornerRef::After(m) => {
                let x = self.ix(m)?;
                let s = self.treap.nodes[x as usize].succ;
                self.set_pre_weight_ix(s, w)
            }
            CornerRef::Isolated(v) => {
                let i = self.iso(v)?;
                self.isolated[i as usize].0 = w;
                Ok(())
            }
        }
    }

    /// Sets the weight of the corner before `m`.
    pub fn set_pre_weight(&mut self, m: MacroId, w: u64) -> Result<(), MacroError> {
        let x = self.ix(m)?;
        self.set_pre_weight_ix(x, w)
    }

    /// Removes `m` and its reverse, splitting the tour in two. The fused
    /// corner on the tail side gets `w_tail`, the one on the head side `w_head`.
    /// Returns `(tail tour, head tour)`.
    pub fn delete_edge(&mut self, m: MacroId, w_tail: u64, w_head: u64) -> Result<(TourRef, TourRef), MacroError> {
        let x = self.ix(m)?;
        let r = self.treap.nodes[x as usize].rev;
        let (inner, outer) = self.cut_pair(x, r);
        let tail = self.finish_piece(outer, w_tail)?;
        let head = self.finish_piece(inner, w_head)?;
        Ok((tail, head))
    }

    /// Rotates so the tour reads `[x, inner.., r, outer..]`, frees `x`, `r`,
    /// closes both remaining pieces and returns them.
    fn cut_pair(&mut self, x: u32, r: u32) -> (Seq, Seq) {
        let root = self.rotate_to_front(x);
        let kr = self.treap.index_of(r);
        let (a, outer) = self.treap.split(root, kr + 1);
        let (xs, rest) = self.treap.split(a, 1);
        let (inner, rs) = self.treap.split(rest, kr - 1);
        debug_assert_eq!((xs, rs), (x, r));
        self.treap.release(x);
        self.treap.release(r);
        self.close(inner);
        self.close(outer);
        (Seq(inner), Seq(outer))
    }

    fn finish_piece(&mut self, s: Seq, w: u64) -> Result<TourRef, MacroError> {
        if s.is_empty() {
            return Ok(TourRef::Isolated(self.new_isolated(w)));
        }
        let f = self.treap.first(s.0);
        self.set_pre_weight_ix(f, w)?;
        Ok(TourRef::Edge(self.id(f)))
    }

    /// Cyclic sequence starting right after corner `c`, consuming a lone vertex.
    fn open_at(&mut self, c: CornerRef) -> Result<Seq, MacroError> {
        match c {
            CornerRef::After(m) => {
                let x = self.ix(m)?;
                let s = self.treap.nodes[x as usize].succ;
                Ok(Seq(self.rotate_to_front(s)))
            }
            CornerRef::Isolated(v) => {
                self.drop_isolated(v)?;
                Ok(Seq::EMPTY)
            }
        }
    }

    fn tour_key(&self, c: CornerRef) -> Result<(u8, u32), MacroError> {
        Ok(match c {
            CornerRef::After(m) => (0, self.treap.root_of(self.ix(m)?)),
            CornerRef::Isolated(v) => (1, self.iso(v)?),
        })
    }

    /// Inserts an edge from the vertex of `c1` to the vertex of `c2`,
    /// bisecting both corners. Weights are assigned in tour order starting
    /// before the new edge: `[before new, after new, before reverse, after reverse]`;
    /// when the two sides of a bisected lone-vertex corner coincide their weights add.
    pub fn insert_edge(
        &mut self,
        c1: CornerRef,
        c2: CornerRef,
        weights: [u64; 4],
        kind: EdgeKind,
        payloads: (P, P),
    ) -> Result<MacroId, MacroError> {
        let (k1, k2) = (self.tour_key(c1)?, self.tour_key(c2)?);
        if k1 == k2 {
            return Err(MacroError::WouldCreateCycle);
        }
        let sum = weights.iter().try_fold(0u64, |a, &w| a.checked_add(w)).ok_or(MacroError::WeightOverflow)?;
        let tot = |c: CornerRef| -> u64 {
            match c {
                CornerRef::After(m) => {
                    let a = self.treap.agg(self.treap.root_of(m.idx));
                    a.steps + a.weight
                }
                CornerRef::Isolated(_) => 0,
            }
        };
        tot(c1)
            .checked_add(tot(c2))
            .and_then(|t| t.checked_add(sum + 2))
            .ok_or(MacroError::WeightOverflow)?;
        let s1 = self.open_at(c1)?;
        let s2 = self.open_at(c2)?;
        let (m, r) = self.new_pair_ix(kind, payloads.0, payloads.1);
        let [w1, w2, w3, w4] = weights;
        self.place_pair(m, r, s2, s1, [w1, w2, w3, w4]);
        Ok(self.id(m))
    }

    /// Builds the tour `[m, a.., r, b..]` with pre-weights
    /// `m: w0 (+w3 if b empty)`, `first(a): w1`, `r: w2 (+w1 if a empty)`, `first(b): w3`.
    fn place_pair(&mut self, m: u32, r: u32, a: Seq, b: Seq, w: [u64; 4]) {
        let mut pm = w[0];
        let mut pr = w[2];
        if a.is_empty() {
            pr += w[1];
        } else {
            let f = self.treap.first(a.0);
            self.treap.nodes[f as usize].pre_weight = w[1];
            self.treap.refresh_path(f);
        }
        if b.is_empty() {
            pm += w[3];
        } else {
            let f = self.treap.first(b.0);
            self.treap.nodes[f as usize].pre_weight = w[3];
            self.treap.refresh_path(f);
        }
        self.treap.nodes[m as usize].pre_weight = pm;
        self.treap.refresh_path(m);
        self.treap.nodes[r as usize].pre_weight = pr;
        self.treap.refresh_path(r);
        self.join_cyclic(&[Seq(m), a, Seq(r), b]);
    }

    /// Removes `m` and its reverse, fusing the endpoints; each removed
    /// element's corner weight moves onto the element that now follows it.
    pub fn contract_edge(&mut self, m: MacroId) -> Result<TourRef, MacroError> {
        let x = self.ix(m)?;
        let r = self.treap.nodes[x as usize].rev;
        let a = self.treap.nodes[x as usize].pre_weight;
        let c = self.treap.nodes[r as usize].pre_weight;
        let (inner, outer) = self.cut_pair(x, r);
        // cut_pair closed inner and outer separately; glue them back.
        let fi = (!inner.is_empty()).then(|| self.treap.first(inner.0));
        let fo = (!outer.is_empty()).then(|| self.treap.first(outer.0));
        let Some(root) = self.join_cyclic(&[inner, outer]) else {
            return Ok(TourRef::Isolated(self.new_isolated(a + c)));
        };
        let first_after_x = fi.or(fo).unwrap();
        let first_after_r = fo.or(fi).unwrap();
        let wa = self.treap.nodes[first_after_x as usize].pre_weight + a;
        self.treap.nodes[first_after_x as usize].pre_weight = wa;
        self.treap.refresh_path(first_after_x);
        let wc = self.treap.nodes[first_after_r as usize].pre_weight + c;
        self.treap.nodes[first_after_r as usize].pre_weight = wc;
        self.treap.refresh_path(first_after_r);
        Ok(TourRef::Edge(self.id(self.treap.first(root))))
    }

    /// Splits the vertex of corners `c1` and `c2` by a new edge inserted at
    /// both corners, so the tour reads `[.. e1, new, succ(e1) .. e2, rev, succ(e2) ..]`.
    /// Weights go to `[before new, after new, before rev, after rev]`.
    pub fn split_vertex(
        &mut self,
        c1: CornerRef,
        c2: CornerRef,
        kind: EdgeKind,
        weights: [u64; 4],
        payloads: (P, P),
    ) -> Result<MacroId, MacroError> {
        let (CornerRef::After(e1), CornerRef::After(e2)) = (c1, c2) else {
            return Err(MacroError::SameCorner);
        };
        let (x1, x2) = (self.ix(e1)?, self.ix(e2)?);
        if x1 == x2 {
            return Err(MacroError::SameCorner);
        }
        // walk the edges entering the vertex of c1
        let mut y = x1;
        loop {
            let s = self.treap.nodes[y as usize].succ;
            y = self.treap.nodes[s as usize].rev;
            if y == x2 {
                break;
            }
            if y == x1 {
                return Err(MacroError::DistinctVertices);
            }
        }
        let sum = weights.iter().try_fold(0u64, |a, &w| a.checked_add(w)).ok_or(MacroError::WeightOverflow)?;
        self.check_total_fits(self.treap.root_of(x1), sum + 2)?;
        let s1 = self.treap.nodes[x1 as usize].succ;
        let root = self.rotate_to_front(s1);
        let k2 = self.treap.index_of(x2);
        let (a, b) = self.treap.split(root, k2 + 1);
        let (m, r) = self.new_pair_ix(kind, payloads.0, payloads.1);
        self.place_pair(m, r, Seq(a), Seq(b), weights);
        Ok(self.id(m))
    }

    // ----- sequence plumbing ---------------------------------------------

    pub(crate) fn new_pair_ix(&mut self, kind: EdgeKind, p: P, q: P) -> (u32, u32) {
        let m = self.treap.alloc(kind, 0, p);
        let r = self.treap.alloc(kind, 0, q);
        self.treap.nodes[m as usize].rev = r;
        self.treap.nodes[r as usize].rev = m;
        (m, r)
    }

    /// Creates a detached edge pair, each a singleton sequence.
    pub(crate) fn new_pair(&mut self, kind: EdgeKind, p: P, q: P) -> (MacroId, MacroId) {
        let (m, r) = self.new_pair_ix(kind, p, q);
        (self.id(m), self.id(r))
    }

    pub(crate) fn singleton(&self, m: MacroId) -> Seq {
        debug_assert!(self.treap.nodes[m.idx as usize].parent == NIL);
        Seq(m.idx)
    }

    fn rotate_to_front(&mut self, x: u32) -> u32 {
        let root = self.treap.root_of(x);
        let k = self.treap.index_of(x);
        if k == 0 {
            return root;
        }
        let (a, b) = self.treap.split(root, k);
        self.treap.merge(b, a)
    }

    fn close(&mut self, root: u32) {
        if root == NIL {
            return;
        }
        let (f, l) = (self.treap.first(root), self.treap.last(root));
        self.treap.nodes[l as usize].succ = f;
        self.treap.nodes[f as usize].pred = l;
    }

    /// Concatenates sequences into one closed tour; `None` if all are empty.
    pub(crate) fn join_cyclic(&mut self, parts: &[Seq]) -> Option<u32> {
        let mut root = NIL;
        for p in parts.iter().filter(|p| !p.is_empty()) {
            if root != NIL {
                let l = self.treap.last(root);
                let f = self.treap.first(p.0);
                self.treap.nodes[l as usize].succ = f;
                self.treap.nodes[f as usize].pred = l;
            }
            root = self.treap.merge(root, p.0);
        }
        if root == NIL {
            return None;
        }
        self.close(root);
        Some(root)
    }

    /// Cuts the cyclic range `[first ..= last]` out of its tour as a linear
    /// sequence; the remainder is closed again.
    pub(crate) fn extract_range(&mut self, first: MacroId, last: MacroId) -> Result<Seq, MacroError> {
        let (f, l) = (self.ix(first)?, self.ix(last)?);
        let root = self.rotate_to_front(f);
        let k = self.treap.index_of(l);
        let (seg, rest) = self.treap.split(root, k + 1);
        self.close(rest);
        Ok(Seq(seg))
    }

    /// Frees every edge of a detached sequence.
    pub(crate) fn free_seq(&mut self, s: Seq) {
        if s.is_empty() {
            return;
        }
        for x in self.treap.in_order(s.0) {
            let n = &mut self.treap.nodes[x as usize];
            n.left = NIL;
            n.right = NIL;
            n.parent = NIL;
            self.treap.release(x);
        }
    }

    /// Sum over elements strictly inside the cyclic range from `first` to `last`,
    /// including both ends.
    pub(crate) fn range_inclusive(&self, first: MacroId, last: MacroId) -> Result<StepsAndWeight, MacroError> {
        let (f, l) = (self.ix(first)?, self.ix(last)?);
        let mut a = self.range_sum(f, l);
        if f == l {
            a = Agg::default();
        }
        let own = self.treap.nodes[f as usize].own();
        Ok(StepsAndWeight { steps: a.steps + own.steps, weight: a.weight + own.weight })
    }

    pub(crate) fn live_edges(&self) -> impl Iterator<Item = MacroId> + '_ {
        (0..self.treap.nodes.len() as u32)
            .filter(|&x| self.treap.nodes[x as usize].alive)
            .map(|x| self.id(x))
    }

    /// Frees the whole closed tour containing `m`.
    pub(crate) fn free_tour(&mut self, m: MacroId) -> Result<(), MacroError> {
        let x = self.ix(m)?;
        let root = self.treap.root_of(x);
        self.free_seq(Seq(root));
        Ok(())
    }

    /// Root element index of the tour holding `m`; equal roots mean one tour.
    pub(crate) fn tour_root(&self, m: MacroId) -> Result<u32, MacroError> {
        Ok(self.treap.root_of(self.ix(m)?))
    }

    /// Flat snapshot of the arena: per-slot generations, the free list and
    /// every tour in index order.
    pub(crate) fn export(&self) -> MacroDump<P> {
        let mut slots = Vec::with_capacity(self.treap.nodes.len());
        let mut tours = Vec::new();
        for (x, n) in self.treap.nodes.iter().enumerate() {
            slots.push((n.generation, n.alive));
            if n.alive && n.parent == NIL {
                tours.push(
                    self.treap
                        .in_order(x as u32)
                        .into_iter()
                        .map(|y| {
                            let m = &self.treap.nodes[y as usize];
                            DumpEdge { idx: y, rev: m.rev, kind: m.kind, pre_weight: m.pre_weight, payload: m.payload }
                        })
                        .collect(),
                );
            }
        }
        MacroDump { slots, free: self.treap.free_list().to_vec(), tours }
    }

    pub(crate) fn restore(d: &MacroDump<P>) -> Result<Self, String> {
        let mut mf = Self::new();
        mf.treap.restore_slots(&d.slots, &d.free)?;
        for tour in &d.tours {
            let mut parts = Vec::with_capacity(tour.len());
            for e in tour {
                let x = e.idx as usize;
                if x >= d.slots.len() || !d.slots[x].1 || e.rev as usize >= d.slots.len() {
                    return Err(format!("bad macro edge {}", e.idx));
                }
                mf.treap.revive(e.idx, e.kind, e.pre_weight, e.payload);
                mf.treap.nodes[x].rev = e.rev;
                parts.push(Seq(e.idx));
            }
            mf.join_cyclic(&parts);
        }
        mf.check_invariants()?;
        Ok(mf)
    }

    /// Approximate footprint: one `lg`-width field per stored pointer/counter.
    pub fn space_bits(&self, word_bits: usize) -> usize {
        // succ, pred, rev, left, right, parent, priority, size, steps, weight,
        // pre-weight, kind+alive; payload is counted by the owner.
        self.treap.live_count() * (11 * word_bits + 2)
    }

    /// Checks list/index agreement, reverse involution and aggregate soundness.
    pub fn check_invariants(&self) -> Result<(), String> {
        for x in 0..self.treap.nodes.len() as u32 {
            let n = &self.treap.nodes[x as usize];
            if !n.alive {
                continue;
            }
            let r = n.rev;
            if r == NIL || self.treap.nodes[r as usize].rev != x {
                return Err(format!("reverse involution broken at {x}"));
            }
            if self.treap.nodes[r as usize].kind != n.kind {
                return Err(format!("kind asymmetric at {x}"));
            }
            if self.treap.nodes[n.succ as usize].pred != x || self.treap.nodes[n.pred as usize].succ != x {
                return Err(format!("succ/pred mismatch at {x}"));
            }
            if n.parent == NIL {
                self.treap.check_subtree(x)?;
                let order = self.treap.in_order(x);
                for (i, &y) in order.iter().enumerate() {
                    let next = order[(i + 1) % order.len()];
                    if self.treap.nodes[y as usize].succ != next {
                        return Err(format!("list order differs from index order at {y}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Builds macro-trees for every tree of an explicit forest, with
    /// `corner_weight(e)` giving the weight of the corner after `e`.
    /// Isolated vertices become lone-vertex tours of weight 0.
    pub fn from_embedded(
        forest: &EmbeddedForest,
        corner_weight: impl Fn(DirectedEdge) -> u64,
    ) -> (Self, HashMap<DirectedEdge, MacroId>, HashMap<Label, IsolatedId>) {
        let mut mf = Self::new();
        let mut ids = HashMap::new();
        let mut lone = HashMap::new();
        for e in forest.directed_edges() {
            if e.tail < e.head {
                let (m, r) = mf.new_pair(EdgeKind::True, P::default(), P::default());
                ids.insert(e, m);
                ids.insert(e.reverse(), r);
            }
        }
        for tree in forest.components() {
            let v = tree[0];
            let rot = forest.rotation(v).expect("vertex");
            if rot.is_empty() {
                lone.insert(v, mf.new_isolated(0));
                continue;
            }
            let tour = forest.euler_tour(DirectedEdge::new(v, rot[0])).expect("edge");
            let n = tour.len();
            let parts: Vec<Seq> = tour.iter().map(|e| Seq(ids[e].idx)).collect();
            for (i, e) in tour.iter().enumerate() {
                let prev = tour[(i + n - 1) % n];
                mf.treap.nodes[ids[e].idx as usize].pre_weight = corner_weight(prev);
                mf.treap.refresh_path(ids[e].idx);
            }
            mf.join_cyclic(&parts);
        }
        (mf, ids, lone)
    }
}

#[cfg(test)]
mod tests;
