//! Pointer-based reference model of embedded forests and their Euler tours.
//!
//! Rotations are plain vectors scanned linearly. This is the ground truth
//! the compact structure is checked against; it has no performance goals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rustc_hash::FxHashMap;

/// External vertex identifier.
pub type Label = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DirectedEdge {
    pub tail: Label,
    pub head: Label,
}

impl DirectedEdge {
    pub fn new(tail: Label, head: Label) -> Self {
        Self { tail, head }
    }

    pub fn reverse(self) -> Self {
        Self { tail: self.head, head: self.tail }
    }
}

impl std::fmt::Display for DirectedEdge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.tail, self.head)
    }
}

/// A corner: the gap after directed edge `e` at `head(e)`, or the single
/// corner of an isolated vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corner {
    After(DirectedEdge),
    Isolated(Label),
}

impl Corner {
    pub fn vertex(self) -> Label {
        match self {
            Corner::After(e) => e.head,
            Corner::Isolated(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("unknown vertex {0}")]
    UnknownVertex(Label),
    #[error("unknown edge {0}")]
    UnknownEdge(DirectedEdge),
    #[error("edges {0} and {1} are in different trees")]
    NotConnected(DirectedEdge, DirectedEdge),
    #[error("vertex {0} is not isolated")]
    NotIsolated(Label),
    #[error("vertex {0} already exists")]
    DuplicateVertex(Label),
    #[error("linking {0} and {1} would create a cycle")]
    WouldCreateCycle(Label, Label),
    #[error("corner {0:?} is not isolated but given as such")]
    BadCorner(Corner),
    #[error("edge symmetry violated between {0} and {1}")]
    Asymmetric(Label, Label),
    #[error("graph contains a cycle or repeated edge")]
    NotAForest,
    #[error("vertex {0} is not assigned to a cluster")]
    Unassigned(Label),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Explicit embedded forest: per-vertex counter-clockwise rotations.
/// Equality compares rotations as cyclic orders.
#[derive(Clone, Debug, Default)]
pub struct EmbeddedForest {
    rotations: BTreeMap<Label, Vec<Label>>,
}

fn same_cycle(a: &[Label], b: &[Label]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    if a.is_empty() {
        return true;
    }
    match b.iter().position(|&x| x == a[0]) {
        Some(k) => a.iter().enumerate().all(|(i, &x)| b[(k + i) % b.len()] == x),
        None => false,
    }
}

impl PartialEq for EmbeddedForest {
    fn eq(&self, other: &Self) -> bool {
        self.rotations.len() == other.rotations.len()
            && self
                .rotations
                .iter()
                .zip(&other.rotations)
                .all(|((u, a), (v, b))| u == v && same_cycle(a, b))
    }
}

impl Eq for EmbeddedForest {}

impl EmbeddedForest {
    pub fn new() -> Self {
        Self::default()
    }

    /// `n` isolated vertices labelled `0..n`.
    pub fn with_vertices(n: usize) -> Self {
        Self {
            rotations: (0..n as Label).map(|v| (v, Vec::new())).collect(),
        }
    }

    /// Builds from explicit rotations and checks symmetry and acyclicity.
    pub fn from_rotations(rotations: BTreeMap<Label, Vec<Label>>) -> Result<Self, OracleError> {
        let f = Self { rotations };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let mut undirected = 0usize;
        for (&u, rot) in &self.rotations {
            let distinct: BTreeSet<_> = rot.iter().collect();
            if distinct.len() != rot.len() || rot.contains(&u) {
                return Err(OracleError::NotAForest);
            }
            for &v in rot {
                let back = self.rotations.get(&v).ok_or(OracleError::UnknownVertex(v))?;
                if back.iter().filter(|&&x| x == u).count() != 1 {
                    return Err(OracleError::Asymmetric(u, v));
                }
            }
            undirected += rot.len();
        }
        undirected /= 2;
        // visited-set walk: the parent-tracking walk assumes acyclicity
        let mut seen = BTreeSet::new();
        let mut comps = 0;
        for &r in self.rotations.keys() {
            if !seen.insert(r) {
                continue;
            }
            comps += 1;
            let mut stack = vec![r];
            while let Some(u) = stack.pop() {
                for &w in &self.rotations[&u] {
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
        }
        if undirected + comps != self.rotations.len() {
            return Err(OracleError::NotAForest);
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.rotations.len()
    }

    pub fn edge_count(&self) -> usize {
        self.rotations.values().map(Vec::len).sum::<usize>() / 2
    }

    pub fn vertices(&self) -> impl Iterator<Item = Label> + '_ {
        self.rotations.keys().copied()
    }

    pub fn contains_vertex(&self, v: Label) -> bool {
        self.rotations.contains_key(&v)
    }

    pub fn rotation(&self, v: Label) -> Result<&[Label], OracleError> {
        self.rotations.get(&v).map(Vec::as_slice).ok_or(OracleError::UnknownVertex(v))
    }

    pub fn degree(&self, v: Label) -> Result<usize, OracleError> {
        Ok(self.rotation(v)?.len())
    }

    pub fn max_degree(&self) -> usize {
        self.rotations.values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, e: DirectedEdge) -> bool {
        self.rotations.get(&e.tail).is_some_and(|r| r.contains(&e.head))
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = DirectedEdge> + '_ {
        self.rotations
            .iter()
            .flat_map(|(&u, rot)| rot.iter().map(move |&v| DirectedEdge::new(u, v)))
    }

    fn position(&self, at: Label, nbr: Label) -> Result<usize, OracleError> {
        self.rotation(at)?
            .iter()
            .position(|&x| x == nbr)
            .ok_or(OracleError::UnknownEdge(DirectedEdge::new(nbr, at)))
    }

    fn check_edge(&self, e: DirectedEdge) -> Result<(), OracleError> {
        if self.has_edge(e) {
            Ok(())
        } else {
            Err(OracleError::UnknownEdge(e))
        }
    }

    /// `(v, w)` where `w` follows `u` counter-clockwise around `v`, for `e = (u, v)`.
    pub fn tour_successor(&self, e: DirectedEdge) -> Result<DirectedEdge, OracleError> {
        self.check_edge(e)?;
        let rot = self.rotation(e.head)?;
        let i = self.position(e.head, e.tail)?;
        Ok(DirectedEdge::new(e.head, rot[(i + 1) % rot.len()]))
    }

    pub fn tour_predecessor(&self, e: DirectedEdge) -> Result<DirectedEdge, OracleError> {
        self.check_edge(e)?;
        let rot = self.rotation(e.tail)?;
        let i = self.position(e.tail, e.head)?;
        Ok(DirectedEdge::new(rot[(i + rot.len() - 1) % rot.len()], e.tail))
    }

    /// Counter-clockwise neighbours of `(u, v)` among the edges leaving `u`.
    pub fn rotation_neighbors(&self, e: DirectedEdge) -> Result<(DirectedEdge, DirectedEdge), OracleError> {
        self.check_edge(e)?;
        let rot = self.rotation(e.tail)?;
        let i = self.position(e.tail, e.head)?;
        let d = rot.len();
        Ok((
            DirectedEdge::new(e.tail, rot[(i + d - 1) % d]),
            DirectedEdge::new(e.tail, rot[(i + 1) % d]),
        ))
    }

    /// The cyclic tour starting at `e`.
    pub fn euler_tour(&self, e: DirectedEdge) -> Result<Vec<DirectedEdge>, OracleError> {
        self.check_edge(e)?;
        let mut tour = vec![e];
        let mut cur = self.tour_successor(e)?;
        while cur != e {
            tour.push(cur);
            cur = self.tour_successor(cur)?;
        }
        Ok(tour)
    }

    /// `succ^t(e)`.
    pub fn edge_at_distance(&self, e: DirectedEdge, t: u64) -> Result<DirectedEdge, OracleError> {
        let tour = self.euler_tour(e)?;
        Ok(tour[(t % tour.len() as u64) as usize])
    }

    /// Crossings strictly between `e` and `e2` going forward; zero when equal.
    pub fn tour_distance(&self, e: DirectedEdge, e2: DirectedEdge) -> Result<u64, OracleError> {
        let tour = self.euler_tour(e)?;
        self.check_edge(e2)?;
        if e == e2 {
            return Ok(0);
        }
        let j = tour.iter().position(|&x| x == e2).ok_or(OracleError::NotConnected(e, e2))?;
        Ok(j as u64 - 1)
    }

    /// Vertex counts on the tail side and the head side of `e`.
    pub fn side_sizes(&self, e: DirectedEdge) -> Result<(u64, u64), OracleError> {
        let head = self.tour_distance(e, e.reverse())? / 2 + 1;
        let tail = self.tour_distance(e.reverse(), e)? / 2 + 1;
        Ok((tail, head))
    }

    /// Vertices of the tree containing `v`, in ascending order.
    /// Calls `visit` on every vertex of the tree containing `v`, stopping early
    /// when it returns `false`. Tracks parents instead of a visited set.
    fn walk_tree(&self, v: Label, mut visit: impl FnMut(Label) -> bool) {
        let mut stack = vec![(v, v)];
        while let Some((u, parent)) = stack.pop() {
            if !visit(u) {
                return;
            }
            for &w in &self.rotations[&u] {
                if w != parent || u == parent {
                    stack.push((w, u));
                }
            }
        }
    }

    pub fn tree_of(&self, v: Label) -> Result<Vec<Label>, OracleError> {
        self.rotation(v)?;
        let mut out = Vec::new();
        self.walk_tree(v, |u| {
            out.push(u);
            true
        });
        out.sort_unstable();
        Ok(out)
    }

    pub fn connected(&self, u: Label, v: Label) -> Result<bool, OracleError> {
        self.rotation(u)?;
        self.rotation(v)?;
        let mut found = false;
        self.walk_tree(u, |x| {
            found = x == v;
            !found
        });
        Ok(found)
    }

    pub fn components(&self) -> Vec<Vec<Label>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &v in self.rotations.keys() {
            if seen.contains(&v) {
                continue;
            }
            let tree = self.tree_of(v).expect("known vertex");
            seen.extend(tree.iter().copied());
            out.push(tree);
        }
        out
    }

    pub fn add_vertex(&mut self, v: Label) -> Result<(), OracleError> {
        if self.rotations.contains_key(&v) {
            return Err(OracleError::DuplicateVertex(v));
        }
        self.rotations.insert(v, Vec::new());
        Ok(())
    }

    pub fn remove_vertex(&mut self, v: Label) -> Result<(), OracleError> {
        if self.degree(v)? != 0 {
            return Err(OracleError::NotIsolated(v));
        }
        self.rotations.remove(&v);
        Ok(())
    }

    fn corner_slot(&self, c: Corner) -> Result<(Label, usize), OracleError> {
        match c {
            Corner::After(e) => {
                self.check_edge(e)?;
                Ok((e.head, self.position(e.head, e.tail)? + 1))
            }
            Corner::Isolated(v) => {
                if self.degree(v)? != 0 {
                    return Err(OracleError::BadCorner(c));
                }
                Ok((v, 0))
            }
        }
    }

    /// Inserts edge `(u, v)` bisecting corner `c1` at `u` and `c2` at `v`.
    pub fn link(&mut self, c1: Corner, c2: Corner) -> Result<DirectedEdge, OracleError> {
        let (u, i) = self.corner_slot(c1)?;
        let (v, j) = self.corner_slot(c2)?;
        if self.connected(u, v)? {
            return Err(OracleError::WouldCreateCycle(u, v));
        }
        self.rotations.get_mut(&u).unwrap().insert(i, v);
        self.rotations.get_mut(&v).unwrap().insert(j, u);
        Ok(DirectedEdge::new(u, v))
    }

    pub fn cut(&mut self, e: DirectedEdge) -> Result<(), OracleError> {
        self.check_edge(e)?;
        let i = self.position(e.tail, e.head)?;
        self.rotations.get_mut(&e.tail).unwrap().remove(i);
        let j = self.position(e.head, e.tail)?;
        self.rotations.get_mut(&e.head).unwrap().remove(j);
        Ok(())
    }

    /// Intra-cluster step counts between consecutive inter-cluster crossings
    /// at `cluster`, in tour order, starting after the smallest edge that
    /// enters the cluster. Returns `(entering edge, weight)` pairs.
    pub fn corner_weights_around(
        &self,
        partition: &dyn Fn(Label) -> Option<u32>,
        cluster: u32,
    ) -> Result<Vec<(DirectedEdge, u64)>, OracleError> {
        let part = |v: Label| partition(v).ok_or(OracleError::Unassigned(v));
        let mut entering = Vec::new();
        for e in self.directed_edges() {
            if part(e.head)? == cluster && part(e.tail)? != cluster {
                entering.push(e);
            }
        }
        let Some(&start) = entering.iter().min() else {
            return Ok(Vec::new());
        };
        let tour = self.euler_tour(start)?;
        let mut out = Vec::new();
        let mut current: Option<(DirectedEdge, u64)> = None;
        for &e in &tour {
            let (ct, ch) = (part(e.tail)?, part(e.head)?);
            if ct != cluster && ch == cluster {
                current = Some((e, 0));
            } else if ct == cluster && ch == cluster {
                if let Some((_, w)) = current.as_mut() {
                    *w += 1;
                }
            } else if ct == cluster {
                if let Some(entry) = current.take() {
                    out.push(entry);
                }
            }
        }
        Ok(out)
    }

    /// Text format: `forest <n>` then `<vid>: <nbr> ...` per vertex.
    pub fn to_text(&self) -> String {
        let mut s = format!("forest {}\n", self.rotations.len());
        for (v, rot) in &self.rotations {
            let _ = write!(s, "{v}:");
            for w in rot {
                let _ = write!(s, " {w}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, OracleError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(OracleError::Parse { line: 1, msg: "empty input".into() })?;
        let n: usize = header
            .strip_prefix("forest")
            .and_then(|r| r.trim().parse().ok())
            .ok_or(OracleError::Parse { line: hline, msg: format!("expected `forest <n>`, got `{header}`") })?;
        let mut rotations = BTreeMap::new();
        for (line, l) in lines {
            let (vid, rest) = l
                .split_once(':')
                .ok_or(OracleError::Parse { line, msg: "expected `<vid>: <nbrs>`".into() })?;
            let vid: Label = vid
                .trim()
                .parse()
                .map_err(|_| OracleError::Parse { line, msg: format!("bad vertex id `{vid}`") })?;
            let nbrs = rest
                .split_whitespace()
                .map(|t| t.parse::<Label>().map_err(|_| OracleError::Parse { line, msg: format!("bad neighbour `{t}`") }))
                .collect::<Result<Vec<_>, _>>()?;
            if rotations.insert(vid, nbrs).is_some() {
                return Err(OracleError::Parse { line, msg: format!("vertex {vid} listed twice") });
            }
        }
        if rotations.len() != n {
            return Err(OracleError::Parse {
                line: hline,
                msg: format!("header declares {n} vertices, found {}", rotations.len()),
            });
        }
        Self::from_rotations(rotations)
    }
}

/// Snapshot of one tree's tour with positions, for repeated queries.
///
/// Building it costs one pass over the tree; it goes stale on any update.
#[derive(Clone, Debug)]
pub struct TourIndex {
    tour: Vec<DirectedEdge>,
    index: FxHashMap<DirectedEdge, usize>,
}

impl TourIndex {
    pub fn tour(&self) -> &[DirectedEdge] {
        &self.tour
    }

    pub fn len(&self) -> usize {
        self.tour.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tour.is_empty()
    }

    pub fn contains(&self, e: DirectedEdge) -> bool {
        self.index.contains_key(&e)
    }

    pub fn position(&self, e: DirectedEdge) -> Option<usize> {
        self.index.get(&e).copied()
    }

    pub fn successor(&self, e: DirectedEdge) -> Option<DirectedEdge> {
        let i = self.position(e)?;
        Some(self.tour[(i + 1) % self.tour.len()])
    }

    pub fn predecessor(&self, e: DirectedEdge) -> Option<DirectedEdge> {
        let i = self.position(e)?;
        Some(self.tour[(i + self.tour.len() - 1) % self.tour.len()])
    }

    pub fn at_distance(&self, e: DirectedEdge, t: u64) -> Option<DirectedEdge> {
        let i = self.position(e)? as u64;
        Some(self.tour[((i + t) % self.tour.len() as u64) as usize])
    }

    /// Same convention as [`EmbeddedForest::tour_distance`].
    pub fn distance(&self, e: DirectedEdge, e2: DirectedEdge) -> Option<u64> {
        let (i, j) = (self.position(e)?, self.position(e2)?);
        if i == j {
            return Some(0);
        }
        let n = self.tour.len();
        Some(((j + n - i) % n) as u64 - 1)
    }

    pub fn side_sizes(&self, e: DirectedEdge) -> Option<(u64, u64)> {
        let head = self.distance(e, e.reverse())? / 2 + 1;
        let tail = self.distance(e.reverse(), e)? / 2 + 1;
        Some((tail, head))
    }
}

impl EmbeddedForest {
    /// Tour of the tree containing `e` with a position index, in linear time.
    pub fn tour_index(&self, e: DirectedEdge) -> Result<TourIndex, OracleError> {
        self.check_edge(e)?;
        // dense copy of the tree: slot `off[v] + i` is the edge from local v to
        // its i-th neighbour, `to` the neighbour, `back` the reverse slot index
        let mut label = vec![e.tail];
        let mut off = vec![0usize];
        let mut deg = vec![0usize];
        let mut to: Vec<u32> = Vec::new();
        let mut back: Vec<u32> = Vec::new();
        let mut stack = vec![(0u32, u32::MAX, 0usize)];
        while let Some((v, parent, parent_slot)) = stack.pop() {
            let rot = &self.rotations[&label[v as usize]];
            let base = to.len();
            off[v as usize] = base;
            deg[v as usize] = rot.len();
            to.resize(base + rot.len(), 0);
            back.resize(base + rot.len(), 0);
            for (i, &w) in rot.iter().enumerate() {
                if parent != u32::MAX && w == label[parent as usize] {
                    to[base + i] = parent;
                    back[base + i] = parent_slot as u32;
                    back[parent_slot] = (base + i) as u32;
                } else {
                    let c = label.len() as u32;
                    label.push(w);
                    off.push(0);
                    deg.push(0);
                    to[base + i] = c;
                    stack.push((c, v, base + i));
                }
            }
        }
        let start = off[0] + self.position(e.tail, e.head)?;
        let mut tour = Vec::with_capacity(to.len());
        let mut index = FxHashMap::with_capacity_and_hasher(to.len(), Default::default());
        let mut s = start;
        loop {
            let (t, h) = (label[to[back[s] as usize] as usize], label[to[s] as usize]);
            let d = DirectedEdge::new(t, h);
            index.insert(d, tour.len());
            tour.push(d);
            let hv = to[s] as usize;
            let j = back[s] as usize - off[hv];
            s = off[hv] + (j + 1) % deg[hv];
            if s == start {
                break;
            }
        }
        Ok(TourIndex { tour, index })
    }
}
