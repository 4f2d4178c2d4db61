//! Recursive centroid partitioning of embedded trees into clusters.
//!
//! Bounded mode stops at `B = d·L + 1` vertices; unbounded mode stops at
//! `B = 3·L` and, when a vertex centroid leaves only small components,
//! splits the vertex into two clones joined by a false edge, cutting its
//! rotation where the two halves balance best. Here `L = ⌈lg^{1+ε} n⌉`.

use std::collections::HashMap;

use crate::oracle::{EmbeddedForest, Label};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Bounded,
    Unbounded,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bounded" => Ok(Mode::Bounded),
            "unbounded" => Ok(Mode::Unbounded),
            other => Err(format!("unknown mode `{other}` (expected bounded or unbounded)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Bounded => "bounded",
            Mode::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("vertex has degree {degree}, above the bound {bound}")]
    DegreeExceeded { degree: usize, bound: usize },
}

/// Size thresholds derived from `n`, `ε`, the mode and (bounded) the degree bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestParams {
    pub n: usize,
    pub epsilon: f64,
    pub mode: Mode,
    /// Degree bound; in unbounded mode only informative.
    pub d: usize,
    /// `⌈lg^{1+ε} n⌉`.
    pub lower: usize,
    /// `B`.
    pub upper: usize,
    /// Trees with fewer vertices than this live in the small-tree store.
    pub tiny: usize,
}

/// `⌈x⌉` for `x = log2(n)`, at least 1.
pub fn ceil_lg(n: usize) -> usize {
    let n = n.max(2);
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

impl ForestParams {
    pub fn new(n: usize, epsilon: f64, mode: Mode, d: usize) -> Result<Self, ClusterError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(ClusterError::BadEpsilon(epsilon));
        }
        let lg = (n.max(2) as f64).log2();
        // tolerate floating error on exact powers like 12^2
        let lower = ((lg.powf(1.0 + epsilon) - 1e-9).ceil() as usize).max(1);
        let d = d.max(2);
        let upper = match mode {
            Mode::Bounded => d * lower + 1,
            Mode::Unbounded => 3 * lower,
        };
        Ok(Self { n, epsilon, mode, d, lower, upper, tiny: ceil_lg(n).max(2) })
    }

    /// Explicit thresholds, for small hand-made fixtures.
    pub fn custom(lower: usize, upper: usize, tiny: usize, mode: Mode, d: usize) -> Self {
        Self { n: 0, epsilon: 1.0, mode, d, lower: lower.max(1), upper: upper.max(lower), tiny: tiny.max(2) }
    }
}

/// A rotation slot in a [`LocalTree`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    /// A true edge to another node.
    Node(u32),
    /// A false edge to a clone of the same vertex.
    Twin(u32),
    /// An edge leaving the local tree, identified by an opaque key.
    Ext(u32),
}

impl Slot {
    pub fn target(self) -> Option<u32> {
        match self {
            Slot::Node(y) | Slot::Twin(y) => Some(y),
            Slot::Ext(_) => None,
        }
    }
}

/// Adjacency with counter-clockwise rotations over nodes `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LocalTree {
    pub rot: Vec<Vec<Slot>>,
}

impl LocalTree {
    pub fn len(&self) -> usize {
        self.rot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rot.is_empty()
    }

    /// Nodes are numbered in ascending label order.
    pub fn from_forest(f: &EmbeddedForest) -> (Self, Vec<Label>) {
        let labels: Vec<Label> = f.vertices().collect();
        let idx: HashMap<Label, u32> = labels.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
        let rot = labels
            .iter()
            .map(|v| f.rotation(*v).unwrap().iter().map(|w| Slot::Node(idx[w])).collect())
            .collect();
        (Self { rot }, labels)
    }

    pub fn slot_index(&self, at: u32, s: Slot) -> Option<usize> {
        self.rot[at as usize].iter().position(|&x| x == s)
    }

    /// Index in `rot[y]` of the edge back to `x`.
    pub fn back_index(&self, x: u32, y: u32) -> usize {
        self.rot[y as usize]
            .iter()
            .position(|s| s.target() == Some(x))
            .expect("edges are symmetric")
    }

    /// Connected components over true and false edges, each in discovery order.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for s in 0..self.len() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s as u32];
            let mut i = 0;
            while i < comp.len() {
                let x = comp[i];
                i += 1;
                for slot in &self.rot[x as usize] {
                    if let Some(y) = slot.target() {
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
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Centroid {
    Edge(u32, u32),
    Vertex(u32),
}

/// Scratch space for DFS over a node subset.
struct Dfs {
    order: Vec<u32>,
    parent: Vec<u32>,
    size: Vec<u32>,
    pos: Vec<u32>,
}

const NONE: u32 = u32::MAX;

fn dfs(tree: &LocalTree, set: &[u32], member: &[u32], id: u32, scratch: &mut Dfs) {
    let root = *set.iter().min().unwrap();
    scratch.order.clear();
    scratch.parent[root as usize] = NONE;
    let mut stack = vec![root];
    while let Some(x) = stack.pop() {
        scratch.pos[x as usize] = scratch.order.len() as u32;
        scratch.order.push(x);
        // push in reverse so rotation order is visited first-to-last
        for s in tree.rot[x as usize].iter().rev() {
            if let Slot::Node(y) = *s {
                if member[y as usize] == id && y != scratch.parent[x as usize] {
                    scratch.parent[y as usize] = x;
                    stack.push(y);
                }
            }
        }
    }
    for &x in scratch.order.iter().rev() {
        let mut s = 1;
        for slot in &tree.rot[x as usize] {
            if let Slot::Node(y) = *slot {
                if member[y as usize] == id && y != scratch.parent[x as usize] {
                    s += scratch.size[y as usize];
                }
            }
        }
        scratch.size[x as usize] = s;
    }
}

fn centroid_of(tree: &LocalTree, member: &[u32], id: u32, sc: &Dfs) -> Centroid {
    let n = sc.order.len() as u32;
    for &c in &sc.order[1..] {
        if 2 * sc.size[c as usize] == n {
            return Centroid::Edge(sc.parent[c as usize], c);
        }
    }
    for &v in &sc.order {
        let mut worst = n - sc.size[v as usize];
        for s in &tree.rot[v as usize] {
            if let Slot::Node(y) = *s {
                if member[y as usize] == id && y != sc.parent[v as usize] {
                    worst = worst.max(sc.size[y as usize]);
                }
            }
        }
        if 2 * worst <= n {
            return Centroid::Vertex(v);
        }
    }
    unreachable!("every tree has a centroid")
}

/// A centroid edge (preferred) or vertex of the tree containing `start`,
/// ties broken by the lowest DFS index from the smallest node.
pub fn find_centroid(tree: &LocalTree, start: u32) -> Centroid {
    let comp = tree
        .components()
        .into_iter()
        .find(|c| c.contains(&start))
        .expect("start node exists");
    let mut member = vec![NONE; tree.len()];
    for &x in &comp {
        member[x as usize] = 0;
    }
    let mut sc = Dfs {
        order: Vec::new(),
        parent: vec![NONE; tree.len()],
        size: vec![0; tree.len()],
        pos: vec![0; tree.len()],
    };
    dfs(tree, &comp, &member, 0, &mut sc);
    centroid_of(tree, &member, 0, &sc)
}

/// Result of a decomposition: the tree with clones appended, each node's
/// original node, and the pieces.
#[derive(Clone, Debug)]
pub struct Partition {
    pub tree: LocalTree,
    pub origin: Vec<u32>,
    pub piece: Vec<u32>,
    pub pieces: Vec<Vec<u32>>,
}

impl Partition {
    pub fn false_edge_count(&self) -> usize {
        self.tree.rot.iter().flatten().filter(|s| matches!(s, Slot::Twin(_))).count() / 2
    }

    /// Undirected edges whose endpoints lie in different pieces.
    pub fn cross_edge_count(&self) -> usize {
        let mut c = 0;
        for (x, rot) in self.tree.rot.iter().enumerate() {
            for s in rot {
                if let Some(y) = s.target() {
                    if self.piece[x] != self.piece[y as usize] {
                        c += 1;
                    }
                }
            }
        }
        c / 2
    }
}

/// Splits every tree of `tree` into pieces of at most `params.upper` nodes.
/// Components that already fit are kept whole.
pub fn decompose(tree: &LocalTree, params: &ForestParams) -> Result<Partition, ClusterError> {
    let mut t = tree.clone();
    let n0 = t.len();
    let mut origin: Vec<u32> = (0..n0 as u32).collect();
    let mut member = vec![NONE; n0];
    let mut next_id = 0u32;
    let mut work = Vec::new();
    for comp in tree.components() {
        for &x in &comp {
            member[x as usize] = next_id;
        }
        work.push((next_id, comp));
        next_id += 1;
    }
    let mut sc = Dfs { order: Vec::new(), parent: vec![NONE; n0], size: vec![0; n0], pos: vec![0; n0] };
    let mut pieces = Vec::new();
    while let Some((id, set)) = work.pop() {
        if set.len() <= params.upper {
            pieces.push(set);
            continue;
        }
        dfs(&t, &set, &member, id, &mut sc);
        let n = set.len() as u32;
        // preorder range of the subtree under c
        let range = |sc: &Dfs, c: u32| {
            let p = sc.pos[c as usize] as usize;
            sc.order[p..p + sc.size[c as usize] as usize].to_vec()
        };
        let (a, b) = match centroid_of(&t, &member, id, &sc) {
            Centroid::Edge(_, c) => split_off(&set, range(&sc, c), &member, id),
            Centroid::Vertex(v) => {
                let deg = t.rot[v as usize].len();
                if params.mode == Mode::Bounded && deg > params.d {
                    return Err(ClusterError::DegreeExceeded { degree: deg, bound: params.d });
                }
                let p = sc.parent[v as usize];
                let up = n - sc.size[v as usize];
                // largest component, first in rotation order on ties
                let mut best: Option<(u32, u32)> = None;
                for s in &t.rot[v as usize] {
                    if let Slot::Node(y) = *s {
                        if member[y as usize] != id {
                            continue;
                        }
                        let sz = if y == p { up } else { sc.size[y as usize] };
                        if best.is_none_or(|(_, b)| sz > b) {
                            best = Some((y, sz));
                        }
                    }
                }
                let (y, sz) = best.expect("centroid of a big tree has neighbours");
                if params.mode == Mode::Bounded || sz as usize >= params.lower {
                    let side = if y == p {
                        let inner = range(&sc, v);
                        let mut mark = vec![false; 0];
                        mark.resize(t.len(), false);
                        for &x in &inner {
                            mark[x as usize] = true;
                        }
                        set.iter().copied().filter(|&x| !mark[x as usize]).collect()
                    } else {
                        range(&sc, y)
                    };
                    split_off(&set, side, &member, id)
                } else {
                    split_clone(&mut t, &mut origin, &mut member, &mut sc, id, v, up)
                }
            }
        };
        for part in [a, b] {
            for &x in &part {
                member[x as usize] = next_id;
            }
            work.push((next_id, part));
            next_id += 1;
        }
    }
    pieces.sort_by_key(|p| *p.iter().min().unwrap());
    let mut piece = vec![0u32; t.len()];
    for (i, p) in pieces.iter().enumerate() {
        for &x in p {
            piece[x as usize] = i as u32;
        }
    }
    Ok(Partition { tree: t, origin, piece, pieces })
}

fn split_off(set: &[u32], side: Vec<u32>, member: &[u32], id: u32) -> (Vec<u32>, Vec<u32>) {
    let _ = member;
    let _ = id;
    let mut mark = std::collections::HashSet::with_capacity(side.len());
    mark.extend(side.iter().copied());
    let rest = set.iter().copied().filter(|x| !mark.contains(x)).collect();
    (side, rest)
}

/// Splits `v` into `v` and a new clone at the rotation cut that best balances
/// the two halves, returning the two node sets.
fn split_clone(
    t: &mut LocalTree,
    origin: &mut Vec<u32>,
    member: &mut Vec<u32>,
    sc: &mut Dfs,
    id: u32,
    v: u32,
    up: u32,
) -> (Vec<u32>, Vec<u32>) {
    let slots = t.rot[v as usize].clone();
    let p = sc.parent[v as usize];
    let sizes: Vec<u64> = slots
        .iter()
        .map(|s| match *s {
            Slot::Node(y) if member[y as usize] == id => {
                if y == p {
                    up as u64
                } else {
                    sc.size[y as usize] as u64
                }
            }
            _ => 0,
        })
        .collect();
    let total: u64 = sizes.iter().sum();
    let mut best_j = 1;
    let mut best = u64::MAX;
    let mut acc = 0u64;
    for j in 1..slots.len() {
        acc += sizes[j - 1];
        let imb = (2 * acc).abs_diff(total);
        if imb < best {
            best = imb;
            best_j = j;
        }
    }
    let v2 = t.len() as u32;
    let mut first: Vec<Slot> = slots[..best_j].to_vec();
    first.push(Slot::Twin(v2));
    let mut second = vec![Slot::Twin(v)];
    second.extend_from_slice(&slots[best_j..]);
    for s in &slots[best_j..] {
        if let Some(y) = s.target() {
            for z in t.rot[y as usize].iter_mut() {
                match z {
                    Slot::Node(w) | Slot::Twin(w) if *w == v => *w = v2,
                    _ => {}
                }
            }
        }
    }
    t.rot[v as usize] = first;
    t.rot.push(second);
    origin.push(origin[v as usize]);
    member.push(id);
    sc.parent.push(NONE);
    sc.size.push(0);
    sc.pos.push(0);
    let side = |start: u32, t: &LocalTree| {
        let mut out = vec![start];
        let mut seen = std::collections::HashSet::from([start]);
        let mut i = 0;
        while i < out.len() {
            let x = out[i];
            i += 1;
            for s in &t.rot[x as usize] {
                if let Slot::Node(y) = *s {
                    if member[y as usize] == id && seen.insert(y) {
                        out.push(y);
                    }
                }
            }
        }
        out
    };
    (side(v, t), side(v2, t))
}

/// Position in a tour walk: at `node`, about to leave through `slot`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkState {
    pub node: u32,
    pub slot: usize,
}

/// The slot sequence of the Euler tour through `start`; external slots are
/// excursions that return to the same node.
pub fn tour_walk(tree: &LocalTree, start: WalkState) -> Vec<WalkState> {
    let mut out = Vec::new();
    let mut cur = start;
    loop {
        out.push(cur);
        let x = cur.node;
        let d = tree.rot[x as usize].len();
        cur = match tree.rot[x as usize][cur.slot] {
            Slot::Ext(_) => WalkState { node: x, slot: (cur.slot + 1) % d },
            Slot::Node(y) | Slot::Twin(y) => {
                let back = tree.back_index(x, y);
                WalkState { node: y, slot: (back + 1) % tree.rot[y as usize].len() }
            }
        };
        if cur == start {
            return out;
        }
    }
}

/// Cyclic corner weights per piece: for each visit to the piece, the true
/// intra-piece steps taken before leaving it again, in tour order.
/// Pieces with no crossings get a single entry with all their steps.
pub fn corner_weights(p: &Partition) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new(); p.pieces.len()];
    let mut done = vec![false; p.tree.len()];
    for comp in p.tree.components() {
        let s = comp[0];
        done[s as usize] = true;
        if p.tree.rot[s as usize].is_empty() {
            out[p.piece[s as usize] as usize].push(0);
            continue;
        }
        let walk = tour_walk(&p.tree, WalkState { node: s, slot: 0 });
        // rotate the walk to begin just after a crossing, if any
        let crossing = |w: &WalkState| match p.tree.rot[w.node as usize][w.slot] {
            Slot::Ext(_) => true,
            Slot::Node(y) | Slot::Twin(y) => p.piece[y as usize] != p.piece[w.node as usize],
        };
        let Some(k) = walk.iter().position(crossing) else {
            let steps = walk.len() as u64;
            out[p.piece[s as usize] as usize].push(steps);
            continue;
        };
        let n = walk.len();
        let mut run = 0u64;
        for i in 1..=n {
            let w = walk[(k + i) % n];
            if crossing(&w) {
                out[p.piece[w.node as usize] as usize].push(run);
                run = 0;
            } else if matches!(p.tree.rot[w.node as usize][w.slot], Slot::Node(_)) {
                run += 1;
            }
        }
    }
    out
}

/// Equality up to cyclic rotation.
pub fn cyclic_eq<T: PartialEq>(a: &[T], b: &[T]) -> bool {
    a.len() == b.len() && (a.is_empty() || (0..a.len()).any(|r| (0..a.len()).all(|i| a[(i + r) % a.len()] == b[i])))
}

/// Checks the size bounds of a partition of trees with the given original sizes.
/// Returns the pieces that violate them.
pub fn size_violations(p: &Partition, params: &ForestParams) -> Vec<usize> {
    let mut tree_size: HashMap<u32, usize> = HashMap::new();
    let comps = p.tree.components();
    let mut comp_of = vec![0u32; p.tree.len()];
    for (i, c) in comps.iter().enumerate() {
        let mut originals: Vec<u32> = c.iter().map(|&x| p.origin[x as usize]).collect();
        originals.sort_unstable();
        originals.dedup();
        tree_size.insert(i as u32, originals.len());
        for &x in c {
            comp_of[x as usize] = i as u32;
        }
    }
    p.pieces
        .iter()
        .enumerate()
        .filter(|(_, piece)| {
            let n_t = tree_size[&comp_of[piece[0] as usize]];
            let s = piece.len();
            s > params.upper || (n_t > params.upper && s < params.lower)
        })
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn path(n: u32) -> LocalTree {
        let rot = (0..n)
            .map(|i| {
                let mut r = Vec::new();
                if i > 0 {
                    r.push(Slot::Node(i - 1));
                }
                if i + 1 < n {
                    r.push(Slot::Node(i + 1));
                }
                r
            })
            .collect();
        LocalTree { rot }
    }

    fn star(leaves: u32) -> LocalTree {
        let mut rot = vec![(1..=leaves).map(Slot::Node).collect::<Vec<_>>()];
        rot.extend((0..leaves).map(|_| vec![Slot::Node(0)]));
        LocalTree { rot }
    }

    #[test]
    fn centroids() {
        assert_eq!(find_centroid(&path(4), 0), Centroid::Edge(1, 2));
        assert_eq!(find_centroid(&path(5), 0), Centroid::Vertex(2));
        assert_eq!(find_centroid(&star(6), 3), Centroid::Vertex(0));
    }

    #[test]
    fn thresholds() {
        let p = ForestParams::new(4096, 1.0, Mode::Bounded, 3).unwrap();
        assert_eq!((p.lower, p.upper, p.tiny), (144, 433, 12));
        let u = ForestParams::new(4096, 1.0, Mode::Unbounded, 3).unwrap();
        assert_eq!(u.upper, 432);
        assert!(ForestParams::new(10, 0.0, Mode::Bounded, 2).is_err());
        assert_eq!(ceil_lg(1), 1);
        assert_eq!(ceil_lg(1000), 10);
    }

    #[test]
    fn small_tree_is_one_piece() {
        let params = ForestParams::custom(3, 10, 2, Mode::Bounded, 2);
        let p = decompose(&path(10), &params).unwrap();
        assert_eq!(p.pieces.len(), 1);
        assert_eq!(p.false_edge_count(), 0);
    }

    #[test]
    fn long_path_sizes() {
        let params = ForestParams::new(4096, 1.0, Mode::Bounded, 2).unwrap();
        let p = decompose(&path(4096), &params).unwrap();
        assert!(size_violations(&p, &params).is_empty());
        assert!(p.pieces.len() >= 4096 / params.upper);
    }

    #[test]
    fn bounded_rejects_high_degree() {
        let params = ForestParams::custom(2, 5, 2, Mode::Bounded, 3);
        assert!(matches!(decompose(&star(20), &params), Err(ClusterError::DegreeExceeded { .. })));
    }

    #[test]
    fn star_clones_in_unbounded_mode() {
        let params = ForestParams::new(10_000, 1.0, Mode::Unbounded, 2).unwrap();
        let t = star(9_999);
        let p = decompose(&t, &params).unwrap();
        assert!(size_violations(&p, &params).is_empty(), "{:?}", p.pieces.iter().map(|x| x.len()).collect::<Vec<_>>());
        assert!(p.false_edge_count() > 0);
        // every false edge joins two clones of the centre
        for (x, rot) in p.tree.rot.iter().enumerate() {
            for s in rot {
                if let Slot::Twin(y) = *s {
                    assert_eq!(p.origin[x], 0);
                    assert_eq!(p.origin[y as usize], 0);
                }
            }
        }
        // walking the tour and skipping false edges reproduces the leaf order
        let walk = tour_walk(&p.tree, WalkState { node: 1, slot: 0 });
        let leaves: Vec<u32> = walk
            .iter()
            .filter_map(|w| match p.tree.rot[w.node as usize][w.slot] {
                Slot::Node(y) if p.origin[w.node as usize] == 0 => Some(y),
                _ => None,
            })
            .collect();
        let expect: Vec<u32> = (2..=9_999).chain(1..=1).collect();
        assert_eq!(leaves, expect);
    }

    #[test]
    fn corner_weights_single_port() {
        // path 0-1-2 in one piece plus leaf 3 in another, attached to 2
        let mut t = path(4);
        t.rot[3].clear();
        t.rot[3].push(Slot::Node(2));
        let p = Partition {
            tree: t,
            origin: vec![0, 1, 2, 3],
            piece: vec![0, 0, 0, 1],
            pieces: vec![vec![0, 1, 2], vec![3]],
        };
        assert_eq!(corner_weights(&p), vec![vec![4], vec![0]]);
        assert!(cyclic_eq(&[3, 2, 2, 5], &[2, 5, 3, 2]));
        assert!(!cyclic_eq(&[3, 2, 2, 5], &[2, 3, 2, 5]));
    }

    #[test]
    fn sum_of_weights_and_crossings() {
        let f = EmbeddedForest::from_rotations(BTreeMap::from([
            (0, vec![1, 2, 3]),
            (1, vec![0, 4]),
            (2, vec![0]),
            (3, vec![0, 5]),
            (4, vec![1]),
            (5, vec![3]),
        ]))
        .unwrap();
        let (t, _) = LocalTree::from_forest(&f);
        let params = ForestParams::custom(2, 2, 2, Mode::Bounded, 3);
        let p = decompose(&t, &params).unwrap();
        let w: u64 = corner_weights(&p).iter().flatten().sum();
        assert_eq!(w + 2 * p.cross_edge_count() as u64, 10);
    }
}
