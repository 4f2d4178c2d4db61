//! Succinct micro-trees: a cluster as balanced parentheses plus a ports
//! bitvector.
//!
//! The ports bitvector has one `0` per step of a depth-first traversal of
//! the cluster (`2·(n_C − 1)` of them) and one `1` wherever the traversal
//! passes an inter-cluster edge. The `k`-th `0` is the step across the
//! directed intra-cluster edge whose parenthesis sits at position `k`: an
//! open parenthesis steps down into that node, a close one steps up out of it.

use std::collections::HashMap;

use crate::oracle::{DirectedEdge, EmbeddedForest, Label};
use crate::succinct::{bits_for, BalancedParens, BitBuf, RankSelect, SparseBitvector};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MicroError {
    #[error("fragment is not connected")]
    Disconnected,
    #[error("fragment is empty")]
    Empty,
    #[error("root slot {slot} out of range at node {node}")]
    BadRoot { node: u32, slot: usize },
    #[error("fragment has {nodes} vertices, above the bound {bound}")]
    Oversize { nodes: usize, bound: usize },
    #[error("unknown vertex {0}")]
    UnknownVertex(Label),
}

/// A rotation slot of a fragment node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FragSlot<K> {
    /// Intra-cluster edge to another fragment node.
    Node(u32),
    /// Inter-cluster edge, identified by the key of its outgoing direction.
    Port(K),
}

/// A connected tree fragment with rotations, ready to encode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fragment<K> {
    pub rot: Vec<Vec<FragSlot<K>>>,
}

impl Fragment<DirectedEdge> {
    /// The fragment induced by `vertices`; edges leaving it become ports keyed
    /// by their outgoing direction. Node `i` is `vertices[i]`.
    pub fn from_forest(f: &EmbeddedForest, vertices: &[Label]) -> Result<Self, MicroError> {
        let idx: HashMap<Label, u32> = vertices.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
        let mut rot = Vec::with_capacity(vertices.len());
        for &v in vertices {
            let r = f.rotation(v).map_err(|_| MicroError::UnknownVertex(v))?;
            rot.push(
                r.iter()
                    .map(|w| match idx.get(w) {
                        Some(&j) => FragSlot::Node(j),
                        None => FragSlot::Port(DirectedEdge::new(v, *w)),
                    })
                    .collect(),
            );
        }
        Ok(Self { rot })
    }
}

/// Where the traversal starts: at `node`, beginning with rotation slot `start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RootChoice {
    pub node: u32,
    pub start: usize,
}

/// What lies next to a position in the ports bitvector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Local {
    /// The `k`-th zero (1-based), an intra-cluster step.
    Zero(usize),
    /// Port of the given 0-based rank.
    Port(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    Fwd,
    Back,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster<K = crate::macro_tree::MacroId> {
    bp: BalancedParens,
    ports: SparseBitvector,
    port_to_macro: Vec<K>,
}

/// Encodes `frag`; returns the cluster and the preorder index of every fragment node.
pub fn build<K: Copy>(frag: &Fragment<K>, root: RootChoice) -> Result<(Cluster<K>, Vec<u32>), MicroError> {
    let n = frag.rot.len();
    if n == 0 {
        return Err(MicroError::Empty);
    }
    let r = root.node as usize;
    if r >= n || (root.start >= frag.rot[r].len() && !frag.rot[r].is_empty()) {
        return Err(MicroError::BadRoot { node: root.node, slot: root.start });
    }
    const UNSEEN: u32 = u32::MAX;
    let mut pre = vec![UNSEEN; n];
    let mut bp = BitBuf::with_capacity(2 * n);
    let mut ones = Vec::new();
    let mut keys = Vec::new();
    let mut pos = 0u32;
    // frames: (node, next slot, slots left)
    let mut stack: Vec<(u32, usize, usize)> = Vec::new();
    let mut next_pre = 0u32;
    pre[r] = next_pre;
    next_pre += 1;
    bp.push(true);
    stack.push((root.node, root.start, frag.rot[r].len()));
    while let Some(top) = stack.last_mut() {
        let (x, slot, left) = *top;
        if left == 0 {
            stack.pop();
            bp.push(false);
            if !stack.is_empty() {
                pos += 1;
            }
            continue;
        }
        let d = frag.rot[x as usize].len();
        top.1 = (slot + 1) % d;
        top.2 -= 1;
        match frag.rot[x as usize][slot] {
            FragSlot::Port(k) => {
                ones.push(pos);
                keys.push(k);
                pos += 1;
            }
            FragSlot::Node(y) => {
                if pre[y as usize] != UNSEEN {
                    return Err(MicroError::Disconnected);
                }
                pre[y as usize] = next_pre;
                next_pre += 1;
                bp.push(true);
                pos += 1;
                let back = frag.rot[y as usize]
                    .iter()
                    .position(|s| matches!(s, FragSlot::Node(z) if *z == x))
                    .ok_or(MicroError::Disconnected)?;
                let dy = frag.rot[y as usize].len();
                stack.push((y, (back + 1) % dy, dy - 1));
            }
        }
    }
    if pre.contains(&UNSEEN) {
        return Err(MicroError::Disconnected);
    }
    let cluster = Cluster {
        bp: BalancedParens::new_unchecked(bp),
        ports: SparseBitvector::from_positions(pos as usize, ones),
        port_to_macro: keys,
    };
    Ok((cluster, pre))
}

/// As [`build`], refusing fragments above `bound` vertices.
pub fn rebuild<K: Copy>(frag: &Fragment<K>, root: RootChoice, bound: usize) -> Result<(Cluster<K>, Vec<u32>), MicroError> {
    if frag.rot.len() > bound {
        return Err(MicroError::Oversize { nodes: frag.rot.len(), bound });
    }
    build(frag, root)
}

impl<K: Copy> Cluster<K> {
    pub fn bp(&self) -> &BalancedParens {
        &self.bp
    }

    pub fn ports(&self) -> &SparseBitvector {
        &self.ports
    }

    pub fn node_count(&self) -> usize {
        self.bp.node_count()
    }

    pub fn zero_count(&self) -> usize {
        self.ports.len() - self.ports.count_ones()
    }

    pub fn port_count(&self) -> usize {
        self.port_to_macro.len()
    }

    pub fn port_key(&self, r: usize) -> K {
        self.port_to_macro[r]
    }

    pub fn port_keys(&self) -> &[K] {
        &self.port_to_macro
    }

    pub fn set_port_key(&mut self, r: usize, k: K) {
        self.port_to_macro[r] = k;
    }

    pub fn ports_string(&self) -> String {
        self.ports.to_bitbuf().to_string_bits()
    }

    /// Node current after parenthesis `i`: the node itself for an open, its parent for a close.
    fn cur(&self, i: usize) -> u32 {
        let o = self.bp.enclosing_node(i).expect("close of the root is not a step");
        self.bp.preorder(o) as u32
    }

    /// Preorder indices `(tail, head)` of step `k`.
    pub fn step_endpoints(&self, k: usize) -> (u32, u32) {
        (self.cur(k - 1), self.cur(k))
    }

    /// The step across the same edge in the other direction.
    pub fn reverse_step(&self, k: usize) -> usize {
        self.bp.find_match(k)
    }

    fn classify(&self, q: usize) -> Local {
        if self.ports.get(q) {
            Local::Port(self.ports.rank1(q))
        } else {
            Local::Zero(self.ports.rank0(q) + 1)
        }
    }

    fn next_pos(&self, p: usize) -> usize {
        if p + 1 == self.ports.len() {
            0
        } else {
            p + 1
        }
    }

    fn prev_pos(&self, p: usize) -> usize {
        if p == 0 {
            self.ports.len() - 1
        } else {
            p - 1
        }
    }

    pub fn zero_position(&self, k: usize) -> usize {
        self.ports.select0(k)
    }

    pub fn port_position(&self, r: usize) -> usize {
        self.ports.select1(r + 1)
    }

    /// One step along the cyclic traversal from zero `k`.
    pub fn local_step(&self, k: usize, dir: Dir) -> Local {
        let p = self.zero_position(k);
        self.classify(match dir {
            Dir::Fwd => self.next_pos(p),
            Dir::Back => self.prev_pos(p),
        })
    }

    /// What follows (or precedes) port `r` in the cyclic traversal.
    pub fn port_step(&self, r: usize, dir: Dir) -> Local {
        let p = self.port_position(r);
        self.classify(match dir {
            Dir::Fwd => self.next_pos(p),
            Dir::Back => self.prev_pos(p),
        })
    }

    /// Preorder index of the node at port `r`.
    pub fn port_node(&self, r: usize) -> u32 {
        let k0 = self.ports.rank0(self.port_position(r));
        if k0 == 0 {
            0
        } else {
            self.cur(k0)
        }
    }

    /// Nearest port after (or before) zero `k`, with the number of zeros strictly between.
    pub fn steps_to_port(&self, k: usize, dir: Dir) -> Option<(usize, usize)> {
        let ones = self.port_count();
        if ones == 0 {
            return None;
        }
        let p = self.zero_position(k);
        let r = self.ports.rank1(p);
        let len = self.ports.len();
        Some(match dir {
            Dir::Fwd => {
                if r < ones {
                    let q = self.port_position(r);
                    (r, q - p - 1)
                } else {
                    (0, len - p - 1 + self.port_position(0))
                }
            }
            Dir::Back => {
                if r > 0 {
                    let q = self.port_position(r - 1);
                    (r - 1, p - q - 1)
                } else {
                    let q = self.port_position(ones - 1);
                    (ones - 1, p + len - q - 1)
                }
            }
        })
    }

    /// Cyclic run lengths of zeros between consecutive ports, starting after port 0.
    pub fn corner_weights(&self) -> Vec<u64> {
        let ones = self.port_count();
        let len = self.ports.len();
        (0..ones)
            .map(|r| {
                let a = self.port_position(r);
                let b = if r + 1 < ones { self.port_position(r + 1) } else { self.port_position(0) + len };
                (b - a - 1) as u64
            })
            .collect()
    }

    /// First rotation slot of node `pre`: the step to its parent, or for the
    /// root whatever the traversal meets first.
    pub fn first_slot(&self, pre: u32) -> Option<Local> {
        if pre == 0 {
            if self.ports.is_empty() {
                None
            } else {
                Some(self.classify(0))
            }
        } else {
            Some(Local::Zero(self.bp.find_match(self.bp.open_of(pre as usize))))
        }
    }

    /// Counter-clockwise rotation of node `pre`: the steps leaving it and its ports.
    pub fn rotation(&self, pre: u32) -> Vec<Local> {
        let mut out = Vec::new();
        let (mut p, end) = if pre == 0 {
            (0, self.ports.len())
        } else {
            let o = self.bp.open_of(pre as usize);
            let c = self.bp.find_match(o);
            out.push(Local::Zero(c));
            (self.zero_position(o) + 1, self.zero_position(c))
        };
        while p < end {
            match self.classify(p) {
                Local::Port(r) => {
                    out.push(Local::Port(r));
                    p += 1;
                }
                Local::Zero(k) => {
                    debug_assert!(self.bp.is_open(k));
                    out.push(Local::Zero(k));
                    p = self.zero_position(self.bp.find_match(k)) + 1;
                }
            }
        }
        out
    }

    /// The fragment this cluster encodes; node `i` is preorder `i`, and the
    /// root's rotation starts where the traversal starts.
    pub fn decode(&self) -> Fragment<K> {
        let n = self.node_count();
        let mut rot: Vec<Vec<FragSlot<K>>> = vec![Vec::new(); n];
        let mut stack = vec![0u32];
        let mut next = 1u32;
        let mut zeros = 0usize;
        let mut r = 0usize;
        for q in 0..self.ports.len() {
            let top = *stack.last().unwrap();
            if self.ports.get(q) {
                rot[top as usize].push(FragSlot::Port(self.port_to_macro[r]));
                r += 1;
            } else {
                zeros += 1;
                if self.bp.is_open(zeros) {
                    rot[top as usize].push(FragSlot::Node(next));
                    rot[next as usize].push(FragSlot::Node(top));
                    stack.push(next);
                    next += 1;
                } else {
                    stack.pop();
                }
            }
        }
        Fragment { rot }
    }

    /// Bits of the parentheses (the payload).
    pub fn payload_bits(&self) -> usize {
        self.bp.len()
    }

    /// Ports bitvector as stored (sorted one positions plus length).
    pub fn ports_bits(&self) -> usize {
        self.ports.space_bits()
    }

    /// Port-to-edge map with `word` bits per entry.
    pub fn mapping_bits(&self, word: usize) -> usize {
        self.port_to_macro.len() * word + bits_for(self.port_to_macro.len())
    }

    pub(crate) fn from_parts(bp: BalancedParens, ports: SparseBitvector, keys: Vec<K>) -> Self {
        Self { bp, ports, port_to_macro: keys }
    }

    pub fn map_keys<K2: Copy>(&self, f: impl Fn(K) -> K2) -> Cluster<K2> {
        Cluster { bp: self.bp.clone(), ports: self.ports.clone(), port_to_macro: self.port_to_macro.iter().map(|&k| f(k)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn e(a: Label, b: Label) -> DirectedEdge {
        DirectedEdge::new(a, b)
    }

    /// The expanded seven-vertex cluster: root 0 with children 1 (-> 2) and 3
    /// (-> 4, 5) and leaf 6; ports to 10, 11, 12, 13.
    pub(crate) fn expanded_cluster() -> EmbeddedForest {
        EmbeddedForest::from_rotations(BTreeMap::from([
            (0, vec![1, 3, 6]),
            (1, vec![0, 2]),
            (2, vec![1, 10]),
            (3, vec![0, 11, 4, 12, 5, 13]),
            (4, vec![3]),
            (5, vec![3]),
            (6, vec![0]),
            (10, vec![2]),
            (11, vec![3]),
            (12, vec![3]),
            (13, vec![3]),
        ]))
        .unwrap()
    }

    #[test]
    fn expanded_cluster_ports_bitvector() {
        let f = expanded_cluster();
        let frag = Fragment::from_forest(&f, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        let (c, pre) = build(&frag, RootChoice { node: 0, start: 0 }).unwrap();
        assert_eq!(c.ports_string(), "0010001001001000");
        assert_eq!(c.corner_weights(), vec![3, 2, 2, 5]);
        assert_eq!(pre, vec![0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(c.port_keys(), &[e(2, 10), e(3, 11), e(3, 12), e(3, 13)]);
        // zero 3 is the step 2 -> 1; two steps later the walk leaves by port 1
        assert_eq!(c.step_endpoints(3), (2, 1));
        assert_eq!(c.steps_to_port(3, Dir::Fwd), Some((1, 2)));
        assert_eq!(c.steps_to_port(12, Dir::Back), Some((3, 2)));
        assert_eq!(c.port_node(1), 3);
        assert_eq!(c.local_step(2, Dir::Fwd), Local::Port(0));
        assert_eq!(c.local_step(12, Dir::Fwd), Local::Zero(1));
    }

    #[test]
    fn single_edge_without_ports() {
        let f = EmbeddedForest::from_rotations(BTreeMap::from([(0, vec![1]), (1, vec![0])])).unwrap();
        let frag = Fragment::from_forest(&f, &[0, 1]).unwrap();
        let (c, _) = build(&frag, RootChoice { node: 0, start: 0 }).unwrap();
        assert_eq!(c.ports_string(), "00");
        assert_eq!(c.local_step(2, Dir::Fwd), Local::Zero(1));
        assert_eq!(c.steps_to_port(1, Dir::Fwd), None);
        assert_eq!(c.reverse_step(1), 2);
    }

    #[test]
    fn rotations_and_decode_match_oracle() {
        let f = expanded_cluster();
        let verts = [0, 1, 2, 3, 4, 5, 6];
        let frag = Fragment::from_forest(&f, &verts).unwrap();
        for root in 0..7u32 {
            for start in 0..frag.rot[root as usize].len() {
                let (c, pre) = build(&frag, RootChoice { node: root, start }).unwrap();
                let mut label_of = [0; 7];
                for (i, &p) in pre.iter().enumerate() {
                    label_of[p as usize] = verts[i];
                }
                // every node's rotation equals the oracle's up to cyclic shift
                for p in 0..7u32 {
                    let v = label_of[p as usize];
                    let got: Vec<Label> = c
                        .rotation(p)
                        .into_iter()
                        .map(|s| match s {
                            Local::Zero(k) => {
                                let (t, h) = c.step_endpoints(k);
                                assert_eq!(t, p);
                                label_of[h as usize]
                            }
                            Local::Port(r) => c.port_key(r).head,
                        })
                        .collect();
                    assert!(crate::clustering::cyclic_eq(&got, f.rotation(v).unwrap()), "{v}: {got:?}");
                }
                let back = c.decode();
                let (c2, _) = build(&back, RootChoice { node: 0, start: 0 }).unwrap();
                assert_eq!(c2, c);
                assert!(crate::clustering::cyclic_eq(&c.corner_weights(), &[3, 2, 2, 5]));
            }
        }
    }

    #[test]
    fn local_steps_follow_the_tour() {
        let f = expanded_cluster();
        let frag = Fragment::from_forest(&f, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        let (c, pre) = build(&frag, RootChoice { node: 3, start: 2 }).unwrap();
        let labels: Vec<Label> = {
            let mut l = vec![0; 7];
            for (i, &p) in pre.iter().enumerate() {
                l[p as usize] = i as Label;
            }
            l
        };
        for k in 1..=c.zero_count() {
            let (t, h) = c.step_endpoints(k);
            let d = e(labels[t as usize], labels[h as usize]);
            let next = f.tour_successor(d).unwrap();
            match c.local_step(k, Dir::Fwd) {
                Local::Zero(k2) => {
                    let (t2, h2) = c.step_endpoints(k2);
                    assert_eq!(e(labels[t2 as usize], labels[h2 as usize]), next);
                }
                Local::Port(r) => assert_eq!(c.port_key(r), next),
            }
        }
    }

    #[test]
    fn disconnected_and_oversize() {
        let frag: Fragment<u32> = Fragment { rot: vec![vec![], vec![]] };
        assert_eq!(build(&frag, RootChoice { node: 0, start: 0 }).unwrap_err(), MicroError::Disconnected);
        let f = expanded_cluster();
        let frag = Fragment::from_forest(&f, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        assert!(matches!(rebuild(&frag, RootChoice { node: 0, start: 0 }, 6), Err(MicroError::Oversize { .. })));
    }
}
