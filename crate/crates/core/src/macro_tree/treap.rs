//! Arena treap with parent pointers, ordered by position, aggregating
//! true-edge counts and corner weights.

pub(crate) const NIL: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    True,
    False,
}

impl EdgeKind {
    #[inline]
    pub fn steps(self) -> u64 {
        match self {
            EdgeKind::True => 1,
            EdgeKind::False => 0,
        }
    }
}

/// Which per-element quantity a search accumulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// True-edge crossings.
    Distance,
    /// Corner weights.
    Weight,
    /// Both summed.
    Combined,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct Agg {
    pub size: u32,
    pub steps: u64,
    pub weight: u64,
}

impl Agg {
    #[inline]
    pub fn get(&self, m: Metric) -> u64 {
        match m {
            Metric::Distance => self.steps,
            Metric::Weight => self.weight,
            Metric::Combined => self.steps + self.weight,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Node<P> {
    pub left: u32,
    pub right: u32,
    pub parent: u32,
    pub prio: u32,
    pub agg: Agg,
    // cyclic list
    pub succ: u32,
    pub pred: u32,
    pub rev: u32,
    pub kind: EdgeKind,
    /// Weight of the corner immediately before this edge in the tour.
    pub pre_weight: u64,
    pub generation: u32,
    pub alive: bool,
    pub payload: P,
}

impl<P> Node<P> {
    #[inline]
    pub fn own(&self) -> Agg {
        Agg { size: 1, steps: self.kind.steps(), weight: self.pre_weight }
    }
}

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Treap<P> {
    pub nodes: Vec<Node<P>>,
    free: Vec<u32>,
}

impl<P: Copy + Default> Treap<P> {
    pub fn alloc(&mut self, kind: EdgeKind, pre_weight: u64, payload: P) -> u32 {
        let (idx, generation) = match self.free.pop() {
            Some(i) => (i, self.nodes[i as usize].generation.wrapping_add(1)),
            None => {
                self.nodes.push(Node {
                    left: NIL,
                    right: NIL,
                    parent: NIL,
                    prio: 0,
                    agg: Agg::default(),
                    succ: NIL,
                    pred: NIL,
                    rev: NIL,
                    kind,
                    pre_weight: 0,
                    generation: 0,
                    alive: false,
                    payload,
                });
                ((self.nodes.len() - 1) as u32, 0)
            }
        };
        let prio = mix(((idx as u64) << 32) | generation as u64) as u32;
        let n = &mut self.nodes[idx as usize];
        *n = Node {
            left: NIL,
            right: NIL,
            parent: NIL,
            prio,
            agg: Agg::default(),
            succ: idx,
            pred: idx,
            rev: NIL,
            kind,
            pre_weight,
            generation,
            alive: true,
            payload,
        };
        n.agg = n.own();
        idx
    }

    /// The node must already be detached from any sequence.
    pub fn release(&mut self, x: u32) {
        let n = &mut self.nodes[x as usize];
        debug_assert!(n.parent == NIL && n.left == NIL && n.right == NIL);
        n.alive = false;
        self.free.push(x);
    }

    pub fn free_list(&self) -> &[u32] {
        &self.free
    }

    /// Recreates dead slots with the given generations.
    pub fn restore_slots(&mut self, slots: &[(u32, bool)], free: &[u32]) -> Result<(), String> {
        self.nodes.clear();
        for &(generation, _) in slots {
            self.nodes.push(Node {
                left: NIL,
                right: NIL,
                parent: NIL,
                prio: 0,
                agg: Agg::default(),
                succ: NIL,
                pred: NIL,
                rev: NIL,
                kind: EdgeKind::True,
                pre_weight: 0,
                generation,
                alive: false,
                payload: P::default(),
            });
        }
        let dead = slots.iter().filter(|s| !s.1).count();
        if free.len() != dead || free.iter().any(|&f| f as usize >= slots.len() || slots[f as usize].1) {
            return Err("free list does not match dead slots".into());
        }
        self.free = free.to_vec();
        Ok(())
    }

    /// Brings a restored slot to life as a singleton, keeping its generation.
    pub fn revive(&mut self, x: u32, kind: EdgeKind, pre_weight: u64, payload: P) {
        let generation = self.nodes[x as usize].generation;
        let prio = mix(((x as u64) << 32) | generation as u64) as u32;
        let n = &mut self.nodes[x as usize];
        n.prio = prio;
        n.succ = x;
        n.pred = x;
        n.kind = kind;
        n.pre_weight = pre_weight;
        n.alive = true;
        n.payload = payload;
        n.agg = n.own();
    }

    pub fn live_count(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    #[inline]
    pub fn agg(&self, t: u32) -> Agg {
        if t == NIL {
            Agg::default()
        } else {
            self.nodes[t as usize].agg
        }
    }

    #[inline]
    fn pull(&mut self, t: u32) {
        let (l, r) = (self.nodes[t as usize].left, self.nodes[t as usize].right);
        let (la, ra) = (self.agg(l), self.agg(r));
        let own = self.nodes[t as usize].own();
        self.nodes[t as usize].agg = Agg {
            size: la.size + ra.size + 1,
            steps: la.steps + ra.steps + own.steps,
            weight: la.weight + ra.weight + own.weight,
        };
    }

    #[inline]
    fn set_left(&mut self, t: u32, c: u32) {
        self.nodes[t as usize].left = c;
        if c != NIL {
            self.nodes[c as usize].parent = t;
        }
    }

    #[inline]
    fn set_right(&mut self, t: u32, c: u32) {
        self.nodes[t as usize].right = c;
        if c != NIL {
            self.nodes[c as usize].parent = t;
        }
    }

    pub fn root_of(&self, mut x: u32) -> u32 {
        while self.nodes[x as usize].parent != NIL {
            x = self.nodes[x as usize].parent;
        }
        x
    }

    /// Number of elements before `x` in its sequence.
    pub fn index_of(&self, x: u32) -> usize {
        self.prefix_before(x).size as usize
    }

    /// Aggregate over the elements strictly before `x`.
    pub fn prefix_before(&self, x: u32) -> Agg {
        let mut acc = self.agg(self.nodes[x as usize].left);
        let mut cur = x;
        let mut p = self.nodes[x as usize].parent;
        while p != NIL {
            if self.nodes[p as usize].right == cur {
                let l = self.agg(self.nodes[p as usize].left);
                let own = self.nodes[p as usize].own();
                acc.size += l.size + 1;
                acc.steps += l.steps + own.steps;
                acc.weight += l.weight + own.weight;
            }
            cur = p;
            p = self.nodes[p as usize].parent;
        }
        acc
    }

    /// Aggregate over the elements up to and including `x`.
    pub fn prefix_through(&self, x: u32) -> Agg {
        let mut a = self.prefix_before(x);
        let own = self.nodes[x as usize].own();
        a.size += 1;
        a.steps += own.steps;
        a.weight += own.weight;
        a
    }

    /// Recomputes aggregates from `x` up to its root.
    pub fn refresh_path(&mut self, mut x: u32) {
        while x != NIL {
            self.pull(x);
            x = self.nodes[x as usize].parent;
        }
    }

    /// Splits off the first `k` elements.
    pub fn split(&mut self, t: u32, k: usize) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        self.nodes[t as usize].parent = NIL;
        let l = self.nodes[t as usize].left;
        let ls = self.agg(l).size as usize;
        if k <= ls {
            let (a, b) = self.split(l, k);
            self.set_left(t, b);
            self.pull(t);
            if a != NIL {
                self.nodes[a as usize].parent = NIL;
            }
            (a, t)
        } else {
            let r = self.nodes[t as usize].right;
            let (a, b) = self.split(r, k - ls - 1);
            self.set_right(t, a);
            self.pull(t);
            if b != NIL {
                self.nodes[b as usize].parent = NIL;
            }
            (t, b)
        }
    }

    pub fn merge(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        if self.nodes[a as usize].prio > self.nodes[b as usize].prio {
            let r = self.nodes[a as usize].right;
            let m = self.merge(r, b);
            self.set_right(a, m);
            self.pull(a);
            self.nodes[a as usize].parent = NIL;
            a
        } else {
            let l = self.nodes[b as usize].left;
            let m = self.merge(a, l);
            self.set_left(b, m);
            self.pull(b);
            self.nodes[b as usize].parent = NIL;
            b
        }
    }

    pub fn first(&self, mut t: u32) -> u32 {
        while self.nodes[t as usize].left != NIL {
            t = self.nodes[t as usize].left;
        }
        t
    }

    pub fn last(&self, mut t: u32) -> u32 {
        while self.nodes[t as usize].right != NIL {
            t = self.nodes[t as usize].right;
        }
        t
    }

    /// First element whose inclusive prefix of `metric` reaches `target`,
    /// with that prefix value.
    pub fn find_first_reaching(&self, root: u32, metric: Metric, target: u64) -> Option<(u32, u64)> {
        if root == NIL || self.agg(root).get(metric) < target {
            return None;
        }
        let mut t = root;
        let mut acc = 0u64;
        loop {
            let n = &self.nodes[t as usize];
            let l = self.agg(n.left).get(metric);
            if n.left != NIL && acc + l >= target {
                t = n.left;
                continue;
            }
            let here = acc + l + n.own().get(metric);
            if here >= target {
                return Some((t, here));
            }
            acc = here;
            t = n.right;
        }
    }

    /// In-order listing.
    pub fn in_order(&self, root: u32) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.agg(root).size as usize);
        let mut stack = Vec::new();
        let mut t = root;
        while t != NIL || !stack.is_empty() {
            while t != NIL {
                stack.push(t);
                t = self.nodes[t as usize].left;
            }
            let x = stack.pop().unwrap();
            out.push(x);
            t = self.nodes[x as usize].right;
        }
        out
    }

    /// Checks heap order, parent links and aggregates under `root`.
    pub fn check_subtree(&self, root: u32) -> Result<Agg, String> {
        if root == NIL {
            return Ok(Agg::default());
        }
        let n = &self.nodes[root as usize];
        if !n.alive {
            return Err(format!("dead node {root} reachable"));
        }
        let mut total = n.own();
        for c in [n.left, n.right] {
            if c == NIL {
                continue;
            }
            if self.nodes[c as usize].parent != root {
                return Err(format!("parent link broken at {c}"));
            }
            if self.nodes[c as usize].prio > n.prio {
                return Err(format!("heap order broken at {c}"));
            }
            let a = self.check_subtree(c)?;
            total.size += a.size;
            total.steps += a.steps;
            total.weight += a.weight;
        }
        if total != n.agg {
            return Err(format!("aggregate mismatch at {root}: stored {:?}, leaves {:?}", n.agg, total));
        }
        Ok(total)
    }
}
