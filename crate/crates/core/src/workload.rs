//! Forest generators, operation traces, a trace fuzzer, and a lockstep
//! runner that replays a trace on a compact forest and an oracle forest.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rustc_hash::FxHashMap;
use rand_chacha::ChaCha8Rng;

use crate::forest::{CompactForest, ForestError};
use crate::oracle::{Corner, DirectedEdge, EmbeddedForest, Label, OracleError, TourIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Path,
    Star,
    Binary,
    Random,
    ThreeArms,
}

impl Kind {
    pub const ALL: [Kind; 5] = [Kind::Path, Kind::Star, Kind::Binary, Kind::Random, Kind::ThreeArms];
}

impl std::str::FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "path" => Kind::Path,
            "star" => Kind::Star,
            "binary" => Kind::Binary,
            "random" => Kind::Random,
            "three_arms" => Kind::ThreeArms,
            _ => return Err(format!("unknown forest kind `{s}`")),
        })
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Path => "path",
            Kind::Star => "star",
            Kind::Binary => "binary",
            Kind::Random => "random",
            Kind::ThreeArms => "three_arms",
        })
    }
}

/// A deterministic tree on vertices `0..n`. Only `random` uses the seed: a
/// random recursive tree with each new edge placed in a random corner.
pub fn generate(kind: Kind, n: usize, seed: u64) -> EmbeddedForest {
    let mut rot: BTreeMap<Label, Vec<Label>> = (0..n as Label).map(|v| (v, Vec::new())).collect();
    let add = |rot: &mut BTreeMap<Label, Vec<Label>>, a: Label, b: Label| {
        rot.get_mut(&a).unwrap().push(b);
        rot.get_mut(&b).unwrap().push(a);
    };
    match kind {
        Kind::Path => (1..n as Label).for_each(|i| add(&mut rot, i - 1, i)),
        Kind::Star => (1..n as Label).for_each(|i| add(&mut rot, 0, i)),
        Kind::Binary => (1..n as Label).for_each(|i| add(&mut rot, (i - 1) / 2, i)),
        Kind::ThreeArms => {
            let rest = n.saturating_sub(1);
            let mut v = 1 as Label;
            for arm in 0..3 {
                let len = rest / 3 + usize::from(arm < rest % 3);
                let mut prev = 0;
                for _ in 0..len {
                    add(&mut rot, prev, v);
                    prev = v;
                    v += 1;
                }
            }
        }
        Kind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 1..n as Label {
                let p = rng.gen_range(0..i);
                let at = rng.gen_range(0..=rot[&p].len());
                rot.get_mut(&p).unwrap().insert(at, i);
                rot.get_mut(&i).unwrap().push(p);
            }
        }
    }
    EmbeddedForest::from_rotations(rot).expect("generated trees are valid")
}

/// One trace command. Edges are written as two labels `u v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Link { u: Label, v: Label, cu: Corner, cv: Corner },
    Cut(DirectedEdge),
    AddVertex(Label),
    RemoveVertex(Label),
    Dist(DirectedEdge, DirectedEdge),
    Jump(DirectedEdge, u64),
    Sides(DirectedEdge),
    Succ(DirectedEdge),
    Pred(DirectedEdge),
    Rot(DirectedEdge),
}

impl Command {
    pub fn is_update(&self) -> bool {
        matches!(self, Command::Link { .. } | Command::Cut(_) | Command::AddVertex(_) | Command::RemoveVertex(_))
    }

    pub fn class(&self) -> &'static str {
        match self {
            Command::Link { .. } => "link",
            Command::Cut(_) => "cut",
            Command::AddVertex(_) => "addv",
            Command::RemoveVertex(_) => "rmv",
            Command::Dist(..) => "dist",
            Command::Jump(..) => "jump",
            Command::Sides(_) => "sides",
            Command::Succ(_) => "succ",
            Command::Pred(_) => "pred",
            Command::Rot(_) => "rot",
        }
    }
}

fn corner_text(c: Corner) -> String {
    match c {
        Corner::After(e) => format!("after {} {}", e.tail, e.head),
        Corner::Isolated(v) => format!("at {v}"),
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = |d: &DirectedEdge| format!("{} {}", d.tail, d.head);
        match self {
            Command::Link { u, v, cu, cv } => write!(f, "link {u} {v} {} {}", corner_text(*cu), corner_text(*cv)),
            Command::Cut(d) => write!(f, "cut {}", e(d)),
            Command::AddVertex(v) => write!(f, "addv {v}"),
            Command::RemoveVertex(v) => write!(f, "rmv {v}"),
            Command::Dist(a, b) => write!(f, "dist {} {}", e(a), e(b)),
            Command::Jump(a, t) => write!(f, "jump {} {t}", e(a)),
            Command::Sides(a) => write!(f, "sides {}", e(a)),
            Command::Succ(a) => write!(f, "succ {}", e(a)),
            Command::Pred(a) => write!(f, "pred {}", e(a)),
            Command::Rot(a) => write!(f, "rot {}", e(a)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub commands: Vec<Command>,
    /// Source line of every command (1-based); empty for generated traces.
    pub lines: Vec<usize>,
}

impl Trace {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut t = Trace::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let toks: Vec<&str> = body.split_whitespace().collect();
            let err = |msg: &str| ParseError { line, msg: format!("{msg}: `{body}`") };
            let num = |k: usize| -> Result<u64, ParseError> {
                toks.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| err("expected a number"))
            };
            let lab = |k: usize| -> Result<Label, ParseError> {
                toks.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| err("expected a vertex label"))
            };
            let edge = |k: usize| -> Result<DirectedEdge, ParseError> { Ok(DirectedEdge::new(lab(k)?, lab(k + 1)?)) };
            let arity = |n: usize| if toks.len() == n { Ok(()) } else { Err(err(&format!("expected {} arguments", n - 1))) };
            let corner = |k: usize| -> Result<(Corner, usize), ParseError> {
                match toks.get(k).copied() {
                    Some("after") => Ok((Corner::After(edge(k + 1)?), k + 3)),
                    Some("at") => Ok((Corner::Isolated(lab(k + 1)?), k + 2)),
                    _ => Err(err("expected `after <u> <v>` or `at <u>`")),
                }
            };
            let cmd = match toks[0] {
                "link" => {
                    let (u, v) = (lab(1)?, lab(2)?);
                    let (cu, k) = corner(3)?;
                    let (cv, k) = corner(k)?;
                    arity(k)?;
                    if cu.vertex() != u || cv.vertex() != v {
                        return Err(err("corners must lie at the two endpoints"));
                    }
                    Command::Link { u, v, cu, cv }
                }
                "cut" => {
                    arity(3)?;
                    Command::Cut(edge(1)?)
                }
                "addv" => {
                    arity(2)?;
                    Command::AddVertex(lab(1)?)
                }
                "rmv" => {
                    arity(2)?;
                    Command::RemoveVertex(lab(1)?)
                }
                "dist" => {
                    arity(5)?;
                    Command::Dist(edge(1)?, edge(3)?)
                }
                "jump" => {
                    arity(4)?;
                    Command::Jump(edge(1)?, num(3)?)
                }
                "sides" => {
                    arity(3)?;
                    Command::Sides(edge(1)?)
                }
                "succ" => {
                    arity(3)?;
                    Command::Succ(edge(1)?)
                }
                "pred" => {
                    arity(3)?;
                    Command::Pred(edge(1)?)
                }
                "rot" => {
                    arity(3)?;
                    Command::Rot(edge(1)?)
                }
                other => return Err(ParseError { line, msg: format!("unknown command `{other}`") }),
            };
            t.commands.push(cmd);
            t.lines.push(line);
        }
        Ok(t)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.commands {
            let _ = writeln!(s, "{c}");
        }
        s
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }
}

/// Tour snapshots of an explicit forest, built on demand. Updates drop only
/// the snapshots of the trees they touch.
#[derive(Default)]
pub struct TourCache {
    tours: Vec<Option<TourIndex>>,
    of: FxHashMap<Label, usize>,
}

impl TourCache {
    pub fn clear(&mut self) {
        self.tours.clear();
        self.of.clear();
    }

    /// Forget the snapshot of the tree containing `v`, if any.
    pub fn invalidate(&mut self, v: Label) {
        if let Some(i) = self.of.get(&v).copied() {
            if let Some(t) = self.tours[i].take() {
                for d in t.tour() {
                    self.of.remove(&d.tail);
                }
            }
        }
    }

    pub fn get(&mut self, f: &EmbeddedForest, e: DirectedEdge) -> Result<&TourIndex, OracleError> {
        if !f.has_edge(e) {
            return Err(OracleError::UnknownEdge(e));
        }
        if let Some(&i) = self.of.get(&e.tail) {
            return Ok(self.tours[i].as_ref().expect("live snapshot"));
        }
        let t = f.tour_index(e)?;
        let i = self.tours.len();
        for d in t.tour() {
            self.of.insert(d.tail, i);
        }
        self.tours.push(Some(t));
        Ok(self.tours[i].as_ref().unwrap())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FuzzConfig {
    pub ops: usize,
    pub seed: u64,
    /// Share of commands that are updates.
    pub update_ratio: f64,
    /// Links never raise a degree above this.
    pub degree_bound: Option<usize>,
    /// Include vertex insertions and deletions.
    pub vertex_ops: bool,
}

impl FuzzConfig {
    pub fn new(ops: usize, seed: u64) -> Self {
        Self { ops, seed, update_ratio: 0.35, degree_bound: None, vertex_ops: true }
    }
}

struct EdgePool {
    list: Vec<(Label, Label)>,
    pos: HashMap<(Label, Label), usize>,
}

impl EdgePool {
    fn key(a: Label, b: Label) -> (Label, Label) {
        (a.min(b), a.max(b))
    }
    fn insert(&mut self, a: Label, b: Label) {
        let k = Self::key(a, b);
        self.pos.insert(k, self.list.len());
        self.list.push(k);
    }
    fn remove(&mut self, a: Label, b: Label) {
        let i = self.pos.remove(&Self::key(a, b)).expect("edge present");
        self.list.swap_remove(i);
        if i < self.list.len() {
            self.pos.insert(self.list[i], i);
        }
    }
}

/// A random valid trace for `f`, produced by simulating on a copy.
pub fn fuzz(f: &EmbeddedForest, cfg: FuzzConfig) -> Trace {
    fuzz_with_answers(f, cfg).0
}

/// [`fuzz`], also returning the oracle's answer to every command.
pub fn fuzz_with_answers(f: &EmbeddedForest, cfg: FuzzConfig) -> (Trace, Vec<Answer>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut g = f.clone();
    let mut pool = EdgePool { list: Vec::new(), pos: HashMap::new() };
    for e in f.directed_edges() {
        if e.tail < e.head {
            pool.insert(e.tail, e.head);
        }
    }
    let mut verts: Vec<Label> = f.vertices().collect();
    let mut vpos: HashMap<Label, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut next = verts.iter().max().map_or(0, |m| m + 1);
    let mut cache = TourCache::default();
    let mut out = Trace::default();
    let mut answers = Vec::with_capacity(cfg.ops);

    let random_edge = |rng: &mut ChaCha8Rng, pool: &EdgePool| {
        let (a, b) = pool.list[rng.gen_range(0..pool.list.len())];
        if rng.gen_bool(0.5) {
            DirectedEdge::new(a, b)
        } else {
            DirectedEdge::new(b, a)
        }
    };
    let corner_at = |rng: &mut ChaCha8Rng, g: &EmbeddedForest, v: Label| {
        let r = g.rotation(v).unwrap();
        if r.is_empty() {
            Corner::Isolated(v)
        } else {
            Corner::After(DirectedEdge::new(r[rng.gen_range(0..r.len())], v))
        }
    };

    while out.commands.len() < cfg.ops {
        let update = rng.gen_bool(cfg.update_ratio) || pool.list.is_empty();
        let cmd = if update {
            let r: f64 = rng.gen();
            let (p_cut, p_link) = if cfg.vertex_ops { (0.45, 0.9) } else { (0.5, 1.0) };
            if r < p_cut && !pool.list.is_empty() {
                let e = random_edge(&mut rng, &pool);
                Some(Command::Cut(e))
            } else if r < p_link && verts.len() >= 2 {
                let mut found = None;
                for _ in 0..16 {
                    let u = verts[rng.gen_range(0..verts.len())];
                    let v = verts[rng.gen_range(0..verts.len())];
                    if u == v {
                        continue;
                    }
                    let (du, dv) = (g.degree(u).unwrap(), g.degree(v).unwrap());
                    if cfg.degree_bound.is_some_and(|d| du + 1 > d || dv + 1 > d) {
                        continue;
                    }
                    let joined = du > 0 && dv > 0 && {
                        let eu = DirectedEdge::new(u, g.rotation(u).unwrap()[0]);
                        let ev = DirectedEdge::new(v, g.rotation(v).unwrap()[0]);
                        cache.get(&g, eu).unwrap().contains(ev)
                    };
                    if !joined {
                        found = Some((u, v));
                        break;
                    }
                }
                found.map(|(u, v)| Command::Link { u, v, cu: corner_at(&mut rng, &g, u), cv: corner_at(&mut rng, &g, v) })
            } else if cfg.vertex_ops && r < 0.95 {
                Some(Command::AddVertex(next))
            } else if cfg.vertex_ops {
                (0..16)
                    .map(|_| verts[rng.gen_range(0..verts.len().max(1))])
                    .find(|&v| g.degree(v).unwrap() == 0 && verts.len() > 1)
                    .map(Command::RemoveVertex)
            } else {
                None
            }
        } else {
            let e = random_edge(&mut rng, &pool);
            Some(match rng.gen_range(0..6) {
                0 => Command::Succ(e),
                1 => Command::Pred(e),
                2 => Command::Rot(e),
                3 => Command::Sides(e),
                4 => {
                    let t = rng.gen_range(0..4 * pool.list.len() as u64 + 4);
                    Command::Jump(e, t)
                }
                _ => {
                    let e2 = if rng.gen_bool(0.7) {
                        let t = cache.get(&g, e).unwrap();
                        t.tour()[rng.gen_range(0..t.len())]
                    } else {
                        random_edge(&mut rng, &pool)
                    };
                    Command::Dist(e, e2)
                }
            })
        };
        let Some(cmd) = cmd else { continue };
        let answer = apply_oracle(&mut g, &mut cache, &cmd);
        debug_assert!(!matches!(answer, Answer::Error(_)) || matches!(cmd, Command::Dist(..)), "{cmd}");
        match cmd {
            Command::Cut(e) => pool.remove(e.tail, e.head),
            Command::Link { u, v, .. } => pool.insert(u, v),
            Command::AddVertex(v) => {
                vpos.insert(v, verts.len());
                verts.push(v);
                next += 1;
            }
            Command::RemoveVertex(v) => {
                let i = vpos.remove(&v).unwrap();
                verts.swap_remove(i);
                if i < verts.len() {
                    vpos.insert(verts[i], i);
                }
            }
            _ => {}
        }
        out.commands.push(cmd);
        answers.push(answer);
    }
    (out, answers)
}

/// Result of one command, as comparable values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    Done,
    Edge(DirectedEdge),
    Pair(DirectedEdge, DirectedEdge),
    Count(u64),
    Sizes(u64, u64),
    Error(&'static str),
}

fn oracle_class(e: &OracleError) -> &'static str {
    match e {
        OracleError::NotConnected(..) => "not-connected",
        OracleError::WouldCreateCycle(..) => "cycle",
        OracleError::NotIsolated(_) => "not-isolated",
        OracleError::DuplicateVertex(_) => "duplicate",
        _ => "invalid",
    }
}

fn forest_class(e: &ForestError) -> &'static str {
    match e {
        ForestError::NotConnected => "not-connected",
        ForestError::WouldCreateCycle => "cycle",
        ForestError::NotIsolated => "not-isolated",
        ForestError::DuplicateLabel(_) => "duplicate",
        ForestError::DegreeExceeded { .. } => "degree",
        _ => "invalid",
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    /// Index of the command in the trace.
    pub index: usize,
    pub command: Command,
    pub expected: Answer,
    pub got: Answer,
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub executed: usize,
    pub mismatches: Vec<Mismatch>,
    /// Links refused by the compact forest's degree bound (not applied to either side).
    pub skipped: usize,
    /// Size-bound violations seen after updates (when auditing).
    pub violations: usize,
    /// Consistency failures (when checking).
    pub corrupt: Vec<(usize, String)>,
}

impl Outcome {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty() && self.violations == 0 && self.corrupt.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Audit cluster sizes after every update.
    pub audit: bool,
    /// Run the deep consistency check every this many updates (0 = never).
    pub check_every: usize,
}

/// One command against the oracle.
pub fn apply_oracle(g: &mut EmbeddedForest, cache: &mut TourCache, c: &Command) -> Answer {
    let r = (|| -> Result<Answer, OracleError> {
        Ok(match *c {
            Command::Link { cu, cv, .. } => {
                cache.invalidate(cu.vertex());
                cache.invalidate(cv.vertex());
                Answer::Edge(g.link(cu, cv)?)
            }
            Command::Cut(e) => {
                if g.has_edge(e) {
                    cache.invalidate(e.tail);
                }
                g.cut(e)?;
                Answer::Done
            }
            Command::AddVertex(v) => {
                g.add_vertex(v)?;
                Answer::Done
            }
            Command::RemoveVertex(v) => {
                g.remove_vertex(v)?;
                Answer::Done
            }
            Command::Dist(a, b) => {
                let t = cache.get(g, a)?;
                match t.distance(a, b) {
                    Some(d) => Answer::Count(d),
                    None => {
                        g.rotation(b.tail)?;
                        if !g.has_edge(b) {
                            return Err(OracleError::UnknownEdge(b));
                        }
                        return Err(OracleError::NotConnected(a, b));
                    }
                }
            }
            Command::Jump(a, t) => Answer::Edge(cache.get(g, a)?.at_distance(a, t).unwrap()),
            Command::Sides(a) => {
                let (x, y) = cache.get(g, a)?.side_sizes(a).unwrap();
                Answer::Sizes(x, y)
            }
            Command::Succ(a) => Answer::Edge(g.tour_successor(a)?),
            Command::Pred(a) => Answer::Edge(g.tour_predecessor(a)?),
            Command::Rot(a) => {
                let (p, s) = g.rotation_neighbors(a)?;
                Answer::Pair(p, s)
            }
        })
    })();
    r.unwrap_or_else(|e| Answer::Error(oracle_class(&e)))
}

/// One command against the compact forest, through the label dictionary.
pub fn apply_compact(cf: &mut CompactForest, c: &Command) -> Answer {
    let r = (|| -> Result<Answer, ForestError> {
        let lab = |cf: &CompactForest, e| cf.edge_labels(e);
        Ok(match *c {
            Command::Link { cu, cv, .. } => {
                let e = cf.link_labels(cu, cv)?;
                Answer::Edge(lab(cf, e)?)
            }
            Command::Cut(e) => {
                cf.cut_labels(e.tail, e.head)?;
                Answer::Done
            }
            Command::AddVertex(v) => {
                cf.add_vertex(v)?;
                Answer::Done
            }
            Command::RemoveVertex(v) => {
                cf.remove_vertex_label(v)?;
                Answer::Done
            }
            Command::Dist(a, b) => {
                let (x, y) = (cf.edge_of(a.tail, a.head)?, cf.edge_of(b.tail, b.head)?);
                Answer::Count(cf.tour_distance(x, y)?)
            }
            Command::Jump(a, t) => {
                let x = cf.edge_of(a.tail, a.head)?;
                Answer::Edge(lab(cf, cf.edge_at_distance(x, t)?)?)
            }
            Command::Sides(a) => {
                let (x, y) = cf.side_sizes(cf.edge_of(a.tail, a.head)?)?;
                Answer::Sizes(x, y)
            }
            Command::Succ(a) => Answer::Edge(lab(cf, cf.tour_succ(cf.edge_of(a.tail, a.head)?)?)?),
            Command::Pred(a) => Answer::Edge(lab(cf, cf.tour_pred(cf.edge_of(a.tail, a.head)?)?)?),
            Command::Rot(a) => {
                let (p, s) = cf.rotation_pred_succ(cf.edge_of(a.tail, a.head)?)?;
                Answer::Pair(lab(cf, p)?, lab(cf, s)?)
            }
        })
    })();
    r.unwrap_or_else(|e| Answer::Error(forest_class(&e)))
}

/// Replays `trace` on both structures in lockstep.
pub fn run_lockstep(cf: &mut CompactForest, g: &mut EmbeddedForest, trace: &Trace, opts: RunOptions) -> Outcome {
    let mut cache = TourCache::default();
    run_with(cf, trace, opts, true, |_, c| apply_oracle(g, &mut cache, c))
}

/// Replays `trace` on `cf`, comparing with answers recorded earlier. A link
/// refused by the degree bound counts as a mismatch here, since the recorded
/// answers assume it happened.
pub fn run_expected(cf: &mut CompactForest, trace: &Trace, expected: &[Answer], opts: RunOptions) -> Outcome {
    assert_eq!(trace.len(), expected.len(), "one answer per command");
    run_with(cf, trace, opts, false, |i, _| expected[i].clone())
}

fn run_with(
    cf: &mut CompactForest,
    trace: &Trace,
    opts: RunOptions,
    skip_degree: bool,
    mut oracle: impl FnMut(usize, &Command) -> Answer,
) -> Outcome {
    let mut out = Outcome::default();
    let mut updates = 0usize;
    for (i, c) in trace.commands.iter().enumerate() {
        let got = apply_compact(cf, c);
        if skip_degree && got == Answer::Error("degree") {
            out.skipped += 1;
            out.executed += 1;
            continue;
        }
        let expected = oracle(i, c);
        if got != expected {
            out.mismatches.push(Mismatch { index: i, command: *c, expected, got });
        }
        if c.is_update() {
            updates += 1;
            if opts.audit {
                out.violations += cf.audit().len();
            }
            if opts.check_every > 0 && updates.is_multiple_of(opts.check_every) {
                if let Err(e) = cf.check_consistency() {
                    out.corrupt.push((i, e));
                }
            }
        }
        out.executed += 1;
    }
    out
}

/// Drives `ops` updates straight on `cf`, alternating a random cut with a
/// link that reconnects the two halves at random vertices and corners, so the
/// vertex count and the number of trees stay fixed. Random vertices are drawn
/// with tour jumps on `cf` itself, so no explicit copy is needed. Returns the
/// commands applied.
pub fn churn(cf: &mut CompactForest, ops: usize, seed: u64) -> Result<Trace, ForestError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = EdgePool { list: Vec::new(), pos: HashMap::new() };
    let mut vs: Vec<Label> = cf.vertex_labels().collect();
    vs.sort_unstable();
    for &v in &vs {
        for w in cf.rotation_labels(v)? {
            if v < w {
                pool.insert(v, w);
            }
        }
    }
    let mut out = Trace::default();
    if pool.list.is_empty() {
        return Ok(out);
    }
    let bound = cf.degree_bound();
    let bounded = cf.mode() == crate::clustering::Mode::Bounded;
    // a random vertex of the tree holding `v`, with a corner there
    let pick = |cf: &CompactForest, rng: &mut ChaCha8Rng, v: Label| -> Result<Corner, ForestError> {
        let rot = cf.rotation_labels(v)?;
        let x = if rot.is_empty() {
            v
        } else {
            let e = cf.edge_of(v, rot[0])?;
            let (a, b) = cf.side_sizes(e)?;
            let t = rng.gen_range(0..2 * (a + b - 1));
            cf.edge_labels(cf.edge_at_distance(e, t)?)?.tail
        };
        let rot = cf.rotation_labels(x)?;
        Ok(if rot.is_empty() {
            Corner::Isolated(x)
        } else {
            Corner::After(DirectedEdge::new(rot[rng.gen_range(0..rot.len())], x))
        })
    };
    while out.len() < ops {
        let (a, b) = pool.list[rng.gen_range(0..pool.list.len())];
        let rot_a = cf.rotation_labels(a)?;
        let rot_b = cf.rotation_labels(b)?;
        let back = |rot: &[Label], x: Label, y: Label| {
            if rot.len() == 1 {
                Corner::Isolated(x)
            } else {
                let i = rot.iter().position(|&w| w == y).expect("edge present");
                Corner::After(DirectedEdge::new(rot[(i + rot.len() - 1) % rot.len()], x))
            }
        };
        let undo = (back(&rot_a, a, b), back(&rot_b, b, a));
        cf.cut_labels(a, b)?;
        pool.remove(a, b);
        out.commands.push(Command::Cut(DirectedEdge::new(a, b)));
        if out.len() == ops {
            break;
        }
        let mut link = None;
        for _ in 0..8 {
            let (cu, cv) = (pick(cf, &mut rng, a)?, pick(cf, &mut rng, b)?);
            let ok = |c: Corner| !bounded || cf.degree(c.vertex()).is_ok_and(|d| d < bound);
            if ok(cu) && ok(cv) {
                link = Some((cu, cv));
                break;
            }
        }
        let (cu, cv) = link.unwrap_or(undo);
        cf.link_labels(cu, cv)?;
        pool.insert(cu.vertex(), cv.vertex());
        out.commands.push(Command::Link { u: cu.vertex(), v: cv.vertex(), cu, cv });
    }
    Ok(out)
}
