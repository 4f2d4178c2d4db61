//! Randomized invariant checks shared by the property tests and the
//! acceptance report. Each check takes a seed and builds its own case.

use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use compact_ett::clustering::{ForestParams, Mode};
use compact_ett::forest::CompactForest;
use compact_ett::oracle::{Corner, DirectedEdge, EmbeddedForest};
use compact_ett::workload::{fuzz, generate, run_lockstep, FuzzConfig, Kind, RunOptions};

pub type Check = fn(u64) -> Result<(), String>;

pub const SUITES: [(&str, Check); 4] = [
    ("handle algebra", handle_algebra),
    ("aggregate soundness", aggregates),
    ("false-edge projection", false_edge_projection),
    ("link/cut round trip", link_cut_round_trip),
];

/// Runs `check` on `cases` random seeds.
pub fn run(cases: u32, check: Check) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner
        .run(&proptest::num::u64::ANY, |seed| check(seed).map_err(TestCaseError::fail))
        .map_err(|e| e.to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// A small forest, its compact copy with tight cluster bounds, after a short
/// random trace replayed on both.
pub fn case(seed: u64, force_split: bool) -> Result<(CompactForest, EmbeddedForest), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = Kind::ALL[rng.gen_range(0..Kind::ALL.len())];
    let kind = if force_split && rng.gen_bool(0.5) { Kind::Star } else { kind };
    let n = rng.gen_range(2..48);
    let f = generate(kind, n, seed);
    let mode = if force_split || rng.gen_bool(0.5) { Mode::Unbounded } else { Mode::Bounded };
    let mut cf = if force_split || rng.gen_bool(0.7) {
        let lower = rng.gen_range(2..6);
        let d = f.max_degree().max(2);
        let upper = if mode == Mode::Unbounded { 3 * lower } else { d * lower + 1 };
        let params = ForestParams::custom(lower, upper, rng.gen_range(2..5), mode, d);
        CompactForest::with_params(&f, params, None)
    } else {
        CompactForest::new(&f, if rng.gen_bool(0.5) { 1.0 } else { 0.5 }, mode)
    }
    .map_err(|e| format!("build: {e}"))?;
    let mut cfg = FuzzConfig::new(rng.gen_range(0..40), seed ^ 0x9e37);
    if mode == Mode::Bounded {
        cfg.degree_bound = Some(cf.degree_bound());
    }
    let trace = fuzz(&f, cfg);
    let mut g = f.clone();
    let out = run_lockstep(&mut cf, &mut g, &trace, RunOptions { audit: false, check_every: 1 });
    ensure(out.ok(), || format!("{kind} n={n}: {:?} {:?}", out.mismatches.first(), out.corrupt.first()))?;
    Ok((cf, g))
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

/// reverse is an involution; succ and pred are inverse; the tour successor
/// of (u, v) is the rotation successor of (v, u).
pub fn handle_algebra(seed: u64) -> Result<(), String> {
    let (cf, g) = case(seed, false)?;
    for d in g.directed_edges() {
        let e = cf.edge_of(d.tail, d.head).map_err(err)?;
        let r = cf.reverse(e).map_err(err)?;
        ensure(cf.reverse(r).map_err(err)? == e, || format!("reverse twice at {d:?}"))?;
        ensure(cf.edge_labels(r).map_err(err)? == d.reverse(), || format!("reverse labels at {d:?}"))?;
        let s = cf.tour_succ(e).map_err(err)?;
        ensure(cf.tour_pred(s).map_err(err)? == e, || format!("pred(succ) at {d:?}"))?;
        let p = cf.tour_pred(e).map_err(err)?;
        ensure(cf.tour_succ(p).map_err(err)? == e, || format!("succ(pred) at {d:?}"))?;
        let rs = cf.rotation_succ(e).map_err(err)?;
        ensure(cf.rotation_pred(rs).map_err(err)? == e, || format!("rotation inverse at {d:?}"))?;
        ensure(cf.rotation_succ(r).map_err(err)? == s, || format!("succ via rotation at {d:?}"))?;
    }
    Ok(())
}

/// Sizes and distances agree with each other, with the tour length, and with
/// the oracle.
pub fn aggregates(seed: u64) -> Result<(), String> {
    let (cf, g) = case(seed, false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(!seed);
    let edges: Vec<DirectedEdge> = g.directed_edges().collect();
    for &d in &edges {
        let e = cf.edge_of(d.tail, d.head).map_err(err)?;
        let (a, b) = cf.side_sizes(e).map_err(err)?;
        ensure((a, b) == g.side_sizes(d).map_err(err)?, || format!("sides at {d:?}"))?;
        let len = 2 * (a + b - 1);
        let r = cf.reverse(e).map_err(err)?;
        ensure(cf.tour_distance(e, r).map_err(err)? == 2 * (b - 1), || format!("subtree span at {d:?}"))?;
        ensure(cf.edge_at_distance(e, len).map_err(err)? == e, || format!("full loop at {d:?}"))?;
        let d2 = edges[rng.gen_range(0..edges.len())];
        let e2 = cf.edge_of(d2.tail, d2.head).map_err(err)?;
        if cf.same_tree(e, e2).map_err(err)? && e != e2 {
            let x = cf.tour_distance(e, e2).map_err(err)?;
            let y = cf.tour_distance(e2, e).map_err(err)?;
            ensure(x + y + 2 == len, || format!("distances {d:?} {d2:?} do not close the tour"))?;
            ensure(cf.edge_at_distance(e, x + 1).map_err(err)? == e2, || format!("jump {d:?} {d2:?}"))?;
            ensure(x == g.tour_distance(d, d2).map_err(err)?, || format!("oracle distance {d:?} {d2:?}"))?;
        }
    }
    Ok(())
}

/// With vertices split into clones, every public answer still names real
/// vertices and edges, and tours have the length of the unsplit tree.
pub fn false_edge_projection(seed: u64) -> Result<(), String> {
    let (cf, g) = case(seed, true)?;
    for v in g.vertices() {
        ensure(cf.degree(v).map_err(err)? == g.degree(v).map_err(err)?, || format!("degree of {v}"))?;
        let a = cf.rotation_labels(v).map_err(err)?;
        let b = g.rotation(v).map_err(err)?.to_vec();
        let same = a.len() == b.len()
            && (a.is_empty() || (0..b.len()).any(|k| (0..a.len()).all(|i| a[i] == b[(i + k) % b.len()])));
        ensure(same, || format!("rotation of {v}: {a:?} vs {b:?}"))?;
    }
    for d in g.directed_edges() {
        let e = cf.edge_of(d.tail, d.head).map_err(err)?;
        let (a, b) = cf.side_sizes(e).map_err(err)?;
        let len = 2 * (a + b - 1);
        let mut cur = e;
        for step in 1..=len {
            cur = cf.tour_succ(cur).map_err(err)?;
            let l = cf.edge_labels(cur).map_err(err)?;
            ensure(g.has_edge(l), || format!("walk from {d:?} reached {l:?}"))?;
            ensure((cur == e) == (step == len), || format!("tour of {d:?} has wrong length"))?;
        }
    }
    Ok(())
}

/// Cutting an edge and relinking it at the same corners restores the
/// embedding, and linking then cutting is the identity too.
pub fn link_cut_round_trip(seed: u64) -> Result<(), String> {
    let (mut cf, g) = case(seed, false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let edges: Vec<DirectedEdge> = g.directed_edges().collect();
    if !edges.is_empty() {
        let d = edges[rng.gen_range(0..edges.len())];
        let corner = |x: u32, y: u32| {
            let rot = g.rotation(x).unwrap();
            if rot.len() == 1 {
                Corner::Isolated(x)
            } else {
                let i = rot.iter().position(|&w| w == y).unwrap();
                Corner::After(DirectedEdge::new(rot[(i + rot.len() - 1) % rot.len()], x))
            }
        };
        let (cu, cv) = (corner(d.tail, d.head), corner(d.head, d.tail));
        cf.cut_labels(d.tail, d.head).map_err(err)?;
        let e = cf.link_labels(cu, cv).map_err(err)?;
        ensure(cf.edge_labels(e).map_err(err)? == d, || format!("relinked edge {d:?}"))?;
        ensure(cf.to_embedded() == g, || format!("cut/link of {d:?} changed the forest"))?;
        cf.check_consistency()?;
    }
    let vs: Vec<u32> = g.vertices().collect();
    for _ in 0..4 {
        let (u, v) = (vs[rng.gen_range(0..vs.len())], vs[rng.gen_range(0..vs.len())]);
        if u == v || g.connected(u, v).map_err(err)? {
            continue;
        }
        let pick = |x: u32, rng: &mut ChaCha8Rng| {
            let rot = g.rotation(x).unwrap();
            if rot.is_empty() {
                Corner::Isolated(x)
            } else {
                Corner::After(DirectedEdge::new(rot[rng.gen_range(0..rot.len())], x))
            }
        };
        let (cu, cv) = (pick(u, &mut rng), pick(v, &mut rng));
        match cf.link_labels(cu, cv) {
            Ok(_) => {}
            Err(compact_ett::forest::ForestError::DegreeExceeded { .. }) => continue,
            Err(e) => return Err(err(e)),
        }
        cf.cut_labels(u, v).map_err(err)?;
        ensure(cf.to_embedded() == g, || format!("link/cut of ({u}, {v}) changed the forest"))?;
        cf.check_consistency()?;
    }
    Ok(())
}
