//! One pass/fail line per acceptance criterion.

mod common;

use std::time::{Duration, Instant};

use compact_ett::clustering::Mode;
use compact_ett::forest::{combine, CompactForest};
use compact_ett::micro_tree::{build, Fragment, RootChoice};
use compact_ett::oracle::{Corner, DirectedEdge, EmbeddedForest};
use compact_ett::workload::{churn, fuzz_with_answers, generate, run_expected, FuzzConfig, Kind, RunOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ports_fixture() -> Outcome {
    let t = Instant::now();
    let f = common::expanded_cluster();
    let frag = Fragment::from_forest(&f, &[0, 1, 2, 3, 4, 5, 6]).map_err(|e| e.to_string())?;
    let (c, _) = build(&frag, RootChoice { node: 0, start: 0 }).map_err(|e| e.to_string())?;
    let el = t.elapsed();
    let (bits, w) = (c.ports_string(), c.corner_weights());
    ensure(bits == "0010001001001000" && w == [3, 2, 2, 5], || format!("got {bits} {w:?}"))?;
    ensure(el < Duration::from_millis(1), || format!("took {el:?}"))?;
    Ok(format!("{bits}, weights {w:?}, {el:?}"))
}

fn distance_composition() -> Outcome {
    let t = Instant::now();
    let d = combine(2, 2, 26, 51);
    // red edge (0, 1) with three edges below vertex 1
    let f = EmbeddedForest::from_rotations(
        [(0, vec![1]), (1, vec![0, 2, 3]), (2, vec![1]), (3, vec![1, 4]), (4, vec![3])].into_iter().collect(),
    )
    .map_err(|e| e.to_string())?;
    let cf = CompactForest::new(&f, 1.0, Mode::Unbounded).map_err(|e| e.to_string())?;
    let red = cf.edge_of(0, 1).map_err(|e| e.to_string())?;
    let between = cf.tour_distance(red, cf.reverse(red).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let (_, below) = cf.side_sizes(red).map_err(|e| e.to_string())?;
    let el = t.elapsed();
    ensure(d == 81 && between == 6 && below == 4, || format!("combine {d}, span {between}, count {below}"))?;
    ensure(el < Duration::from_millis(1), || format!("took {el:?}"))?;
    Ok(format!("combine = {d}, {between} directed edges -> {below} vertices, {el:?}"))
}

fn update_weights() -> Outcome {
    let (mut cf, _) = common::orange_fixture();
    let e = |cf: &CompactForest, u, v| cf.edge_of(u, v).map_err(|e| e.to_string());
    let before = cf.macro_edge_count();
    cf.cut_labels(6, 20).map_err(|e| e.to_string())?;
    cf.check_consistency()?;
    let green = cf.corner_weight_before(e(&cf, 6, 0)?).map_err(|e| e.to_string())?;
    let big = cf.corner_weight_before(e(&cf, 2, 10)?).map_err(|e| e.to_string())?;
    let small = cf.corner_weight_before(e(&cf, 22, 30)?).map_err(|e| e.to_string())?;
    let lost = before - cf.macro_edge_count();
    ensure(green.is_none() && big == Some(5) && small == Some(4) && lost == 2, || {
        format!("green {green:?}, weights {big:?}/{small:?}, macro edges lost {lost}")
    })?;
    Ok("new corner weights 4 and 5, green pair retracted".into())
}

struct EquivStats {
    traces: usize,
    updates: usize,
    violations: usize,
}

fn equivalence_runs() -> Result<(EquivStats, Duration), String> {
    let t = Instant::now();
    let mut s = EquivStats { traces: 0, updates: 0, violations: 0 };
    for kind in [Kind::Path, Kind::Star, Kind::Binary, Kind::Random] {
        for n in [64, 512, 4096] {
            for seed in 0..5u64 {
                for mode in [Mode::Bounded, Mode::Unbounded] {
                    let f = generate(kind, n, seed);
                    let mut cf = CompactForest::new(&f, 1.0, mode).map_err(|e| e.to_string())?;
                    let mut cfg = FuzzConfig::new(10_000, seed * 1000 + n as u64);
                    if mode == Mode::Bounded {
                        cfg.degree_bound = Some(cf.degree_bound());
                    }
                    let (trace, answers) = fuzz_with_answers(&f, cfg);
                    let out = run_expected(&mut cf, &trace, &answers, RunOptions { audit: true, check_every: 0 });
                    if let Some(m) = out.mismatches.first() {
                        return Err(format!(
                            "{kind} n={n} seed={seed} {mode:?}: command {} `{}` expected {:?} got {:?}",
                            m.index, m.command, m.expected, m.got
                        ));
                    }
                    s.traces += 1;
                    s.updates += trace.commands.iter().filter(|c| c.is_update()).count();
                    s.violations += out.violations;
                }
            }
        }
    }
    Ok((s, t.elapsed()))
}

fn space_series() -> Outcome {
    let mut prev = f64::INFINITY;
    let mut series = Vec::new();
    for k in [12, 14, 16, 18] {
        let n = 1usize << k;
        let f = generate(Kind::Random, n, k as u64);
        let cf = CompactForest::new(&f, 1.0, Mode::Unbounded).map_err(|e| e.to_string())?;
        let r = cf.space_report();
        ensure(r.bp_payload == 2 * n, || format!("bp payload {} at n = {n}", r.bp_payload))?;
        let per = r.auxiliary() as f64 / n as f64;
        series.push(format!("2^{k}: {per:.3}"));
        ensure(per < prev, || format!("aux/n not decreasing: {}", series.join(", ")))?;
        prev = per;
    }
    Ok(format!("bp = 2n; aux bits/n {}", series.join(", ")))
}

fn amortized_updates() -> Outcome {
    let f = generate(Kind::Random, 1 << 16, 16);
    let mut cf = CompactForest::new(&f, 1.0, Mode::Unbounded).map_err(|e| e.to_string())?;
    let b = cf.params().upper;
    churn(&mut cf, 100_000, 16).map_err(|e| e.to_string())?;
    let s = cf.stats();
    let per = s.rebuilt_vertices as f64 / s.updates as f64;
    ensure(per <= 4.0 * b as f64, || format!("{per:.1} vertices per update, B = {b}"))?;
    ensure(s.global_rebuilds == 0, || format!("{} global rebuilds at fixed n", s.global_rebuilds))?;

    // growth from 2^10 to 2^14 vertices: at most lg(16) = 4 global rebuilds
    let mut g = generate(Kind::Random, 1 << 10, 10);
    let mut cg = CompactForest::new(&g, 1.0, Mode::Unbounded).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for v in (1u32 << 10)..(1 << 14) {
        let u = rng.gen_range(0..v);
        let rot = g.rotation(u).map_err(|e| e.to_string())?;
        let cu = Corner::After(DirectedEdge::new(rot[rng.gen_range(0..rot.len())], u));
        g.add_vertex(v).map_err(|e| e.to_string())?;
        g.link(cu, Corner::Isolated(v)).map_err(|e| e.to_string())?;
        cg.add_vertex(v).map_err(|e| e.to_string())?;
        cg.link_labels(cu, Corner::Isolated(v)).map_err(|e| e.to_string())?;
    }
    ensure(cg.to_embedded() == g, || "grown forest differs from the explicit copy".into())?;
    let rebuilds = cg.stats().global_rebuilds;
    ensure(rebuilds <= 4, || format!("{rebuilds} global rebuilds over a 16x range"))?;
    Ok(format!(
        "{per:.1} rebuilt vertices per update = {:.2} B (B = {b}); {rebuilds} global rebuilds over 2^10..2^14",
        per / b as f64
    ))
}

fn property_suites() -> Outcome {
    let mut done = Vec::new();
    for (name, check) in common::props::SUITES {
        common::props::run(1000, check).map_err(|e| format!("{name}: {e}"))?;
        done.push(name);
    }
    Ok(format!("1000 cases each: {}", done.join(", ")))
}

#[test]
fn acceptance() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("ports bitvector fixture", ports_fixture()),
        ("distance composition fixture", distance_composition()),
        ("update weights fixture", update_weights()),
    ];
    let equiv = equivalence_runs();
    results.push((
        "oracle equivalence",
        match &equiv {
            Ok((s, el)) if *el < Duration::from_secs(300) => {
                Ok(format!("{} traces, {} updates, zero mismatches in {:.0?}", s.traces, s.updates, el))
            }
            Ok((_, el)) => Err(format!("took {el:?}, over the 5 minute budget")),
            Err(e) => Err(e.clone()),
        },
    ));
    results.push((
        "size invariants",
        match &equiv {
            Ok((s, _)) if s.violations == 0 => Ok(format!("audited after each of {} updates, zero violations", s.updates)),
            Ok((s, _)) => Err(format!("{} violations", s.violations)),
            Err(_) => Err("equivalence runs failed".into()),
        },
    ));
    results.push(("space", space_series()));
    results.push(("amortized updates", amortized_updates()));
    results.push(("invariant suites", property_suites()));

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
