use compact_ett::clustering::Mode;
use compact_ett::forest::{CompactForest, FingerTarget, ForestError};
use compact_ett::workload::{fuzz_with_answers, generate, run_expected, FuzzConfig, Kind, RunOptions};

#[test]
fn serialization_round_trips_bit_identically() {
    for (i, kind) in Kind::ALL.into_iter().enumerate() {
        for mode in [Mode::Unbounded, Mode::Bounded] {
            let f = generate(kind, 700, i as u64);
            let mut cf = CompactForest::new(&f, 0.5, mode).unwrap();
            let mut cfg = FuzzConfig::new(400, 9 + i as u64);
            if mode == Mode::Bounded {
                cfg.degree_bound = Some(cf.degree_bound());
            }
            let (trace, answers) = fuzz_with_answers(&f, cfg);
            assert!(run_expected(&mut cf, &trace, &answers, RunOptions::default()).ok());
            let bytes = cf.serialize();
            let back = CompactForest::deserialize(&bytes).unwrap();
            assert_eq!(back.serialize(), bytes, "{kind} {mode:?}");
            assert_eq!(back.to_embedded(), cf.to_embedded());
            back.check_consistency().unwrap();
        }
    }
}

#[test]
fn corrupt_snapshots_are_rejected() {
    let f = generate(Kind::Random, 100, 1);
    let bytes = CompactForest::new(&f, 1.0, Mode::Unbounded).unwrap().serialize();
    assert!(CompactForest::deserialize(&bytes[..bytes.len() / 2]).is_err());
    assert!(CompactForest::deserialize(b"nope").is_err());
    let mut bad = bytes.clone();
    bad[4] ^= 0xff;
    assert!(CompactForest::deserialize(&bad).is_err());
}

#[test]
fn empty_forest_round_trips() {
    let f = generate(Kind::Path, 0, 0);
    let cf = CompactForest::new(&f, 1.0, Mode::Unbounded).unwrap();
    let bytes = cf.serialize();
    assert_eq!(CompactForest::deserialize(&bytes).unwrap().serialize(), bytes);
}

#[test]
fn finger_follows_its_edge_through_rebuilds() {
    let f = generate(Kind::Path, 600, 0);
    let mut cf = CompactForest::new(&f, 0.5, Mode::Unbounded).unwrap();
    let e = cf.edge_of(300, 301).unwrap();
    let v = cf.vertex_of(299).unwrap();
    let fe = cf.register_finger(FingerTarget::Edge(e)).unwrap();
    let fv = cf.register_finger(FingerTarget::Vertex(v)).unwrap();
    // cut and relink right next to the finger so its cluster is rebuilt
    for (a, b) in [(301, 302), (298, 299), (302, 303)] {
        cf.cut_labels(a, b).unwrap();
        assert!(!cf.is_valid(e) || cf.edge_labels(e).unwrap().tail == 300);
        let FingerTarget::Edge(h) = cf.finger(fe).unwrap() else { panic!() };
        assert_eq!(cf.head_label(h).unwrap(), 301);
        assert_eq!(cf.tail_label(h).unwrap(), 300);
        let FingerTarget::Vertex(w) = cf.finger(fv).unwrap() else { panic!() };
        assert_eq!(cf.vertex_label(w).unwrap(), 299);
    }
    assert!(cf.stats().rebuilt_vertices > 0);
}

#[test]
fn unregistered_handles_go_stale() {
    let f = generate(Kind::Path, 600, 0);
    let mut cf = CompactForest::new(&f, 0.5, Mode::Unbounded).unwrap();
    let e = cf.edge_of(300, 301).unwrap();
    cf.cut_labels(301, 302).unwrap();
    assert_eq!(cf.tour_succ(e), Err(ForestError::StaleHandle));
}

#[test]
fn finger_budget_is_enforced_and_freed() {
    let f = generate(Kind::Random, 200, 3);
    let mut cf = CompactForest::new(&f, 1.0, Mode::Unbounded).unwrap();
    let budget = cf.finger_budget();
    let e = cf.edge_of(0, f.rotation(0).unwrap()[0]).unwrap();
    let ids: Vec<_> = (0..budget).map(|_| cf.register_finger(FingerTarget::Edge(e)).unwrap()).collect();
    assert!(matches!(cf.register_finger(FingerTarget::Edge(e)), Err(ForestError::FingerBudget { .. })));
    cf.drop_finger(ids[0]).unwrap();
    assert_eq!(cf.drop_finger(ids[0]), Err(ForestError::UnknownFinger));
    assert_eq!(cf.finger_count(), budget - 1);
    cf.register_finger(FingerTarget::Edge(e)).unwrap();
}
