use super::*;
use crate::oracle::{Corner, EmbeddedForest};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn e(u: Label, v: Label) -> DirectedEdge {
    DirectedEdge::new(u, v)
}

fn star_path() -> EmbeddedForest {
    // 0 - 1 - 2, 1 - 3, 3 - 4
    let mut r = BTreeMap::new();
    r.insert(0, vec![1]);
    r.insert(1, vec![0, 2, 3]);
    r.insert(2, vec![1]);
    r.insert(3, vec![1, 4]);
    r.insert(4, vec![3]);
    EmbeddedForest::from_rotations(r).unwrap()
}

fn weight_of(d: DirectedEdge) -> u64 {
    (d.tail * 7 + d.head * 3) as u64 % 5
}

#[test]
fn navigation_matches_oracle() {
    let f = star_path();
    let (mf, ids, _) = MacroForest::<()>::from_embedded(&f, weight_of);
    mf.check_invariants().unwrap();
    for d in f.directed_edges() {
        let m = ids[&d];
        assert_eq!(mf.succ(m).unwrap(), ids[&f.tour_successor(d).unwrap()]);
        assert_eq!(mf.pred(m).unwrap(), ids[&f.tour_predecessor(d).unwrap()]);
        let (p, s) = f.rotation_neighbors(d).unwrap();
        assert_eq!(mf.rotation_neighbors(m).unwrap(), (ids[&p], ids[&s]));
        assert_eq!(mf.reverse(m).unwrap(), ids[&d.reverse()]);
        for t in 0..12 {
            assert_eq!(mf.edge_at_distance(m, t).unwrap(), ids[&f.edge_at_distance(d, t).unwrap()]);
        }
        for d2 in f.directed_edges() {
            let sw = mf.distance_and_weight(m, ids[&d2]).unwrap();
            let expect = if d == d2 { 0 } else { f.tour_distance(d, d2).unwrap() + 1 };
            assert_eq!(sw.steps, expect);
        }
        let (tail, head) = f.side_sizes(d).unwrap();
        let s = mf.side_summary(m).unwrap();
        assert_eq!((s.tail_side.vertices, s.head_side.vertices), (tail, head));
        assert_eq!(mf.corner_weight(CornerRef::After(m)).unwrap(), weight_of(d));
    }
}

#[test]
fn weight_searches() {
    // path 0-1-2 with corner weights after (0,1)=2, (1,2)=5, (2,1)=1, (1,0)=4
    let f = EmbeddedForest::from_rotations(BTreeMap::from([(0, vec![1]), (1, vec![0, 2]), (2, vec![1])])).unwrap();
    let w = |d: DirectedEdge| match (d.tail, d.head) {
        (0, 1) => 2,
        (1, 2) => 5,
        (2, 1) => 1,
        _ => 4,
    };
    let (mf, ids, _) = MacroForest::<()>::from_embedded(&f, w);
    let m = ids[&e(0, 1)];
    assert_eq!(mf.tour_total(m).unwrap(), StepsAndWeight { steps: 4, weight: 12 });
    // weights after m: (1,2):2, (2,1):7, (1,0):8, (0,1):12
    assert_eq!(mf.edge_at_weight(m, 0, SearchMode::AtLeast).unwrap(), m);
    assert_eq!(mf.edge_at_weight(m, 3, SearchMode::AtLeast).unwrap(), ids[&e(2, 1)]);
    assert_eq!(mf.edge_at_weight(m, 3, SearchMode::AtMost).unwrap(), ids[&e(1, 2)]);
    assert_eq!(mf.edge_at_weight(m, 7, SearchMode::AtMost).unwrap(), ids[&e(2, 1)]);
    assert_eq!(mf.edge_at_weight(m, 100, SearchMode::AtMost).unwrap(), m);
    assert!(matches!(mf.edge_at_weight(m, 13, SearchMode::AtLeast), Err(MacroError::Exhausted { .. })));
    let (x, v) = mf.edge_at_combined(m, 4, SearchMode::AtLeast).unwrap();
    assert_eq!((x, v), (ids[&e(2, 1)], 9));
}

#[test]
fn delete_then_insert_roundtrip() {
    let f = star_path();
    let (mut mf, ids, _) = MacroForest::<()>::from_embedded(&f, |_| 1);
    let (tail, head) = mf.delete_edge(ids[&e(1, 3)], 10, 20).unwrap();
    mf.check_invariants().unwrap();
    let TourRef::Edge(t) = tail else { panic!() };
    let TourRef::Edge(h) = head else { panic!() };
    assert_eq!(mf.tour_size(t).unwrap(), 4);
    assert_eq!(mf.tour_size(h).unwrap(), 2);
    assert_eq!(mf.pre_weight(ids[&e(1, 0)]).unwrap(), 10);
    assert_eq!(mf.pre_weight(ids[&e(3, 4)]).unwrap(), 20);
    assert!(!mf.same_tour(t, h).unwrap());
    let m = mf
        .insert_edge(CornerRef::After(ids[&e(2, 1)]), CornerRef::After(ids[&e(4, 3)]), [1, 2, 3, 4], EdgeKind::True, ((), ()))
        .unwrap();
    mf.check_invariants().unwrap();
    assert_eq!(mf.tour_size(m).unwrap(), 8);
    let r = mf.reverse(m).unwrap();
    assert_eq!(mf.pred(m).unwrap(), ids[&e(2, 1)]);
    assert_eq!(mf.succ(m).unwrap(), ids[&e(3, 4)]);
    assert_eq!(mf.pred(r).unwrap(), ids[&e(4, 3)]);
    assert_eq!(mf.succ(r).unwrap(), ids[&e(1, 0)]);
    assert_eq!(mf.pre_weight(m).unwrap(), 1);
    assert_eq!(mf.pre_weight(ids[&e(3, 4)]).unwrap(), 2);
    assert_eq!(mf.pre_weight(r).unwrap(), 3);
    assert_eq!(mf.pre_weight(ids[&e(1, 0)]).unwrap(), 4);
    assert!(matches!(
        mf.insert_edge(CornerRef::After(m), CornerRef::After(r), [0; 4], EdgeKind::True, ((), ())),
        Err(MacroError::WouldCreateCycle)
    ));
}

#[test]
fn isolated_corners() {
    let mut mf = MacroForest::<()>::new();
    let a = mf.new_isolated(3);
    let b = mf.new_isolated(4);
    let m = mf
        .insert_edge(CornerRef::Isolated(a), CornerRef::Isolated(b), [1, 2, 3, 4], EdgeKind::True, ((), ()))
        .unwrap();
    // both sides coincide: before m = 1 + 4, before rev = 3 + 2
    assert_eq!(mf.pre_weight(m).unwrap(), 5);
    assert_eq!(mf.pre_weight(mf.reverse(m).unwrap()).unwrap(), 5);
    assert!(mf.corner_weight(CornerRef::Isolated(a)).is_err());
    let (t, h) = mf.delete_edge(m, 7, 8).unwrap();
    let (TourRef::Isolated(t), TourRef::Isolated(h)) = (t, h) else { panic!() };
    assert_eq!(mf.corner_weight(CornerRef::Isolated(t)).unwrap(), 7);
    assert_eq!(mf.corner_weight(CornerRef::Isolated(h)).unwrap(), 8);
    assert_eq!(mf.edge_count(), 0);
}

#[test]
fn contract_moves_weights() {
    let f = star_path();
    let (mut mf, ids, _) = MacroForest::<()>::from_embedded(&f, |_| 1);
    let before = mf.tour_total(ids[&e(0, 1)]).unwrap();
    let t = mf.contract_edge(ids[&e(1, 3)]).unwrap();
    mf.check_invariants().unwrap();
    let TourRef::Edge(t) = t else { panic!() };
    let after = mf.tour_total(t).unwrap();
    assert_eq!(after.steps, before.steps - 2);
    assert_eq!(after.weight, before.weight);
    assert_eq!(mf.succ(ids[&e(2, 1)]).unwrap(), ids[&e(3, 4)]);
    assert_eq!(mf.pre_weight(ids[&e(3, 4)]).unwrap(), 2);
    // contracting a lone edge leaves a vertex carrying both weights
    let mut mf2 = MacroForest::<()>::new();
    let (a, b) = (mf2.new_isolated(0), mf2.new_isolated(0));
    let m = mf2.insert_edge(CornerRef::Isolated(a), CornerRef::Isolated(b), [1, 0, 2, 0], EdgeKind::True, ((), ())).unwrap();
    let TourRef::Isolated(v) = mf2.contract_edge(m).unwrap() else { panic!() };
    assert_eq!(mf2.corner_weight(CornerRef::Isolated(v)).unwrap(), 3);
}

#[test]
fn split_vertex_matches_oracle_shape() {
    // star at 0 with leaves 1..=4; split 0 so leaves 2,3 move to a new vertex
    let f = EmbeddedForest::from_rotations(BTreeMap::from([
        (0, vec![1, 2, 3, 4]),
        (1, vec![0]),
        (2, vec![0]),
        (3, vec![0]),
        (4, vec![0]),
    ]))
    .unwrap();
    let (mut mf, ids, _) = MacroForest::<()>::from_embedded(&f, |_| 0);
    let m = mf
        .split_vertex(CornerRef::After(ids[&e(1, 0)]), CornerRef::After(ids[&e(3, 0)]), EdgeKind::False, [0; 4], ((), ()))
        .unwrap();
    mf.check_invariants().unwrap();
    let r = mf.reverse(m).unwrap();
    assert_eq!(mf.succ(m).unwrap(), ids[&e(0, 2)]);
    assert_eq!(mf.pred(r).unwrap(), ids[&e(3, 0)]);
    assert_eq!(mf.succ(r).unwrap(), ids[&e(0, 4)]);
    // a false edge does not change distances
    assert_eq!(mf.tour_total(m).unwrap().steps, 8);
    assert_eq!(mf.true_succ(ids[&e(1, 0)]).unwrap(), Some(ids[&e(0, 2)]));
    assert_eq!(mf.edge_at_distance(ids[&e(1, 0)], 1).unwrap(), ids[&e(0, 2)]);
    assert!(matches!(
        mf.split_vertex(CornerRef::After(ids[&e(1, 0)]), CornerRef::After(ids[&e(0, 1)]), EdgeKind::True, [0; 4], ((), ())),
        Err(MacroError::DistinctVertices)
    ));
    let c = mf.contract_edge(m).unwrap();
    mf.check_invariants().unwrap();
    let TourRef::Edge(c) = c else { panic!() };
    assert_eq!(mf.tour_size(c).unwrap(), 8);
    assert_eq!(mf.succ(ids[&e(1, 0)]).unwrap(), ids[&e(0, 2)]);
}

#[test]
fn stale_handles_rejected() {
    let f = star_path();
    let (mut mf, ids, _) = MacroForest::<()>::from_embedded(&f, |_| 0);
    let m = ids[&e(3, 4)];
    mf.delete_edge(m, 0, 0).unwrap();
    assert_eq!(mf.succ(m), Err(MacroError::StaleHandle));
    let (a, b) = (mf.new_isolated(0), mf.new_isolated(0));
    let fresh = mf.insert_edge(CornerRef::Isolated(a), CornerRef::Isolated(b), [0; 4], EdgeKind::True, ((), ())).unwrap();
    assert_ne!(fresh, m);
    assert_eq!(mf.succ(m), Err(MacroError::StaleHandle));
}

#[test]
fn overflow_detected() {
    let mut mf = MacroForest::<()>::new();
    let (a, b) = (mf.new_isolated(0), mf.new_isolated(0));
    let m = mf.insert_edge(CornerRef::Isolated(a), CornerRef::Isolated(b), [0; 4], EdgeKind::True, ((), ())).unwrap();
    assert_eq!(mf.set_pre_weight(m, u64::MAX), Err(MacroError::WeightOverflow));
    assert_eq!(mf.pre_weight(m).unwrap(), 0);
}

fn corner_for(f: &EmbeddedForest, v: Label, pick: usize) -> Corner {
    let rot = f.rotation(v).unwrap();
    if rot.is_empty() {
        Corner::Isolated(v)
    } else {
        Corner::After(e(rot[pick % rot.len()], v))
    }
}

proptest! {
    #[test]
    fn random_links_and_cuts_track_oracle(ops in prop::collection::vec((0u32..12, 0u32..12, 0usize..5, 0usize..5, any::<bool>()), 1..60)) {
        let mut f = EmbeddedForest::with_vertices(12);
        let mut mf = MacroForest::<()>::new();
        let mut ids: HashMap<DirectedEdge, MacroId> = HashMap::new();
        let mut lone: HashMap<Label, IsolatedId> = (0..12).map(|v| (v, mf.new_isolated(0))).collect();
        for (u, v, pu, pv, cut) in ops {
            if cut {
                let edges: Vec<_> = f.directed_edges().collect();
                if edges.is_empty() { continue; }
                let d = edges[(u as usize * 5 + v as usize) % edges.len()];
                f.cut(d).unwrap();
                let (t, h) = mf.delete_edge(ids[&d], 0, 0).unwrap();
                ids.remove(&d);
                ids.remove(&d.reverse());
                if let TourRef::Isolated(i) = t { lone.insert(d.tail, i); }
                if let TourRef::Isolated(i) = h { lone.insert(d.head, i); }
            } else {
                if u == v || f.connected(u, v).unwrap() { continue; }
                let (c1, c2) = (corner_for(&f, u, pu), corner_for(&f, v, pv));
                let mc = |c: Corner, lone: &mut HashMap<Label, IsolatedId>| match c {
                    Corner::After(d) => CornerRef::After(ids[&d]),
                    Corner::Isolated(x) => CornerRef::Isolated(lone.remove(&x).unwrap()),
                };
                let (m1, m2) = (mc(c1, &mut lone), mc(c2, &mut lone));
                let m = mf.insert_edge(m1, m2, [0; 4], EdgeKind::True, ((), ())).unwrap();
                let d = f.link(c1, c2).unwrap();
                ids.insert(d, m);
                ids.insert(d.reverse(), mf.reverse(m).unwrap());
            }
            mf.check_invariants().unwrap();
        }
        for d in f.directed_edges() {
            let m = ids[&d];
            prop_assert_eq!(mf.succ(m).unwrap(), ids[&f.tour_successor(d).unwrap()]);
            let t = (d.tail as u64 * 3) % 9;
            prop_assert_eq!(mf.edge_at_distance(m, t).unwrap(), ids[&f.edge_at_distance(d, t).unwrap()]);
            let (ts, hs) = f.side_sizes(d).unwrap();
            let s = mf.side_summary(m).unwrap();
            prop_assert_eq!((s.tail_side.vertices, s.head_side.vertices), (ts, hs));
        }
    }
}
