mod common;

use common::props;

const CASES: u32 = 1000;

#[test]
fn handle_algebra() {
    props::run(CASES, props::handle_algebra).unwrap();
}

#[test]
fn aggregate_soundness() {
    props::run(CASES, props::aggregates).unwrap();
}

#[test]
fn false_edge_projection() {
    props::run(CASES, props::false_edge_projection).unwrap();
}

#[test]
fn link_cut_round_trip() {
    props::run(CASES, props::link_cut_round_trip).unwrap();
}

#[test]
fn split_cases_do_create_false_edges() {
    let split = (0..200).filter(|&s| props::case(s, true).unwrap().0.false_edge_count() > 0).count();
    assert!(split > 20, "only {split} of 200 cases had false edges");
}
