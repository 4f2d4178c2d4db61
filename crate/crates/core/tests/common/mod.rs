#![allow(dead_code)]

pub mod props;

use std::collections::BTreeMap;

use compact_ett::clustering::{ForestParams, Mode};
use compact_ett::forest::CompactForest;
use compact_ett::oracle::{EmbeddedForest, Label};

fn forest(rot: &[(Label, &[Label])]) -> EmbeddedForest {
    EmbeddedForest::from_rotations(rot.iter().map(|(v, r)| (*v, r.to_vec())).collect::<BTreeMap<_, _>>()).unwrap()
}

/// The seven-vertex expanded cluster (0..=6) with its four outside neighbours 10..=13.
pub fn expanded_cluster() -> EmbeddedForest {
    forest(&[
        (0, &[1, 3, 6]),
        (1, &[0, 2]),
        (2, &[1, 10]),
        (3, &[0, 11, 4, 12, 5, 13]),
        (4, &[3]),
        (5, &[3]),
        (6, &[0]),
        (10, &[2]),
        (11, &[3]),
        (12, &[3]),
        (13, &[3]),
    ])
}

/// Clustered tree before the orange edge (6, 20) is deleted. Vertex 6 sits in
/// the orange cluster {6, 20, 21, 22}; the green edge (6, 0) joins it to the
/// cluster {0..5}. Each outer port leads to a three-vertex cluster.
pub fn orange_fixture() -> (CompactForest, EmbeddedForest) {
    let f = forest(&[
        (0, &[1, 3, 6]),
        (1, &[0, 2]),
        (2, &[1, 10]),
        (3, &[0, 11, 4, 12, 5, 13]),
        (4, &[3]),
        (5, &[3]),
        (6, &[0, 20]),
        (20, &[6, 21]),
        (21, &[20, 22]),
        (22, &[21, 30]),
        (30, &[22, 31]),
        (31, &[30, 32]),
        (32, &[31, 33]),
        (33, &[32, 34]),
        (34, &[33]),
        (10, &[2, 40]),
        (40, &[10, 41]),
        (41, &[40]),
        (11, &[3, 50]),
        (50, &[11, 51]),
        (51, &[50]),
        (12, &[3, 60]),
        (60, &[12, 61]),
        (61, &[60]),
        (13, &[3, 70]),
        (70, &[13, 71]),
        (71, &[70]),
    ]);
    let groups: Vec<Vec<Label>> = vec![
        vec![0, 1, 2, 3, 4, 5],
        vec![6, 20, 21, 22],
        vec![30, 31, 32, 33, 34],
        vec![10, 40, 41],
        vec![11, 50, 51],
        vec![12, 60, 61],
        vec![13, 70, 71],
    ];
    let params = ForestParams::custom(3, 7, 3, Mode::Unbounded, 6);
    (CompactForest::with_params(&f, params, Some(&groups)).unwrap(), f)
}
