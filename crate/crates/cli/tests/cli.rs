use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ett(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ett")).args(args).output().expect("run ett")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ett-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gen_path_of_four() {
    let o = ett(&["gen", "path", "4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "forest 4\n0: 1\n1: 0 2\n2: 1 3\n3: 2\n");
}

#[test]
fn gen_is_deterministic() {
    let a = ett(&["gen", "random", "300", "--seed", "7"]);
    let b = ett(&["gen", "random", "300", "--seed", "7"]);
    let c = ett(&["gen", "random", "300", "--seed", "8"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn three_arms_have_equal_length() {
    let o = ett(&["gen", "three_arms", "3001"]);
    let text = stdout(&o);
    let degrees: Vec<usize> = text.lines().skip(1).map(|l| l.split(':').nth(1).unwrap().split_whitespace().count()).collect();
    assert_eq!(degrees.len(), 3001);
    assert_eq!(degrees[0], 3);
    assert_eq!(degrees.iter().filter(|&&d| d == 1).count(), 3);
    assert_eq!(degrees.iter().filter(|&&d| d == 2).count(), 2997);
}

#[test]
fn verify_fuzzed_traces_for_every_generator() {
    for kind in ["path", "star", "binary", "random", "three_arms"] {
        for seed in ["1", "2"] {
            for mode in ["bounded", "unbounded"] {
                let (f, t) = (scratch(&format!("{kind}{seed}{mode}.txt")), scratch(&format!("{kind}{seed}{mode}.trace")));
                let g = ett(&["gen", kind, "300", "--seed", seed, "-o", s(&f), "--trace-ops", "800", "--trace-out", s(&t), "--mode", mode]);
                assert!(g.status.success());
                let o = ett(&["verify", s(&f), s(&t), "--mode", mode, "--epsilon", "0.5"]);
                assert_eq!(o.status.code(), Some(0), "{kind} {seed} {mode}: {}", stdout(&o));
                assert!(stdout(&o).contains("mismatches 0"));
            }
        }
    }
}

#[test]
fn verify_distance_fixture() {
    let f = scratch("path84.txt");
    fs::write(&f, stdout(&ett(&["gen", "path", "84"]))).unwrap();
    let t = scratch("dist81.trace");
    fs::write(&t, "# 81 crossings between (0,1) and (82,83)\ndist 0 1 82 83\njump 0 1 82\nsides 40 41\n").unwrap();
    let o = ett(&["verify", s(&f), s(&t)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn empty_trace_is_equivalent() {
    let f = scratch("empty-forest.txt");
    fs::write(&f, stdout(&ett(&["gen", "binary", "50"]))).unwrap();
    let t = scratch("empty.trace");
    fs::write(&t, "# nothing\n\n").unwrap();
    let o = ett(&["verify", s(&f), s(&t)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("equivalent"));
}

#[test]
fn parse_errors_exit_two_with_line_numbers() {
    let f = scratch("pe.txt");
    fs::write(&f, stdout(&ett(&["gen", "path", "5"]))).unwrap();
    let t = scratch("pe.trace");
    fs::write(&t, "succ 0 1\n\ncut 1\n").unwrap();
    let o = ett(&["verify", s(&f), s(&t)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let bad = scratch("bad-forest.txt");
    fs::write(&bad, "forest 2\n0: 1\n").unwrap();
    assert_eq!(ett(&["stats", s(&bad)]).status.code(), Some(2));
    assert_eq!(ett(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn invalid_updates_fail_the_same_way_on_both_sides() {
    let f = scratch("w.txt");
    fs::write(&f, stdout(&ett(&["gen", "star", "40"]))).unwrap();
    let t = scratch("w.trace");
    fs::write(&t, "cut 0 5\ncut 0 5\nrmv 0\nlink 1 2 after 0 1 after 0 2\nsucc 0 6\n").unwrap();
    let o = ett(&["verify", s(&f), s(&t)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn bench_writes_csv_with_fixed_columns() {
    let (f, t, c) = (scratch("b.txt"), scratch("b.trace"), scratch("b.csv"));
    assert!(ett(&["gen", "random", "400", "-o", s(&f), "--trace-ops", "500", "--trace-out", s(&t)]).status.success());
    let o = ett(&["bench", s(&f), s(&t), "--reps", "2", "--csv", s(&c)]);
    assert!(o.status.success());
    let csv = fs::read_to_string(&c).unwrap();
    assert!(csv.starts_with("class,count,mean_ns,p50_ns,p90_ns,p99_ns,max_ns\n"));
    assert!(csv.lines().any(|l| l.starts_with("link,")));
    // counters do not depend on timing
    let again = ett(&["bench", s(&f), s(&t), "--reps", "2"]);
    let counters = |o: &Output| stdout(o).lines().filter(|l| l.starts_with("updates")).map(String::from).collect::<Vec<_>>();
    assert_eq!(counters(&o), counters(&again));
}

#[test]
fn stats_reports_clusters_within_bounds() {
    let f = scratch("st.txt");
    fs::write(&f, stdout(&ett(&["gen", "star", "3000"]))).unwrap();
    let o = ett(&["stats", s(&f)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("size invariants hold"), "{text}");
    assert!(!text.contains("false edges 0"), "{text}");

    let small = scratch("small.txt");
    fs::write(&small, stdout(&ett(&["gen", "path", "20"]))).unwrap();
    assert!(stdout(&ett(&["stats", s(&small)])).contains("clusters 1 "));
}
