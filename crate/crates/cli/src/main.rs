//! `ett`: generate embedded forests and traces, check the compact forest
//! against the explicit oracle, and report timings and decompositions.
//!
//! Exit codes: 0 ok, 1 mismatch or invariant violation, 2 parse or usage error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use compact_ett::clustering::Mode;
use compact_ett::forest::{CompactForest, SpaceReport};
use compact_ett::oracle::EmbeddedForest;
use compact_ett::workload::{self, apply_compact, fuzz, generate, FuzzConfig, Kind, RunOptions, Trace};

#[derive(Parser)]
#[command(name = "ett", version, about = "Compact dynamic Euler-tour trees")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Bounded,
    Unbounded,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Bounded => Mode::Bounded,
            ModeArg::Unbounded => Mode::Unbounded,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Path,
    Star,
    Binary,
    Random,
    #[value(name = "three_arms")]
    ThreeArms,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Kind {
        match k {
            KindArg::Path => Kind::Path,
            KindArg::Star => Kind::Star,
            KindArg::Binary => Kind::Binary,
            KindArg::Random => Kind::Random,
            KindArg::ThreeArms => Kind::ThreeArms,
        }
    }
}

#[derive(Args, Clone, Copy)]
struct Structure {
    /// Cluster-size exponent: clusters hold about lg^(1+epsilon) n vertices.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "unbounded")]
    mode: ModeArg,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a generated forest, and optionally a fuzzed trace for it.
    Gen {
        #[arg(value_enum)]
        kind: KindArg,
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Forest output file (stdout when omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also fuzz a trace of this many commands.
        #[arg(long)]
        trace_ops: Option<usize>,
        /// Trace output file (required with --trace-ops).
        #[arg(long, requires = "trace_ops")]
        trace_out: Option<PathBuf>,
        /// Keep links within the bounded-mode degree limit.
        #[arg(long, value_enum, default_value = "unbounded")]
        mode: ModeArg,
    },
    /// Replay a trace on the compact forest and the oracle in lockstep.
    Verify {
        forest: PathBuf,
        trace: PathBuf,
        #[command(flatten)]
        s: Structure,
        /// Print at most this many mismatches.
        #[arg(long, default_value_t = 20)]
        show: usize,
    },
    /// Time every command of a trace on the compact forest.
    Bench {
        forest: PathBuf,
        trace: PathBuf,
        #[command(flatten)]
        s: Structure,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Write the per-class timing table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Describe the cluster decomposition of a forest.
    Stats {
        forest: PathBuf,
        #[command(flatten)]
        s: Structure,
    },
}

enum Fail {
    Usage(String),
    Mismatch(String),
}

type Res = Result<(), Fail>;

fn usage(e: impl std::fmt::Display) -> Fail {
    Fail::Usage(e.to_string())
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_forest(path: &Path) -> Result<EmbeddedForest, Fail> {
    EmbeddedForest::parse(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_trace(path: &Path) -> Result<Trace, Fail> {
    Trace::parse(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn build(f: &EmbeddedForest, s: Structure) -> Result<CompactForest, Fail> {
    CompactForest::new(f, s.epsilon, s.mode.into()).map_err(usage)
}

fn write_out(path: Option<&Path>, text: &str) -> Res {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_space(r: &SpaceReport) {
    let n = r.vertices.max(1) as f64;
    println!("space (bits):");
    for (name, v) in [
        ("bp payload", r.bp_payload),
        ("clone bp", r.clone_bp),
        ("ports", r.ports),
        ("rank/select tables", r.rank_select),
        ("mappings", r.mappings),
        ("macro tree", r.macro_tree),
        ("small store", r.small_store),
        ("fingers", r.fingers),
        ("cluster table", r.cluster_table),
        ("fixed", r.fixed),
    ] {
        println!("  {name:<20} {v:>12}");
    }
    println!("  {:<20} {:>12}  ({:.3} bits/vertex)", "total", r.total(), r.total() as f64 / n);
    println!("  {:<20} {:>12}  ({:.3} bits/vertex)", "auxiliary", r.auxiliary(), r.auxiliary() as f64 / n);
}

fn gen(
    kind: Kind,
    n: usize,
    seed: u64,
    out: Option<&Path>,
    trace_ops: Option<usize>,
    trace_out: Option<&Path>,
    mode: Mode,
) -> Res {
    if n == 0 {
        return Err(usage("n must be at least 1"));
    }
    let f = generate(kind, n, seed);
    if let Some(ops) = trace_ops {
        let Some(path) = trace_out else { return Err(usage("--trace-ops needs --trace-out")) };
        let mut cfg = FuzzConfig::new(ops, seed);
        if mode == Mode::Bounded {
            cfg.degree_bound = Some(f.max_degree().max(2));
        }
        let t = fuzz(&f, cfg);
        let head = format!("# {ops} commands fuzzed for {kind} n={n} seed={seed}\n");
        fs::write(path, head + &t.to_text()).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    write_out(out, &f.to_text())
}

fn verify(forest: &Path, trace: &Path, s: Structure, show: usize) -> Res {
    let f = load_forest(forest)?;
    let t = load_trace(trace)?;
    let mut cf = build(&f, s)?;
    let mut g = f.clone();
    let out = workload::run_lockstep(&mut cf, &mut g, &t, RunOptions { audit: true, check_every: 0 });
    let updates = t.commands.iter().filter(|c| c.is_update()).count();
    println!("commands {}  updates {}  skipped by degree bound {}", out.executed, updates, out.skipped);
    println!("mismatches {}", out.mismatches.len());
    for m in out.mismatches.iter().take(show) {
        let line = t.lines.get(m.index).copied().unwrap_or(m.index + 1);
        println!("  line {line}: `{}`: expected {:?}, got {:?}", m.command, m.expected, m.got);
    }
    println!("cluster size violations {}", out.violations);
    let st = cf.stats();
    println!(
        "rebuilt vertices {}  global rebuilds {}  clusters {}",
        st.rebuilt_vertices,
        st.global_rebuilds,
        cf.cluster_count()
    );
    print_space(&cf.space_report());
    if out.mismatches.is_empty() {
        println!("equivalent");
        Ok(())
    } else {
        Err(Fail::Mismatch(format!("{} mismatches", out.mismatches.len())))
    }
}

fn percentile(sorted: &[Duration], p: f64) -> Duration {
    if sorted.is_empty() {
        return Duration::ZERO;
    }
    let i = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[i]
}

const CSV_HEADER: &str = "class,count,mean_ns,p50_ns,p90_ns,p99_ns,max_ns";

fn bench(forest: &Path, trace: &Path, s: Structure, reps: usize, csv: Option<&Path>) -> Res {
    let f = load_forest(forest)?;
    let t = load_trace(trace)?;
    let mut times: BTreeMap<&'static str, Vec<Duration>> = BTreeMap::new();
    let mut last = None;
    let mut build_time = Duration::ZERO;
    for _ in 0..reps.max(1) {
        let t0 = Instant::now();
        let mut cf = build(&f, s)?;
        build_time += t0.elapsed();
        for c in &t.commands {
            let t0 = Instant::now();
            let a = apply_compact(&mut cf, c);
            let el = t0.elapsed();
            std::hint::black_box(a);
            times.entry(c.class()).or_default().push(el);
        }
        last = Some(cf);
    }
    let cf = last.expect("at least one repetition");
    let mut rows = Vec::new();
    for (class, v) in times.iter_mut() {
        v.sort_unstable();
        let mean = v.iter().sum::<Duration>() / v.len() as u32;
        rows.push((
            *class,
            v.len(),
            mean.as_nanos(),
            percentile(v, 0.5).as_nanos(),
            percentile(v, 0.9).as_nanos(),
            percentile(v, 0.99).as_nanos(),
            v.last().unwrap().as_nanos(),
        ));
    }
    let reps = reps.max(1);
    println!("n {}  reps {reps}  build {:.3?} per rep", f.vertex_count(), build_time / reps as u32);
    println!("{:<6} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10}", "class", "count", "mean_ns", "p50_ns", "p90_ns", "p99_ns", "max_ns");
    for r in &rows {
        println!("{:<6} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10}", r.0, r.1, r.2, r.3, r.4, r.5, r.6);
    }
    let st = cf.stats();
    let b = cf.params().upper;
    let per = if st.updates == 0 { 0.0 } else { st.rebuilt_vertices as f64 / st.updates as f64 };
    println!(
        "updates {}  rebuilt vertices {}  per update {per:.1} ({:.3} B, B = {b})  global rebuilds {} ({} vertices)",
        st.updates,
        st.rebuilt_vertices,
        per / b as f64,
        st.global_rebuilds,
        st.global_rebuild_vertices
    );
    let r = cf.space_report();
    let n = r.vertices.max(1) as f64;
    println!("bits/vertex {:.3}  auxiliary bits/vertex {:.3}", r.total() as f64 / n, r.auxiliary() as f64 / n);
    if let Some(path) = csv {
        let mut text = String::from(CSV_HEADER);
        text.push('\n');
        for r in &rows {
            text.push_str(&format!("{},{},{},{},{},{},{}\n", r.0, r.1, r.2, r.3, r.4, r.5, r.6));
        }
        fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn stats(forest: &Path, s: Structure) -> Res {
    let f = load_forest(forest)?;
    let cf = build(&f, s)?;
    let p = cf.params();
    let clusters = cf.clusters();
    println!("vertices {}  trees {}  max degree {}", f.vertex_count(), f.components().len(), f.max_degree());
    println!(
        "epsilon {}  mode {:?}  d {}  lower {}  upper (B) {}  tiny {}",
        p.epsilon, p.mode, p.d, p.lower, p.upper, p.tiny
    );
    println!(
        "clusters {}  (n/B = {:.1}, n/lower = {:.1})  tiny trees {}  macro edges {}  false edges {}",
        clusters.len(),
        f.vertex_count() as f64 / p.upper as f64,
        f.vertex_count() as f64 / p.lower as f64,
        cf.tiny_tree_count(),
        cf.macro_edge_count(),
        cf.false_edge_count()
    );
    if let (Some(min), Some(max)) = (clusters.iter().map(|c| c.nodes).min(), clusters.iter().map(|c| c.nodes).max()) {
        println!("cluster sizes min {min}  max {max}  bounds [{}, {}]", p.lower, p.upper);
        let width = p.upper.div_ceil(10).max(1);
        let mut hist = BTreeMap::new();
        for c in &clusters {
            *hist.entry(c.nodes / width).or_insert(0usize) += 1;
        }
        println!("size histogram:");
        for (bucket, count) in hist {
            println!("  {:>6}..{:<6} {count}", bucket * width, (bucket + 1) * width - 1);
        }
    }
    let bad = cf.audit();
    for v in &bad {
        println!("violation: cluster {} has {} vertices in a tree of {}", v.cluster, v.size, v.tree_size);
    }
    if bad.is_empty() {
        println!("size invariants hold");
        Ok(())
    } else {
        Err(Fail::Mismatch(format!("{} cluster size violations", bad.len())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Gen { kind, n, seed, out, trace_ops, trace_out, mode } => {
            gen(kind.into(), n, seed, out.as_deref(), trace_ops, trace_out.as_deref(), mode.into())
        }
        Cmd::Verify { forest, trace, s, show } => verify(&forest, &trace, s, show),
        Cmd::Bench { forest, trace, s, reps, csv } => bench(&forest, &trace, s, reps, csv.as_deref()),
        Cmd::Stats { forest, s } => stats(&forest, s),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Mismatch(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
