use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use macc_cli::{default_robots, BenchRow, MetricRow, PlanSummary};
use macc_core::world::GridDims;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn macc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macc"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn plan_sequential_on_tower_fixture() {
    let out = tempfile::tempdir().unwrap();
    let o = macc(&[
        "--input",
        s(&fixture("tower.txt")),
        "--mode",
        "plan-sequential",
        "--max-robots",
        "1",
        "--out",
        s(out.path()),
        "--dump-traversability",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let metrics = fs::read_to_string(out.path().join("metrics.csv")).unwrap();
    assert_eq!(
        metrics.lines().next().unwrap(),
        "Stage,Substructure,Makespan,Sum-of-costs,Solve Time,Total Solve Time"
    );
    let rows: Vec<MetricRow> = csv::Reader::from_reader(metrics.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(rows.len(), 1, "a single tower is one substructure");
    assert_eq!((rows[0].makespan, rows[0].sum_of_costs), (11, 11));

    let summary: PlanSummary = serde_json::from_str(&fs::read_to_string(out.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.rows, rows);
    assert_eq!(summary.timesteps, 11);
    assert_eq!(summary.sum_of_costs, 11);

    let target = fs::read_to_string(fixture("tower.txt")).unwrap();
    assert_eq!(fs::read_to_string(out.path().join("final.txt")).unwrap(), target);
    assert!(fs::read_to_string(out.path().join("traversability.txt")).unwrap().contains("before substructure 1"));

    // the emitted schedule replays on its own
    let sim = tempfile::tempdir().unwrap();
    let o = macc(&[
        "--input",
        s(&fixture("tower.txt")),
        "--mode",
        "simulate",
        "--schedule",
        s(&out.path().join("schedule.json")),
        "--out",
        s(sim.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let trace = fs::read_to_string(sim.path().join("trace.txt")).unwrap();
    assert_eq!(trace.lines().next(), Some("t,x,y,height,robot"));
}

#[test]
fn plan_parallel_writes_stage_tables() {
    let out = tempfile::tempdir().unwrap();
    let o = macc(&[
        "--input",
        s(&fixture("small.txt")),
        "--mode",
        "plan-parallel",
        "--out",
        s(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: PlanSummary = serde_json::from_str(&fs::read_to_string(out.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary.stages >= 1);
    assert!(summary.robots_used <= summary.max_robots);
    assert!(summary.rows.iter().all(|r| r.stage.is_some()));
    let stages = fs::read_to_string(out.path().join("stages.csv")).unwrap();
    assert!(stages.starts_with("Stage,Members,Deferred,Makespan,Sum-of-costs\n"));
    let json = fs::read_to_string(out.path().join("summary.json")).unwrap();
    for col in ["Sum of costs", "No. of timesteps", "Final Computation Time", "Total Computation Time"] {
        assert!(json.contains(col), "{col}");
    }
}

#[test]
fn decompose_and_order_outputs() {
    let out = tempfile::tempdir().unwrap();
    let o = macc(&["--input", s(&fixture("small.txt")), "--mode", "decompose", "--out", s(out.path())]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.path().join("substructures.json")).unwrap()).unwrap();
    assert!(!doc["substructures"].as_array().unwrap().is_empty());

    let o = macc(&["--input", s(&fixture("small.txt")), "--mode", "order", "--out", s(out.path())]);
    assert_eq!(o.status.code(), Some(0));
    let order: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.path().join("order.json")).unwrap()).unwrap();
    let n = doc["substructures"].as_array().unwrap().len();
    assert!(order["sequence"].as_array().unwrap().len() <= n);
    let deps = fs::read_to_string(out.path().join("dependencies.csv")).unwrap();
    assert!(deps.is_empty() || deps.starts_with("dependent,prerequisite"));
}

#[test]
fn bench_is_deterministic_and_reruns_from_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let args = |dir: &Path| {
        vec![
            "--mode".to_string(),
            "bench".into(),
            "--seed".into(),
            "11".into(),
            "--dims".into(),
            "4".into(),
            "3".into(),
            "2".into(),
            "--count".into(),
            "3".into(),
            "--workers".into(),
            "2".into(),
            "--tmax".into(),
            "30".into(),
            "--out".into(),
            dir.to_str().unwrap().into(),
        ]
    };
    let run = |dir: &Path| {
        let v = args(dir);
        macc(&v.iter().map(|x| x.as_str()).collect::<Vec<_>>())
    };
    let first = run(a.path());
    let second = run(b.path());
    assert_eq!(first.status.code(), second.status.code());
    for name in ["metrics.csv", "summary.json", "corpus/000.txt", "corpus/002.txt"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let rows: Vec<BenchRow> = csv::Reader::from_path(a.path().join("metrics.csv"))
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![11, 12, 13]);

    let o = macc(&["--manifest", s(&a.path().join("manifest.json")), "--out", s(c.path())]);
    assert_eq!(o.status.code(), first.status.code());
    for name in ["metrics.csv", "summary.json", "corpus/001.txt"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(c.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn exit_codes_per_failure_class() {
    let out = tempfile::tempdir().unwrap();
    let o = s(out.path());

    let parse = macc(&["--input", s(&fixture("ragged.txt")), "--mode", "order", "--out", o]);
    assert_eq!(parse.status.code(), Some(2));
    let missing = macc(&["--mode", "order", "--out", o]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_flag = macc(&["--mode", "fly", "--out", o]);
    assert_eq!(bad_flag.status.code(), Some(2));

    // every column full: the last block placed has nowhere lower to stand
    let infeasible = macc(&[
        "--input",
        s(&fixture("sealed.txt")),
        "--mode",
        "plan-sequential",
        "--tmax",
        "14",
        "--out",
        o,
    ]);
    assert_eq!(infeasible.status.code(), Some(3));

    let timeout = macc(&[
        "--input",
        s(&fixture("tower.txt")),
        "--mode",
        "plan-sequential",
        "--budget-s",
        "0.000001",
        "--out",
        o,
    ]);
    assert_eq!(timeout.status.code(), Some(4));

    let empty = out.path().join("empty.json");
    fs::write(&empty, r#"{"makespan":0,"robots":0,"steps":[]}"#).unwrap();
    let mismatch = macc(&[
        "--input",
        s(&fixture("tower.txt")),
        "--mode",
        "simulate",
        "--schedule",
        s(&empty),
        "--out",
        o,
    ]);
    assert_eq!(mismatch.status.code(), Some(5));
}

#[test]
fn default_robot_caps() {
    assert_eq!(default_robots(GridDims::new(10, 10, 4).unwrap()), 20);
    assert_eq!(default_robots(GridDims::new(7, 7, 4).unwrap()), 6);
    assert_eq!(default_robots(GridDims::new(5, 5, 2).unwrap()), 4);
}
