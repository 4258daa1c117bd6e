use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_elastograph"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Writes a trace with the given times in seconds; `sizes` adds size_bytes.
fn write_trace(dir: &TempDir, name: &str, rows: &[&[u64]], sizes: Option<&[u64]>) -> PathBuf {
    let partitions: Vec<Value> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut p = serde_json::json!({
                "id": format!("P{}", i + 1),
                "times_ms": row.iter().map(|s| s * 1000).collect::<Vec<_>>(),
            });
            if let Some(sizes) = sizes {
                p["size_bytes"] = sizes[i].into();
            }
            p
        })
        .collect();
    let doc = serde_json::json!({
        "num_partitions": rows.len(),
        "num_supersteps": rows[0].len(),
        "partitions": partitions,
    });
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    path
}

fn json_of(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn reports_by_strategy(v: &Value) -> Vec<(String, Value)> {
    v["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["strategy"].as_str().unwrap().to_string(), r.clone()))
        .collect()
}

#[test]
fn place_ffd_reports_vm_counts() {
    let dir = TempDir::new().unwrap();
    let t = write_trace(&dir, "t.json", &[&[10, 0], &[5, 8]], None);
    let v = json_of(&run(&[
        "place",
        "--trace",
        t.to_str().unwrap(),
        "--strategy",
        "ffd",
        "--format",
        "json",
    ]));
    assert_eq!(v["report"]["makespan_ms"], 18_000);
    assert_eq!(
        v["report"]["per_superstep_vm_counts"],
        serde_json::json!([2, 1])
    );
    assert_eq!(
        v["plan"]["assignment"],
        serde_json::json!([[0, null], [1, 0]])
    );
    assert_eq!(v["billing"]["quantum_seconds"], 60.0);
}

#[test]
fn place_default_bills_closed_form() {
    let dir = TempDir::new().unwrap();
    let t = write_trace(&dir, "t.json", &[&[10, 0], &[5, 8]], None);
    let v = json_of(&run(&[
        "place",
        "--trace",
        t.to_str().unwrap(),
        "--strategy",
        "default",
        "--format",
        "json",
    ]));
    assert_eq!(v["report"]["billed_quanta"], 2);
    assert_eq!(v["report"]["billed_cost"], 2.0);

    let v = json_of(&run(&[
        "place",
        "--trace",
        t.to_str().unwrap(),
        "--strategy",
        "default",
        "--format",
        "json",
        "--quantum-seconds",
        "5",
        "--price",
        "0.5",
    ]));
    // 2 VMs x ceil(18 / 5) quanta at 0.5 each.
    assert_eq!(v["report"]["billed_quanta"], 8);
    assert_eq!(v["report"]["billed_cost"], 4.0);
}

#[test]
fn opt_dm_without_sizes_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let t = write_trace(&dir, "t.json", &[&[10, 0], &[5, 8]], None);
    let out = run(&[
        "place",
        "--trace",
        t.to_str().unwrap(),
        "--strategy",
        "opt-dm",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("size"));
}

#[test]
fn malformed_input_exits_with_location() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"num_partitions": 1, "num_supersteps": 1, "partitions": [{"id": "a", "times_ms": [-5]}]}"#,
    )
    .unwrap();
    let out = run(&[
        "place",
        "--trace",
        path.to_str().unwrap(),
        "--strategy",
        "ffd",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("partitions[0].times_ms[0]"), "{err}");

    let out = run(&[
        "place",
        "--trace",
        "/nonexistent/trace.json",
        "--strategy",
        "ffd",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let t = write_trace(&dir, "t.json", &[&[1]], None);
    let out = run(&[
        "place",
        "--trace",
        t.to_str().unwrap(),
        "--strategy",
        "ffd",
        "--quantum-seconds",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn compare_reproduces_the_worked_example() {
    let dir = TempDir::new().unwrap();
    let t = write_trace(
        &dir,
        "t.json",
        &[&[6, 2], &[4, 9], &[4, 0], &[2, 1]],
        Some(&[1, 1, 1, 1]),
    );
    let v = json_of(&run(&[
        "compare",
        "--trace",
        t.to_str().unwrap(),
        "--format",
        "json",
    ]));
    let rows = reports_by_strategy(&v);
    let names: Vec<&str> = rows.iter().map(|(s, _)| s.as_str()).collect();
    assert_eq!(names, ["default", "opt", "opt-dm", "ffd", "mfp", "lap"]);
    let span = |name: &str| rows.iter().find(|(s, _)| s == name).unwrap().1["makespan_ms"].clone();
    assert_eq!(span("opt"), 15_000);
    assert_eq!(span("ffd"), 15_000);
    assert_eq!(span("mfp"), 16_000);
    assert_eq!(span("lap"), 15_000);
}

#[test]
fn compare_skips_opt_dm_without_sizes() {
    let dir = TempDir::new().unwrap();
    let t = write_trace(&dir, "t.json", &[&[6, 2], &[4, 9]], None);
    let out = run(&["compare", "--trace", t.to_str().unwrap(), "--format", "csv"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("opt-dm"));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 6);
    assert!(!text.contains("opt-dm"));
}

#[test]
fn one_partition_makes_all_strategies_agree() {
    let dir = TempDir::new().unwrap();
    let t = write_trace(&dir, "t.json", &[&[30, 45, 50]], Some(&[0]));
    let v = json_of(&run(&[
        "compare",
        "--trace",
        t.to_str().unwrap(),
        "--format",
        "json",
    ]));
    let rows = reports_by_strategy(&v);
    let strip = |r: &Value| {
        let mut r = r.clone();
        r["strategy"] = Value::Null;
        r["data_movement"] = Value::Null;
        r
    };
    for (_, r) in &rows {
        assert_eq!(strip(r), strip(&rows[0].1));
    }
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let t = write_trace(
        &dir,
        "t.json",
        &[&[6, 2, 3], &[4, 9, 1], &[4, 0, 7], &[2, 1, 1]],
        Some(&[5, 6, 7, 8]),
    );
    for format in ["table", "csv", "json"] {
        let a = run(&[
            "compare",
            "--trace",
            t.to_str().unwrap(),
            "--format",
            format,
        ]);
        let b = run(&[
            "compare",
            "--trace",
            t.to_str().unwrap(),
            "--format",
            format,
        ]);
        assert_eq!(a.stdout, b.stdout);
    }
}

fn gen_toy(dir: &TempDir, extra: &[&str]) -> (Output, PathBuf) {
    let out_path = dir.path().join("gen.json");
    let edges = fixture("toy_edges.txt");
    let parts = fixture("toy_partitions.txt");
    let mut args = vec![
        "gen-trace",
        "--edges",
        edges.to_str().unwrap(),
        "--partitions",
        parts.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let out = run(&args);
    (out, out_path)
}

#[test]
fn gen_trace_on_the_toy_graph() {
    let dir = TempDir::new().unwrap();
    let (out, path) = gen_toy(&dir, &["--source", "5", "--alpha", "1", "--beta", "0.5"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["num_supersteps"], 3);
    // Partition A holds SG1 and SG4, B holds SG2, C holds SG3.
    let times: Vec<Value> = v["partitions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["times_ms"].clone())
        .collect();
    assert_eq!(
        times,
        [
            serde_json::json!([0, 4000, 4000]),
            serde_json::json!([6000, 0, 0]),
            serde_json::json!([0, 4000, 0])
        ]
    );

    // The generated file is accepted as-is.
    let placed = run(&[
        "place",
        "--trace",
        path.to_str().unwrap(),
        "--strategy",
        "lap",
    ]);
    assert!(placed.status.success());
    assert!(placed.stderr.is_empty());
}

#[test]
fn gen_trace_rejects_bad_requests() {
    let dir = TempDir::new().unwrap();
    let (out, _) = gen_toy(&dir, &["--source", "99"]);
    assert_eq!(out.status.code(), Some(2));
    let (out, _) = gen_toy(&dir, &["--source", "1", "--alpha", "0", "--beta", "0"]);
    assert_eq!(out.status.code(), Some(3));

    let parts = dir.path().join("parts.txt");
    std::fs::write(&parts, "1 A\n").unwrap();
    let out = run(&[
        "gen-trace",
        "--edges",
        fixture("toy_edges.txt").to_str().unwrap(),
        "--partitions",
        parts.to_str().unwrap(),
        "--source",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no partition"));
}

#[test]
fn gen_trace_covers_only_the_reachable_component() {
    let dir = TempDir::new().unwrap();
    let edges = dir.path().join("e.txt");
    let parts = dir.path().join("p.txt");
    // 1-2-3 across partitions x, y; 10-11 in z, unreachable from 1.
    std::fs::write(&edges, "1 2\n2 3\n10 11\n").unwrap();
    std::fs::write(&parts, "1 x\n2 y\n3 x\n10 z\n11 z\n").unwrap();
    let out = run(&[
        "gen-trace",
        "--edges",
        edges.to_str().unwrap(),
        "--partitions",
        parts.to_str().unwrap(),
        "--source",
        "1",
        "--alpha",
        "1",
        "--beta",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["num_supersteps"], 3);
    let z = v["partitions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["id"] == "z")
        .unwrap();
    assert_eq!(z["times_ms"], serde_json::json!([0, 0, 0]));
}

fn series_rows(out: &Output) -> Vec<Vec<String>> {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    stdout(out)
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn emit_series_default_utilization() {
    let dir = TempDir::new().unwrap();
    let t = write_trace(&dir, "t.json", &[&[10, 0], &[5, 8]], None);
    let rows = series_rows(&run(&["emit-series", "--trace", t.to_str().unwrap()]));
    assert_eq!(
        rows[0],
        [
            "superstep",
            "wall_seconds",
            "active_vms",
            "busy_core_seconds",
            "utilization"
        ]
    );
    // (10 + 5) / (2 * 10) and 8 / (2 * 8).
    assert_eq!(rows[1], ["0", "10.000", "2", "15.000", "0.7500"]);
    assert_eq!(rows[2], ["1", "8.000", "2", "8.000", "0.5000"]);

    let dense = write_trace(&dir, "d.json", &[&[7, 7, 7], &[7, 7, 7], &[7, 7, 7]], None);
    let rows = series_rows(&run(&["emit-series", "--trace", dense.to_str().unwrap()]));
    assert!(rows[1..].iter().all(|r| r[4] == "1.0000"));

    let single = write_trace(&dir, "s.json", &[&[3], &[4]], None);
    let rows = series_rows(&run(&[
        "emit-series",
        "--trace",
        single.to_str().unwrap(),
        "--strategy",
        "ffd",
    ]));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1], ["0", "4.000", "2", "7.000", "0.8750"]);
}

#[test]
fn import_log_aggregates_subgraphs() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("run.log");
    std::fs::write(
        &log,
        "# partition superstep ms\nA 0 1000\nA 0 500\nB 0 200\nB 1 900\n",
    )
    .unwrap();
    let out = run(&["import-log", "--log", log.to_str().unwrap()]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["partitions"][0]["times_ms"], serde_json::json!([1500, 0]));
    assert_eq!(
        v["partitions"][1]["times_ms"],
        serde_json::json!([200, 900])
    );

    std::fs::write(&log, "A 0 1000\nA zero 5\n").unwrap();
    let out = run(&["import-log", "--log", log.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn metagraph_command_writes_the_sketch() {
    let out = run(&[
        "metagraph",
        "--edges",
        fixture("toy_edges.txt").to_str().unwrap(),
        "--partitions",
        fixture("toy_partitions.txt").to_str().unwrap(),
    ]);
    let v = json_of(&out);
    assert_eq!(v["meta_vertices"].as_array().unwrap().len(), 4);
    assert_eq!(v["meta_edges"].as_array().unwrap().len(), 3);
}
