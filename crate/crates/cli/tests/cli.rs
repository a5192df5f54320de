use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;
use tempfile::TempDir;

fn gmfilter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmfilter"))
        .args(args)
        .env("GMF_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gmfilter(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn sample(dir: &Path, n: usize, n_c: usize, rho: f64, seeds: usize, rng: u64) {
    ok(&[
        "sample",
        "--kind",
        "homogeneous",
        "--n",
        &n.to_string(),
        "--n-c",
        &n_c.to_string(),
        "--lambda",
        "0.5",
        "--rho",
        &rho.to_string(),
        "--seeds",
        &seeds.to_string(),
        "--rng-seed",
        &rng.to_string(),
        "--out",
        p(dir),
    ]);
}

fn run_match(sampled: &Path, out: &Path, extra: &[&str]) -> Output {
    let a = sampled.join("A.edges");
    let b = sampled.join("B.edges");
    let truth = sampled.join("truth.json");
    let seeds = sampled.join("seeds.txt");
    let mut args = vec!["match", "--a", p(&a), "--b", p(&b), "--truth", p(&truth), "--out", p(out)];
    if seeds.exists() {
        args.extend(["--seeds", p(&seeds)]);
    }
    args.extend_from_slice(extra);
    gmfilter(&args)
}

/// Rows of `results.csv` as column-name lookups.
fn results(dir: &Path) -> Vec<Vec<(String, String)>> {
    let text = fs::read_to_string(dir.join("results.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn field<'a>(row: &'a [(String, String)], name: &str) -> &'a str {
    &row.iter().find(|(k, _)| k == name).unwrap().1
}

#[test]
fn sample_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (x, y) = (tmp.path().join("x"), tmp.path().join("y"));
    sample(&x, 50, 10, 0.8, 3, 7);
    sample(&y, 50, 10, 0.8, 3, 7);
    for f in ["A.edges", "B.edges", "truth.json", "seeds.txt", "lambda.txt"] {
        assert_eq!(fs::read(x.join(f)).unwrap(), fs::read(y.join(f)).unwrap(), "{f} differs");
    }
    let z = tmp.path().join("z");
    sample(&z, 50, 10, 0.8, 3, 8);
    assert_ne!(fs::read(x.join("B.edges")).unwrap(), fs::read(z.join("B.edges")).unwrap());
}

#[test]
fn full_seeding_of_exact_copy_recovers_everything() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    let m = tmp.path().join("m");
    sample(&s, 30, 8, 1.0, 8, 3);
    let out = run_match(&s, &m, &["--restarts", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = results(&m);
    assert_eq!(rows.len(), 5);
    assert_eq!(field(&rows[0], "correct_matches"), "8");
    assert_eq!(field(&rows[0], "objective1").parse::<f64>().unwrap(), 0.0);

    let truth: Value = serde_json::from_str(&fs::read_to_string(s.join("truth.json")).unwrap()).unwrap();
    let want: Vec<String> = truth["truth"].as_array().unwrap().iter().map(|v| v.to_string()).collect();
    assert_eq!(field(&rows[0], "sigma"), want.join(" "));

    let summary: Value = serde_json::from_str(&fs::read_to_string(m.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["best"]["correct_matches"], 8);
    assert!(m.join("timing.json").exists());
}

#[test]
fn pairs_table_counts_every_restart() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    let m = tmp.path().join("m");
    sample(&s, 40, 6, 0.9, 2, 5);
    let out = run_match(&s, &m, &["--restarts", "12"]);
    assert!(out.status.success());
    let text = fs::read_to_string(m.join("pairs.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 41);
    let mut rows = 0;
    for line in lines {
        let total: usize = line.split(',').skip(1).map(|c| c.parse::<usize>().unwrap()).sum();
        assert_eq!(total, 12);
        rows += 1;
    }
    assert_eq!(rows, 6);
}

#[test]
fn rematching_fills_both_objectives() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    let m = tmp.path().join("m");
    sample(&s, 50, 10, 0.9, 2, 11);
    let out = run_match(&s, &m, &["--restarts", "6", "--scheme", "rank:1", "--rescheme", "rank:3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = results(&m);
    assert_eq!(rows.len(), 6);
    let mut last = f64::NEG_INFINITY;
    for r in &rows {
        let o1: f64 = field(r, "objective1").parse().unwrap();
        let o2: f64 = field(r, "objective2").parse().unwrap();
        assert!(o1.is_finite() && o2.is_finite());
        assert!(o1 >= last);
        last = o1;
    }
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    sample(&s, 20, 5, 0.9, 0, 1);
    let m = tmp.path().join("m");
    for extra in [
        vec!["--scheme", "bogus"],
        vec!["--scheme", "rank:0"],
        vec!["--restarts", "0"],
        vec!["--tol", "-1"],
        vec!["--edge-counting", "sideways"],
    ] {
        let out = run_match(&s, &m, &extra);
        assert_eq!(out.status.code(), Some(2), "{extra:?}");
    }
    let out = gmfilter(&["sample", "--kind", "homogeneous", "--n", "10", "--n-c", "20", "--lambda", "0.5", "--rho", "0.5", "--out", p(&m)]);
    assert_eq!(out.status.code(), Some(2));
    let out = gmfilter(&["sample", "--kind", "homogeneous", "--n", "10", "--n-c", "5", "--lambda", "1.5", "--rho", "0.5", "--out", p(&m)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(gmfilter(&["frobnicate"]).status.code(), Some(2));

    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"model": {"kind": "homogeneous", "n": 20, "n_c": 5, "lambda": 0.5, "rho": 0.9}, "bogus": 1}"#).unwrap();
    let out = gmfilter(&["experiment", "--config", p(&cfg), "--out", p(&m)]);
    assert_eq!(out.status.code(), Some(2));
    let out = gmfilter(&["experiment", "--config", p(&tmp.path().join("missing.json")), "--out", p(&m)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_three() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    sample(&s, 20, 5, 0.9, 2, 1);
    let m = tmp.path().join("m");
    let a = s.join("A.edges");
    let b = s.join("B.edges");

    let missing = tmp.path().join("nope.edges");
    let out = gmfilter(&["match", "--a", p(&missing), "--b", p(&b), "--out", p(&m)]);
    assert_eq!(out.status.code(), Some(3));

    let garbled = tmp.path().join("garbled.edges");
    fs::write(&garbled, "5 undirected\n0 1\n0 seven\n").unwrap();
    let out = gmfilter(&["match", "--a", p(&garbled), "--b", p(&b), "--out", p(&m)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let seeds = tmp.path().join("seeds.txt");
    fs::write(&seeds, "0 99\n").unwrap();
    let out = gmfilter(&["match", "--a", p(&a), "--b", p(&b), "--seeds", p(&seeds), "--out", p(&m)]);
    assert_eq!(out.status.code(), Some(3));

    let out = gmfilter(&["match", "--a", p(&b), "--b", p(&a), "--out", p(&m)]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn smoke_run_is_fast() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    let m = tmp.path().join("m");
    let start = Instant::now();
    sample(&s, 60, 12, 0.9, 3, 2);
    let out = run_match(&s, &m, &["--restarts", "20"]);
    let secs = start.elapsed().as_secs_f64();
    assert!(out.status.success());
    assert_eq!(results(&m).len(), 20);
    assert!(secs < 10.0, "smoke run took {secs:.1} s");
}

#[test]
fn single_threaded_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    sample(&s, 40, 8, 0.9, 2, 4);
    let run = |name: &str| {
        let m = tmp.path().join(name);
        let a = s.join("A.edges");
        let b = s.join("B.edges");
        let out = Command::new(env!("CARGO_BIN_EXE_gmfilter"))
            .args(["--threads", "1", "match", "--a", p(&a), "--b", p(&b), "--restarts", "8", "--out", p(&m)])
            .output()
            .unwrap();
        assert!(out.status.success());
        (fs::read(m.join("results.csv")).unwrap(), fs::read(m.join("pairs.csv")).unwrap())
    };
    assert_eq!(run("r1"), run("r2"));
}

#[test]
fn experiment_writes_figure_tables() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{
  "model": {"kind": "homogeneous", "n": 40, "n_c": 6, "lambda": 0.5, "rho": 0.9},
  "filter": {"restarts": 4, "seeds": 2, "rng_seed": 3},
  "replicates": 2,
  "output": "out",
  "sweep": {"rho": [0.8, 1.0]}
}"#,
    )
    .unwrap();
    let out = gmfilter(&["experiment", "--config", p(&cfg), "--out", p(&tmp.path().join("out"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    for f in [
        "results.csv",
        "replicate_summary.csv",
        "accuracy_vs_rank.csv",
        "objective_vs_accuracy.csv",
        "runtime.csv",
        "summary.json",
    ] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let rows = fs::read_to_string(dir.join("results.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 2 * 4);
}

#[test]
fn bruteforce_reports_all_minimizers() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a.edges");
    let b = tmp.path().join("b.edges");
    fs::write(&a, "2 undirected\n0 1\n").unwrap();
    fs::write(&b, "4 undirected\n0 1\n1 2\n2 3\n3 0\n").unwrap();
    let out = ok(&["bruteforce", "--a", p(&a), "--b", p(&b), "--scheme", "naive"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["objective"], 0.0);
    assert_eq!(v["count"], 8);
    assert_eq!(v["minimizers"].as_array().unwrap().len(), 8);

    let out = gmfilter(&["bruteforce", "--a", p(&a), "--b", p(&b), "--budget", "3"]);
    assert_eq!(out.status.code(), Some(2));
}
