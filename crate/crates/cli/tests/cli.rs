use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn pkgsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pkgsum")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A 400-entity graph: a ring plus chords, four relations.
fn write_kg(dir: &Path) -> PathBuf {
    let mut text = String::from("# test graph\n");
    for i in 0..400 {
        text.push_str(&format!("e{i}\tr{}\te{}\n", i % 4, (i + 1) % 400));
        text.push_str(&format!("e{i}\tr{}\te{}\n", (i + 1) % 4, (i * 7 + 3) % 400));
    }
    let path = dir.join("kg.tsv");
    fs::write(&path, text).unwrap();
    path
}

fn gen(kg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["gen-queries", "--kg", kg.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    pkgsum(&args)
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn ingest_prints_sizes() {
    let tmp = TempDir::new().unwrap();
    let kg = write_kg(tmp.path());
    let o = pkgsum(&["ingest", "--kg", kg.to_str().unwrap()]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("entities\t400\n"), "{s}");
    assert!(s.contains("relations\t4\n"), "{s}");
    assert!(s.contains("triples\t800\n"), "{s}");
    assert!(s.contains("skipped\t0\n"), "{s}");
}

#[test]
fn ingest_pipe_format() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("kb.txt");
    fs::write(&path, "Kismet|directed_by|William Dieterle\nKismet|written_by|Edward Knoblock\nbad line\n").unwrap();
    let o = pkgsum(&["ingest", "--kg", path.to_str().unwrap()]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("entities\t3\n") && s.contains("triples\t2\n") && s.contains("skipped\t1\n"), "{s}");
}

#[test]
fn empty_or_missing_kg_fails() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty.tsv");
    fs::write(&empty, "").unwrap();
    let o = pkgsum(&["ingest", "--kg", empty.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty KG"));
    let o = pkgsum(&["ingest", "--kg", tmp.path().join("nope.tsv").to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn gen_queries_defaults_and_determinism() {
    let tmp = TempDir::new().unwrap();
    let kg = write_kg(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(gen(&kg, &a, &[]).status.success());
    assert!(gen(&kg, &b, &[]).status.success());
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.len(), 10);
    for (x, y) in fa.iter().zip(&fb) {
        let text = fs::read(x).unwrap();
        assert_eq!(text.iter().filter(|&&c| c == b'\n').count(), 200);
        assert_eq!(text, fs::read(y).unwrap());
    }
}

#[test]
fn gen_queries_minimal() {
    let tmp = TempDir::new().unwrap();
    let kg = write_kg(tmp.path());
    let out = tmp.path().join("q");
    assert!(gen(&kg, &out, &["--users", "1", "--topics", "1", "--per-topic", "1"]).status.success());
    let f = files(&out);
    assert_eq!(f.len(), 1);
    assert_eq!(fs::read_to_string(&f[0]).unwrap().lines().count(), 1);
}

#[test]
fn seed_is_required() {
    let tmp = TempDir::new().unwrap();
    let kg = write_kg(tmp.path());
    let o = pkgsum(&["gen-queries", "--kg", kg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn run_all_methods_with_dot_export() {
    let tmp = TempDir::new().unwrap();
    let kg = write_kg(tmp.path());
    let q = tmp.path().join("q");
    assert!(gen(&kg, &q, &["--users", "2", "--topics", "3", "--per-topic", "4"]).status.success());
    let (out, dot) = (tmp.path().join("out"), tmp.path().join("dot"));
    let o = pkgsum(&[
        "run",
        "--kg",
        kg.to_str().unwrap(),
        "--queries",
        q.to_str().unwrap(),
        "--budget",
        "6",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
        "--dot-dir",
        dot.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    for m in ["APEX2N", "APEX2", "GLIMPSE", "PPR"] {
        assert!(table.contains(m), "{table}");
    }
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("method,user,timestamp,f1,step_seconds\n"));
    // 2 users x 11 scored timestamps for each incremental method.
    assert_eq!(csv.lines().filter(|l| l.starts_with("APEX2N,")).count(), 22);
    let dots = files(&dot);
    assert!(dots.iter().any(|p| p.file_name().unwrap().to_string_lossy().starts_with("glimpse_u01_t0009")));
    assert!(fs::read_to_string(&dots[0]).unwrap().starts_with("digraph pkg {"));
}

#[test]
fn run_missing_kg_fails() {
    let tmp = TempDir::new().unwrap();
    let o = pkgsum(&[
        "run",
        "--kg",
        tmp.path().join("missing.tsv").to_str().unwrap(),
        "--queries",
        tmp.path().to_str().unwrap(),
        "--seed",
        "0",
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}

#[test]
fn sweep_writes_one_report_per_value() {
    let tmp = TempDir::new().unwrap();
    let kg = write_kg(tmp.path());
    let q = tmp.path().join("q");
    assert!(gen(&kg, &q, &["--users", "1", "--topics", "2", "--per-topic", "3"]).status.success());
    let out = tmp.path().join("sweep");
    let base = |axis: &str| {
        pkgsum(&[
            "sweep",
            "--kg",
            kg.to_str().unwrap(),
            "--queries",
            q.to_str().unwrap(),
            "--method",
            "apex2n",
            "--budget",
            "5",
            "--seed",
            "0",
            "--out",
            out.to_str().unwrap(),
            "--axis",
            axis,
            "--values",
            "0.1..1.0:0.1",
        ])
    };
    let o = base("gamma");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files(&out).len(), 10);
    assert!(out.join("report_gamma_0.3.csv").exists());
    assert!(!base("beta").status.success());
}
