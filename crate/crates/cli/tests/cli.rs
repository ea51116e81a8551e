//! The `hierex` binary end to end.

use hierex::harness::run::read_sweep;
use hierex::{load_domain, Transcript};
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

/// Runs the binary with whitespace-separated arguments.
fn hierex(args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hierex")).args(args.split_whitespace()).output().expect("binary runs")
}

fn ok(args: &str) -> String {
    let out = hierex(args);
    assert!(out.status.success(), "{args}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fail(args: &str) -> String {
    let out = hierex(args);
    assert!(!out.status.success(), "{args} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn standard(dir: &Path) -> String {
    let path = dir.join("standard.json").display().to_string();
    ok(&format!("gen --seed 7 --out {path}"));
    path
}

#[test]
fn gen_small_domain_loads() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("tiny.json");
    ok(&format!("gen --attributes 2x1 --entities 4 --fraction 1 --uniform --out {}", path.display()));
    let d = load_domain(&path).unwrap();
    assert_eq!(d.catalog.len(), 4);
    let leaves = d.poset.all_nodes().into_iter().filter(|n| d.poset.is_leaf(n)).count();
    assert_eq!(leaves, 2);
    assert!(d.catalog.ids().all(|id| {
        let p = d.catalog.get(id).popularity;
        p > 0.0 && p <= 10.0
    }));
}

#[test]
fn root_chao_stays_at_root_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let domain = standard(dir.path());
    let run = |out: &str| {
        let out = dir.path().join(out);
        ok(&format!("run --domain {domain} --policy RootChao --budget 15 --seeds 3 --out {}", out.display()));
        std::fs::read(out.join("transcript_3.csv")).unwrap()
    };
    let first = run("a");
    assert_eq!(first, run("b"));

    let d = load_domain(&domain).unwrap();
    let t = Transcript::read_csv(&d, first.as_slice()).unwrap();
    assert!(!t.rows.is_empty());
    assert!(t.rows.iter().all(|r| &r.node == d.poset.root()));
}

#[test]
fn gsnewr_summary_respects_budget() {
    let dir = TempDir::new().unwrap();
    let domain = standard(dir.path());
    let stdout = ok(&format!("run --domain {domain} --policy GSNewR --budget 50 --seeds 0..2"));
    let summary: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    for field in ["policy", "budget", "unique_mean", "unique_std", "cost_mean", "rounds_mean", "runs"] {
        assert!(summary.get(field).is_some(), "missing {field}");
    }
    let runs = summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert!(runs.iter().all(|r| r["cost"].as_f64().unwrap() <= 50.0 + 1e-9));
}

#[test]
fn sweep_writes_the_full_grid() {
    let dir = TempDir::new().unwrap();
    let domain = standard(dir.path());
    let out = dir.path().join("sweep.csv");
    ok(&format!("sweep --domain {domain} --policies Rand,BFS --budgets 5,10 --seeds 0..3 --out {}", out.display()));
    let rows = read_sweep(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 3);
}

#[test]
fn inspect_and_eval_emit_json() {
    let dir = TempDir::new().unwrap();
    let domain = standard(dir.path());
    let report: serde_json::Value = serde_json::from_str(&ok(&format!("inspect --domain {domain} --top 4"))).unwrap();
    assert_eq!(report["jaccard"].as_array().unwrap().len(), 4);

    let rows = dir.path().join("eval.csv");
    let summary = ok(&format!(
        "eval-estimators --domain {domain} --trials 1 --draws 100 --configs 10:5 --bootstrap 10 --out {}",
        rows.display()
    ));
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 3);
    assert!(rows.exists());
}

#[test]
fn validation_failures_exit_nonzero_with_a_diagnostic() {
    let dir = TempDir::new().unwrap();
    let domain = standard(dir.path());
    let run = format!("run --domain {domain} --budget 5");
    assert!(fail(&format!("{run} --policy Greedy")).contains("unknown policy"));
    assert!(fail(&format!("run --domain {domain} --policy Rand --budget 0")).contains("budget must be positive"));
    assert!(fail(&format!("{run} --policy Rand --configs 5")).contains("query configuration"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"attributes\": [").unwrap();
    assert!(fail(&format!("inspect --domain {}", bad.display())).contains("malformed domain"));
    let missing = dir.path().join("missing.json");
    assert!(fail(&format!("inspect --domain {}", missing.display())).contains("missing.json"));
}
