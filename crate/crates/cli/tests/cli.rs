use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hssmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hssmf"))
        .args(args)
        .env_remove("HSSMF_K")
        .output()
        .expect("binary runs")
}

fn stats(dir: &Path, name: &str, args: &[&str]) -> (i32, Value, String) {
    let path = dir.join(name);
    let mut all = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    all.extend(["--stats", &p]);
    let out = hssmf(&all);
    let text = std::fs::read_to_string(&path).unwrap_or_default();
    let v = serde_json::from_str(&text).unwrap_or(Value::Null);
    (out.status.code().unwrap(), v, text)
}

fn all_numbers_finite(v: &Value) -> bool {
    match v {
        Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
        Value::Array(a) => a.iter().all(all_numbers_finite),
        Value::Object(o) => o.values().all(all_numbers_finite),
        _ => true,
    }
}

#[test]
fn pure_multifrontal_p2d_solves_in_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v, _) = stats(dir.path(), "s.json", &["--gen", "p2d", "--k", "50", "--ls", "0"]);
    assert_eq!(code, 0);
    assert!(v["iterations"].as_u64().unwrap() <= 1);
    assert!(v["true_rel_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(v["method"], "refinement");
    assert_eq!(v["schema_version"], 1);
    assert!(all_numbers_finite(&v));
    for key in ["scaling", "analysis", "factor", "solve", "total"] {
        assert!(v["timings"][key].is_number(), "{key}");
    }
}

#[test]
fn compression_shrinks_the_factor() {
    let dir = tempfile::tempdir().unwrap();
    let (c1, hss, _) = stats(dir.path(), "a.json", &["--gen", "p3d", "--k", "20", "--ls", "4", "--eps", "0.5"]);
    let (c2, mf, _) = stats(dir.path(), "b.json", &["--gen", "p3d", "--k", "20", "--ls", "0"]);
    assert_eq!((c1, c2), (0, 0));
    assert!(hss["factor"]["hss_fronts"].as_u64().unwrap() > 0);
    assert!(hss["factor"]["factor_nnz_bytes"].as_u64() < mf["factor"]["factor_nnz_bytes"].as_u64());
    assert_eq!(hss["method"], "gmres");
}

#[test]
fn missing_matrix_exits_one_and_names_file() {
    let out = hssmf(&["--matrix", "missing.mtx"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.mtx"));
}

#[test]
fn invalid_eps_is_a_setup_error() {
    let out = hssmf(&["--gen", "p2d", "--k", "8", "--eps", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps"));
}

#[test]
fn non_convergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--gen", "p2d", "--k", "31", "--ls", "3", "--leaf", "16", "--min-hss", "0", "--eps", "0.9", "--rtol", "1e-14",
        "--atol", "0", "--maxit", "1",
    ];
    let (code, v, _) = stats(dir.path(), "s.json", &args);
    assert_eq!(code, 2);
    assert_eq!(v["converged"], false);
}

#[test]
fn single_thread_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--gen", "p2d", "--k", "40", "--ls", "3", "--leaf", "16", "--min-hss", "0", "--eps", "1e-3", "--threads", "1"];
    let (_, mut a, _) = stats(dir.path(), "a.json", &args);
    let (_, mut b, _) = stats(dir.path(), "b.json", &args);
    a.as_object_mut().unwrap().remove("timings");
    b.as_object_mut().unwrap().remove("timings");
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn environment_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let out = Command::new(env!("CARGO_BIN_EXE_hssmf"))
        .args(["--gen", "p2d"])
        .env("HSSMF_K", "12")
        .env("HSSMF_STATS", &path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["n"], 144);
}

#[test]
fn matrix_market_input_and_rhs_file() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = dir.path().join("a.mtx");
    std::fs::write(&mtx, "%%MatrixMarket matrix coordinate real general\n3 3 5\n1 1 4\n2 2 5\n3 3 6\n1 3 1\n3 1 2\n").unwrap();
    let rhs = dir.path().join("b.txt");
    std::fs::write(&rhs, "5\n5\n8\n").unwrap();
    let (code, v, _) = stats(
        dir.path(),
        "s.json",
        &["--matrix", mtx.to_str().unwrap(), "--rhs-file", rhs.to_str().unwrap()],
    );
    assert_eq!(code, 0);
    assert_eq!(v["ordering"], "graph");
    assert!(v["true_rel_residual"].as_f64().unwrap() < 1e-14);
}

#[test]
fn sweep_over_k_writes_monotone_flops() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("sweep.csv");
    let out = hssmf(&["--gen", "p2d", "--k", "15", "--sweep", "k=15,31,63", "--stats", csv_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let mut r = csv::Reader::from_path(&csv_path).unwrap();
    let headers = r.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "factor_flops").unwrap();
    let flops: Vec<u64> = r.records().map(|rec| rec.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(flops.len(), 3);
    assert!(flops.windows(2).all(|w| w[0] < w[1]), "{flops:?}");
}

#[test]
fn sweep_over_eps_has_nondecreasing_iterations() {
    let out = hssmf(&[
        "--gen", "p2d", "--k", "63", "--ls", "3", "--leaf", "16", "--min-hss", "0", "--d0", "32", "--dd", "32", "--sweep",
        "eps=1e-8,1e-4,1e-1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = r.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "iterations").unwrap();
    let its: Vec<u64> = r.records().map(|rec| rec.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(its.len(), 3);
    assert!(its.windows(2).all(|w| w[0] <= w[1]), "{its:?}");
}

#[test]
fn sweep_row_failure_is_recorded() {
    let out = hssmf(&["--gen", "p2d", "--k", "8", "--leaf", "16", "--sweep", "threads=1,0"]);
    assert_eq!(out.status.code(), Some(2));
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = r.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "error").unwrap();
    let errs: Vec<String> = r.records().map(|rec| rec.unwrap()[col].to_string()).collect();
    assert_eq!(errs.len(), 2);
    assert!(errs[0].is_empty() && errs[1].contains("threads"));
}
