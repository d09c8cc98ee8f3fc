//! End-to-end runs of the command-line front end.

use std::fs;

use equipart::cli::main_with_args;
use equipart::Partition;

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("equipart").chain(args.iter().copied()))
}

fn json(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn calibrate_prints_known_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    let o = out.to_str().unwrap();
    let code = run(&["calibrate", "--family", "geom-power", "--r", "1", "--rho", "1", "--n", "1000000", "--out", o]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!((v["gamma"].as_f64().unwrap() - 1.2825498).abs() < 1e-7);
    assert!(v["closed_form_gamma_squared"].as_f64().is_some());

    let code = run(&["calibrate", "--family", "log-ratio", "--r", "1", "--rho", "1", "--n", "100", "--out", o]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!((v["gamma"].as_f64().unwrap() - 0.853636).abs() < 5e-6);
    assert!(v["closed_form_gamma_squared"].is_null());
}

#[test]
fn conditioned_binomial_sample_is_strict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let args = [
        "sample", "--family", "binomial", "--m", "1", "--rho", "1", "--n", "20", "--conditioned", "--seed", "7",
        "--out", out.to_str().unwrap(),
    ];
    assert_eq!(run(&args), 0);
    let v = json(&out);
    let p: Partition = serde_json::from_value(v["samples"][0]["partition"].clone()).unwrap();
    assert_eq!(p.total(), 20);
    assert!(p.is_strict());
}

#[test]
fn identical_flags_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let args = [
            "sample", "--family", "log-ratio", "--r", "1", "--rho", "0.5", "--n", "300", "--replicas", "5",
            "--format", "csv", "--out", path.to_str().unwrap(),
        ];
        assert_eq!(run(&args), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("replica,total,trials,partition\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn oracle_and_shape_exports() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("c.csv");
    let args = [
        "oracle", "--family", "geom-power", "--r", "1", "--rho", "1", "--n", "10", "--exact", "--format", "csv",
        "--out", table.to_str().unwrap(),
    ];
    assert_eq!(run(&args), 0);
    let text = fs::read_to_string(&table).unwrap();
    assert!(text.ends_with("9,30\n10,42\n"));

    let curve = dir.path().join("w.csv");
    let prof = dir.path().join("p.csv");
    let args = [
        "shape", "--family", "binomial", "--m", "1", "--rho", "1", "--n", "400", "--format", "csv",
        "--out", curve.to_str().unwrap(), "--profile-out", prof.to_str().unwrap(),
    ];
    assert_eq!(run(&args), 0);
    let first = fs::read_to_string(&curve).unwrap().lines().nth(1).unwrap().to_string();
    assert!(first.starts_with("0,0.764"), "{first}");
    assert!(fs::read_to_string(&prof).unwrap().starts_with("x,y\n0,"));
}

#[test]
fn exit_status_reflects_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = out.to_str().unwrap();
    // the spread of |E - n| / n^{3/4} is far outside the band for strict partitions
    let failing = [
        "verify", "--family", "binomial", "--m", "1", "--rho", "1", "--check", "mean-error", "--n-list", "100,1000000",
        "--out", o,
    ];
    assert_eq!(run(&failing), 2);
    assert_eq!(json(&out)["pass"], false);
    let passing = [
        "verify", "--family", "geom-power", "--r", "1", "--rho", "1", "--check", "variance", "--n", "1000000",
        "--replicas", "0", "--out", o,
    ];
    assert_eq!(run(&passing), 0);
    assert_eq!(run(&["calibrate", "--family", "exp-power", "--r", "0.5", "--n", "10"]), 1);
    assert_eq!(run(&["oracle", "--family", "geom-power", "--r", "1", "--rho", "1", "--n", "31", "--conditional"]), 1);
}
