use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use wkde_lab::cli::run;
use wkde_lab::output::read_manifest;

const SMALL: [&str; 4] = ["--set", "n_list=512,1024", "--set", "replications=4"];

fn invoke(dir: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["wkde-lab"];
    full.extend_from_slice(args);
    full.extend(["--out", dir.to_str().unwrap()]);
    run(full)
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn deviation_writes_profile_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(invoke(tmp.path(), &["deviation"]), 0);
    let profile = fs::read_to_string(tmp.path().join("profile.csv")).unwrap();
    assert!(profile.starts_with("n,h,sup_weighted_dev,rescaled,argsup_coords,grid_id\n"));
    assert!(profile.lines().count() > 30);
    let manifest = read_manifest(tmp.path()).unwrap();
    let names: Vec<&str> = manifest.files.iter().map(|f| f.file.as_str()).collect();
    assert_eq!(names, ["config.echo", "profile.csv", "profile.json", "summary.json"]);
    for entry in &manifest.files {
        let bytes = fs::read(tmp.path().join(&entry.file)).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), entry.sha256);
    }
    let info = fs::read_to_string(tmp.path().join("run_info.txt")).unwrap();
    assert!(info.contains("workers=1") && info.contains("seed=1"));
}

#[test]
fn layouts_by_format() {
    let tmp = tempfile::tempdir().unwrap();
    let both = tmp.path().join("both");
    let mut args = vec!["boundedness", "--set", "override_tail=true"];
    args.extend(SMALL);
    assert!(invoke(&both, &args) <= 1);
    let got = files(&both);
    for f in [
        "quantiles.csv",
        "raw.csv",
        "summary.json",
        "manifest.json",
        "config.echo",
        "run_info.txt",
    ] {
        assert!(got.contains(&f.to_string()), "{f} missing from {got:?}");
    }
    let csv_dir = tmp.path().join("csv");
    args.extend(["--format", "csv"]);
    assert!(invoke(&csv_dir, &args) <= 1);
    let json: Vec<String> = files(&csv_dir).into_iter().filter(|f| f.ends_with(".json")).collect();
    assert_eq!(json, ["manifest.json"]);
}

#[test]
fn reruns_reproduce_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["path", "--set", "override_tail=true", "--set", "paths=2"];
    args.extend(SMALL);
    assert!(invoke(&tmp.path().join("a"), &args) <= 1);
    args.extend(["--workers", "2"]);
    assert!(invoke(&tmp.path().join("b"), &args) <= 1);
    assert_eq!(
        read_manifest(&tmp.path().join("a")).unwrap(),
        read_manifest(&tmp.path().join("b")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("bad-selector");
    assert_eq!(invoke(&d, &["rates", "--set", "selector=oracle"]), 2);
    let err: serde_json::Value = serde_json::from_slice(&fs::read(d.join("error.json")).unwrap()).unwrap();
    assert_eq!(err["exit_code"], 2);

    let cfg = tmp.path().join("typo.conf");
    fs::write(&cfg, "beta=0.25\nbandwith=0.1\n").unwrap();
    let d = tmp.path().join("typo");
    assert_eq!(invoke(&d, &["grid", "--config", cfg.to_str().unwrap()]), 2);
    let err = fs::read_to_string(d.join("error.json")).unwrap();
    assert!(err.contains("bandwith"));

    // the tail condition fails for the gaussian default, so boundedness refuses
    let d = tmp.path().join("refused");
    assert_eq!(invoke(&d, &["boundedness"]), 2);
    assert!(fs::read_to_string(d.join("error.json")).unwrap().contains("necessity"));

    assert_eq!(run(["wkde-lab", "no-such-command"]), 2);
    assert_eq!(invoke(&tmp.path().join("cond"), &["check-conditions"]), 1);
}

#[test]
fn overrides_beat_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"beta": 0.1, "n": 2048}"#).unwrap();
    let d = tmp.path().join("out");
    assert_eq!(
        invoke(
            &d,
            &[
                "grid",
                "--config",
                cfg.to_str().unwrap(),
                "--set",
                "beta=0.25",
                "--seed",
                "9"
            ]
        ),
        0
    );
    let echo = fs::read_to_string(d.join("config.echo")).unwrap();
    assert!(echo.contains("beta=0.25\n") && echo.contains("n=2048\n") && echo.contains("seed=9\n"));
    assert!(echo.contains("n_list=512,1024,2048,4096,8192,16384\n"));
    assert!(echo.contains("replications=200\n") && echo.contains("subgrid_k=8\n"));
}

#[test]
fn degenerate_experiments() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("r1");
    assert_eq!(
        invoke(
            &d,
            &["boundedness", "--set", "override_tail=true", "--set", "replications=1"]
        ),
        0
    );
    let q = fs::read_to_string(d.join("quantiles.csv")).unwrap();
    for row in q.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        assert!(cols[3] == cols[4] && cols[4] == cols[5], "{row}");
    }

    let d = tmp.path().join("single");
    assert_eq!(
        invoke(
            &d,
            &[
                "boundedness",
                "--set",
                "override_tail=true",
                "--set",
                "n_list=1024",
                "--set",
                "replications=3"
            ]
        ),
        0
    );
    let s: serde_json::Value = serde_json::from_slice(&fs::read(d.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["outcome"], "not-applicable");
    assert!(s["series"][0]["slope"].is_null());

    let d = tmp.path().join("path1");
    assert_eq!(
        invoke(
            &d,
            &[
                "path",
                "--set",
                "override_tail=true",
                "--set",
                "n_list=1024",
                "--set",
                "paths=1"
            ]
        ),
        0
    );
    let raw = fs::read_to_string(d.join("raw.csv")).unwrap();
    let row: Vec<&str> = raw.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], row[3]);
}

#[test]
fn necessity_on_gaussian_never_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["necessity"];
    args.extend(SMALL);
    assert_eq!(invoke(tmp.path(), &args), 0);
    let s = fs::read_to_string(tmp.path().join("summary.json")).unwrap();
    assert!(s.contains("\"demo\""));
    assert!(s.contains("growth observed"));
}

#[test]
fn fixed_selector_reproduces_the_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["rates", "--set", "selector=fixed-a_n"];
    args.extend(SMALL);
    invoke(tmp.path(), &args);
    let raw = fs::read_to_string(tmp.path().join("raw.csv")).unwrap();
    for row in raw.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[2], cols[4]);
    }

    let knn = tmp.path().join("knn");
    let mut args = vec!["rates", "--set", "selector=knn-local"];
    args.extend(SMALL);
    assert!(invoke(&knn, &args) <= 1);
}

#[test]
fn single_sample_commands() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        invoke(
            &tmp.path().join("k"),
            &["validate-kernel", "--set", "kernel=triweight", "--set", "dim=2"]
        ),
        0
    );
    assert_eq!(
        invoke(&tmp.path().join("f"), &["functional", "--set", "functional_configs=5"]),
        0
    );

    let data = tmp.path().join("points.csv");
    fs::write(&data, "0.1\n-0.3\n0.25\n1.5\n-0.7\n0.0\n").unwrap();
    let d = tmp.path().join("e");
    assert_eq!(
        invoke(
            &d,
            &[
                "estimate",
                "--set",
                &format!("data={}", data.display()),
                "--set",
                "h=0.5",
                "--format",
                "csv"
            ]
        ),
        0
    );
    let est = fs::read_to_string(d.join("estimate.csv")).unwrap();
    assert!(est.starts_with("t1,value,h_used,in_a_n\n"));
    let pts = [0.1, -0.3, 0.25, 1.5, -0.7, 0.0];
    for row in est.lines().skip(1) {
        let cols: Vec<f64> = row.split(',').take(2).map(|c| c.parse().unwrap()).collect();
        let inside = pts.iter().filter(|&&x| ((x - cols[0]) / 0.5f64).abs() <= 0.5).count();
        assert_eq!(cols[1], inside as f64 / (6.0 * 0.5), "{row}");
    }

    let d = tmp.path().join("g");
    assert_eq!(invoke(&d, &["grid", "--format", "csv"]), 0);
    let summary = fs::read_to_string(d.join("summary.csv")).unwrap();
    assert!(summary.contains("capped,false"));
}
