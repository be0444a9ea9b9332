use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reservoir-hydro"))
        .current_dir(dir)
        .args(args)
        .env_remove("RESERVOIR_HYDRO_THREADS")
        .output()
        .expect("binary runs")
}

fn error_record(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("an error record");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON ({e}): {line}"))
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn solve_writes_density_trace_and_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &["solve", "--bc", "nonlocal", "--alpha", "1", "--profile", "const(0.5)", "--M", "auto", "--T", "1", "--backend", "spectral", "--K", "128", "--out", "s"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let d = tmp.path().join("s");
    let density = read(d.join("density.csv"));
    assert!(density.starts_with("t,u,value\n"));
    assert_eq!(density.lines().count(), 1 + 101 * 513);
    let trace = read(d.join("trace.csv"));
    assert!(trace.starts_with("t,m,boundary_value\n"));
    // a constant at the stationary level stays put: m = M − 1/2 = 1/2
    for line in trace.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((f[1] - 0.5).abs() < 1e-9 && (f[2] - 0.5).abs() < 1e-9, "{line}");
    }
    let meta: Value = serde_json::from_str(&read(d.join("metadata.json"))).unwrap();
    assert_eq!(meta["M"].as_f64().unwrap(), 1.0);
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert!(meta["elapsed_seconds"].as_f64().is_some());
    assert!(read(d.join("config.txt")).contains("M = auto  # flag"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = run(
            tmp.path(),
            &["simulate", "--model", "sep", "--N", "24", "--theta", "1", "--profile", "affine(0.3,0.4)", "--times", "0.01,0.05", "--replicas", "64", "--seed", "9", "--out", out],
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let o = run(
            tmp.path(),
            &["verify-local-eq", "--model", "rw", "--N", "16", "--theta", "1", "--profile", "affine(0.5,0.5)", "--t", "0.05", "--u", "0.5", "--replicas", "500", "--seed", "3", "--pde.K", "32", "--out", &format!("{out}-le")],
        );
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let t = tmp.path();
    for f in ["density.csv", "trace.csv"] {
        assert_eq!(read(t.join("a").join(f)), read(t.join("b").join(f)), "{f}");
    }
    assert_eq!(read(t.join("a-le/stats.csv")), read(t.join("b-le/stats.csv")));
    let trace = read(t.join("a/trace.csv"));
    assert_eq!(trace.lines().count(), 4, "time 0 is recorded first");
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("run.cfg"), "# oracle run\nN = 8\ntheta = 2\nprofile = affine(0.5,0.5)\ntimes = 0.01, 0.02\n").unwrap();
    let o = run(tmp.path(), &["oracle", "--config", "run.cfg", "--theta", "1", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let echo = read(tmp.path().join("o/config.txt"));
    assert!(echo.contains("theta = 1  # flag, overrides run.cfg:3:9"), "{echo}");
    assert!(echo.contains("N = 8  # run.cfg:2:5"), "{echo}");
    assert!(echo.contains("alpha = 1  # default"));
    assert_eq!(read(tmp.path().join("o/density.csv")).lines().count(), 1 + 2 * 8);

    // an empty config plus full flags
    std::fs::write(tmp.path().join("empty.cfg"), "").unwrap();
    let o = run(tmp.path(), &["oracle", "--config", "empty.cfg", "--N", "8", "--theta", "1", "--profile", "const(1)", "--out", "e"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn input_errors_exit_2_and_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["solve", "--bc", "nonlocal", "--profile", "cos(0.5,,1)", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&o);
    assert_eq!(rec["error"], "input");
    assert_eq!(rec["position"], 9);
    assert!(!tmp.path().join("x").exists());

    std::fs::write(tmp.path().join("c.cfg"), "bc = nonlocal\nprofile = cos(0.5,,1)\n").unwrap();
    let rec = error_record(&run(tmp.path(), &["solve", "--config", "c.cfg", "--out", "x"]));
    assert_eq!((rec["line"].as_u64(), rec["column"].as_u64()), (Some(2), Some(19)));

    std::fs::write(tmp.path().join("u.cfg"), "bc = nonlocal\n  speed = 3\n").unwrap();
    let o = run(tmp.path(), &["solve", "--config", "u.cfg", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&o);
    assert_eq!((rec["line"].as_u64(), rec["column"].as_u64()), (Some(2), Some(3)));
    assert!(rec["message"].as_str().unwrap().contains("unknown key 'speed'"));

    for args in [
        vec!["solve", "--bogus", "1"],
        vec!["solve", "--bc", "robin", "--profile", "const(1)", "--out", "x"],
        vec!["simulate", "--model", "sep", "--N", "8", "--theta", "1", "--profile", "const(1.5)", "--out", "x"],
        vec!["equivalence", "--left", "wentzell", "--right", "nonlocal:spectral", "--profile", "const(1)", "--out", "x"],
        vec!["solve", "--bc", "wentzell", "--profile", "const(0.5)", "--M", "3", "--out", "x"],
    ] {
        let o = run(tmp.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(error_record(&o)["exit_code"], 2);
    }
    assert!(!tmp.path().join("x").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_reservoir-hydro"))
        .current_dir(tmp.path())
        .args(["entropy", "--theta", "1", "--profile", "const(0.5)", "--out", "x"])
        .env("RESERVOIR_HYDRO_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn resource_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["simulate", "--model", "rw", "--N", "8", "--theta", "1", "--profile", "const(1e30)", "--out", "x"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_record(&o)["error"], "numeric");
}

#[test]
fn failed_verdicts_exit_1_with_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &["verify-stationarity", "--model", "sep", "--N", "16", "--theta", "1", "--level", "0.5", "--t", "0.01", "--perturb", "0.1", "--replicas", "5000", "--out", "st"],
    );
    assert_eq!(o.status.code(), Some(1));
    let stats = read(tmp.path().join("st/stats.csv"));
    assert!(stats.starts_with("test,N,theta,t,u,statistic,threshold,verdict\n"));
    assert_eq!(stats.lines().count(), 1 + 17);
    assert!(stats.contains(",fail\n"));
    let meta: Value = serde_json::from_str(&read(tmp.path().join("st/metadata.json"))).unwrap();
    assert_eq!(meta["verdict"], "fail");

    let o = run(
        tmp.path(),
        &["verify-stationarity", "--model", "rw", "--N", "16", "--theta", "1", "--level", "1", "--t", "0.05", "--replicas", "20000", "--out", "ok"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn equivalence_and_entropy_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &["equivalence", "--left", "wentzell:fd", "--right", "nonlocal:spectral", "--profile", "cos(0.5,0.25,1)", "--alpha", "2", "--out", "eq"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: Value = serde_json::from_str(&read(tmp.path().join("eq/metadata.json"))).unwrap();
    assert!(meta["max_l2"].as_f64().unwrap() < 1e-3);
    assert_eq!(read(tmp.path().join("eq/stats.csv")).lines().count(), 1 + 100);

    let o = run(tmp.path(), &["entropy", "--theta", "1", "--profile", "affine(0.6,-0.3)", "--out", "en"]);
    assert_eq!(o.status.code(), Some(0));
    let table = read(tmp.path().join("en/entropy.csv"));
    assert!(table.starts_with("N,p,bulk_entropy,reservoir_term,bound\n"));
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn sweep_writes_one_directory_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &["sweep", "--command", "oracle", "--thetas", "0.5,1,2", "--Ns", "8,16", "--profile", "affine(0.5,0.5)", "--out", "sw"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let index = read(tmp.path().join("sw/sweep.csv"));
    assert_eq!(index.lines().count(), 1 + 6);
    for th in ["0.5", "1", "2"] {
        for n in ["8", "16"] {
            let d = tmp.path().join(format!("sw/theta={th}_N={n}"));
            assert!(d.join("density.csv").exists());
            let echo = read(d.join("config.txt"));
            assert!(echo.contains(&format!("theta = {th}  # sweep point")), "{echo}");
        }
    }

    // keys the swept command does not use are rejected before anything runs
    let o = run(
        tmp.path(),
        &["sweep", "--command", "oracle", "--thetas", "1", "--profile", "const(1)", "--replicas", "3", "--out", "bad"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("bad").exists());
    let o = run(tmp.path(), &["sweep", "--command", "solve", "--thetas", "1", "--out", "bad"]);
    assert_eq!(o.status.code(), Some(2));
}
