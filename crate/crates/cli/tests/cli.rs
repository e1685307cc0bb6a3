use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn jamming(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jamming"))
        .args(args)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn zero_items_is_invalid_input() {
    let out = jamming(&["simulate", "--N", "0", "--c", "1", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("N must be at least 1"));
}

#[test]
fn simulation_requires_seed() {
    let out = jamming(&["simulate", "--N", "100", "--c", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn fluid_reports_ln2() {
    let dir = tempfile::tempdir().unwrap();
    let out = jamming(&[
        "fluid",
        "--c",
        "1",
        "--dt",
        "1e-3",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let t_star = json(&out)["T_star"].as_f64().unwrap();
    assert!((t_star - std::f64::consts::LN_2).abs() < 1e-6);
    let csv = fs::read_to_string(dir.path().join("fluid.csv")).unwrap();
    assert!(csv.starts_with("t,z\n0,0\n"));
    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fluid.json")).unwrap()).unwrap();
    assert_eq!(saved["T_star"].as_f64(), Some(t_star));
}

#[test]
fn validate_er_c1_passes() {
    let out = jamming(&["validate", "--preset", "er-c1"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(!text.contains("FAIL"));
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 9);
}

#[test]
fn unknown_preset_is_invalid_input() {
    assert_eq!(jamming(&["validate", "--preset", "nope"]).status.code(), Some(2));
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\nrunz = 5\n[kernel]\ntype = \"er\"\nN = 50\nc = 1.0\n");
    let out = jamming(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(dir.path(), "seed = 1\n[kernel]\ntype = \"er\"\nN = 50\nc = 1.0\ncolor = 3\n");
    assert_eq!(jamming(&["simulate", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn flags_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\nruns = 5\n[kernel]\ntype = \"er\"\nN = 50\nc = 1.0\n");
    let from_file = json(&jamming(&["simulate", "--config", &cfg]));
    assert_eq!(from_file["N"], 50);
    assert_eq!(from_file["runs"], 5);

    let out = Command::new(env!("CARGO_BIN_EXE_jamming"))
        .args(["simulate", "--config", &cfg, "--N", "80"])
        .env_clear()
        .env("JAMMING_RUNS", "7")
        .env("JAMMING_N", "60")
        .output()
        .unwrap();
    let merged = json(&out);
    assert_eq!(merged["N"], 80);
    assert_eq!(merged["runs"], 7);
    assert_eq!(merged["seed"], 1);
}

#[test]
fn table_kernel_from_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("table.csv"), "x_bucket,k,prob\n0,0,1\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "seed = 4\nruns = 3\n[kernel]\ntype = \"table\"\nN = 20\nbucket_width = 20\ncsv = \"table.csv\"\ngamma = [0.0]\npsi = [0.0]\n",
    );
    let out = jamming(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["mean_hitting_fraction"], 1.0);
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 11\nruns = 300\n[kernel]\ntype = \"er\"\nN = 2000\nc = 1.5\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let run = |out: &Path, threads: &str| {
        let o = jamming(&[
            "simulate",
            "--config",
            &cfg,
            "--threads",
            threads,
            "--output-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        o.stdout
    };
    let stdout_a = run(&a, "1");
    let stdout_b = run(&b, "4");
    assert_eq!(stdout_a, stdout_b);
    for name in ["trajectory.csv", "hitting_fractions.csv", "summary.json"] {
        let x = fs::read(a.join(name)).unwrap();
        let y = fs::read(b.join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }

    let run_ctime = |out: &Path| {
        jamming(&["ctime", "--N", "500", "--c", "1", "--seed", "2", "--runs", "20", "--output-dir", out.to_str().unwrap()])
    };
    run_ctime(&a);
    run_ctime(&b);
    assert_eq!(fs::read(a.join("ctime.csv")).unwrap(), fs::read(b.join("ctime.csv")).unwrap());
}

#[test]
fn clt_and_lln_verdicts() {
    let out = jamming(&["clt", "--N", "10000", "--c", "2", "--runs", "2000", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["experiment"], "clt");
    assert_eq!(v["pass"], true);
    assert!((v["sigma_sq"].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-8);

    let out = jamming(&["lln", "--N", "1000", "--c", "1", "--runs", "200", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["pass"], true);
}

#[test]
fn bounds_budget() {
    let out = jamming(&["bounds", "--N", "10000", "--c", "1"]);
    let v = json(&out);
    assert!((v["omega_n"].as_f64().unwrap() - 0.0771564).abs() < 1e-7);
    assert_eq!(jamming(&["bounds", "--N", "100", "--c", "1", "--p", "1"]).status.code(), Some(2));
}
