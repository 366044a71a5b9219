//! End-to-end CLI behavior: exit codes, file outputs, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bottlenet"))
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(tag);
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should run")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

#[test]
fn sweep_default_small_run_exits_zero_and_writes_reports() {
    let dir = tmpdir("sweep-ok");
    let out = run(&[
        "sweep",
        "--set",
        "sweep.widths=16,32,64,128",
        "--set",
        "sweep.seeds=2",
        "--set",
        "sweep.directions=2",
        "--set",
        "sweep.t-points=11",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("sweep.csv").exists());
    assert!(dir.join("sweep.json").exists());
    assert!(dir.join("run.log").exists());
}

#[test]
fn sweep_with_single_width_is_a_config_error() {
    let dir = tmpdir("sweep-short");
    let out = run(&[
        "sweep",
        "--set",
        "sweep.widths=64",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn nonexistent_config_path_is_a_config_error() {
    let out = run(&["sweep", "--config", "/nonexistent/path.conf"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tmpdir("unknown-key");
    let out = run(&[
        "sweep",
        "--set",
        "sweep.bogus=1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key"));
}

#[test]
fn perturb_emits_four_families() {
    let dir = tmpdir("perturb");
    let out = run(&[
        "perturb",
        "--set",
        "curves.hidden=32",
        "--set",
        "curves.seeds=1",
        "--set",
        "curves.directions=1",
        "--set",
        "curves.t-points=5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.join("curves.csv")).unwrap();
    for family in [
        "tanh-full",
        "identity-full",
        "identity-block1",
        "identity-block2",
    ] {
        assert!(csv.contains(family), "missing family {family}");
    }
}

#[test]
fn perturb_tanh_with_jet_overlay_is_a_config_error() {
    let dir = tmpdir("perturb-jet");
    let out = run(&[
        "perturb",
        "--set",
        "curves.activation=tanh",
        "--set",
        "curves.jet-overlay=true",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn perturb_one_point_grid_is_a_config_error() {
    let dir = tmpdir("perturb-grid");
    let out = run(&[
        "perturb",
        "--set",
        "curves.t-points=1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_list_prints_bound_names() {
    let out = run(&["verify", "--list"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["remainder", "derivative_witness", "tail_matrix_norm"] {
        assert!(stdout.contains(name), "missing {name}");
    }
}

#[test]
fn verify_small_width_reports_failures_with_exit_one() {
    let dir = tmpdir("verify-small");
    let out = run(&[
        "verify",
        "--set",
        "verify.width=8",
        "--set",
        "verify.tail-trials=500",
        "--set",
        "verify.ball-samples=20",
        "--set",
        "verify.tuple-samples=8",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&out),
        1,
        "stdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    assert!(dir.join("bounds.json").exists());
}

#[test]
fn hessian_scan_small_run_exits_zero() {
    let dir = tmpdir("hessian");
    let out = run(&[
        "hessian",
        "--set",
        "hessian.widths=256",
        "--set",
        "hessian.seeds=25",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&out),
        0,
        "stdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(dir.join("hessian.csv").exists());
}

#[test]
fn seed_determines_bytes_under_any_jobs_value() {
    let d1 = tmpdir("det-1");
    let d2 = tmpdir("det-2");
    let base = [
        "sweep",
        "--seed",
        "99",
        "--set",
        "sweep.widths=16,32,64,128",
        "--set",
        "sweep.seeds=2",
        "--set",
        "sweep.directions=2",
        "--set",
        "sweep.t-points=11",
    ];
    let mut a1 = base.to_vec();
    a1.extend(["--jobs", "1", "--out", d1.to_str().unwrap()]);
    let mut a2 = base.to_vec();
    a2.extend(["--jobs", "4", "--out", d2.to_str().unwrap()]);
    assert_eq!(code(&run(&a1)), 0);
    assert_eq!(code(&run(&a2)), 0);
    let csv1 = std::fs::read(d1.join("sweep.csv")).unwrap();
    let csv2 = std::fs::read(d2.join("sweep.csv")).unwrap();
    assert_eq!(csv1, csv2);
    let json1 = std::fs::read(d1.join("sweep.json")).unwrap();
    let json2 = std::fs::read(d2.join("sweep.json")).unwrap();
    assert_eq!(json1, json2);
}

#[test]
fn init_dump_eval_round_trip_is_bit_exact() {
    let d1 = tmpdir("dump-1");
    let d2 = tmpdir("dump-2");
    for d in [&d1, &d2] {
        let out = run(&[
            "init-dump",
            "--seed",
            "5",
            "--set",
            "network.hidden=64",
            "--out",
            d.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    let b1 = std::fs::read(d1.join("weights.bin")).unwrap();
    let b2 = std::fs::read(d2.join("weights.bin")).unwrap();
    assert_eq!(b1, b2, "containers must be byte-identical for one seed");

    let e1 = run(&[
        "eval",
        "--weights",
        d1.join("weights.bin").to_str().unwrap(),
        "--input",
        "1,0",
    ]);
    let e2 = run(&[
        "eval",
        "--weights",
        d2.join("weights.bin").to_str().unwrap(),
        "--input",
        "1,0",
    ]);
    assert_eq!(code(&e1), 0);
    assert_eq!(e1.stdout, e2.stdout);
    // a parseable finite scalar comes back
    let text = String::from_utf8_lossy(&e1.stdout);
    let v: f64 = text.trim().parse().unwrap();
    assert!(v.is_finite());
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = tmpdir("config-file");
    let conf = dir.join("run.conf");
    std::fs::write(
        &conf,
        "# small run\n[sweep]\nwidths = 16,32,64,128\nseeds = 2\ndirections = 2\nt-points = 11\n",
    )
    .unwrap();
    let out = run(&[
        "sweep",
        "--config",
        conf.to_str().unwrap(),
        "--set",
        "sweep.seeds=3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json = std::fs::read_to_string(dir.join("sweep.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["config"]["seeds"], 3);
}

#[test]
fn unknown_preset_is_a_config_error() {
    let out = run(&["sweep", "--preset", "nope"]);
    assert_eq!(code(&out), 2);
}
