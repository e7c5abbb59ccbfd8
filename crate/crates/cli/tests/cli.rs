//! End-to-end tests of the chb binary: exit codes, JSON summaries, CSV
//! determinism, config handling, and snapshot round-trips.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chb"))
        .args(args)
        .env_remove("CHB_THREADS")
        .output()
        .expect("failed to spawn chb")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout not utf-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr not utf-8")
}

/// Value of a numeric key in a one-line JSON object.
fn json_num(line: &str, key: &str) -> f64 {
    let tag = format!("\"{key}\":");
    let at = line.find(&tag).unwrap_or_else(|| panic!("missing key {key} in {line}"));
    let rest = &line[at + tag.len()..];
    let end = rest.find([',', '}']).unwrap_or(rest.len());
    rest[..end].parse().unwrap_or_else(|_| panic!("bad number for {key} in {line}"))
}

#[test]
fn constants_prints_fixed_key_order() {
    let out = run(&["constants", "--dim", "2"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let line = stdout_of(&out);
    let keys = ["\"c0\":", "\"cbar1\":", "\"xi_d\":", "\"c_star\":", "\"nu_m\":"];
    let idx: Vec<usize> = keys
        .iter()
        .map(|k| line.find(k).unwrap_or_else(|| panic!("missing {k} in {line}")))
        .collect();
    assert!(idx.windows(2).all(|w| w[0] < w[1]), "key order wrong: {line}");
    assert!((json_num(&line, "c0") - 0.942_809_041_582_063_4).abs() < 1e-12);
    assert!((json_num(&line, "c_star") - 0.698_131_700_797_731_8).abs() < 1e-12);
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(&["constants", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!stderr_of(&out).is_empty());
}

#[test]
fn missing_subcommand_is_usage_error() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_clean() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    assert!(stdout_of(&out).contains("chb"));
}

#[test]
fn reduced_below_crossover_is_domain_error() {
    let out = run(&["reduced", "--dim", "2", "--xi", "1.0"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
}

#[test]
fn reduced_curve_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out_path in [&a, &b] {
        let out = run(&[
            "reduced", "--dim", "2", "--xi", "2.0", "--samples", "200",
            "--out", out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    }
    let bytes_a = fs::read(&a).unwrap();
    assert_eq!(bytes_a, fs::read(&b).unwrap(), "reruns differ");
    let text = String::from_utf8(bytes_a).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# chb 0.1.0 reduced"), "provenance line");
    assert_eq!(lines.next().unwrap(), "nu,f");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(first[1].parse::<f64>().unwrap(), 0.0, "curve must start at f(0)=0");
}

fn read_profile_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .skip(2)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn path_run_writes_profile_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let args = [
        "path", "--dim", "2", "--phi", "0.3", "--length", "40", "--grid", "96",
        "--images", "16", "--snapshots", "--out",
    ];
    let out = run(&[&args[..], &[out_a.to_str().unwrap()]].concat());
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let line = stdout_of(&out);
    assert!(json_num(&line, "max_gap") > 0.0);
    assert!(json_num(&line, "end_gap") < 0.0);

    let rows = read_profile_rows(&out_a.join("profile.csv"));
    assert_eq!(rows.len(), 16);
    assert_eq!(rows[0][2], 0.0, "first image sits at the uniform state");

    // Snapshots exist and read back with the right shape and mean.
    for i in 0..16 {
        assert!(out_a.join(format!("profile_{i:03}.chf1")).exists());
    }
    let file = fs::File::open(out_a.join("profile_000.chf1")).unwrap();
    let (u, phi) = chb_core::io::read_chf1(&mut std::io::BufReader::new(file)).unwrap();
    assert_eq!(u.n(), 96);
    assert!((phi - 0.3).abs() < 1e-15);
    assert!((u.mean() + 0.7).abs() < 1e-10);

    let out_b = dir.path().join("b");
    let out = run(&[&args[..], &[out_b.to_str().unwrap()]].concat());
    assert!(out.status.success());
    assert_eq!(
        fs::read(out_a.join("profile.csv")).unwrap(),
        fs::read(out_b.join("profile.csv")).unwrap(),
        "reruns must be byte-identical"
    );
}

#[test]
fn path_output_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one");
    let many = dir.path().join("many");
    for (threads, out_path) in [("1", &one), ("4", &many)] {
        let out = run(&[
            "path", "--dim", "2", "--phi", "0.3", "--length", "30", "--grid", "60",
            "--images", "16", "--threads", threads, "--out", out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    }
    assert_eq!(
        fs::read(one.join("profile.csv")).unwrap(),
        fs::read(many.join("profile.csv")).unwrap(),
        "thread count changed the output"
    );
}

#[test]
fn flag_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "phi=0.2\nlength=40\ngrid=96\nimages=16\n").unwrap();
    let out = run(&["path", "--config", cfg.to_str().unwrap(), "--phi", "0.3"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!((json_num(&stdout_of(&out), "phi") - 0.3).abs() < 1e-15);
}

#[test]
fn env_threads_matches_flag_threads() {
    let dir = tempfile::tempdir().unwrap();
    let flagged = dir.path().join("flag");
    let from_env = dir.path().join("env");
    let base = [
        "path", "--dim", "2", "--phi", "0.3", "--length", "30", "--grid", "60",
        "--images", "16",
    ];
    let out = run(&[&base[..], &["--threads", "2", "--out", flagged.to_str().unwrap()]].concat());
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let out = Command::new(env!("CARGO_BIN_EXE_chb"))
        .args([&base[..], &["--out", from_env.to_str().unwrap()]].concat())
        .env("CHB_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert_eq!(
        fs::read(flagged.join("profile.csv")).unwrap(),
        fs::read(from_env.join("profile.csv")).unwrap()
    );
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "phy=0.1\n").unwrap();
    let out = run(&["path", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("phy"));
}

#[test]
fn out_of_range_config_phi_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "phi=2.0\nlength=40\n").unwrap();
    let out = run(&["path", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("(0, 1)"), "stderr: {}", stderr_of(&out));
}

#[test]
fn certify_small_phi_reports_all_sound() {
    let out = run(&[
        "certify", "--dim", "2", "--phi", "0.001", "--length", "250", "--grid", "640",
        "--samples", "5", "--R", "1.2",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("\"all_sound\":true"));
}

#[test]
fn certify_large_phi_is_domain_error() {
    // The certificate constants only exist for small phi; asking for them
    // at phi = 0.1 must refuse rather than emit unsound bounds.
    let out = run(&["certify", "--dim", "2", "--phi", "0.1", "--length", "400"]);
    assert_eq!(out.status.code(), Some(2), "stdout: {}", stdout_of(&out));
}

#[test]
fn gamma_sweep_reports_fit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let out = run(&[
        "gamma", "--dim", "2", "--xi", "2.0", "--phi", "0.2", "--samples", "2",
        "--R", "1.0", "--out", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let line = stdout_of(&out);
    assert!((json_num(&line, "limit") + 1.707_724_496_270_004_4).abs() < 1e-10);
    assert!(line.contains("\"monotone\":true"));
    assert!(line.contains("\"fitted_exponent\":"));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4, "two header lines plus two sweep rows");
}

#[test]
fn saddle_run_converges_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("s");
    let out = run(&[
        "saddle", "--dim", "2", "--phi", "0.3", "--length", "30", "--grid", "60",
        "--images", "16", "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let line = stdout_of(&out);
    assert!(line.contains("\"converged\":true"), "summary: {line}");
    assert!(json_num(&line, "residual") <= 1e-4);
    assert!(json_num(&line, "gap") > 0.0);

    let rows = read_profile_rows(&out_dir.join("relaxed.csv"));
    assert_eq!(rows.len(), 16);
    let file = fs::File::open(out_dir.join("saddle.chf1")).unwrap();
    let (u, _) = chb_core::io::read_chf1(&mut std::io::BufReader::new(file)).unwrap();
    assert_eq!(u.n(), 60);
    assert!((u.mean() + 0.7).abs() < 1e-10, "saddle keeps the prescribed mean");
}
