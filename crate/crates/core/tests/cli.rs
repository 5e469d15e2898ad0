//! End-to-end runs of the command-line tool.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grover-optics"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn error_record(out: &Output) -> serde_json::Value {
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.lines().last().expect("stderr line")).expect("json error record")
}

#[test]
fn twomode_preset_writes_spectrum_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig2a");
    let o = run(&["twomode", "--preset", "fig2a", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("# manifest:\n"));
    assert!(csv.contains("\nalpha,a0_re,a0_im,a1_re,a1_im,circulating_power,transmitted_power,rho11,contrast\n"));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("\npeaks = 2\n"), "{summary}");
    assert!(out.join("rabi.csv").exists());
}

#[test]
fn small_pulse_and_scan_runs() {
    let dir = tempfile::tempdir().unwrap();
    let base = "[grid]\nn = 256\n[beam]\nchannels = 20.0\n";
    let pulse = write(dir.path(), "p.toml", &format!("kind = \"pulse\"\n{base}[run]\nround_trips = 6\nsnapshots = 3\n"));
    let out = dir.path().join("p");
    let o = run(&["pulse", "--config", &pulse, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().filter(|l| !l.starts_with('#')).count(), 7);
    let pgm = std::fs::read(out.join("snapshots/tau_0003.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));

    let scan = write(dir.path(), "s.toml", &format!("kind = \"scan\"\n{base}[loss]\nreflectivity = 0.7\n"));
    let out = dir.path().join("s");
    let o = run(&["scan", "--config", &scan, "--out", out.to_str().unwrap(), "--parallel", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("max_full_field_residual"), "{summary}");
}

#[test]
fn mask_verb_reads_a_raster() {
    let dir = tempfile::tempdir().unwrap();
    let n = 256;
    let mut pgm = format!("P2\n{n} {n}\n1\n");
    for r in 0..n {
        for c in 0..n {
            let (x, y) = (c as i64 - 128, r as i64 - 128);
            pgm.push_str(if x * x + y * y <= 4 { "1 " } else { "0 " });
        }
        pgm.push('\n');
    }
    let mask = write(dir.path(), "m.pgm", &pgm);
    let cfg = write(
        dir.path(),
        "m.toml",
        &format!("kind = \"mask\"\n[grid]\nn = 256\n[beam]\nchannels = 20.0\n[oracle]\nmask = \"{mask}\"\n[run]\nround_trips = 3\n"),
    );
    let out = dir.path().join("m");
    let o = run(&["mask", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("oracle_regions = 1"), "{summary}");
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "kind = \"pulse\"\n[grid]\nnn = 3\n");
    let out = dir.path().join("bad");
    let o = run(&["pulse", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&o);
    assert_eq!(rec["kind"], "config");
    assert!(rec["message"].as_str().unwrap().contains("line 3"), "{rec}");
    assert!(out.join("error.json").exists());

    let o = run(&["scan", "--preset", "fig2a"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["pulse", "--preset", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_and_io_errors_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        "kind = \"scan\"\n[grid]\nn = 256\n[beam]\nchannels = 20.0\n[loss]\nreflectivity = 0.7\n[run]\nmax_iterations = 1\n",
    );
    let o = run(&["scan", "--config", &cfg, "--out", dir.path().join("s").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_record(&o)["kind"], "numerical");

    let o = run(&["pulse", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_record(&o)["kind"], "io");
}

#[test]
fn dumped_manifest_is_a_fixed_point() {
    let a = run(&["scan", "--preset", "fig6", "--dump-manifest"]);
    assert!(a.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.toml", &String::from_utf8(a.stdout.clone()).unwrap());
    let b = run(&["scan", "--config", &cfg, "--dump-manifest"]);
    assert_eq!(a.stdout, b.stdout);
}
