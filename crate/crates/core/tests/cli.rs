use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use qpat::io::fld::{read_field, write_field};
use qpat::{DiscGrid, Field};
use tempfile::TempDir;

fn qpat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpat"))
        .args(args)
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn phantom(dir: &Path, preset: &str, n: usize) {
    let out = qpat(&["phantom", "--preset", preset, "--n", &n.to_string(), "--out", s(dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn forward(input: &Path, out_dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["forward", "--input", s(input), "--out", s(out_dir)];
    args.extend_from_slice(extra);
    qpat(&args)
}

#[test]
fn missing_out_is_a_usage_error() {
    let out = qpat(&["phantom"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage"));
}

#[test]
fn discontinuous_phantom_takes_three_values() {
    let t = TempDir::new().unwrap();
    phantom(t.path(), "discontinuous-A", 129);
    let d = read_field(&t.path().join("D.fld")).unwrap();
    assert!(d.iter_valid().all(|(_, v)| [0.2, 0.1, 0.35].contains(&v)));
    assert!(t.path().join("mu.fld").is_file());
}

#[test]
fn forward_is_deterministic_and_records_its_inputs() {
    let t = TempDir::new().unwrap();
    let ph = t.path().join("ph");
    phantom(&ph, "smooth-A", 129);
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for dir in [&a, &b] {
        assert_eq!(code(&forward(&ph, dir, &["--noise", "0", "--seed", "1"])), 0);
    }
    for name in ["H1.fld", "H2.fld", "H3.fld", "manifest.txt"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let manifest = fs::read_to_string(a.join("manifest.txt")).unwrap();
    for (k, peak) in [4.0 * std::f64::consts::PI / 9.0, std::f64::consts::FRAC_PI_2, 5.0 * std::f64::consts::PI / 9.0]
        .iter()
        .enumerate()
    {
        assert!(manifest.contains(&format!("illumination_{}_peak = {peak}", k + 1)), "{manifest}");
        assert!(manifest.contains(&format!("illumination_{}_std = 0.3", k + 1)));
    }
    assert!(manifest.contains("meas_n = 64"));
}

#[test]
fn inverse_crime_guard() {
    let t = TempDir::new().unwrap();
    let ph = t.path().join("ph");
    phantom(&ph, "homogeneous", 65);
    let out = forward(&ph, &t.path().join("x"), &["--meas-n", "256", "--fine-n", "256"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn end_to_end_smooth_phantom() {
    let t = TempDir::new().unwrap();
    let (ph, data, rec) = (t.path().join("ph"), t.path().join("data"), t.path().join("rec"));
    phantom(&ph, "smooth-A", 257);
    assert_eq!(code(&forward(&ph, &data, &[])), 0);
    let out = qpat(&["recon", "--input", s(&data), "--out", s(&rec)]);
    assert_eq!(code(&out), 0);
    for name in ["D_rec.fld", "mu_rec.fld", "sigma.fld", "q.fld", "mask.fld", "diagnostics.txt"] {
        assert!(rec.join(name).is_file(), "{name}");
    }
    let out = qpat(&["error", "--recon-dir", s(&rec), "--truth-dir", s(&ph), "--resample"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for line in text.lines() {
        let (_, v) = line.split_once('=').unwrap();
        assert!(v.parse::<f64>().unwrap() <= 0.10, "{text}");
    }
    // Without --resample the grids must match.
    let out = qpat(&["error", "--recon-dir", s(&rec), "--truth-dir", s(&ph)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn homogeneous_recon_reports_q_near_ratio() {
    let t = TempDir::new().unwrap();
    let (ph, data, rec) = (t.path().join("ph"), t.path().join("data"), t.path().join("rec"));
    phantom(&ph, "homogeneous", 257);
    assert_eq!(code(&forward(&ph, &data, &[])), 0);
    let out = qpat(&["recon", "--input", s(&data), "--out", s(&rec)]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(rec.join("diagnostics.txt")).unwrap();
    let q: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("q_mean="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((q / 100.0 - 1.0).abs() < 0.05, "{q}");
}

#[test]
fn recon_needs_every_data_file() {
    let t = TempDir::new().unwrap();
    let (ph, data) = (t.path().join("ph"), t.path().join("data"));
    phantom(&ph, "homogeneous", 65);
    assert_eq!(code(&forward(&ph, &data, &[])), 0);
    fs::remove_file(data.join("H2.fld")).unwrap();
    let out = qpat(&["recon", "--input", s(&data), "--out", s(&t.path().join("rec"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn error_report_format() {
    let t = TempDir::new().unwrap();
    let g = Arc::new(DiscGrid::new(33, 1.0).unwrap());
    let truth = Field::from_fn(&g, |x, y| 1.0 + x * x + y);
    let scaled = truth.map(|v| 1.05 * v);
    let (tp, rp) = (t.path().join("t.fld"), t.path().join("r.fld"));
    write_field(&tp, &truth).unwrap();
    write_field(&rp, &scaled).unwrap();
    let out = qpat(&["error", "--recon", s(&tp), "--truth", s(&tp)]);
    assert_eq!(stdout(&out).trim(), "err_D=0.000000");
    let out = qpat(&["error", "--recon", s(&rp), "--truth", s(&tp), "--region", "all"]);
    assert_eq!(stdout(&out).trim(), "err_D=0.050000");
}

#[test]
fn stability_table() {
    let out = qpat(&["stability"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,gamma,alpha,beta,r_bound");
    let last_gamma = |lines: &[&str]| -> f64 { lines[lines.len() - 2].split(',').nth(1).unwrap().parse().unwrap() };
    assert!((last_gamma(&lines) - 0.5).abs() < 1e-6);
    assert!(lines.last().unwrap().starts_with("monotone=PASS"));

    let out = qpat(&["stability", "--theta", "0.99"]);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!((last_gamma(&lines) - 0.01).abs() < 1e-6);

    assert_eq!(code(&qpat(&["stability", "--lambda0", "1.0"])), 2);
}

#[test]
fn config_file_supplies_options() {
    let t = TempDir::new().unwrap();
    let cfg = t.path().join("run.cfg");
    fs::write(&cfg, "theta = 0.9\nrows = 3\n").unwrap();
    let out = qpat(&["stability", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().count(), 5);
    // Flags override the file.
    let out = qpat(&["stability", "--config", s(&cfg), "--rows", "4"]);
    assert_eq!(stdout(&out).lines().count(), 6);

    fs::write(&cfg, "thetta = 0.9\n").unwrap();
    assert_eq!(code(&qpat(&["stability", "--config", s(&cfg)])), 2);
    assert_eq!(code(&qpat(&["stability", "--config", s(&t.path().join("none.cfg"))])), 2);
}
