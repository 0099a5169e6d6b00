use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nanonmr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanonmr"))
        .args(args)
        .env_remove("NANONMR_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = nanonmr(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_curve(path: &Path) -> Vec<(f64, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&["simulate", "--seed", "7", "--out", p(d)]);
    }
    for f in ["spectrum.csv", "timeseries.csv", "peaks.json", "spectrum.svg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn default_spectrum_has_five_expected_peaks() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--out", p(dir.path())]);
    let peaks = json(&dir.path().join("peaks.json"));
    let mut centers: Vec<f64> = peaks.as_array().unwrap().iter().map(|p| p["center"].as_f64().unwrap()).collect();
    centers.sort_by(f64::total_cmp);
    let expected = [-33.6, -15.1, 0.0, 15.1, 33.6];
    assert_eq!(centers.len(), 5);
    for (c, e) in centers.iter().zip(expected) {
        assert!((c - e).abs() <= 4.0, "{centers:?}");
    }
}

#[test]
fn removing_hdo_lowers_the_central_line() {
    let dir = tempfile::tempdir().unwrap();
    let central = |p_val: &str| {
        let out = dir.path().join(p_val);
        ok(&["simulate", "--p", p_val, "--out", p(&out)]);
        let curve = read_curve(&out.join("spectrum.csv"));
        let max = curve.iter().map(|c| c.1).fold(f64::MIN, f64::max);
        curve.iter().find(|c| c.0 == 0.0).unwrap().1 / max
    };
    assert!(central("0") < central("0.333"));
}

#[test]
fn truncated_spectrum_is_a_precondition_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("short.csv");
    std::fs::write(&f, "frequency_khz,intensity\n-1,0.1\n0,1\n1,0.1\n").unwrap();
    let out = nanonmr(&["fit", "--input", p(&f), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("precondition"), "{err}");
}

#[test]
fn malformed_row_error_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.csv");
    std::fs::write(&f, "frequency_khz,intensity\n-1,0.1\n0,1\n1,oops\n2,0.0\n").unwrap();
    let out = nanonmr(&["fit", "--input", p(&f), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn fit_recovers_simulated_orientation() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--out", p(&sim)]);
    ok(&["fit", "--input", p(&sim.join("spectrum.csv")), "--out", p(dir.path())]);
    let r = json(&dir.path().join("fit.json"));
    let (a, b) = (r["alpha"].as_f64().unwrap(), r["beta"].as_f64().unwrap());
    assert!((a - 65.0).abs() <= 2.0 && (b - 79.0).abs() <= 2.0, "α {a}, β {b}");
    assert!(dir.path().join("fit_overlay.svg").exists());
}

#[test]
fn noisy_fit_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("noisy.toml");
    std::fs::write(&cfg, "seed = 11\nnoise = 0.02\n").unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--config", p(&cfg), "--out", p(&sim)]);
    let runs: Vec<Vec<u8>> = ["f1", "f2"]
        .iter()
        .map(|d| {
            let out = dir.path().join(d);
            ok(&["fit", "--config", p(&cfg), "--input", p(&sim.join("spectrum.csv")), "--out", p(&out)]);
            std::fs::read(out.join("fit.json")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn invalid_configuration_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = nanonmr(&["simulate", "--field-gauss", "2500", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("field_gauss") && err.contains("(0, 2000]"), "{err}");

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "bond_length_angstrom = 0.1\n").unwrap();
    let out = nanonmr(&["simulate", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bond_length_angstrom"));

    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert_eq!(nanonmr(&["simulate", "--config", p(&cfg)]).status.code(), Some(2));

    assert_eq!(nanonmr(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn reconstruct_recovers_model_offsets() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--out", p(&sim)]);
    ok(&["reconstruct", "--input", p(&sim.join("timeseries.csv")), "--out", p(dir.path())]);
    let r = json(&dir.path().join("reconstruct.json"));
    let mut c: Vec<f64> = r["frequency_domain"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["center"].as_f64().unwrap())
        .collect();
    c.sort_by(f64::total_cmp);
    let expected = [-33.6, -15.1, 0.0, 15.1, 33.6];
    assert_eq!(c.len(), 5);
    for (x, e) in c.iter().zip(expected) {
        assert!((x - e).abs() <= 4.0, "{c:?}");
    }
}

#[test]
fn bond_length_from_single_dimer_spectra() {
    let dir = tempfile::tempdir().unwrap();
    let base = "p = 0\nline_broadening_khz = 3.603\n";
    let base_cfg = dir.path().join("base.toml");
    std::fs::write(&base_cfg, base).unwrap();
    let mut inputs = Vec::new();
    for theta in ["22", "90"] {
        let cfg = dir.path().join(format!("{theta}.toml"));
        std::fs::write(&cfg, format!("theta_deg = {theta}\n{base}")).unwrap();
        let out = dir.path().join(theta);
        ok(&["simulate", "--config", p(&cfg), "--out", p(&out)]);
        inputs.push(format!("{}:theta={theta}", p(&out.join("spectrum.csv"))));
    }
    let mut args = vec!["bond-length", "--config", p(&base_cfg), "--out", p(dir.path())];
    args.extend(inputs.iter().map(String::as_str));
    ok(&args);
    let d = json(&dir.path().join("bond_length.json"))["d"].as_f64().unwrap();
    assert!((d - 1.58).abs() < 0.01, "d = {d}");

    let out = nanonmr(&["bond-length", "x.csv:phi=3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn slope_from_file_and_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("res.csv");
    std::fs::write(&f, "field_gauss,frequency_khz\n100,425.77\n200,851.54\n300,1277.31\n").unwrap();
    ok(&["slope", "--input", p(&f), "--out", p(dir.path())]);
    let s = json(&dir.path().join("slope.json"))["slope"].as_f64().unwrap();
    assert!((s - 4.2577).abs() < 1e-6, "{s}");

    ok(&["slope", "--seed", "3", "--through-origin", "--out", p(dir.path())]);
    let s = json(&dir.path().join("slope.json"))["slope"].as_f64().unwrap();
    assert!((s - 4.2577).abs() < 0.05, "{s}");
}

#[test]
fn oracle_passes_and_corruption_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["oracle", "--out", p(dir.path())]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("24 of 24 cells pass"));
    let out = nanonmr(&["oracle", "--corrupt-delta", "1.1", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn correlate_period_matches_larmor() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["correlate", "--out", p(dir.path())]);
    let r = json(&dir.path().join("correlation.json"));
    let larmor = r["larmor_khz"].as_f64().unwrap();
    let period = r["period_ns"].as_f64().unwrap();
    assert!((period - 1e6 / larmor).abs() < 2.0, "period {period} ns");
}
