use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heatpump"))
}

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"))
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Data rows of a CSV as floats, skipping metadata, header and non-numeric cells.
fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

fn header(csv: &str) -> Vec<String> {
    csv.lines()
        .find(|l| !l.starts_with('#'))
        .unwrap()
        .split(',')
        .map(String::from)
        .collect()
}

fn with_params(base: &str, edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(bundled(base)).unwrap()).unwrap();
    edit(&mut v);
    v.to_string()
}

#[test]
fn malformed_config_exits_2_and_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = with_params("fig1", |v| {
        v["params"]["omega_bb"] = 1.0.into();
    });
    let path = write_config(dir.path(), "bad.json", &text);
    let o = run(&["cycle"], &path);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("omega_bb"), "{}", stderr(&o));

    let path = write_config(dir.path(), "syntax.json", "{ not json");
    assert_eq!(run(&["spectrum"], &path).status.code(), Some(2));

    let o = bin().arg("cycle").arg("--config").arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unstable_parameters_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = with_params("fig1", |v| {
        v["params"]["g"] = 900.0.into();
    });
    let path = write_config(dir.path(), "unstable.json", &text);
    let o = run(&["spectrum"], &path);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn cycle_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = bin()
            .args(["cycle", "--config"])
            .arg(bundled("fig1"))
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(
        header(&text),
        ["t", "N_a", "N_b", "N_c", "N_A", "N_B", "delta", "omega0_active", "stroke_index"]
    );
    assert!(text.contains("# fingerprint: "));
    assert!(text.contains("# marker: "));
    assert!(dir.path().join("a.report.json").exists());
    // Twelve significant digits in every numeric cell.
    let first = text.lines().find(|l| l.starts_with("0.") || l.starts_with("1.")).unwrap();
    let mantissa = first.split(',').next().unwrap().split('e').next().unwrap();
    assert_eq!(mantissa.len(), 13);
}

#[test]
fn cycle_with_several_configs_needs_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["cycle", "--jobs", "2", "--config"])
        .arg(bundled("fig1"))
        .arg("--config")
        .arg(bundled("fig2"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = bin()
        .args(["cycle", "--jobs", "2", "--config"])
        .arg(bundled("fig1"))
        .arg("--config")
        .arg(bundled("fig2"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    for stem in ["fig1", "fig2"] {
        assert!(dir.path().join(format!("{stem}.csv")).exists());
        assert!(dir.path().join(format!("{stem}.report.json")).exists());
    }
    let fig2 = std::fs::read_to_string(dir.path().join("fig2.csv")).unwrap();
    assert!(header(&fig2).contains(&"N_d".to_string()));
}

#[test]
fn spectrum_without_coupling_is_bare() {
    let dir = tempfile::tempdir().unwrap();
    let text = with_params("fig1", |v| {
        v["params"]["g"] = 0.0.into();
        v["spectrum"] = serde_json::json!({"from": -3000.0, "to": -100.0, "samples": 30});
    });
    let path = write_config(dir.path(), "g0.json", &text);
    let o = run(&["spectrum"], &path);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert_eq!(header(&csv), ["delta", "omega_A", "omega_B", "u"]);
    let data = rows(&csv);
    assert_eq!(data.len(), 30);
    for r in data {
        let (delta, upper, lower, u) = (r[0], r[1], r[2], r[3]);
        assert_eq!(upper.max(lower), (-delta).max(2000.0));
        assert_eq!(upper.min(lower), (-delta).min(2000.0));
        assert!(u == 0.0 || u == 1.0);
    }
}

#[test]
fn spectrum_empty_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = with_params("fig1", |v| {
        v["spectrum"] = serde_json::json!({"from": -100.0, "to": -3000.0, "samples": 30});
    });
    let path = write_config(dir.path(), "empty.json", &text);
    let o = run(&["spectrum"], &path);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
}

#[test]
fn limit_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let text = with_params("fig1", |v| {
        v["limit"] = serde_json::json!({"sweep": "eta", "from": 0.0, "to": 1.0, "samples": 11, "r": 1.0});
    });
    let path = write_config(dir.path(), "eta.json", &text);
    let o = run(&["limit"], &path);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert_eq!(header(&csv), ["swept_eta", "N_infinity", "eta", "r", "status"]);
    let data = rows(&csv);
    assert_eq!(data.len(), 11);
    // eta = 0 with r = 1 never exchanges heat.
    assert!(data[0][1].is_nan());
    assert!(csv.contains("degenerate"));
    for r in &data[1..] {
        assert!((r[1] - 0.5).abs() < 1e-9, "with r = 1 the limit is n_a");
    }

    let text = with_params("fig1", |v| {
        v["limit"] = serde_json::json!({"sweep": "tau", "from": 0.1, "to": 2.0, "samples": 5});
    });
    let path = write_config(dir.path(), "tau.json", &text);
    let o = run(&["limit"], &path);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = rows(&stdout(&o));
    for r in &data {
        assert!((r[3] - (-r[0]).exp()).abs() < 1e-11);
    }
    for w in data.windows(2) {
        assert!(w[1][1] > w[0][1], "longer cycles cool less");
    }
}

#[test]
fn validate_smalltest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = bin()
        .args(["validate", "--config"])
        .arg(bundled("smalltest"))
        .arg("--out")
        .arg(&report)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("PASS"), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["verdict"], "PASS");
    assert!(v["deviation"].as_f64().unwrap() < 5e-2);
    assert!(v["max_leakage"].as_f64().unwrap() < 1e-3);
}

#[test]
fn validate_undersized_cutoffs_is_inconclusive() {
    let o = run(&["validate"], &bundled("tinycutoff"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("INCONCLUSIVE"), "{}", stdout(&o));
}

#[test]
fn validate_swap_agrees_tightly() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("swap.json");
    let o = bin()
        .args(["validate", "--config"])
        .arg(bundled("swaptest"))
        .arg("--out")
        .arg(&report)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert!(v["deviation"].as_f64().unwrap() < 1e-4);
}

#[test]
fn validate_rejects_engine_flag() {
    let o = bin()
        .args(["validate", "--engine", "fock", "--config"])
        .arg(bundled("smalltest"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fock_cycle_via_engine_flag() {
    let dir = tempfile::tempdir().unwrap();
    let text = with_params("swaptest", |_| {});
    let path = write_config(dir.path(), "swap.json", &text);
    let out = dir.path().join("swap.csv");
    let o = bin()
        .args(["cycle", "--engine", "fock", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out).unwrap();
    assert!(csv.contains("# engine: fock"));
    let last = rows(&csv).pop().unwrap();
    // Full swap: b ends with the target's 0.5 quanta.
    assert!((last[2] - 0.5).abs() < 1e-4, "{last:?}");
    assert!(last[3].abs() < 1e-4);
}

#[test]
fn zero_jobs_is_a_usage_error() {
    let o = run(&["spectrum", "--jobs", "0"], &bundled("fig1"));
    assert_eq!(o.status.code(), Some(2));
}
