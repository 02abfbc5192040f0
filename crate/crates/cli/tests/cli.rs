use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use forcedmech_cli::{parse_system, SystemFile};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn forcedmech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forcedmech"))
        .args(args)
        .env_remove("FORCEDMECH_SEED")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = forcedmech(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn fluid_force_from_dissipation() {
    let f = parse_system(&fixture("fluid.ini")).unwrap();
    let expected = f.chart.parse("k*qd_q^2").unwrap();
    assert_eq!(f.force().unwrap().comps()[0], expected);
}

#[test]
fn every_fixture_parses() {
    for entry in std::fs::read_dir(fixture("")).unwrap() {
        let path = entry.unwrap().path();
        let f: SystemFile = parse_system(&path).unwrap_or_else(|e| panic!("{e}"));
        f.system(0).unwrap();
    }
}

#[test]
fn parse_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let both = write_temp(
        &dir,
        "both.ini",
        "[coordinates]\nq\n[lagrangian]\nqd_q^2/2\n[force]\nq = 1\n[dissipation]\nqd_q^2/2\n",
    );
    let out = forcedmech(&["check", "--system", both.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mutually exclusive"));

    let undeclared = write_temp(
        &dir,
        "z.ini",
        "[coordinates]\nq\n[lagrangian]\nqd_q^2/2 + z\n",
    );
    let out = forcedmech(&["derive", "--system", undeclared.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("`z`") && err.contains("line 4, column 12"),
        "{err}"
    );

    let missing = dir.path().join("absent.ini");
    assert_eq!(
        forcedmech(&["derive", "--system", missing.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn math_errors_exit_2_and_3() {
    let dir = tempfile::tempdir().unwrap();
    let singular = write_temp(
        &dir,
        "s.ini",
        "[coordinates]\nx, y\n[lagrangian]\nqd_x^2/2\n",
    );
    assert_eq!(
        forcedmech(&["derive", "--system", singular.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let noncyclic = write_temp(
        &dir,
        "n.ini",
        "[coordinates]\nx, y\n[lagrangian]\n(qd_x^2 + qd_y^2)/2 - y^2\n[reduction]\ncyclic = y\nmu = 0\n",
    );
    assert_eq!(
        forcedmech(&["reduce", "--system", noncyclic.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let undecidable = write_temp(
        &dir,
        "u.ini",
        "[coordinates]\nq\n[lagrangian]\nqd_q^2/2\n[candidates]\nX = Q: sqrt(-1 - q^2)\n",
    );
    let out = forcedmech(&["check", "--system", undecidable.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        report["candidates"][0]["forced_lagrangian_symmetry"],
        "indeterminate"
    );
}

#[test]
fn derive_oscillator_matches_classical_equations() {
    let text = run_ok(&[
        "derive",
        "--system",
        fixture("oscillator.ini").to_str().unwrap(),
    ]);
    let f = parse_system(&fixture("oscillator.ini")).unwrap();
    let p = f.chart.parse("m*qd_q").unwrap();
    let dl = f.chart.parse("-k*q").unwrap();
    assert!(text.contains(&format!("d/dt({p}) - ({dl}) = 0")), "{text}");
    assert!(text.contains("H = k*q^2/2 + p_q^2/(2*m)"), "{text}");
}

#[test]
fn check_disk_candidates() {
    let out = run_ok(&["check", "--system", fixture("disk.ini").to_str().unwrap()]);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["schema"], 1);
    let cands = report["candidates"].as_array().unwrap();
    assert_eq!(cands[0]["candidate"], "X_reversed");
    assert_eq!(cands[0]["cartan"], "false");
    assert_eq!(cands[1]["candidate"], "X");
    assert_eq!(cands[1]["cartan"], "true");
    assert_eq!(cands[1]["conservation"], "true");
}

#[test]
fn check_reports_momenta_and_g_beta() {
    let out = run_ok(&[
        "check",
        "--system",
        fixture("central_force_3d.ini").to_str().unwrap(),
    ]);
    let report: Value = serde_json::from_str(&out).unwrap();
    let action = &report["action"];
    assert_eq!(action["lagrangian_invariant"], "true");
    assert_eq!(action["g_beta"]["basis"].as_array().unwrap().len(), 3);
    for m in action["momentum"].as_array().unwrap() {
        assert_eq!(m["conserved"], "true");
    }
    let out = run_ok(&[
        "check",
        "--system",
        fixture("isotropic_drag_3d.ini").to_str().unwrap(),
    ]);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(
        report["action"]["g_beta"]["basis"]
            .as_array()
            .unwrap()
            .len(),
        0
    );
}

#[test]
fn simulate_fluid_csv_and_drift() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("fluid.csv");
    run_ok(&[
        "simulate",
        "--system",
        fixture("fluid.ini").to_str().unwrap(),
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rows.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["t", "q", "qd", "C", "E"]);
    let records: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 10_001);
    let last = &records[records.len() - 1];
    assert_eq!(last[0].parse::<f64>().unwrap(), 10.0);
    let qd = last[2].parse::<f64>().unwrap();
    assert!((qd - 1.0 / (1.0 + 0.1 * 10.0)).abs() < 1e-10);
    assert!(
        last[1]
            .split('e')
            .next()
            .unwrap()
            .replace(['-', '.'], "")
            .len()
            == 17
    );

    let summary: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("fluid.summary.json")).unwrap(),
    )
    .unwrap();
    assert!(summary["drift"]["C"]["max_rel"].as_f64().unwrap() < 1e-8);
    assert!(summary["energy_balance"]["max_residual"].as_f64().unwrap() < 1e-5);
}

#[test]
fn simulate_respects_overrides() {
    let out = run_ok(&[
        "simulate",
        "--system",
        fixture("oscillator.ini").to_str().unwrap(),
        "--h",
        "0.01",
        "--T",
        "1",
    ]);
    assert_eq!(out.lines().count(), 102);
}

#[test]
fn find_free_particle_translations() {
    let out = run_ok(&[
        "find",
        "--system",
        fixture("free_particle.ini").to_str().unwrap(),
        "--degree",
        "0",
    ]);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(
        report["fields"],
        serde_json::json!([["1", "0"], ["0", "1"]])
    );
}

#[test]
fn reduce_writes_a_loadable_system() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["central_force.ini", "polisher.ini"] {
        let out = dir.path().join(name);
        run_ok(&[
            "reduce",
            "--system",
            fixture(name).to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        let reduced = parse_system(&out).unwrap();
        assert_eq!(
            reduced.chart.dim() + 1,
            parse_system(&fixture(name)).unwrap().chart.dim()
        );
        let report: Value = serde_json::from_str(
            &std::fs::read_to_string(out.with_extension("summary.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(report["energy_consistent"], "true");
        assert!(
            report["comparison"]["max_reduced_error"].as_f64().unwrap() < 1e-8,
            "{report}"
        );
        assert!(
            report["comparison"]["max_cyclic_error"].as_f64().unwrap() < 1e-6,
            "{report}"
        );
        run_ok(&["simulate", "--system", out.to_str().unwrap(), "--T", "0.1"]);
    }
}

#[test]
fn seed_from_environment_and_flag() {
    let path = fixture("fluid.ini");
    let run = |env: Option<&str>, flag: Option<&str>| -> Value {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_forcedmech"));
        cmd.args(["check", "--system", path.to_str().unwrap()]);
        cmd.env_remove("FORCEDMECH_SEED");
        if let Some(e) = env {
            cmd.env("FORCEDMECH_SEED", e);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success());
        serde_json::from_slice(&out.stdout).unwrap()
    };
    assert_eq!(run(None, None)["seed"], 0);
    assert_eq!(run(Some("7"), None)["seed"], 7);
    assert_eq!(run(Some("7"), Some("3"))["seed"], 3);
}
