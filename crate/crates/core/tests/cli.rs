//! Binary-level checks: subcommand grammar, exit codes, artifact formats and
//! byte-level determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multifract"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const TENT_BERNOULLI: &str = r#"{
    "map": {"family": "tent", "slope": 2.0},
    "potential": {"kind": "bernoulli", "p": 0.3},
    "thermo": {"q_grid": {"min": -2.0, "max": 2.0, "steps": 41}},
    "seed": 7
}"#;

#[test]
fn unknown_subcommand_usage_exit_2() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage") || err.contains("usage"), "{err}");
}

#[test]
fn bad_config_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"map":{"family":"tent"},"thermo":{"t_tol":-1}}"#);
    let out = bin().args(["tq", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tq_curve_row_count_and_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tent.json", TENT_BERNOULLI);
    let csv_path = dir.path().join("curve.csv");
    let out = bin()
        .args(["tq", "--qmin", "-2", "--qmax", "2", "--steps", "41", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "q,T,converged,pb,alpha");
    assert_eq!(lines.len(), 42, "header plus 41 rows");
    let cols = lines[0].split(',').count();
    for l in &lines[1..] {
        assert_eq!(l.split(',').count(), cols, "constant column count: {l}");
    }
    // T(2) lands on the closed form
    let last = lines[41].split(',').collect::<Vec<_>>();
    let t2: f64 = last[1].parse().unwrap();
    assert!((t2 + 0.7859).abs() < 1e-3);
}

#[test]
fn spectrum_csv_dimension_and_lyapunov() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tent.json", TENT_BERNOULLI);
    for kind in ["dimension", "lyapunov"] {
        let out_path = dir.path().join(format!("{kind}.csv"));
        let out = bin()
            .args(["spectrum", kind, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(&out_path).unwrap();
        assert!(text.starts_with("q,T,alpha,DS,converged,degenerate\n"));
        if kind == "dimension" {
            // binomial spectrum: one row per grid point
            assert!(text.lines().count() > 3);
        } else {
            // constant slope: the tent Lyapunov spectrum degenerates to the
            // single point (log 2, 1)
            assert_eq!(text.lines().count(), 2);
            let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
            let lambda: f64 = row[2].parse().unwrap();
            let ds: f64 = row[3].parse().unwrap();
            assert!((lambda - 2f64.ln()).abs() < 1e-6);
            assert!((ds - 1.0).abs() < 1e-6);
            assert_eq!(row[5], "true");
        }
    }
}

#[test]
fn spectrum_measure_out_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tent.json", TENT_BERNOULLI);
    let measure_path = dir.path().join("acip.json");
    let out = bin()
        .args(["spectrum", "dimension", "--config"])
        .arg(&cfg)
        .arg("--measure-out")
        .arg(&measure_path)
        .arg("--out")
        .arg(dir.path().join("spec.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&measure_path).unwrap()).unwrap();
    let grid = v["grid"].as_u64().unwrap() as usize;
    let masses = v["masses"].as_array().unwrap();
    assert_eq!(masses.len(), grid);
    let total: f64 = masses.iter().map(|m| m.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9, "probability measure");
    // the tent acip proxy is Lebesgue
    for m in masses {
        assert!((m.as_f64().unwrap() - 1.0 / grid as f64).abs() < 1e-9);
    }
}

#[test]
fn tower_dot_matches_census() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "q39.json",
        r#"{"map": {"family": "quadratic", "lambda": 3.9}}"#,
    );
    let dot_path = dir.path().join("t.dot");
    let census_path = dir.path().join("census.csv");
    let out = bin()
        .args(["tower", "--level-cap", "8", "--config"])
        .arg(&cfg)
        .arg("--dot")
        .arg(&dot_path)
        .arg("--census")
        .arg(&census_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dot = std::fs::read_to_string(&dot_path).unwrap();
    let census = std::fs::read_to_string(&census_path).unwrap();
    let node_count = dot.matches("label=").count();
    let census_total: usize = census
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(node_count, census_total, "DOT nodes equal census total");
    for l in census.lines().skip(1) {
        let count: usize = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!(count <= 2, "unimodal census bound");
    }
}

#[test]
fn cylinders_csv_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tent.json", TENT_BERNOULLI);
    let out = bin()
        .args(["cylinders", "--depth", "4", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("depth,index,a,b,image_a,image_b,itinerary\n"));
    assert_eq!(text.lines().count(), 17, "header + 16 cylinders of P_4");
}

#[test]
fn induce_scheme_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tent.json", TENT_BERNOULLI);
    let out = bin()
        .args(["induce", "--type", "A", "--base-cylinder", "1:0", "--tau-cap", "12", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["base_cylinder"]["depth"], 1);
    let branches = v["branches"].as_array().unwrap();
    assert_eq!(branches.len(), 12, "one branch per return time up to the cap");
    assert_eq!(branches[0]["tau"], 1);
}

#[test]
fn pressure_and_pointwise_and_visits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tent.json", TENT_BERNOULLI);
    let out = bin()
        .args(["pressure", "--t", "0", "--q", "1", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["value"].as_f64().unwrap().abs() < 1e-9, "P(psi_1) = 0");

    let out = bin()
        .args(["pointwise", "--x", "0.0", "--depth", "100", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let d = v["dimension"]["d_cylinder"].as_f64().unwrap();
    assert!((d - 1.737).abs() < 1e-2);

    let out = bin()
        .args(["visits", "--x", "0.3127", "--delta", "0.4", "--n", "40", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("time\n"));
}

#[test]
fn divergent_temperature_exit_4() {
    // constant potential on a non-Collet-Eckmann-style setup is imitated by
    // requesting a q window where every word sum diverges: tent + bernoulli
    // at strongly negative q with a tight bracket cannot converge, but exit 3
    // (bracket) or 4 (divergence) are the only acceptable outcomes
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "half.json",
        r#"{
            "map": {"family": "tent", "slope": 2.0},
            "potential": {"kind": "bernoulli", "p": 0.3},
            "scheme": {"base": "1:0", "tau_cap": 12},
            "thermo": {"q_grid": {"min": -40.0, "max": -39.0, "steps": 2}},
            "seed": 7
        }"#,
    );
    let out = bin().args(["tq", "--config"]).arg(&cfg).output().unwrap();
    let code = out.status.code();
    assert!(code == Some(3) || code == Some(4), "got {code:?}");
}

#[test]
fn verify_oracles_deterministic_bytes() {
    let run = || {
        let out = bin().args(["verify-oracles", "--seed", "7"]).output().unwrap();
        (out.status.code(), out.stdout)
    };
    let (c1, b1) = run();
    let (c2, b2) = run();
    assert_eq!(c1, Some(0), "verify-oracles exits 0 when all criteria pass");
    assert_eq!(c2, Some(0));
    assert_eq!(b1, b2, "byte-identical reports for the same seed");
}

#[test]
fn outputs_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tent.json", TENT_BERNOULLI);
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = bin()
            .args(["tq", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        std::fs::read(&path).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn jobs_flag_preserves_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tent.json", TENT_BERNOULLI);
    let run = |jobs: &str| {
        let out = bin()
            .args(["tq", "--jobs", jobs, "--config"])
            .arg(&cfg)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        out.stdout
    };
    // per-chunk warm starts differ, but every solve lands within tolerance:
    // parse and compare values rather than bytes
    let a = String::from_utf8(run("1")).unwrap();
    let b = String::from_utf8(run("2")).unwrap();
    for (la, lb) in a.lines().zip(b.lines()).skip(1) {
        let ta: f64 = la.split(',').nth(1).unwrap().parse().unwrap();
        let tb: f64 = lb.split(',').nth(1).unwrap().parse().unwrap();
        assert!((ta - tb).abs() < 1e-8);
    }
}
