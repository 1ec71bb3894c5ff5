use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spectra"));
    c.env_remove("SPECTRA_SEED");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_COVERAGE: &str = r#"{
  "schema": 1,
  "spec": {"family": "GaussianSigma", "d": 4, "sigma_factor": {"diag": [2.0, 1.0, 0.5, 0.25]}},
  "n": 100, "d": 4, "trials": 40, "master_seed": 3,
  "theorems": ["gaussian_low_dim", "subgaussian_low_dim"],
  "t_grid": [1.0, 2.0]
}"#;

#[test]
fn validate_sandwich_paths() {
    let o = run(&["validate-sandwich", "--instances", "300", "--max-dim", "24"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("ostrowski sandwich"));
    let o = run(&["validate-sandwich", "--max-dim", "1", "--instances", "50"]);
    assert_eq!(code(&o), 0);
    let o = run(&["validate-sandwich", "--instances", "5", "--inject-violation"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn help_lists_flags_for_every_subcommand() {
    let expected: &[(&str, &[&str])] = &[
        ("validate-sandwich", &["--instances", "--max-dim", "--seed", "--inject-violation", "--workers"]),
        ("coverage", &["--out", "--seed", "--workers"]),
        ("sweep", &["--out", "--seed", "--workers"]),
        ("incoherence", &["--out", "--seed", "--workers"]),
        ("compare", &["--out", "--seed", "--workers"]),
        ("calibrate", &["--out", "--seed", "--workers"]),
    ];
    for (sub, flags) in expected {
        let o = run(&[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        let text = stdout(&o);
        for f in *flags {
            assert!(text.contains(f), "{sub} --help is missing {f}");
        }
    }
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn coverage_smoke_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("smoke");
    let cfg = configs().join("coverage_smoke.json");
    let start = std::time::Instant::now();
    let o = run(&["coverage", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert!(stdout(&o).contains("empirical_failure"));
    for f in ["summary.csv", "diagnostics.csv", "intervals.csv", "summary.json", "manifest.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("theorem,t,theoretical_failure,empirical_failure,wilson_halfwidth,trials\n"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 1);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["outputs"].as_array().unwrap().len() >= 4);
}

#[test]
fn coverage_is_byte_identical_across_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_COVERAGE);
    let mut bodies = Vec::new();
    let mut hashes = Vec::new();
    for w in ["1", "3", "8"] {
        let out = tmp.path().join(format!("w{w}"));
        let o = run(&["coverage", &cfg, "--out", out.to_str().unwrap(), "--workers", w]);
        assert_eq!(code(&o), 0);
        let body: Vec<String> = ["summary.csv", "diagnostics.csv", "intervals.csv", "summary.json"]
            .iter()
            .map(|f| fs::read_to_string(out.join(f)).unwrap())
            .collect();
        bodies.push(body);
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        hashes.push(m["config_hash"].as_str().unwrap().to_string());
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn seed_override_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_COVERAGE);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&run(&["coverage", &cfg, "--out", a.to_str().unwrap()])), 0);
    let o = bin()
        .args(["coverage", &cfg, "--out", b.to_str().unwrap()])
        .env("SPECTRA_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let ma: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let mb: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(mb["master_seed"], 99);
    assert_ne!(ma["config_hash"], mb["config_hash"]);
    assert_ne!(
        fs::read_to_string(a.join("diagnostics.csv")).unwrap(),
        fs::read_to_string(b.join("diagnostics.csv")).unwrap()
    );
}

#[test]
fn config_errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(code(&run(&["coverage", "/definitely/missing.json", "--out", out])), 64);
    let broken = write_config(tmp.path(), "broken.json", "{ not json");
    assert_eq!(code(&run(&["coverage", &broken, "--out", out])), 64);
    let no_schema = write_config(tmp.path(), "ns.json", &SMALL_COVERAGE.replace("\"schema\": 1,", ""));
    assert_eq!(code(&run(&["coverage", &no_schema, "--out", out])), 64);
    let unknown = write_config(tmp.path(), "u.json", &SMALL_COVERAGE.replace("\"n\": 100", "\"n\": 100, \"bogus\": 1"));
    assert_eq!(code(&run(&["coverage", &unknown, "--out", out])), 64);
    let regime = write_config(
        tmp.path(),
        "r.json",
        &SMALL_COVERAGE.replace("\"n\": 100", "\"n\": 2").replace("\"gaussian_low_dim\", ", ""),
    );
    assert_eq!(code(&run(&["coverage", &regime, "--out", out])), 65);
    let cal = write_config(
        tmp.path(),
        "cal.json",
        r#"{"schema": 1, "theorem": "gaussian_low_dim", "target_coverage": 0.9,
            "points": [{"spec": {"family": "GaussianSigma", "d": 2, "sigma_factor": {"diag": [1.0, 1.0]}}, "n": 20}],
            "t": 1.0, "trials": 10, "master_seed": 1}"#,
    );
    assert_eq!(code(&run(&["calibrate", &cal, "--out", out])), 65);
}

#[test]
fn sweep_incoherence_compare_calibrate_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = write_config(
        tmp.path(),
        "sweep.json",
        r#"{"schema": 1, "spec": {"family": "SphereIsotropic", "d": 8}, "axis": "d",
            "values": [100, 400, 1600, 6400], "fixed": 8, "trials": 40, "master_seed": 2}"#,
    );
    let out = tmp.path().join("sweep");
    assert_eq!(code(&run(&["sweep", &sweep, "--out", out.to_str().unwrap()])), 0);
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("rate_fit.json")).unwrap()).unwrap();
    let slope = fit["slope"].as_f64().unwrap();
    assert!((-0.7..=-0.3).contains(&slope), "{slope}");

    let out = tmp.path().join("inc");
    let cfg = configs().join("incoherence_sphere.json");
    assert_eq!(code(&run(&["incoherence", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let est: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("incoherence.json")).unwrap()).unwrap();
    assert!(est["empirical_m"].as_f64().unwrap() > 0.0);
    assert_eq!(est["d"], 2000);
    assert_eq!(est["n"], 50);

    let out = tmp.path().join("cmp");
    let cfg = configs().join("compare_decay.json");
    let o = run(&["compare", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("uniform lower bound vacuous for every index >="));
    let csv = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| l.ends_with(",true")));

    let cal = write_config(
        tmp.path(),
        "cal.json",
        r#"{"schema": 1, "theorem": "subgaussian_low_dim", "target_coverage": 0.9,
            "points": [{"spec": {"family": "SubgaussianEntries", "d": 4, "entry_law": "Rademacher"}, "n": 60},
                       {"spec": {"family": "SubgaussianEntries", "d": 8, "entry_law": "UniformScaled"}, "n": 120}],
            "t": 1.0, "trials": 100, "master_seed": 5}"#,
    );
    let out = tmp.path().join("cal");
    assert_eq!(code(&run(&["calibrate", &cal, "--out", out.to_str().unwrap()])), 0);
    let c: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("calibration.json")).unwrap()).unwrap();
    assert_eq!(c["constant"], "subgaussian_low_dim");
    assert!(c["value"].as_f64().unwrap() > 0.0);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn shipped_configs_parse() {
    use spectra_core::montecarlo::{CalibrationGrid, CompareConfig, ExperimentConfig, SweepConfig};
    let mut seen = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["schema"], 1, "{}", path.display());
        let obj = v.as_object_mut().unwrap();
        obj.remove("schema");
        obj.remove("output_path");
        let name = path.file_name().unwrap().to_str().unwrap();
        let parsed = if name.starts_with("coverage") {
            serde_json::from_value::<ExperimentConfig>(v).map(|c| c.validate().and_then(|_| c.resolved_theorems()).unwrap()).is_ok()
        } else if name.starts_with("sweep") {
            serde_json::from_value::<SweepConfig>(v).is_ok()
        } else if name.starts_with("compare") {
            serde_json::from_value::<CompareConfig>(v).is_ok()
        } else if name.starts_with("calibrate") {
            serde_json::from_value::<CalibrationGrid>(v).is_ok()
        } else {
            name.starts_with("incoherence")
        };
        assert!(parsed, "{name}");
        seen += 1;
    }
    assert!(seen >= 7);
}
