use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn blockade(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockade"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BLOCKADE_THREADS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

type Csv = (String, Vec<String>, Vec<Vec<String>>);

fn read_csv(path: &Path) -> Csv {
    parse_csv(&std::fs::read_to_string(path).unwrap())
}

fn parse_csv(text: &str) -> Csv {
    let mut lines = text.lines();
    let hash = lines.next().unwrap().to_string();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (hash, header, rows)
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn sweep_fixture_locates_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = blockade(&["sweep", "--config", fixture("llpb_sweep.toml").to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: Value = serde_json::from_slice(&o.stdout).unwrap();
    let (hash, header, rows) = read_csv(&dir.path().join("llpb_sweep_analytic.csv"));
    assert_eq!(hash, format!("# manifest_sha256: {}", manifest["manifest_sha256"].as_str().unwrap()));
    assert_eq!(header, ["gamma", "delta", "g2_0"]);
    assert_eq!(rows.len(), 121 * 81);
    let best = rows
        .iter()
        .map(|r| r.iter().map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .min_by(|a, b| a[2].total_cmp(&b[2]))
        .unwrap();
    assert!((best[1] - 0.009571).abs() <= 0.0005 + 1e-12, "{best:?}");
    assert!((best[0] - 1.0).abs() <= 0.0025 + 1e-12, "{best:?}");
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("llpb_sweep_analytic.json")).unwrap()).unwrap();
    assert!(summary["refined_minimum"]["value"].as_f64().unwrap() < 1e-4);
}

#[test]
fn g2tau_writes_exact_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = blockade(&["g2tau", "--config", fixture("llpb_tau.toml").to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, header, rows) = read_csv(&dir.path().join("llpb_g2tau_analytic.csv"));
    assert_eq!(header, ["tau", "g2", "stderr"]);
    assert_eq!(rows.len(), 121);
    assert!(rows.iter().all(|r| r[2].is_empty()));
    let g0: f64 = rows[0][1].parse().unwrap();
    assert!(g0 < 0.05);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("llpb_g2tau_analytic.manifest.json")).unwrap())
            .unwrap();
    for key in ["schema", "command", "engine", "build", "config", "network", "assumptions", "outputs", "timestamp"] {
        assert!(manifest.get(key).is_some(), "missing {key}");
    }
    assert!(!manifest["assumptions"].as_array().unwrap().is_empty());
}

#[test]
fn trajectory_runs_are_reproducible() {
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = write(
        cfg_dir.path(),
        "c.toml",
        "[model]\npreset = \"conventional\"\nalpha = 1.0\ndelta = 0.2\ndrive = 0.02\n\
         [engine]\nkind = \"wfmc\"\nfock = [4]\n[tau]\nstop = 2.0\nsteps = 5\n\
         [trajectory]\nn_traj = 2\nt_relax = 5.0\nt_record = 20.0\n",
    );
    let cfg = cfg.to_str().unwrap();
    let run = |seed: &str, threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = blockade(&["g2tau", "--config", cfg, "--seed", seed, "--threads", threads], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(dir.path().join("conventional_g2tau_wfmc.csv")).unwrap()
    };
    let a = run("5", "1");
    assert_eq!(a, run("5", "2"));
    assert_ne!(a, run("6", "1"));
    let (_, header, rows) = parse_csv(&a);
    assert_eq!(header, ["tau", "g2", "stderr"]);
    assert!(rows.iter().all(|r| !r[2].is_empty()));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[model]\npreset = \"llpb\"\nkappa = 2.0\n");
    let o = blockade(&["g2tau", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kappa"), "{}", stderr(&o));

    let bad = write(dir.path(), "bad2.toml", "[model]\npreset = \"upb\"\nj_prime = 0.1\n");
    let o = blockade(&["model", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.j_prime"), "{}", stderr(&o));

    let o = Command::new(env!("CARGO_BIN_EXE_blockade"))
        .args(["model", "--out"])
        .arg(dir.path())
        .env("BLOCKADE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn numerical_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "dark.toml",
        "[model]\npreset = \"custom\"\ncouplings = [[0.0, 0.0], [0.0, 0.0]]\ndetuning = [0.0, 0.0]\n\
         loss = [1.0, 1.0]\nalpha = 0.1\nsignal_site = 1\n",
    );
    let o = blockade(&["g2tau", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn compare_reports_and_gates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("conventional_tau.toml");
    let cfg = cfg.to_str().unwrap();
    for engine in ["analytic", "regression"] {
        let o = blockade(&["g2tau", "--config", cfg, "--engine", engine], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = dir.path().join("conventional_g2tau_analytic.csv");
    let r = dir.path().join("conventional_g2tau_regression.csv");
    let (a, r) = (a.to_str().unwrap(), r.to_str().unwrap());

    let o = blockade(&["compare", a, a], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("compare.json")).unwrap()).unwrap();
    assert_eq!(report["comparisons"][0]["sup_norm"].as_f64(), Some(0.0));

    let o = blockade(&["compare", a, r], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("compare.json")).unwrap()).unwrap();
    assert_eq!(report["comparisons"][0]["candidate"], "regression");
    assert!(report["comparisons"][0]["sup_norm"].as_f64().unwrap() < 0.05);

    let o = blockade(&["compare", a, r, "--tolerance", "1e-15"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    let o = blockade(&["compare", a], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spds_and_model_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = blockade(&["spds"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("llpb_spds.json")).unwrap()).unwrap();
    let z = r["refined"]["z_star"][1].as_f64().unwrap();
    assert!((z + 0.4902).abs() < 1e-3, "{z}");
    assert!((r["dyson"][0]["z"][1].as_f64().unwrap() + 0.5206).abs() < 1e-4);
    assert!(r["zeros"]["refined_pair"].is_array());

    for preset in ["llpb", "occupation", "upb", "conventional", "photonic"] {
        let cfg = write(dir.path(), "m.toml", &format!("[model]\npreset = \"{preset}\"\n"));
        let o = blockade(&["model", "--config", cfg.to_str().unwrap()], dir.path());
        assert!(o.status.success(), "{preset}: {}", stderr(&o));
        assert!(dir.path().join(format!("{preset}_model.json")).exists());
    }
}

#[test]
fn occupation_analytic_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = blockade(
        &["occupation", "--config", fixture("occupation.toml").to_str().unwrap(), "--engine", "analytic"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, header, rows) = read_csv(&dir.path().join("occupation_occupation_analytic.csv"));
    assert_eq!(header, ["F_d", "n_signal", "g2_0", "stderr"]);
    assert_eq!(rows.len(), 5);
    let n: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let f: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    for k in 1..5 {
        let expected = n[0] * (f[k] / f[0]).powi(2);
        assert!((n[k] - expected).abs() < 1e-9 * expected);
    }
}
