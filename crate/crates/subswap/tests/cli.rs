use std::path::Path;
use std::process::Command;
use std::time::Instant;

use subswap::commands::{self, cmd_bounds, cmd_mse, cmd_oracle, cmd_threshold};
use subswap::config::{ArraySpec, CompressorSpec, ExperimentConfig, SnrGrid};
use subswap::manifest::RunManifest;
use subswap::output::{read_csv, BOUNDS_COLUMNS, MSE_COLUMNS};
use subswap::sweep;
use subswap_core::bounds::{mc_event_probability, Event};
use subswap_core::estimation::{mse_sweep, TrialRunner};

const BIN: &str = env!("CARGO_BIN_EXE_subswap");

/// n=16 mean scenario with a dense and a co-prime(5,2) array.
fn small_mean() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{
          "schema_version": 1, "model": "mean", "n": 16,
          "thetas": [0.0, 0.19634954084936207],
          "alpha": [[1, 0], [1, 0]],
          "snapshots": 1,
          "snr_grid_db": [-10, 0, 10],
          "arrays": [
            {"label": "dense", "compressor": {"kind": "identity"}},
            {"label": "coprime", "compressor": {"kind": "coprime", "m1": 5, "m2": 2}}
          ],
          "seed": 9,
          "bounds": {"events": ["F", "G"], "mc_trials": 200},
          "mse": {"trials": 6}
        }"#,
    )
    .unwrap()
}

fn small_cov() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset("paper-cov").unwrap();
    cfg.n = 16;
    cfg.thetas = vec![0.0, 0.2];
    cfg.snapshots = 8;
    cfg.snr_grid_db = SnrGrid::List(vec![-5.0, 5.0]);
    cfg.arrays[0].label = "dense-16".into();
    cfg.arrays[1] = ArraySpec {
        label: "coprime-8".into(),
        compressor: CompressorSpec::Coprime { m1: 5, m2: 2 },
    };
    cfg.mse.trials = 4;
    cfg.validate().unwrap();
    cfg
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cfg = small_mean();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        cmd_bounds(&cfg, dir).unwrap();
        cmd_mse(&cfg, dir).unwrap();
    }
    for f in [commands::BOUNDS_FILE, commands::MSE_FILE, commands::ESTIMATES_FILE, commands::CONFIG_FILE] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn manifest_lists_every_output_with_its_digest() {
    let cfg = small_mean();
    let dir = tempfile::tempdir().unwrap();
    let (m, _) = cmd_mse(&cfg, dir.path()).unwrap();
    assert_eq!(m, RunManifest::read(dir.path(), "mse").unwrap());
    assert_eq!(m.config_sha256, cfg.sha256());
    assert_eq!(m.master_seed, 9);
    let names: Vec<_> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(names, ["config.json", "mse.csv", "estimates.csv"]);
    assert!(m.files_intact(dir.path()));
    // The hash is the digest of the config written alongside the outputs.
    let written = ExperimentConfig::load(&dir.path().join("config.json")).unwrap();
    assert_eq!(written.sha256(), m.config_sha256);
    assert_eq!(m.files[0].sha256, m.config_sha256);

    std::fs::write(dir.path().join("mse.csv"), "tampered").unwrap();
    assert!(!m.files_intact(dir.path()));
}

#[test]
fn bounds_has_one_row_per_snr_event_array() {
    let cfg = small_mean();
    let dir = tempfile::tempdir().unwrap();
    cmd_bounds(&cfg, dir.path()).unwrap();
    let rows = read_csv(&dir.path().join("bounds.csv"), &BOUNDS_COLUMNS).unwrap();
    assert_eq!(rows.len(), 3 * 2 * 2);
    for r in &rows {
        let p: f64 = r[5].parse().unwrap();
        let mc: f64 = r[6].parse().unwrap();
        assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&mc));
        assert_eq!(&r[4], if &r[0] == "dense" { "false" } else { "true" });
    }
}

#[test]
fn oracle_fills_mc_columns_by_default() {
    let mut cfg = small_cov();
    cfg.bounds.mc_trials = 0;
    let dir = tempfile::tempdir().unwrap();
    let m = cmd_oracle(&cfg, dir.path()).unwrap();
    assert_eq!(m.command, "oracle");
    let rows = read_csv(&dir.path().join("oracle.csv"), &BOUNDS_COLUMNS).unwrap();
    assert_eq!(rows.len(), 2 * 2);
    assert!(rows.iter().all(|r| !r[6].is_empty() && !r[7].is_empty()));
}

#[test]
fn parallel_sweeps_match_sequential() {
    for cfg in [small_mean(), small_cov()] {
        for (_, sc) in cfg.scenarios().unwrap() {
            let seq = mse_sweep(&sc).unwrap();
            let par = sweep::mse_curve(&TrialRunner::new(&sc).unwrap()).unwrap();
            assert_eq!(seq, par);

            let model = sc.model_at(0.0).unwrap();
            let psi = Some(&sc.compressor);
            for e in [Event::F, Event::G] {
                let a = mc_event_probability(&model, psi, sc.snapshots, e, 500, 3).unwrap();
                let b = sweep::mc_event_probability(&model, psi, sc.snapshots, e, 500, 3).unwrap();
                assert_eq!(a, b);
            }
        }
    }
}

#[test]
fn mse_table_reports_method_of_intervals() {
    let cfg = small_mean();
    let dir = tempfile::tempdir().unwrap();
    let (_, tables) = cmd_mse(&cfg, dir.path()).unwrap();
    for t in &tables {
        for i in 0..t.snr_db.len() {
            let p = t.pss_bound[i];
            let want = p * std::f64::consts::PI.powi(2) / 12.0 + (1.0 - p) * t.crb[i];
            assert!((t.sigma_t[i] - want).abs() <= 1e-15 * want);
        }
    }
    let rows = read_csv(&dir.path().join("mse.csv"), &MSE_COLUMNS).unwrap();
    assert_eq!(rows.len(), 6);
}

#[test]
fn threshold_with_identical_arrays_has_zero_shift() {
    let mut cfg = small_cov();
    cfg.arrays[1] = ArraySpec {
        label: "dense-again".into(),
        compressor: CompressorSpec::Identity,
    };
    cfg.snr_grid_db = SnrGrid::List(vec![-30.0, -20.0, -10.0, 0.0, 10.0]);
    cfg.mse.trials = 10;
    let dir = tempfile::tempdir().unwrap();
    let (_, out, reused) = cmd_threshold(&cfg, dir.path()).unwrap();
    assert!(!reused);
    assert_eq!(out.report.predicted_delta_db, 0.0);
    assert!(out.report.delta_db.abs() < 10.0);
    assert_eq!(out.report.delta_db, 0.0);

    // A second run reads the sweep back instead of recomputing it.
    let (m, again, reused) = cmd_threshold(&cfg, dir.path()).unwrap();
    assert!(reused);
    assert_eq!(again, out);
    assert!(m.files.iter().any(|f| f.path == "threshold.json"));
}

#[test]
fn predicted_shift_follows_compression_ratio() {
    let pred = |name: &str| {
        let cfg = ExperimentConfig::preset(name).unwrap();
        let sc = cfg.scenarios().unwrap();
        10.0 * (sc[0].1.m() as f64 / sc[1].1.m() as f64).log10()
    };
    assert!((pred("paper-cov") - 4.771).abs() < 1e-3);
    assert!((pred("paper-mean") - 8.270).abs() < 1e-3);
}

#[test]
fn no_threshold_in_range_is_an_error() {
    let mut cfg = small_mean();
    // Nothing sits within a millionth of the CRB.
    cfg.threshold.multiplier = 1e-6;
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_threshold(&cfg, dir.path()).unwrap_err();
    assert!(format!("{err:#}").contains("no threshold in range"), "{err:#}");
}

#[test]
fn cli_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_slice(&small_mean().canonical_json()).unwrap();
    v["snr_grid_db"] = serde_json::json!([]);
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, v.to_string()).unwrap();
    v["snr_grid_db"] = serde_json::json!([0]);
    v["unexpected"] = serde_json::json!(1);
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, v.to_string()).unwrap();

    for (cfg, msg) in [(&empty, "empty"), (&unknown, "unknown field")] {
        let out = Command::new(BIN)
            .args(["bounds", "--config"])
            .arg(cfg)
            .arg("--out")
            .arg(dir.path().join("out"))
            .output()
            .unwrap();
        assert!(!out.status.success());
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(msg), "{err}");
    }
    assert!(!dir.path().join("out").exists(), "nothing is written before validation");
}

#[test]
fn cli_smoke_single_trial_under_ten_seconds() {
    let dir = tempfile::tempdir().unwrap();
    for preset in ["paper-mean", "paper-cov"] {
        let out_dir = dir.path().join(preset);
        let t0 = Instant::now();
        let out = Command::new(BIN)
            .args(["mse", "--preset", preset, "--trials", "1", "--seed", "5"])
            .env("SUBSWAP_OUT_DIR", &out_dir)
            .output()
            .unwrap();
        let secs = t0.elapsed().as_secs_f64();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(secs < 10.0, "{preset} took {secs:.1} s");
        let m = RunManifest::read(&out_dir, "mse").unwrap();
        assert_eq!(m.master_seed, 5);
        assert!(m.files_intact(&out_dir));
    }
}

#[test]
fn out_dir_precedence() {
    let mut cfg = small_mean();
    let env = Some("from-env".into());
    assert_eq!(commands::resolve_out_dir(None, &cfg, None), Path::new("subswap-out"));
    assert_eq!(commands::resolve_out_dir(None, &cfg, env.clone()), Path::new("from-env"));
    cfg.output_dir = Some("from-config".into());
    assert_eq!(commands::resolve_out_dir(None, &cfg, env.clone()), Path::new("from-config"));
    assert_eq!(
        commands::resolve_out_dir(Some("flag".into()), &cfg, env),
        Path::new("flag")
    );
}
