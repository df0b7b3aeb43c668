//! The four subcommands. Each writes its outputs plus `config.json` and a
//! manifest into the output directory.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use subswap_core::bounds::{swap_bound, Event, McEstimate};
use subswap_core::estimation::{
    crb_curve, method_of_intervals, threshold_snr, ArrayThreshold, MseCurve, Scenario, ThresholdReport,
    TrialRunner,
};
use subswap_core::geometry::CompressionOperator;
use subswap_core::Error as CoreError;

use crate::config::{ExperimentConfig, ThresholdCurve, DEFAULT_ORACLE_TRIALS};
use crate::manifest::{FileEntry, RunManifest};
use crate::output::{
    num, opt_num, read_csv, write_csv, BOUNDS_COLUMNS, ESTIMATE_COLUMNS, MSE_COLUMNS,
};
use crate::sweep;

pub const CONFIG_FILE: &str = "config.json";
pub const BOUNDS_FILE: &str = "bounds.csv";
pub const ORACLE_FILE: &str = "oracle.csv";
pub const MSE_FILE: &str = "mse.csv";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const THRESHOLD_FILE: &str = "threshold.json";

/// Exit status of `threshold` when the measured delta misses the tolerance.
pub const EXIT_TOLERANCE_FAIL: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Bounds,
    Mse,
    Threshold,
    Oracle,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Bounds => "bounds",
            Command::Mse => "mse",
            Command::Threshold => "threshold",
            Command::Oracle => "oracle",
        }
    }
}

/// Output directory precedence: explicit flag, config, environment, default.
pub fn resolve_out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig, env: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone())
        .or(env)
        .unwrap_or_else(|| PathBuf::from("subswap-out"))
}

/// One row of `bounds.csv` or `oracle.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub array: String,
    pub snr_db: f64,
    pub event: Event,
    pub model: &'static str,
    pub compressed: bool,
    pub probability: f64,
    pub mc: Option<McEstimate>,
}

impl BoundRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.array.clone(),
            num(self.snr_db),
            self.event.as_str().into(),
            self.model.into(),
            self.compressed.to_string(),
            num(self.probability),
            opt_num(self.mc.map(|m| m.probability)),
            opt_num(self.mc.map(|m| m.std)),
        ]
    }
}

/// Per-array MSE sweep with its reference curves.
#[derive(Clone, Debug, PartialEq)]
pub struct MseTable {
    pub label: String,
    pub m: usize,
    pub snr_db: Vec<f64>,
    pub mse: Vec<f64>,
    pub crb: Vec<f64>,
    pub sigma_t: Vec<f64>,
    pub pss_bound: Vec<f64>,
    pub trials: u64,
    pub swap_frequency: Vec<Option<f64>>,
}

impl MseTable {
    fn curve(&self, which: ThresholdCurve) -> &[f64] {
        match which {
            ThresholdCurve::Mse => &self.mse,
            ThresholdCurve::SigmaT => &self.sigma_t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOutput {
    #[serde(flatten)]
    pub report: ThresholdReport,
    pub curve: ThresholdCurve,
    pub multiplier: f64,
}

struct Run {
    command: Command,
    dir: PathBuf,
    started_unix_s: u64,
    clock: Instant,
    files: Vec<String>,
}

impl Run {
    fn start(command: Command, cfg: &ExperimentConfig, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        std::fs::write(dir.join(CONFIG_FILE), cfg.canonical_json())?;
        Ok(Run {
            command,
            dir: dir.to_path_buf(),
            started_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            clock: Instant::now(),
            files: vec![CONFIG_FILE.into()],
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn wrote(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.into());
        }
    }

    fn finish(self, cfg: &ExperimentConfig) -> Result<RunManifest> {
        let files = self
            .files
            .iter()
            .map(|f| FileEntry::of(&self.dir, f))
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.as_str().into(),
            config_sha256: cfg.sha256(),
            master_seed: cfg.seed,
            started_unix_s: self.started_unix_s,
            wall_clock_s: self.clock.elapsed().as_secs_f64(),
            files,
        };
        manifest.write(&self.dir)?;
        Ok(manifest)
    }
}

/// The dense array goes through the uncompressed path.
fn effective_psi(psi: &CompressionOperator) -> Option<&CompressionOperator> {
    (!psi.is_identity()).then_some(psi)
}

/// Analytic bounds, with Monte-Carlo columns when `mc_trials > 0`.
/// Rows are ordered by array, then event, then SNR.
pub fn bound_rows(cfg: &ExperimentConfig, mc_trials: u64) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for (label, sc) in cfg.scenarios()? {
        let psi = effective_psi(&sc.compressor);
        for &event in &cfg.bounds.events {
            for &snr in &sc.snr_grid_db {
                let model = sc.model_at(snr)?;
                let b = swap_bound(&model, psi, event, sc.snapshots)
                    .with_context(|| format!("{label}: bound {} at {snr} dB", event.as_str()))?;
                let mc = if mc_trials > 0 {
                    Some(sweep::mc_event_probability(&model, psi, sc.snapshots, event, mc_trials, cfg.seed)?)
                } else {
                    None
                };
                rows.push(BoundRow {
                    array: label.clone(),
                    snr_db: snr,
                    event,
                    model: model.kind().as_str(),
                    compressed: b.compressed,
                    probability: b.value(),
                    mc,
                });
            }
        }
    }
    Ok(rows)
}

fn write_bound_rows(path: &Path, kind: &str, rows: &[BoundRow]) -> Result<()> {
    let recs: Vec<_> = rows.iter().map(BoundRow::record).collect();
    write_csv(path, kind, &BOUNDS_COLUMNS, &recs)
}

pub fn cmd_bounds(cfg: &ExperimentConfig, dir: &Path) -> Result<RunManifest> {
    let mut run = Run::start(Command::Bounds, cfg, dir)?;
    let rows = bound_rows(cfg, cfg.bounds.mc_trials)?;
    write_bound_rows(&run.path(BOUNDS_FILE), "bounds", &rows)?;
    run.wrote(BOUNDS_FILE);
    run.finish(cfg)
}

pub fn cmd_oracle(cfg: &ExperimentConfig, dir: &Path) -> Result<RunManifest> {
    let trials = match cfg.bounds.mc_trials {
        0 => DEFAULT_ORACLE_TRIALS,
        t => t,
    };
    let mut run = Run::start(Command::Oracle, cfg, dir)?;
    let rows = bound_rows(cfg, trials)?;
    write_bound_rows(&run.path(ORACLE_FILE), "oracle", &rows)?;
    run.wrote(ORACLE_FILE);
    run.finish(cfg)
}

/// MSE, CRB and method-of-intervals curves for one array.
pub fn mse_table(cfg: &ExperimentConfig, label: &str, sc: &Scenario) -> Result<(MseTable, MseCurve)> {
    let runner = TrialRunner::new(sc)?;
    let curve = sweep::mse_curve(&runner).with_context(|| format!("{label}: MSE sweep"))?;
    let crb = crb_curve(sc).with_context(|| format!("{label}: CRB"))?;
    let psi = effective_psi(&sc.compressor);
    let event = cfg.bound_event();
    let pss = sc
        .snr_grid_db
        .iter()
        .map(|&s| Ok(swap_bound(&sc.model_at(s)?, psi, event, sc.snapshots)?.value()))
        .collect::<Result<Vec<_>>>()?;
    let sigma_t = method_of_intervals(&pss, &crb)?;
    let table = MseTable {
        label: label.into(),
        m: sc.m(),
        snr_db: curve.snr_db(),
        mse: curve.mse(),
        crb,
        sigma_t,
        pss_bound: pss,
        trials: sc.trials,
        swap_frequency: curve.points.iter().map(|p| p.swap_frequency).collect(),
    };
    Ok((table, curve))
}

pub fn cmd_mse(cfg: &ExperimentConfig, dir: &Path) -> Result<(RunManifest, Vec<MseTable>)> {
    let mut run = Run::start(Command::Mse, cfg, dir)?;
    let mut tables = Vec::new();
    let mut estimates = Vec::new();
    for (label, sc) in cfg.scenarios()? {
        let (table, curve) = mse_table(cfg, &label, &sc)?;
        for p in &curve.points {
            for (t, (a, b)) in p.estimates.iter().enumerate() {
                estimates.push(vec![label.clone(), num(p.snr_db), t.to_string(), num(*a), num(*b)]);
            }
        }
        tables.push(table);
    }
    write_csv(&run.path(MSE_FILE), "mse", &MSE_COLUMNS, &mse_records(&tables))?;
    run.wrote(MSE_FILE);
    write_csv(&run.path(ESTIMATES_FILE), "estimates", &ESTIMATE_COLUMNS, &estimates)?;
    run.wrote(ESTIMATES_FILE);
    Ok((run.finish(cfg)?, tables))
}

fn mse_records(tables: &[MseTable]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for t in tables {
        for i in 0..t.snr_db.len() {
            rows.push(vec![
                t.label.clone(),
                num(t.snr_db[i]),
                num(t.mse[i]),
                num(t.crb[i]),
                num(t.sigma_t[i]),
                num(t.pss_bound[i]),
                t.trials.to_string(),
                opt_num(t.swap_frequency[i]),
            ]);
        }
    }
    rows
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| anyhow!("malformed {MSE_FILE} field {}", MSE_COLUMNS[i]))
}

/// Reads `mse.csv` back, if a previous `mse` run used this exact config.
pub fn load_mse(cfg: &ExperimentConfig, dir: &Path) -> Result<Option<Vec<MseTable>>> {
    let Ok(manifest) = RunManifest::read(dir, Command::Mse.as_str()) else {
        return Ok(None);
    };
    if manifest.config_sha256 != cfg.sha256() || !manifest.files_intact(dir) {
        return Ok(None);
    }
    let records = read_csv(&dir.join(MSE_FILE), &MSE_COLUMNS)?;
    let mut tables = Vec::new();
    for (label, sc) in cfg.scenarios()? {
        let mut t = MseTable {
            label: label.clone(),
            m: sc.m(),
            snr_db: vec![],
            mse: vec![],
            crb: vec![],
            sigma_t: vec![],
            pss_bound: vec![],
            trials: sc.trials,
            swap_frequency: vec![],
        };
        for rec in records.iter().filter(|r| r.get(0) == Some(label.as_str())) {
            t.snr_db.push(field(rec, 1)?);
            t.mse.push(field(rec, 2)?);
            t.crb.push(field(rec, 3)?);
            t.sigma_t.push(field(rec, 4)?);
            t.pss_bound.push(field(rec, 5)?);
            t.swap_frequency.push(rec.get(7).and_then(|s| s.parse().ok()));
        }
        if t.snr_db != sc.snr_grid_db {
            return Ok(None);
        }
        tables.push(t);
    }
    Ok(Some(tables))
}

/// Threshold SNR per array and the delta between the first and last array.
pub fn threshold_report(cfg: &ExperimentConfig, tables: &[MseTable]) -> Result<ThresholdReport> {
    let which = cfg.threshold.curve;
    let arrays = tables
        .iter()
        .map(|t| {
            let snr = threshold_snr(&t.snr_db, t.curve(which), &t.crb, cfg.threshold.multiplier)
                .map_err(|e| match e {
                    CoreError::NoThresholdInRange => anyhow!(
                        "no threshold in range for array {:?}: the curve never settles within {}x CRB on the grid",
                        t.label,
                        cfg.threshold.multiplier
                    ),
                    e => e.into(),
                })?;
            Ok(ArrayThreshold {
                label: t.label.clone(),
                m: t.m,
                threshold_snr_db: snr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ThresholdReport::new(cfg.n, arrays, cfg.threshold.tolerance_db)?)
}

/// The flag reports whether the MSE sweep was read back from an earlier `mse` run.
pub fn cmd_threshold(cfg: &ExperimentConfig, dir: &Path) -> Result<(RunManifest, ThresholdOutput, bool)> {
    let (tables, reused) = match load_mse(cfg, dir)? {
        Some(t) => (t, true),
        None => (cmd_mse(cfg, dir)?.1, false),
    };
    let mut run = Run::start(Command::Threshold, cfg, dir)?;
    let out = ThresholdOutput {
        report: threshold_report(cfg, &tables)?,
        curve: cfg.threshold.curve,
        multiplier: cfg.threshold.multiplier,
    };
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    std::fs::write(run.path(THRESHOLD_FILE), text)?;
    run.wrote(THRESHOLD_FILE);
    run.wrote(MSE_FILE);
    Ok((run.finish(cfg)?, out, reused))
}
