//! Experiment configuration: strict JSON, validated before any compute.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use subswap_core::bounds::Event;
use subswap_core::estimation::{MlOptions, Scenario, Sources, DEFAULT_THRESHOLD_MULTIPLIER};
use subswap_core::geometry::{coprime_positions, CompressionOperator, ElectricalAngle, ElementPositions};
use subswap_core::linalg::{CMatrix, C64};
use subswap_core::models::ModelKind;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_ORACLE_TRIALS: u64 = 10_000;

const PAPER_MEAN: &str = include_str!("../presets/paper-mean.json");
const PAPER_COV: &str = include_str!("../presets/paper-cov.json");

/// Names accepted by `--preset`.
pub const PRESETS: [&str; 2] = ["paper-mean", "paper-cov"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelKind,
    /// Dense array size.
    pub n: u32,
    /// Electrical angles in radians.
    pub thetas: Vec<f64>,
    /// Mean model amplitudes as `[re, im]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<C64>>,
    /// Covariance model `R_aa` as rows of `[re, im]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_alpha: Option<CMatrix>,
    pub snapshots: u32,
    pub snr_grid_db: SnrGrid,
    pub arrays: Vec<ArraySpec>,
    pub seed: u64,
    #[serde(default)]
    pub bounds: BoundsParams,
    #[serde(default)]
    pub mse: MseParams,
    #[serde(default)]
    pub threshold: ThresholdParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrGrid {
    List(Vec<f64>),
    Range(SnrRange),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SnrGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            SnrGrid::List(v) => Ok(v.clone()),
            SnrGrid::Range(r) => {
                ensure!(r.step > 0.0 && r.step.is_finite(), "snr_grid_db.step must be positive");
                ensure!(
                    r.start.is_finite() && r.stop.is_finite() && r.stop >= r.start,
                    "snr_grid_db needs finite start <= stop"
                );
                let count = ((r.stop - r.start) / r.step + 1e-9).floor() as usize + 1;
                Ok((0..count).map(|k| r.start + k as f64 * r.step).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub label: String,
    pub compressor: CompressorSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompressorSpec {
    Identity,
    Coprime { m1: u32, m2: u32 },
    Selection { positions: Vec<u32> },
    Random { m: usize, seed: u64 },
}

impl CompressorSpec {
    pub fn build(&self, n: u32) -> Result<CompressionOperator> {
        let n_us = n as usize;
        Ok(match self {
            CompressorSpec::Identity => CompressionOperator::identity(n_us),
            CompressorSpec::Coprime { m1, m2 } => {
                CompressionOperator::selection(&coprime_positions(*m1, *m2)?, n_us)?
            }
            CompressorSpec::Selection { positions } => {
                CompressionOperator::selection(&ElementPositions::new(positions.clone())?, n_us)?
            }
            CompressorSpec::Random { m, seed } => CompressionOperator::random_whitened(*m, n_us, *seed)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsParams {
    pub events: Vec<Event>,
    /// Monte-Carlo oracle trials per row; 0 leaves the MC columns empty.
    pub mc_trials: u64,
}

impl Default for BoundsParams {
    fn default() -> Self {
        BoundsParams {
            events: vec![Event::F, Event::G],
            mc_trials: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MseParams {
    pub trials: u64,
    /// Bound feeding the method of intervals; F for mean, G for covariance when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_event: Option<Event>,
    pub ml: MlOptions,
}

impl Default for MseParams {
    fn default() -> Self {
        MseParams {
            trials: 200,
            bound_event: None,
            ml: MlOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdCurve {
    /// Empirical ML mean-squared error.
    Mse,
    /// Method-of-intervals approximation.
    SigmaT,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdParams {
    /// Knee criterion: curve <= multiplier * CRB from the threshold upward.
    pub multiplier: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance_db: Option<f64>,
    pub curve: ThresholdCurve,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        ThresholdParams {
            multiplier: DEFAULT_THRESHOLD_MULTIPLIER,
            tolerance_db: None,
            curve: ThresholdCurve::Mse,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).context("invalid experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-mean" => Self::from_json(PAPER_MEAN),
            "paper-cov" => Self::from_json(PAPER_COV),
            other => bail!("unknown preset {other:?}; expected one of {PRESETS:?}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            self.schema_version
        );
        ensure!(!self.arrays.is_empty(), "at least one array is required");
        for (i, a) in self.arrays.iter().enumerate() {
            ensure!(!a.label.is_empty(), "array {i} has an empty label");
            ensure!(
                !a.label.contains([',', '"', '\n']),
                "array label {:?} must not contain commas, quotes or newlines",
                a.label
            );
            ensure!(
                self.arrays[..i].iter().all(|b| b.label != a.label),
                "duplicate array label {:?}",
                a.label
            );
        }
        match self.model {
            ModelKind::Mean => ensure!(
                self.alpha.is_some() && self.r_alpha.is_none(),
                "mean model needs `alpha` and no `r_alpha`"
            ),
            ModelKind::Covariance => ensure!(
                self.r_alpha.is_some() && self.alpha.is_none(),
                "covariance model needs `r_alpha` and no `alpha`"
            ),
        }
        ensure!(!self.bounds.events.is_empty(), "bounds.events is empty");
        ensure!(self.mse.trials >= 1, "mse.trials must be at least 1");
        ensure!(
            self.threshold.multiplier > 0.0 && self.threshold.multiplier.is_finite(),
            "threshold.multiplier must be positive"
        );
        if let Some(t) = self.threshold.tolerance_db {
            ensure!(t >= 0.0 && t.is_finite(), "threshold.tolerance_db must be nonnegative");
        }
        for (label, sc) in self.scenarios()? {
            sc.validate().with_context(|| format!("array {label:?}"))?;
        }
        Ok(())
    }

    pub fn snr_grid(&self) -> Result<Vec<f64>> {
        let g = self.snr_grid_db.values()?;
        ensure!(!g.is_empty(), "SNR grid is empty");
        ensure!(
            g.iter().all(|s| s.is_finite()) && g.windows(2).all(|w| w[0] < w[1]),
            "SNR grid must be finite and strictly increasing"
        );
        Ok(g)
    }

    pub fn sources(&self) -> Sources {
        match self.model {
            ModelKind::Mean => Sources::Mean {
                alpha: self.alpha.clone().unwrap_or_default(),
            },
            ModelKind::Covariance => Sources::Covariance {
                r_alpha: self.r_alpha.clone().unwrap_or_else(|| CMatrix::zeros(0, 0)),
            },
        }
    }

    pub fn bound_event(&self) -> Event {
        self.mse.bound_event.unwrap_or(match self.model {
            ModelKind::Mean => Event::F,
            ModelKind::Covariance => Event::G,
        })
    }

    /// One scenario per array, in config order.
    pub fn scenarios(&self) -> Result<Vec<(String, Scenario)>> {
        let grid = self.snr_grid()?;
        self.arrays
            .iter()
            .map(|a| {
                let compressor = a
                    .compressor
                    .build(self.n)
                    .with_context(|| format!("array {:?}", a.label))?;
                Ok((
                    a.label.clone(),
                    Scenario {
                        n: self.n,
                        compressor,
                        thetas: self.thetas.iter().map(|&t| ElectricalAngle::new(t)).collect(),
                        sources: self.sources(),
                        snapshots: self.snapshots,
                        snr_grid_db: grid.clone(),
                        trials: self.mse.trials,
                        master_seed: self.seed,
                        ml: self.mse.ml,
                    },
                ))
            })
            .collect()
    }

    /// Canonical JSON of the effective configuration.
    pub fn canonical_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("config serializes");
        v.push(b'\n');
        v
    }

    pub fn sha256(&self) -> String {
        hex_digest(&self.canonical_json())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
