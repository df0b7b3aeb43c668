use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use subswap::commands::{self, Command, EXIT_TOLERANCE_FAIL};
use subswap::config::{ExperimentConfig, ThresholdCurve};

const OUT_DIR_ENV: &str = "SUBSWAP_OUT_DIR";

/// Subspace-swap bounds, ML MSE sweeps and threshold-SNR reports.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analytic swap-probability bounds over the SNR grid (bounds.csv).
    Bounds(Common),
    /// ML MSE, CRB and method-of-intervals curves (mse.csv, estimates.csv).
    Mse(Common),
    /// Threshold SNR per array and the measured shift (threshold.json).
    Threshold {
        #[command(flatten)]
        common: Common,
        /// Knee criterion: curve <= MULTIPLIER x CRB.
        #[arg(long)]
        multiplier: Option<f64>,
        /// Pass/fail tolerance on |measured - predicted| in dB.
        #[arg(long)]
        tolerance_db: Option<f64>,
        /// Curve whose knee is located.
        #[arg(long, value_enum)]
        curve: Option<CurveArg>,
    },
    /// Monte-Carlo event frequencies next to the analytic bounds (oracle.csv).
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long, value_parser = ["paper-mean", "paper-cov"])]
    preset: Option<String>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials override: MSE trials for mse/threshold, Monte-Carlo trials for bounds/oracle.
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory [default: config output_dir, then $SUBSWAP_OUT_DIR, then ./subswap-out].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CurveArg {
    Mse,
    SigmaT,
}

impl Common {
    fn load(&self, command: Command) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            _ => bail!("give exactly one of --config and --preset"),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(t) = self.trials {
            match command {
                Command::Mse | Command::Threshold => cfg.mse.trials = t,
                Command::Bounds | Command::Oracle => cfg.bounds.mc_trials = t,
            }
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        commands::resolve_out_dir(self.out.clone(), cfg, std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (command, common) = match &cli.command {
        Cmd::Bounds(c) => (Command::Bounds, c),
        Cmd::Mse(c) => (Command::Mse, c),
        Cmd::Threshold { common, .. } => (Command::Threshold, common),
        Cmd::Oracle(c) => (Command::Oracle, c),
    };
    let mut cfg = common.load(command)?;
    if let Cmd::Threshold { multiplier, tolerance_db, curve, .. } = &cli.command {
        if let Some(m) = multiplier {
            cfg.threshold.multiplier = *m;
        }
        if tolerance_db.is_some() {
            cfg.threshold.tolerance_db = *tolerance_db;
        }
        if let Some(c) = curve {
            cfg.threshold.curve = match c {
                CurveArg::Mse => ThresholdCurve::Mse,
                CurveArg::SigmaT => ThresholdCurve::SigmaT,
            };
        }
    }
    cfg.validate()?;
    let dir = common.out_dir(&cfg);

    let manifest = match command {
        Command::Bounds => commands::cmd_bounds(&cfg, &dir)?,
        Command::Oracle => commands::cmd_oracle(&cfg, &dir)?,
        Command::Mse => commands::cmd_mse(&cfg, &dir)?.0,
        Command::Threshold => {
            let (manifest, out, reused) = commands::cmd_threshold(&cfg, &dir)?;
            let r = &out.report;
            if reused {
                eprintln!("reused {}", dir.join(commands::MSE_FILE).display());
            }
            for a in &r.arrays {
                println!("{:<16} m={:<4} threshold {:.2} dB", a.label, a.m, a.threshold_snr_db);
            }
            print!("delta {:.2} dB, predicted {:.2} dB", r.delta_db, r.predicted_delta_db);
            match (r.pass, r.tolerance_db) {
                (Some(p), Some(t)) => println!(" (tolerance {t} dB): {}", if p { "PASS" } else { "FAIL" }),
                _ => println!(),
            }
            if r.pass == Some(false) {
                eprintln!("wrote {}", dir.display());
                return Ok(ExitCode::from(EXIT_TOLERANCE_FAIL as u8));
            }
            manifest
        }
    };
    eprintln!(
        "wrote {} ({} files, {:.1} s)",
        dir.display(),
        manifest.files.len(),
        manifest.wall_clock_s
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
