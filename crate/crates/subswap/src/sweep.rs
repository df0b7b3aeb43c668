//! Rayon-parallel versions of the core sweeps.
//!
//! Trials are independent streams keyed by their coordinates and results are
//! gathered in trial order before aggregation, so every function here returns
//! exactly what its sequential core counterpart returns.

use rayon::prelude::*;

use subswap_core::bounds::{mc_estimate_from_hits, Event, EventSampler, McEstimate};
use subswap_core::estimation::{MseCurve, MsePoint, TrialOutcome, TrialRunner};
use subswap_core::geometry::CompressionOperator;
use subswap_core::models::SignalModel;
use subswap_core::Result;

/// MSE points at `snrs`, trials parallel across every (SNR, trial) pair.
pub fn mse_points(runner: &TrialRunner, snrs: &[f64]) -> Result<Vec<MsePoint>> {
    let trials = runner.scenario().trials;
    let jobs: Vec<(usize, u64)> = (0..snrs.len())
        .flat_map(|i| (0..trials).map(move |t| (i, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(i, t)| runner.run(snrs[i], t))
        .collect::<Result<Vec<_>>>()?;
    Ok(outcomes
        .chunks(trials as usize)
        .zip(snrs)
        .map(|(chunk, &s)| MsePoint::from_outcomes(s, chunk))
        .collect())
}

pub fn mse_curve(runner: &TrialRunner) -> Result<MseCurve> {
    Ok(MseCurve {
        points: mse_points(runner, &runner.scenario().snr_grid_db)?,
    })
}

/// Parallel counterpart of `subswap_core::bounds::mc_event_probability`.
pub fn mc_event_probability(
    model: &SignalModel,
    psi: Option<&CompressionOperator>,
    snapshots: u32,
    event: Event,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    if trials < subswap_core::bounds::MIN_ORACLE_TRIALS {
        // Defer to the core for the error message.
        return subswap_core::bounds::mc_event_probability(model, psi, snapshots, event, trials, seed);
    }
    let sampler = EventSampler::new(model, psi, snapshots)?;
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&t| sampler.trial(event, seed, t))
        .count() as u64;
    Ok(mc_estimate_from_hits(hits, trials))
}
