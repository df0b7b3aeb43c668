//! Lower bounds on the subspace-swap probability and their Monte-Carlo
//! event oracles.
//!
//! Event F compares the average energy per orthogonal dimension with the
//! average energy per signal dimension; event G compares it with the energy
//! along the a-priori weakest mode. Both are subsets of the swap event, so
//! their probabilities bound `P_ss` from below.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by std methods when dev-dependencies link std
use num_traits::Float;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    f_cdf, generalized_f_below_one, noncentral_f_cdf, Dof, Noncentrality, Probability,
};
use crate::error::{Error, Result};
use crate::geometry::CompressionOperator;
use crate::linalg::{dot_conj, hermitian_eigen, norm_sqr, psd_sqrt, CMatrix, C64};
use crate::models::{
    CompressedModes, CovarianceModel, MeanModel, MinimumMode, ModelKind, SignalModel,
    SubspaceSplit,
};
use crate::rng::{complex_normal, stream_rng};

/// Real-convention scaling of the complex noncentrality: a complex Gaussian
/// with mean `mu` and variance `sigma2` gives `2|w|^2/sigma2 ~ chi2_2(2|mu|^2/sigma2)`.
pub const NONCENTRALITY_SCALE: f64 = 2.0;
/// Smallest trial count accepted by the event oracle.
pub const MIN_ORACLE_TRIALS: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Event {
    F,
    G,
}

impl Event {
    pub fn as_str(self) -> &'static str {
        match self {
            Event::F => "F",
            Event::G => "G",
        }
    }
}

/// The distribution a bound was read from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DistParams {
    /// `P(F'_{d1,d2}(delta) < 1)`.
    NoncentralF { d1: u32, d2: u32, noncentrality: f64 },
    /// `P(GF[weights; p * num_dof_each; den_dof] < 1)`.
    GeneralizedF {
        weights: Vec<f64>,
        num_dof_each: u32,
        den_dof: u32,
        abs_error: f64,
    },
    /// `P(F_{d1,d2} < x)`.
    CentralF { d1: u32, d2: u32, x: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapBound {
    pub event: Event,
    pub model: ModelKind,
    pub snr_db: f64,
    pub probability: Probability,
    pub dist_params: DistParams,
    pub compressed: bool,
}

impl SwapBound {
    pub fn value(&self) -> f64 {
        self.probability.value()
    }
}

fn dof(value: u64) -> Result<Dof> {
    let v = u32::try_from(value).map_err(|_| Error::Domain {
        what: "degrees of freedom",
        value: value as f64,
    })?;
    Dof::new(v)
}

/// Shapes shared by every bound: `(m, p)` with at least one orthogonal dimension.
fn dims(modes: &CompressedModes, snapshots: u32) -> Result<(u64, u64, u64)> {
    if snapshots == 0 {
        return Err(Error::Validation("need at least one snapshot".into()));
    }
    let (m, p) = modes.h.shape();
    if m <= p {
        return Err(Error::Degenerate(format!(
            "m = {m} leaves no orthogonal subspace for p = {p} modes"
        )));
    }
    Ok((m as u64, p as u64, u64::from(snapshots)))
}

fn noncentrality(energy: f64, sigma2: f64, snapshots: u64) -> Result<Noncentrality> {
    Noncentrality::new(NONCENTRALITY_SCALE * snapshots as f64 * energy / sigma2)
}

fn f_mean(model: &MeanModel, modes: &CompressedModes, snapshots: u32, compressed: bool) -> Result<SwapBound> {
    let (m, p, mm) = dims(modes, snapshots)?;
    crate::models::subspace_split_mean(modes)?;
    let z = modes.z.as_ref().expect("mean modes carry z");
    let (d1, d2) = (2 * p * mm, 2 * (m - p) * mm);
    let nc = noncentrality(norm_sqr(z), model.sigma2(), mm)?;
    let probability = noncentral_f_cdf(1.0, dof(d1)?, dof(d2)?, nc)?;
    Ok(SwapBound {
        event: Event::F,
        model: ModelKind::Mean,
        snr_db: model.snr_db(),
        probability,
        dist_params: DistParams::NoncentralF {
            d1: d1 as u32,
            d2: d2 as u32,
            noncentrality: nc.get(),
        },
        compressed,
    })
}

fn g_mean(model: &MeanModel, modes: &CompressedModes, snapshots: u32, compressed: bool) -> Result<SwapBound> {
    let (m, p, mm) = dims(modes, snapshots)?;
    crate::models::subspace_split_mean(modes)?;
    let hm = crate::models::hmin_mean(modes)?;
    let z = modes.z.as_ref().expect("mean modes carry z");
    let (d1, d2) = (2 * mm, 2 * (m - p) * mm);
    let nc = noncentrality(dot_conj(&hm.rho, z).norm_sqr(), model.sigma2(), mm)?;
    let probability = noncentral_f_cdf(1.0, dof(d1)?, dof(d2)?, nc)?;
    Ok(SwapBound {
        event: Event::G,
        model: ModelKind::Mean,
        snr_db: model.snr_db(),
        probability,
        dist_params: DistParams::NoncentralF {
            d1: d1 as u32,
            d2: d2 as u32,
            noncentrality: nc.get(),
        },
        compressed,
    })
}

fn f_cov(model: &CovarianceModel, modes: &CompressedModes, snapshots: u32, compressed: bool) -> Result<SwapBound> {
    let (m, p, mm) = dims(modes, snapshots)?;
    let split = crate::models::subspace_split_cov(modes)?;
    let sigma2 = model.sigma2();
    let weights: Vec<f64> = split.spectrum.iter().map(|l| 1.0 + l / sigma2).collect();
    let (each, den) = (2 * mm, 2 * (m - p) * mm);
    let q = generalized_f_below_one(&weights, dof(each)?, dof(den)?)?;
    let _ = p;
    Ok(SwapBound {
        event: Event::F,
        model: ModelKind::Covariance,
        snr_db: model.snr_db(),
        probability: q.probability,
        dist_params: DistParams::GeneralizedF {
            weights,
            num_dof_each: each as u32,
            den_dof: den as u32,
            abs_error: q.abs_error,
        },
        compressed,
    })
}

fn g_cov(model: &CovarianceModel, modes: &CompressedModes, snapshots: u32, compressed: bool) -> Result<SwapBound> {
    let (m, p, mm) = dims(modes, snapshots)?;
    crate::models::subspace_split_cov(modes)?;
    let hm = crate::models::hmin_cov(modes)?;
    let sigma2 = model.sigma2();
    let r_zz = modes.r_zz.as_ref().expect("covariance modes carry R_zz");
    let tau = dot_conj(&hm.rho, &r_zz.mul_vec(&hm.rho)?).re + sigma2;
    let x = sigma2 / tau;
    let (d1, d2) = (2 * mm, 2 * (m - p) * mm);
    let probability = f_cdf(x, dof(d1)?, dof(d2)?)?;
    Ok(SwapBound {
        event: Event::G,
        model: ModelKind::Covariance,
        snr_db: model.snr_db(),
        probability,
        dist_params: DistParams::CentralF {
            d1: d1 as u32,
            d2: d2 as u32,
            x,
        },
        compressed,
    })
}

/// Event-F bound for the mean model, `P(F'_{2pM, 2(m-p)M}(2M|z|^2/sigma2) < 1)`.
pub fn bound_f_mean(model: &MeanModel, psi: &CompressionOperator, snapshots: u32) -> Result<SwapBound> {
    let modes = crate::models::compressed_modes_mean(model, psi)?;
    f_mean(model, &modes, snapshots, !psi.is_identity())
}

pub fn bound_f_mean_uncompressed(model: &MeanModel, snapshots: u32) -> Result<SwapBound> {
    f_mean(model, &crate::models::uncompressed_modes_mean(model), snapshots, false)
}

/// Event-G bound for the mean model, `P(F'_{2M, 2(m-p)M}(2M|rho^H z|^2/sigma2) < 1)`.
pub fn bound_g_mean(model: &MeanModel, psi: &CompressionOperator, snapshots: u32) -> Result<SwapBound> {
    let modes = crate::models::compressed_modes_mean(model, psi)?;
    g_mean(model, &modes, snapshots, !psi.is_identity())
}

pub fn bound_g_mean_uncompressed(model: &MeanModel, snapshots: u32) -> Result<SwapBound> {
    g_mean(model, &crate::models::uncompressed_modes_mean(model), snapshots, false)
}

/// Event-F bound for the covariance model, a generalized F with weights `1 + lambda_i/sigma2`.
pub fn bound_f_cov(model: &CovarianceModel, psi: &CompressionOperator, snapshots: u32) -> Result<SwapBound> {
    let modes = crate::models::compressed_modes_cov(model, psi)?;
    f_cov(model, &modes, snapshots, !psi.is_identity())
}

pub fn bound_f_cov_uncompressed(model: &CovarianceModel, snapshots: u32) -> Result<SwapBound> {
    f_cov(model, &crate::models::uncompressed_modes_cov(model), snapshots, false)
}

/// Event-G bound for the covariance model, `P(F_{2M, 2(m-p)M} < sigma2/tau)`.
pub fn bound_g_cov(model: &CovarianceModel, psi: &CompressionOperator, snapshots: u32) -> Result<SwapBound> {
    let modes = crate::models::compressed_modes_cov(model, psi)?;
    g_cov(model, &modes, snapshots, !psi.is_identity())
}

pub fn bound_g_cov_uncompressed(model: &CovarianceModel, snapshots: u32) -> Result<SwapBound> {
    g_cov(model, &crate::models::uncompressed_modes_cov(model), snapshots, false)
}

/// Dispatches to one of the eight bounds; `psi = None` selects the dense path.
pub fn swap_bound(
    model: &SignalModel,
    psi: Option<&CompressionOperator>,
    event: Event,
    snapshots: u32,
) -> Result<SwapBound> {
    match (model, psi, event) {
        (SignalModel::Mean(m), Some(psi), Event::F) => bound_f_mean(m, psi, snapshots),
        (SignalModel::Mean(m), Some(psi), Event::G) => bound_g_mean(m, psi, snapshots),
        (SignalModel::Mean(m), None, Event::F) => bound_f_mean_uncompressed(m, snapshots),
        (SignalModel::Mean(m), None, Event::G) => bound_g_mean_uncompressed(m, snapshots),
        (SignalModel::Covariance(m), Some(psi), Event::F) => bound_f_cov(m, psi, snapshots),
        (SignalModel::Covariance(m), Some(psi), Event::G) => bound_g_cov(m, psi, snapshots),
        (SignalModel::Covariance(m), None, Event::F) => bound_f_cov_uncompressed(m, snapshots),
        (SignalModel::Covariance(m), None, Event::G) => bound_g_cov_uncompressed(m, snapshots),
    }
}

/// `tr[W^H T W]` for one trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventStatistic {
    pub event: Event,
    pub value: f64,
}

impl EventStatistic {
    pub fn occurred(self) -> bool {
        self.value > 0.0
    }
}

fn projected_energy(basis: &CMatrix, w: &[C64]) -> f64 {
    (0..basis.cols())
        .map(|c| {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..basis.rows() {
                acc += basis[(r, c)].conj() * w[r];
            }
            acc.norm_sqr()
        })
        .sum()
}

/// `tr[W^H T W]` with `T_F = P_{U_0}/(m-p) - P_{U_p}/p` or
/// `T_G = P_{U_0}/(m-p) - rho rho^H`, for snapshot columns `w`.
pub fn event_statistic(split: &SubspaceSplit, rho: &[C64], event: Event, w: &[Vec<C64>]) -> EventStatistic {
    let m = split.m();
    let p = split.p();
    let orth: f64 = w.iter().map(|x| projected_energy(&split.u_0, x)).sum();
    let avg_orth = orth / (m - p) as f64;
    let value = match event {
        Event::F => {
            let sig: f64 = w.iter().map(|x| projected_energy(&split.u_p, x)).sum();
            avg_orth - sig / p as f64
        }
        Event::G => avg_orth - w.iter().map(|x| dot_conj(rho, x).norm_sqr()).sum::<f64>(),
    };
    EventStatistic { event, value }
}

/// The single-dimension swap event: some orthogonal direction holds more
/// energy than some mode direction,
/// `min_i tr[W^H P_{h_i} W] < lambda_max(U_0^H W W^H U_0)`.
pub fn single_swap_event(h: &CMatrix, u_0: &CMatrix, w: &[Vec<C64>]) -> Result<bool> {
    let mut weakest = f64::INFINITY;
    for i in 0..h.cols() {
        let hi = h.column(i);
        let norm = norm_sqr(&hi);
        if norm == 0.0 {
            continue;
        }
        let e: f64 = w.iter().map(|x| dot_conj(&hi, x).norm_sqr()).sum::<f64>() / norm;
        weakest = weakest.min(e);
    }
    let k = u_0.cols();
    if k == 0 || w.is_empty() {
        return Ok(false);
    }
    let y = w
        .iter()
        .map(|x| u_0.adjoint_mul_vec(x))
        .collect::<Result<Vec<_>>>()?;
    // Y Y^H and Y^H Y share their nonzero spectrum; use the smaller one.
    let g = if y.len() < k {
        CMatrix::from_fn(y.len(), y.len(), |a, b| dot_conj(&y[a], &y[b]))
    } else {
        let mut g = CMatrix::zeros(k, k);
        for col in &y {
            for a in 0..k {
                for b in 0..k {
                    g[(a, b)] += col[a] * col[b].conj();
                }
            }
        }
        g
    };
    Ok(weakest < hermitian_eigen(&g)?.values[0])
}

/// Monte-Carlo estimate of an event probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub probability: f64,
    /// Empirical binomial standard error.
    pub std: f64,
    pub hits: u64,
    pub trials: u64,
}

impl McEstimate {
    fn new(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        McEstimate {
            probability: p,
            std: (p * (1.0 - p) / trials as f64).sqrt(),
            hits,
            trials,
        }
    }

    /// Binomial standard deviation of the frequency if the true probability were `reference`.
    pub fn sigma_at(&self, reference: f64) -> f64 {
        (reference * (1.0 - reference) / self.trials as f64).sqrt()
    }

    /// `|frequency - reference| <= k * sigma_at(reference)`.
    pub fn agrees_with(&self, reference: f64, k: f64) -> bool {
        (self.probability - reference).abs() <= k * self.sigma_at(reference)
    }
}

/// Everything a trial needs, prepared once per scenario.
#[derive(Clone, Debug)]
pub struct EventSampler {
    split: SubspaceSplit,
    rho: Vec<C64>,
    h: CMatrix,
    /// Mean model: fixed `z`.
    z: Option<Vec<C64>>,
    /// Covariance model: `H R_aa^{1/2}`.
    loading: Option<CMatrix>,
    sigma2: f64,
    snapshots: usize,
}

impl EventSampler {
    pub fn new(model: &SignalModel, psi: Option<&CompressionOperator>, snapshots: u32) -> Result<Self> {
        let modes = model.modes(psi)?;
        dims(&modes, snapshots)?;
        let split = model.subspace_split(&modes)?;
        let MinimumMode { rho, .. } = model.hmin(&modes)?;
        let loading = match model {
            SignalModel::Covariance(c) => Some(modes.h.matmul(&psd_sqrt(c.r_alpha())?)?),
            SignalModel::Mean(_) => None,
        };
        Ok(EventSampler {
            split,
            rho,
            z: modes.z.clone(),
            h: modes.h,
            loading,
            sigma2: model.sigma2(),
            snapshots: snapshots as usize,
        })
    }

    pub fn split(&self) -> &SubspaceSplit {
        &self.split
    }

    /// Snapshots of trial `trial` under `seed`, in the compressed domain.
    pub fn draw(&self, seed: u64, trial: u64) -> Vec<Vec<C64>> {
        let mut rng = stream_rng(seed, &[trial]);
        let m = self.h.rows();
        (0..self.snapshots)
            .map(|_| {
                let mut w: Vec<C64> = match (&self.z, &self.loading) {
                    (Some(z), _) => z.clone(),
                    (None, Some(l)) => {
                        let g: Vec<C64> = (0..l.cols()).map(|_| complex_normal(&mut rng, 1.0)).collect();
                        l.mul_vec(&g).expect("loading is m x p")
                    }
                    (None, None) => unreachable!("sampler holds a signal term"),
                };
                for x in w.iter_mut().take(m) {
                    *x += complex_normal(&mut rng, self.sigma2);
                }
                w
            })
            .collect()
    }

    pub fn statistic(&self, event: Event, w: &[Vec<C64>]) -> EventStatistic {
        event_statistic(&self.split, &self.rho, event, w)
    }

    pub fn trial(&self, event: Event, seed: u64, trial: u64) -> bool {
        self.statistic(event, &self.draw(seed, trial)).occurred()
    }

    pub fn single_swap_trial(&self, seed: u64, trial: u64) -> Result<bool> {
        single_swap_event(&self.h, &self.split.u_0, &self.draw(seed, trial))
    }
}

/// Fraction of `trials` in which the event statistic is positive.
pub fn mc_event_probability(
    model: &SignalModel,
    psi: Option<&CompressionOperator>,
    snapshots: u32,
    event: Event,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    if trials < MIN_ORACLE_TRIALS {
        return Err(Error::Validation(format!(
            "oracle needs at least {MIN_ORACLE_TRIALS} trials, got {trials}"
        )));
    }
    let sampler = EventSampler::new(model, psi, snapshots)?;
    let hits = (0..trials).filter(|&t| sampler.trial(event, seed, t)).count() as u64;
    Ok(McEstimate::new(hits, trials))
}

/// Tally helper for callers that run trials themselves (e.g. in parallel).
pub fn mc_estimate_from_hits(hits: u64, trials: u64) -> McEstimate {
    McEstimate::new(hits, trials)
}

/// Average of the conditional bound over random whitened compressors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalBound {
    pub mean: f64,
    /// Sample standard deviation across draws (0 for a single draw).
    pub std: f64,
    pub values: Vec<f64>,
}

/// Seed of the `draw`-th random compressor under `seed`.
pub fn compressor_seed(seed: u64, draw: u64) -> u64 {
    stream_rng(seed, &[0x4D41_5247, draw]).next_u64()
}

/// `P_ss >= E_Psi[P(event | Psi)]` over `draws` whitened Gaussian compressors.
///
/// With `m = n` every draw is unitary and the bounds are unitary invariant,
/// so each draw contributes the dense bound itself.
pub fn marginal_bound_random_psi(
    model: &SignalModel,
    m: usize,
    event: Event,
    snapshots: u32,
    draws: usize,
    seed: u64,
) -> Result<MarginalBound> {
    if draws == 0 {
        return Err(Error::Validation("need at least one compressor draw".into()));
    }
    let n = model.n();
    let values = if m == n {
        let dense = swap_bound(model, None, event, snapshots)?.value();
        alloc::vec![dense; draws]
    } else {
        (0..draws as u64)
            .map(|d| {
                let psi = CompressionOperator::random_whitened(m, n, compressor_seed(seed, d))?;
                Ok(swap_bound(model, Some(&psi), event, snapshots)?.value())
            })
            .collect::<Result<Vec<_>>>()?
    };
    let k = values.len() as f64;
    // Offsetting by the first draw keeps identical draws exact.
    let mean = values[0] + values.iter().map(|v| v - values[0]).sum::<f64>() / k;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(MarginalBound { mean, std, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ElectricalAngle, ElementPositions};
    use alloc::vec;
    use core::f64::consts::PI;

    fn mean_model(n: u32, snr_db: f64) -> MeanModel {
        MeanModel::new(
            ElementPositions::dense(n).unwrap(),
            vec![ElectricalAngle::new(0.0), ElectricalAngle::new(PI / n as f64)],
            vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)],
            crate::models::sigma2_for_snr(1.0, snr_db),
        )
        .unwrap()
    }

    fn cov_model(n: u32, snr_db: f64) -> CovarianceModel {
        CovarianceModel::new(
            ElementPositions::dense(n).unwrap(),
            vec![ElectricalAngle::new(0.0), ElectricalAngle::new(PI / n as f64)],
            CMatrix::identity(2),
            crate::models::sigma2_for_snr(1.0, snr_db),
        )
        .unwrap()
    }

    #[test]
    fn noise_only_limits() {
        let psi = CompressionOperator::random_whitened(8, 16, 3).unwrap();
        let d = |x| Dof::new(x).unwrap();
        let f = bound_f_mean(&mean_model(16, -200.0), &psi, 2).unwrap().value();
        let f0 = f_cdf(1.0, d(8), d(24)).unwrap().value();
        assert!((f - f0).abs() < 1e-12);
        let g = bound_g_mean(&mean_model(16, -200.0), &psi, 2).unwrap().value();
        assert!((g - f_cdf(1.0, d(4), d(24)).unwrap().value()).abs() < 1e-12);
        let g = bound_g_cov(&cov_model(16, -200.0), &psi, 2).unwrap().value();
        assert!((g - f_cdf(1.0, d(4), d(24)).unwrap().value()).abs() < 1e-12);
        let fc = bound_f_cov(&cov_model(16, -200.0), &psi, 2).unwrap().value();
        assert!((fc - f0).abs() < 1e-6);
    }

    #[test]
    fn decreasing_in_snr() {
        let psi = CompressionOperator::random_whitened(8, 16, 4).unwrap();
        for event in [Event::F, Event::G] {
            let mut last_mean = 1.0;
            let mut last_cov = 1.0;
            for k in 0..20 {
                let snr = -30.0 + 2.0 * k as f64;
                let bm = swap_bound(&SignalModel::Mean(mean_model(16, snr)), Some(&psi), event, 1)
                    .unwrap()
                    .value();
                let bc = swap_bound(&SignalModel::Covariance(cov_model(16, snr)), Some(&psi), event, 4)
                    .unwrap()
                    .value();
                assert!(bm < last_mean, "{event:?} mean at {snr}");
                assert!(bc < last_cov || bc == 0.0, "{event:?} cov at {snr}");
                last_mean = bm;
                last_cov = bc;
            }
        }
    }

    #[test]
    fn high_snr_vanishes() {
        let psi = CompressionOperator::random_whitened(8, 16, 5).unwrap();
        for event in [Event::F, Event::G] {
            let bm = swap_bound(&SignalModel::Mean(mean_model(16, 60.0)), Some(&psi), event, 1).unwrap();
            let bc = swap_bound(&SignalModel::Covariance(cov_model(16, 60.0)), Some(&psi), event, 8).unwrap();
            assert!(bm.value() < 1e-12 && bc.value() < 1e-12, "{bm:?} {bc:?}");
        }
    }

    #[test]
    fn square_compressor_has_no_orthogonal_space() {
        let m = MeanModel::new(
            ElementPositions::dense(2).unwrap(),
            vec![ElectricalAngle::new(0.0), ElectricalAngle::new(1.0)],
            vec![C64::new(1.0, 0.0); 2],
            1.0,
        )
        .unwrap();
        assert!(matches!(
            bound_f_mean_uncompressed(&m, 1),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn identity_matches_dense_path() {
        let id = CompressionOperator::identity(16);
        let sm = SignalModel::Mean(mean_model(16, -3.0));
        let sc = SignalModel::Covariance(cov_model(16, -3.0));
        for model in [&sm, &sc] {
            for event in [Event::F, Event::G] {
                let a = swap_bound(model, Some(&id), event, 4).unwrap();
                let b = swap_bound(model, None, event, 4).unwrap();
                assert!((a.value() - b.value()).abs() <= 1e-12);
                assert!(!a.compressed);
            }
        }
    }

    #[test]
    fn left_unitary_invariance() {
        let psi = CompressionOperator::random_whitened(8, 16, 9).unwrap();
        let q = CompressionOperator::random_whitened(8, 8, 10).unwrap();
        let rotated = psi.rotated(q.matrix()).unwrap();
        let sm = SignalModel::Mean(mean_model(16, -6.0));
        let sc = SignalModel::Covariance(cov_model(16, -6.0));
        for model in [&sm, &sc] {
            for event in [Event::F, Event::G] {
                let a = swap_bound(model, Some(&psi), event, 8).unwrap().value();
                let b = swap_bound(model, Some(&rotated), event, 8).unwrap().value();
                assert!((a - b).abs() < 1e-10, "{a} {b}");
            }
        }
    }

    #[test]
    fn signal_subspace_columns_never_swap() {
        let sampler = EventSampler::new(
            &SignalModel::Mean(mean_model(16, 0.0)),
            Some(&CompressionOperator::random_whitened(8, 16, 1).unwrap()),
            2,
        )
        .unwrap();
        let w: Vec<Vec<C64>> = (0..2).map(|c| sampler.split().u_p.column(c)).collect();
        assert!(!sampler.statistic(Event::F, &w).occurred());
    }

    #[test]
    fn oracle_is_deterministic() {
        let model = SignalModel::Mean(mean_model(16, 0.0));
        let a = mc_event_probability(&model, None, 1, Event::F, 500, 11).unwrap();
        let b = mc_event_probability(&model, None, 1, Event::F, 500, 11).unwrap();
        assert_eq!(a, b);
        assert!(mc_event_probability(&model, None, 1, Event::F, 50, 11).is_err());
    }

    #[test]
    fn marginal_special_cases() {
        let model = SignalModel::Mean(mean_model(16, 0.0));
        let dense = swap_bound(&model, None, Event::F, 1).unwrap().value();
        let full = marginal_bound_random_psi(&model, 16, Event::F, 1, 12, 1).unwrap();
        assert!(full.values.iter().all(|&v| v == dense));
        assert_eq!(full.mean, dense);

        let one = marginal_bound_random_psi(&model, 8, Event::F, 1, 1, 7).unwrap();
        let psi = CompressionOperator::random_whitened(8, 16, compressor_seed(7, 0)).unwrap();
        assert_eq!(one.mean, swap_bound(&model, Some(&psi), Event::F, 1).unwrap().value());

        // A random unitary compressor reproduces the dense bound numerically.
        let u = CompressionOperator::random_whitened(16, 16, 2).unwrap();
        let b = swap_bound(&model, Some(&u), Event::F, 1).unwrap().value();
        assert!((b - dense).abs() < 1e-10);
    }
}
