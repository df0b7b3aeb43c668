//! Monte-Carlo ML direction finding, Cramér-Rao bounds, MSE sweeps, the
//! method-of-intervals approximation and threshold-SNR extraction.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by std methods when dev-dependencies link std
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    steering_derivative, steering_vector, CompressionOperator, ElectricalAngle, ElementPositions,
};
use crate::linalg::{dot_conj, hpd_inverse, psd_sqrt, spd_inverse, CMatrix, C64};
use crate::models::{
    sigma2_for_snr, CovarianceModel, MeanModel, SignalModel, SubspaceSplit,
};
use crate::rng::{complex_normal, stream_rng};

/// Error variance of an estimate uniform over the search interval, `pi^2/12`.
pub const SIGMA0_SQ: f64 = PI * PI / 12.0;
/// Default knee criterion: the curve stays within this factor of the CRB.
pub const DEFAULT_THRESHOLD_MULTIPLIER: f64 = 2.0;
const SIM_STREAM: u64 = 0x5349_4D55;
const GRID_DEGENERACY: f64 = 1e-8;

/// Source statistics shared by every array in an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sources {
    /// Deterministic complex amplitudes.
    Mean { alpha: Vec<C64> },
    /// Source covariance `R_aa`.
    Covariance { r_alpha: CMatrix },
}

/// How `theta_1_hat` is picked from the estimated pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Association {
    /// The smaller angle of the ordered pair estimates the smaller true angle.
    #[default]
    Ordered,
    /// The estimate nearest to the true `theta_1`.
    Proximity,
}

/// Criterion used for the covariance model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovCriterion {
    /// Concentrated stochastic Gaussian likelihood.
    #[default]
    Stochastic,
    /// `tr(P_H S)`, the deterministic criterion.
    Deterministic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlOptions {
    /// Coarse grid density per dense Rayleigh width `2 pi / n`.
    pub points_per_rayleigh: u32,
    /// Final pattern-search step in radians.
    pub refine_step: f64,
    pub association: Association,
    pub cov_criterion: CovCriterion,
    /// Also evaluate the single-dimension swap event for every trial.
    pub record_swaps: bool,
}

impl Default for MlOptions {
    fn default() -> Self {
        MlOptions {
            points_per_rayleigh: 8,
            refine_step: 1e-4,
            association: Association::Ordered,
            cov_criterion: CovCriterion::Stochastic,
            record_swaps: true,
        }
    }
}

/// One array in an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub n: u32,
    pub compressor: CompressionOperator,
    pub thetas: Vec<ElectricalAngle>,
    pub sources: Sources,
    pub snapshots: u32,
    pub snr_grid_db: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
    pub ml: MlOptions,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let p = self.thetas.len();
        if p == 0 || p > self.n as usize {
            return Err(Error::Validation(format!("need 1 <= p <= n, got p={p}")));
        }
        if self.compressor.n() != self.n as usize {
            return Err(Error::DimensionMismatch {
                expected: self.n as usize,
                found: self.compressor.n(),
            });
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::Validation("SNR grid is empty".into()));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite())
            || self.snr_grid_db.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(Error::Validation("SNR grid must be finite and strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::Validation("need at least one trial".into()));
        }
        if self.snapshots == 0 {
            return Err(Error::Validation("need at least one snapshot".into()));
        }
        if !(self.ml.refine_step > 0.0) || self.ml.points_per_rayleigh == 0 {
            return Err(Error::Validation("ML grid density and refine step must be positive".into()));
        }
        // Model construction checks amplitudes / covariance shape.
        self.model_at(0.0).map(|_| ())
    }

    pub fn positions(&self) -> ElementPositions {
        ElementPositions::dense(self.n).expect("n >= 1")
    }

    pub fn m(&self) -> usize {
        self.compressor.m()
    }

    pub fn p(&self) -> usize {
        self.thetas.len()
    }

    /// Power whose ratio to `sigma2` defines the SNR (source 1).
    pub fn reference_power(&self) -> f64 {
        match &self.sources {
            Sources::Mean { alpha } => alpha[0].norm_sqr(),
            Sources::Covariance { r_alpha } => r_alpha[(0, 0)].re,
        }
    }

    pub fn sigma2_at(&self, snr_db: f64) -> f64 {
        sigma2_for_snr(self.reference_power(), snr_db)
    }

    pub fn model_at(&self, snr_db: f64) -> Result<SignalModel> {
        let sigma2 = self.sigma2_at(snr_db);
        Ok(match &self.sources {
            Sources::Mean { alpha } => SignalModel::Mean(MeanModel::new(
                self.positions(),
                self.thetas.clone(),
                alpha.clone(),
                sigma2,
            )?),
            Sources::Covariance { r_alpha } => SignalModel::Covariance(CovarianceModel::new(
                self.positions(),
                self.thetas.clone(),
                r_alpha.clone(),
                sigma2,
            )?),
        })
    }

    /// Same experiment seen through another compressor.
    pub fn with_compressor(&self, compressor: CompressionOperator) -> Self {
        Scenario {
            compressor,
            ..self.clone()
        }
    }
}

/// `m x M` compressed snapshots for `trial` at `snr_db`.
///
/// The stream depends on `(master_seed, snr_db, trial)` only and noise is
/// drawn in the dense domain, so every array sees the same realizations.
/// `snr_db = +inf` gives noise-free data.
pub fn simulate_snapshots(scenario: &Scenario, snr_db: f64, trial: u64) -> Result<CMatrix> {
    let sigma2 = if snr_db == f64::INFINITY {
        0.0
    } else {
        scenario.sigma2_at(snr_db)
    };
    let n = scenario.n as usize;
    let big_m = scenario.snapshots as usize;
    let positions = scenario.positions();
    let k_cols: Vec<Vec<C64>> = scenario
        .thetas
        .iter()
        .map(|&t| steering_vector(&positions, t))
        .collect();
    let k = CMatrix::from_columns(&k_cols)?;
    let mut rng = stream_rng(scenario.master_seed, &[SIM_STREAM, snr_db.to_bits(), trial]);
    let mut w = CMatrix::zeros(scenario.m(), big_m);
    match &scenario.sources {
        Sources::Mean { alpha } => {
            let x = k.mul_vec(alpha)?;
            for t in 0..big_m {
                let y: Vec<C64> = x.iter().map(|&xi| xi + complex_normal(&mut rng, sigma2)).collect();
                w.set_column(t, &scenario.compressor.apply(&y)?);
            }
        }
        Sources::Covariance { r_alpha } => {
            let root = psd_sqrt(r_alpha)?;
            let p = r_alpha.rows();
            for t in 0..big_m {
                let g: Vec<C64> = (0..p).map(|_| complex_normal(&mut rng, 1.0)).collect();
                let alpha = root.mul_vec(&g)?;
                let mut y = k.mul_vec(&alpha)?;
                for yi in y.iter_mut().take(n) {
                    *yi += complex_normal(&mut rng, sigma2);
                }
                w.set_column(t, &scenario.compressor.apply(&y)?);
            }
        }
    }
    Ok(w)
}

/// Sample second-moment matrix `W W^H` (not divided by `M`).
fn outer(w: &CMatrix) -> CMatrix {
    let (m, big_m) = w.shape();
    let mut s = CMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..big_m {
                acc += w[(a, t)] * w[(b, t)].conj();
            }
            s[(a, b)] = acc;
            s[(b, a)] = acc.conj();
        }
    }
    s
}

/// Data summary handed to the pair criterion.
struct PairData {
    /// `tr(S)`, unnormalized.
    trace: f64,
    m: usize,
    snapshots: f64,
}

/// ML criterion for one pair, larger is better. `g` is the 2x2 Gram of the
/// two steering vectors, `c` the corresponding entries of `A^H S A`.
fn pair_score(
    kind: Kind,
    data: &PairData,
    g11: f64,
    g22: f64,
    g12: C64,
    c11: f64,
    c22: f64,
    c12: C64,
) -> Option<f64> {
    let det_g = g11 * g22 - g12.norm_sqr();
    if !(det_g > GRID_DEGENERACY * g11 * g22) {
        return None;
    }
    // tr(G^{-1} C) = (g22 c11 + g11 c22 - 2 Re(g12 c21)) / det G, c21 = conj(c12).
    let t = (g22 * c11 + g11 * c22 - 2.0 * (g12 * c12.conj()).re) / det_g;
    match kind {
        Kind::Projection => Some(t),
        Kind::Stochastic => {
            let big_m = data.snapshots;
            let mp = (data.m - 2) as f64;
            let det_c = (c11 * c22 - c12.norm_sqr()).max(0.0);
            let (tr, det) = (t / big_m, det_c / det_g / (big_m * big_m));
            let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
            let mu = [0.5 * (tr + disc), (0.5 * (tr - disc)).max(0.0)];
            let floor = 1e-300_f64.max(1e-14 * data.trace / big_m / data.m as f64);
            let s2 = ((data.trace / big_m - tr) / mp).max(floor);
            let mut cost = mp * s2.ln();
            for &u in &mu {
                let l = u.max(s2);
                cost += l.ln() + u / l;
            }
            Some(-cost)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Projection,
    Stochastic,
}

/// Grid-then-refine maximum-likelihood estimator for two sources.
#[derive(Clone, Debug)]
pub struct MlEstimator {
    compressor: CompressionOperator,
    positions: ElementPositions,
    kind: Kind,
    options: MlOptions,
    true_theta1: f64,
    grid: Vec<f64>,
    /// Compressed steering vectors on the grid.
    steer: Vec<Vec<C64>>,
    /// `||a_i||^2`.
    gram_diag: Vec<f64>,
    /// `a_i^H a_j`, row-major `G x G`.
    gram: Vec<C64>,
}

impl MlEstimator {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        if scenario.p() != 2 {
            return Err(Error::Validation(format!(
                "ML search is implemented for p = 2, got p = {}",
                scenario.p()
            )));
        }
        if scenario.m() < 3 {
            return Err(Error::Degenerate("ML search needs m > p".into()));
        }
        let kind = match (&scenario.sources, scenario.ml.cov_criterion) {
            (Sources::Covariance { .. }, CovCriterion::Stochastic) => Kind::Stochastic,
            _ => Kind::Projection,
        };
        let n = scenario.n as f64;
        let step = 2.0 * PI / n / f64::from(scenario.ml.points_per_rayleigh);
        let count = (PI / step).ceil() as usize;
        let grid: Vec<f64> = (1..count)
            .map(|k| -PI / 2.0 + k as f64 * step)
            .filter(|t| *t < PI / 2.0)
            .collect();
        let positions = scenario.positions();
        let steer = grid
            .iter()
            .map(|&t| scenario.compressor.apply(&steering_vector(&positions, ElectricalAngle::new(t))))
            .collect::<Result<Vec<_>>>()?;
        let g = grid.len();
        let gram_diag: Vec<f64> = steer.iter().map(|a| crate::linalg::norm_sqr(a)).collect();
        let mut gram = vec![C64::new(0.0, 0.0); g * g];
        for i in 0..g {
            for j in (i + 1)..g {
                let v = dot_conj(&steer[i], &steer[j]);
                gram[i * g + j] = v;
                gram[j * g + i] = v.conj();
            }
        }
        Ok(MlEstimator {
            compressor: scenario.compressor.clone(),
            positions,
            kind,
            options: scenario.ml,
            true_theta1: scenario.thetas[0].radians(),
            grid,
            steer,
            gram_diag,
            gram,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn steering(&self, theta: f64) -> Vec<C64> {
        self.compressor
            .apply(&steering_vector(&self.positions, ElectricalAngle::new(theta)))
            .expect("compressor matches the dense array")
    }

    /// Criterion at an arbitrary pair; larger is better.
    pub fn score(&self, w: &CMatrix, theta1: f64, theta2: f64) -> Option<f64> {
        let s = outer(w);
        self.score_with(&s, &self.data(w, &s), theta1, theta2)
    }

    fn data(&self, w: &CMatrix, s: &CMatrix) -> PairData {
        PairData {
            trace: s.trace().re,
            m: w.rows(),
            snapshots: w.cols() as f64,
        }
    }

    fn score_with(&self, s: &CMatrix, data: &PairData, theta1: f64, theta2: f64) -> Option<f64> {
        let a1 = self.steering(theta1);
        let a2 = self.steering(theta2);
        let s2 = s.mul_vec(&a2).expect("square");
        let s1 = s.mul_vec(&a1).expect("square");
        pair_score(
            self.kind,
            data,
            crate::linalg::norm_sqr(&a1),
            crate::linalg::norm_sqr(&a2),
            dot_conj(&a1, &a2),
            dot_conj(&a1, &s1).re,
            dot_conj(&a2, &s2).re,
            dot_conj(&a1, &s2),
        )
    }

    /// Best ordered grid pair `(i, j)`, `i < j`.
    fn grid_search(&self, w: &CMatrix, s: &CMatrix, data: &PairData) -> Result<(usize, usize)> {
        let g = self.grid.len();
        let (m, big_m) = w.shape();
        // c_ij = a_i^H S a_j, via S a_j (cost m per pair) or via B = A^H W (cost M per pair).
        let via_s = m <= big_m;
        let cols: Vec<Vec<C64>> = if via_s {
            self.steer.iter().map(|a| s.mul_vec(a).expect("square")).collect()
        } else {
            self.steer.iter().map(|a| w.adjoint_mul_vec(a).expect("m rows")).collect()
        };
        let cdiag: Vec<f64> = (0..g)
            .map(|i| {
                if via_s {
                    dot_conj(&self.steer[i], &cols[i]).re
                } else {
                    crate::linalg::norm_sqr(&cols[i])
                }
            })
            .collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..g {
            for j in (i + 1)..g {
                let c12 = if via_s {
                    dot_conj(&self.steer[i], &cols[j])
                } else {
                    // B_it = w_t^H a_i, so a_i^H S a_j = sum_t conj(B_it) B_jt.
                    dot_conj(&cols[i], &cols[j])
                };
                let Some(v) = pair_score(
                    self.kind,
                    data,
                    self.gram_diag[i],
                    self.gram_diag[j],
                    self.gram[i * g + j],
                    cdiag[i],
                    cdiag[j],
                    c12,
                ) else {
                    continue;
                };
                if best.is_none_or(|(b, _, _)| v > b) {
                    best = Some((v, i, j));
                }
            }
        }
        best.map(|(_, i, j)| (i, j))
            .ok_or_else(|| Error::Degenerate("every grid pair is degenerate".into()))
    }

    /// Ordered pair maximizing the criterion.
    pub fn estimate_pair(&self, w: &CMatrix) -> Result<(f64, f64)> {
        let s = outer(w);
        let data = self.data(w, &s);
        let (i, j) = self.grid_search(w, &s, &data)?;
        let (mut t1, mut t2) = (self.grid[i], self.grid[j]);
        let mut best = self
            .score_with(&s, &data, t1, t2)
            .expect("grid pair is nondegenerate");
        let mut step = 0.5 * (self.grid[1] - self.grid[0]);
        let lo = -PI / 2.0;
        let hi = PI / 2.0;
        while step >= self.options.refine_step {
            let mut moved = false;
            for (d1, d2) in [
                (1.0, 0.0),
                (-1.0, 0.0),
                (0.0, 1.0),
                (0.0, -1.0),
                (1.0, 1.0),
                (-1.0, -1.0),
                (1.0, -1.0),
                (-1.0, 1.0),
            ] {
                let c1 = t1 + d1 * step;
                let c2 = t2 + d2 * step;
                if !(lo < c1 && c1 < c2 && c2 < hi) {
                    continue;
                }
                if let Some(v) = self.score_with(&s, &data, c1, c2) {
                    if v > best {
                        best = v;
                        t1 = c1;
                        t2 = c2;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        Ok((t1, t2))
    }

    /// `(theta_1_hat, theta_2_hat)` after association to the true angles.
    pub fn estimate(&self, w: &CMatrix) -> Result<(f64, f64)> {
        let (a, b) = self.estimate_pair(w)?;
        Ok(match self.options.association {
            Association::Ordered => (a, b),
            Association::Proximity => {
                if (a - self.true_theta1).abs() <= (b - self.true_theta1).abs() {
                    (a, b)
                } else {
                    (b, a)
                }
            }
        })
    }
}

/// One-shot ML estimate; build an [`MlEstimator`] once when looping.
pub fn ml_estimate(w: &CMatrix, scenario: &Scenario) -> Result<(f64, f64)> {
    MlEstimator::new(scenario)?.estimate(w)
}

fn compressed_columns(psi: &CompressionOperator, cols: &[Vec<C64>]) -> Result<CMatrix> {
    let c = cols.iter().map(|v| psi.apply(v)).collect::<Result<Vec<_>>>()?;
    CMatrix::from_columns(&c)
}

fn mode_and_derivative(scenario: &Scenario) -> Result<(CMatrix, CMatrix)> {
    let positions = scenario.positions();
    let k: Vec<Vec<C64>> = scenario.thetas.iter().map(|&t| steering_vector(&positions, t)).collect();
    let d: Vec<Vec<C64>> = scenario
        .thetas
        .iter()
        .map(|&t| steering_derivative(&positions, t))
        .collect();
    Ok((
        compressed_columns(&scenario.compressor, &k)?,
        compressed_columns(&scenario.compressor, &d)?,
    ))
}

/// `D^H P_H^perp D`.
pub fn projected_derivative_gram(h: &CMatrix, d: &CMatrix) -> Result<CMatrix> {
    let hh = h.adjoint().matmul(h)?;
    let hd = h.adjoint().matmul(d)?;
    let dd = d.adjoint().matmul(d)?;
    let corr = hd.adjoint().matmul(&hpd_inverse(&hh)?)?.matmul(&hd)?;
    dd.sub(&corr)
}

/// Cramér-Rao bound on `theta_1` in rad^2.
///
/// Mean model: the conditional bound with unknown complex amplitudes.
/// Covariance model: Slepian-Bangs information over the angles, every real
/// parameter of `R_aa` and `sigma2`, inverted jointly.
pub fn crb_theta1(scenario: &Scenario, snr_db: f64) -> Result<f64> {
    let sigma2 = scenario.sigma2_at(snr_db);
    let (h, d) = mode_and_derivative(scenario)?;
    let big_m = f64::from(scenario.snapshots);
    let p = scenario.p();
    let fim = match &scenario.sources {
        Sources::Mean { alpha } => {
            let q = projected_derivative_gram(&h, &d)?;
            let mut f = vec![0.0; p * p];
            for i in 0..p {
                for j in 0..p {
                    f[i * p + j] = 2.0 * big_m / sigma2 * (q[(i, j)] * alpha[j] * alpha[i].conj()).re;
                }
            }
            (p, f)
        }
        Sources::Covariance { r_alpha } => slepian_bangs(&h, &d, r_alpha, sigma2, big_m)?,
    };
    let (dim, f) = fim;
    let inv = spd_inverse(dim, &f).map_err(|_| Error::Singular("Fisher information is singular"))?;
    Ok(inv[0])
}

fn slepian_bangs(
    h: &CMatrix,
    d: &CMatrix,
    r_alpha: &CMatrix,
    sigma2: f64,
    big_m: f64,
) -> Result<(usize, Vec<f64>)> {
    let (m, p) = h.shape();
    let mut r = h.matmul(r_alpha)?.matmul(&h.adjoint())?;
    for i in 0..m {
        r[(i, i)] += sigma2;
    }
    let r_inv = hpd_inverse(&r)?;
    let hr = h.matmul(r_alpha)?;
    let rank1 = |u: &[C64], v: &[C64]| CMatrix::from_fn(m, m, |a, b| u[a] * v[b].conj());
    let mut derivs: Vec<CMatrix> = Vec::new();
    for k in 0..p {
        let dk = d.column(k);
        let gk = hr.column(k);
        derivs.push(rank1(&dk, &gk).add(&rank1(&gk, &dk))?);
    }
    let i_unit = C64::new(0.0, 1.0);
    for a in 0..p {
        let ha = h.column(a);
        derivs.push(rank1(&ha, &ha));
        for b in (a + 1)..p {
            let hb = h.column(b);
            let ab = rank1(&ha, &hb);
            let ba = rank1(&hb, &ha);
            derivs.push(ab.add(&ba)?);
            derivs.push(ab.scale(i_unit).sub(&ba.scale(i_unit))?);
        }
    }
    derivs.push(CMatrix::identity(m));
    let q: Vec<CMatrix> = derivs
        .iter()
        .map(|dr| r_inv.matmul(dr))
        .collect::<Result<Vec<_>>>()?;
    let dim = q.len();
    let mut f = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let mut acc = 0.0;
            for a in 0..m {
                for b in 0..m {
                    acc += (q[i][(a, b)] * q[j][(b, a)]).re;
                }
            }
            f[i * dim + j] = big_m * acc;
            f[j * dim + i] = big_m * acc;
        }
    }
    Ok((dim, f))
}

pub fn crb_curve(scenario: &Scenario) -> Result<Vec<f64>> {
    scenario.snr_grid_db.iter().map(|&s| crb_theta1(scenario, s)).collect()
}

/// Result of one Monte-Carlo trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub theta1_hat: f64,
    pub theta2_hat: f64,
    pub squared_error: f64,
    /// Single-dimension swap event occurred (`None` when not recorded).
    pub swap: Option<bool>,
}

/// Everything a trial needs, prepared once per scenario.
#[derive(Clone, Debug)]
pub struct TrialRunner {
    scenario: Scenario,
    estimator: MlEstimator,
    /// Compressed modes and their split, for swap flags.
    swap_basis: Option<(CMatrix, SubspaceSplit)>,
}

impl TrialRunner {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let estimator = MlEstimator::new(scenario)?;
        let swap_basis = if scenario.ml.record_swaps {
            let model = scenario.model_at(0.0)?;
            let modes = model.modes(Some(&scenario.compressor))?;
            let split = model.subspace_split(&modes)?;
            Some((modes.h, split))
        } else {
            None
        };
        Ok(TrialRunner {
            scenario: scenario.clone(),
            estimator,
            swap_basis,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn run(&self, snr_db: f64, trial: u64) -> Result<TrialOutcome> {
        let w = simulate_snapshots(&self.scenario, snr_db, trial)?;
        let (t1, t2) = self.estimator.estimate(&w)?;
        let err = t1 - self.scenario.thetas[0].radians();
        let swap = match &self.swap_basis {
            Some((h, split)) => {
                let cols: Vec<Vec<C64>> = (0..w.cols()).map(|c| w.column(c)).collect();
                Some(crate::bounds::single_swap_event(h, &split.u_0, &cols)?)
            }
            None => None,
        };
        Ok(TrialOutcome {
            theta1_hat: t1,
            theta2_hat: t2,
            squared_error: err * err,
            swap,
        })
    }
}

/// Pairwise summation; the result depends only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsePoint {
    pub snr_db: f64,
    pub mse: f64,
    pub trials: u64,
    /// Fraction of trials with a swap, when recorded.
    pub swap_frequency: Option<f64>,
    /// Per-trial `(theta_1_hat, theta_2_hat)` in trial order.
    pub estimates: Vec<(f64, f64)>,
}

impl MsePoint {
    /// Aggregates outcomes listed in trial order.
    pub fn from_outcomes(snr_db: f64, outcomes: &[TrialOutcome]) -> Self {
        let errs: Vec<f64> = outcomes.iter().map(|o| o.squared_error).collect();
        let trials = outcomes.len() as u64;
        let swaps: Option<Vec<bool>> = outcomes.iter().map(|o| o.swap).collect();
        MsePoint {
            snr_db,
            mse: pairwise_sum(&errs) / trials as f64,
            trials,
            swap_frequency: swaps
                .map(|s| s.iter().filter(|&&x| x).count() as f64 / trials as f64),
            estimates: outcomes.iter().map(|o| (o.theta1_hat, o.theta2_hat)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseCurve {
    pub points: Vec<MsePoint>,
}

impl MseCurve {
    pub fn snr_db(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.snr_db).collect()
    }

    pub fn mse(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mse).collect()
    }
}

/// Monte-Carlo MSE of `theta_1_hat` at one SNR, sequentially.
pub fn mse_point(runner: &TrialRunner, snr_db: f64) -> Result<MsePoint> {
    let outcomes = (0..runner.scenario.trials)
        .map(|t| runner.run(snr_db, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(MsePoint::from_outcomes(snr_db, &outcomes))
}

/// Monte-Carlo MSE over the scenario's SNR grid, sequentially.
pub fn mse_sweep(scenario: &Scenario) -> Result<MseCurve> {
    let runner = TrialRunner::new(scenario)?;
    let points = scenario
        .snr_grid_db
        .iter()
        .map(|&s| mse_point(&runner, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(MseCurve { points })
}

/// `sigma_T^2 = P_ss pi^2/12 + (1 - P_ss) sigma_CR^2` pointwise.
pub fn method_of_intervals(pss: &[f64], crb: &[f64]) -> Result<Vec<f64>> {
    if pss.len() != crb.len() {
        return Err(Error::DimensionMismatch {
            expected: crb.len(),
            found: pss.len(),
        });
    }
    pss.iter()
        .zip(crb)
        .map(|(&p, &c)| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain {
                    what: "swap probability",
                    value: p,
                });
            }
            Ok(p * SIGMA0_SQ + (1.0 - p) * c)
        })
        .collect()
}

/// Smallest SNR from which `curve <= multiplier * crb` holds for the rest of
/// the grid, linearly interpolated in dB between straddling grid points.
pub fn threshold_snr(snr_db: &[f64], curve: &[f64], crb: &[f64], multiplier: f64) -> Result<f64> {
    if curve.len() != snr_db.len() || crb.len() != snr_db.len() {
        return Err(Error::DimensionMismatch {
            expected: snr_db.len(),
            found: if curve.len() != snr_db.len() { curve.len() } else { crb.len() },
        });
    }
    if snr_db.is_empty() {
        return Err(Error::NoThresholdInRange);
    }
    if !(multiplier > 0.0) {
        return Err(Error::Domain {
            what: "threshold multiplier",
            value: multiplier,
        });
    }
    // Excess over the criterion in dB; <= 0 means the curve is near the CRB.
    let excess: Vec<f64> = curve
        .iter()
        .zip(crb)
        .map(|(&c, &b)| 10.0 * (c / (multiplier * b)).log10())
        .collect();
    let mut k = excess.len();
    while k > 0 && excess[k - 1] <= 0.0 {
        k -= 1;
    }
    if k == excess.len() {
        return Err(Error::NoThresholdInRange);
    }
    if k == 0 {
        return Ok(snr_db[0]);
    }
    let (e0, e1) = (excess[k - 1], excess[k]);
    let frac = if e0.is_finite() { e0 / (e0 - e1) } else { 1.0 };
    Ok(snr_db[k - 1] + frac * (snr_db[k] - snr_db[k - 1]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayThreshold {
    pub label: String,
    /// Number of compressed measurements.
    pub m: usize,
    pub threshold_snr_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    /// Dense array size.
    pub n: u32,
    pub arrays: Vec<ArrayThreshold>,
    /// Threshold of the last array minus that of the first.
    pub delta_db: f64,
    /// `10 log10(m_first / m_last)`, i.e. `10 log10(n/m)` against the dense array.
    pub predicted_delta_db: f64,
    pub tolerance_db: Option<f64>,
    pub pass: Option<bool>,
}

impl ThresholdReport {
    pub fn new(n: u32, arrays: Vec<ArrayThreshold>, tolerance_db: Option<f64>) -> Result<Self> {
        let (first, last) = match (arrays.first(), arrays.last()) {
            (Some(f), Some(l)) if arrays.len() >= 2 => (f, l),
            _ => return Err(Error::Validation("threshold report needs two arrays".into())),
        };
        let delta_db = last.threshold_snr_db - first.threshold_snr_db;
        let predicted_delta_db = 10.0 * (first.m as f64 / last.m as f64).log10();
        let pass = tolerance_db.map(|t| (delta_db - predicted_delta_db).abs() <= t);
        Ok(ThresholdReport {
            n,
            arrays,
            delta_db,
            predicted_delta_db,
            tolerance_db,
            pass,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::coprime_positions;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    fn mean_scenario(n: u32, psi: CompressionOperator) -> Scenario {
        Scenario {
            n,
            compressor: psi,
            thetas: vec![ElectricalAngle::new(0.0), ElectricalAngle::new(PI / n as f64)],
            sources: Sources::Mean { alpha: vec![one(), one()] },
            snapshots: 1,
            snr_grid_db: vec![0.0, 10.0],
            trials: 4,
            master_seed: 7,
            ml: MlOptions::default(),
        }
    }

    fn cov_scenario(n: u32, psi: CompressionOperator, snapshots: u32) -> Scenario {
        Scenario {
            sources: Sources::Covariance { r_alpha: CMatrix::identity(2) },
            snapshots,
            ..mean_scenario(n, psi)
        }
    }

    #[test]
    fn noise_free_snapshots_are_exact() {
        let psi = CompressionOperator::selection(&coprime_positions(5, 2).unwrap(), 16).unwrap();
        let mut sc = mean_scenario(16, psi.clone());
        sc.snapshots = 3;
        let w = simulate_snapshots(&sc, f64::INFINITY, 0).unwrap();
        let x = sc.model_at(0.0).unwrap();
        let SignalModel::Mean(mm) = x else { unreachable!() };
        let z = psi.apply(&mm.signal()).unwrap();
        for c in 0..3 {
            assert_eq!(w.column(c), z);
        }
    }

    #[test]
    fn identity_compressor_shares_noise() {
        let dense = mean_scenario(8, CompressionOperator::identity(8));
        let sel = dense.with_compressor(
            CompressionOperator::selection(&ElementPositions::new(vec![0, 1, 3, 7]).unwrap(), 8).unwrap(),
        );
        let a = simulate_snapshots(&dense, 3.0, 5).unwrap();
        let b = simulate_snapshots(&sel, 3.0, 5).unwrap();
        for (r, &p) in [0usize, 1, 3, 7].iter().enumerate() {
            assert_eq!(a[(p, 0)], b[(r, 0)]);
        }
    }

    #[test]
    fn noise_free_ml_recovers_angles() {
        let sc = mean_scenario(16, CompressionOperator::identity(16));
        let w = simulate_snapshots(&sc, f64::INFINITY, 0).unwrap();
        let (t1, t2) = ml_estimate(&w, &sc).unwrap();
        assert!(t1.abs() <= 1e-4 && (t2 - PI / 16.0).abs() <= 1e-4, "{t1} {t2}");

        // Off-grid angles are reached by the refinement.
        let mut off = mean_scenario(16, CompressionOperator::identity(16));
        off.thetas = vec![ElectricalAngle::new(0.0123), ElectricalAngle::new(0.3777)];
        let w = simulate_snapshots(&off, f64::INFINITY, 0).unwrap();
        let (t1, t2) = ml_estimate(&w, &off).unwrap();
        assert!((t1 - 0.0123).abs() <= 1e-4 && (t2 - 0.3777).abs() <= 1e-4, "{t1} {t2}");
    }

    #[test]
    fn noise_free_criterion_peaks_at_truth() {
        let sc = mean_scenario(12, CompressionOperator::identity(12));
        let w = simulate_snapshots(&sc, f64::INFINITY, 0).unwrap();
        let est = MlEstimator::new(&sc).unwrap();
        let truth = est.score(&w, 0.0, PI / 12.0).unwrap();
        let g = est.grid();
        for i in (0..g.len()).step_by(3) {
            for j in ((i + 1)..g.len()).step_by(5) {
                if let Some(v) = est.score(&w, g[i], g[j]) {
                    assert!(v <= truth * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn cov_noise_free_ml() {
        let psi = CompressionOperator::selection(&coprime_positions(5, 2).unwrap(), 16).unwrap();
        let sc = cov_scenario(16, psi, 50);
        let w = simulate_snapshots(&sc, 60.0, 1).unwrap();
        let (t1, t2) = ml_estimate(&w, &sc).unwrap();
        assert!(t1.abs() < 2e-3 && (t2 - PI / 16.0).abs() < 2e-3, "{t1} {t2}");
    }

    #[test]
    fn single_source_crb_closed_form() {
        for n in [4u32, 9, 16] {
            let sc = Scenario {
                thetas: vec![ElectricalAngle::new(0.3)],
                sources: Sources::Mean { alpha: vec![C64::new(0.6, -0.8)] },
                snapshots: 5,
                ..mean_scenario(n, CompressionOperator::identity(n as usize))
            };
            let snr = 7.0;
            let sigma2 = sc.sigma2_at(snr);
            let nf = n as f64;
            let expect = 6.0 * sigma2 / (5.0 * 1.0 * nf * (nf * nf - 1.0));
            let got = crb_theta1(&sc, snr).unwrap();
            assert!((got - expect).abs() <= 1e-9 * expect, "{got} {expect}");
        }
    }

    #[test]
    fn cov_crb_matches_stochastic_formula() {
        let psi = CompressionOperator::selection(&coprime_positions(5, 2).unwrap(), 16).unwrap();
        let mut sc = cov_scenario(16, psi, 20);
        sc.sources = Sources::Covariance {
            r_alpha: CMatrix::from_rows(&[
                vec![C64::new(1.0, 0.0), C64::new(0.3, 0.2)],
                vec![C64::new(0.3, -0.2), C64::new(0.7, 0.0)],
            ])
            .unwrap(),
        };
        let snr = -3.0;
        let sigma2 = sc.sigma2_at(snr);
        let Sources::Covariance { r_alpha } = &sc.sources else { unreachable!() };
        let (h, d) = mode_and_derivative(&sc).unwrap();
        let mut r = h.matmul(r_alpha).unwrap().matmul(&h.adjoint()).unwrap();
        for i in 0..8 {
            r[(i, i)] += sigma2;
        }
        let mid = r_alpha
            .matmul(&h.adjoint())
            .unwrap()
            .matmul(&hpd_inverse(&r).unwrap())
            .unwrap()
            .matmul(&h)
            .unwrap()
            .matmul(r_alpha)
            .unwrap();
        let q = projected_derivative_gram(&h, &d).unwrap();
        let mut f = vec![0.0; 4];
        for i in 0..2 {
            for j in 0..2 {
                f[i * 2 + j] = 2.0 * 20.0 / sigma2 * (q[(i, j)] * mid[(j, i)]).re;
            }
        }
        let expect = spd_inverse(2, &f).unwrap()[0];
        let got = crb_theta1(&sc, snr).unwrap();
        assert!((got - expect).abs() <= 1e-8 * expect, "{got} {expect}");
    }

    #[test]
    fn crb_orderings() {
        let dense = cov_scenario(16, CompressionOperator::identity(16), 10);
        let sparse = dense.with_compressor(
            CompressionOperator::selection(&coprime_positions(5, 2).unwrap(), 16).unwrap(),
        );
        let mut last = f64::INFINITY;
        for k in 0..10 {
            let snr = -20.0 + 4.0 * k as f64;
            let a = crb_theta1(&dense, snr).unwrap();
            let b = crb_theta1(&sparse, snr).unwrap();
            assert!(a <= b && a < last);
            last = a;
        }
        let more = Scenario { snapshots: 20, ..dense.clone() };
        assert!(crb_theta1(&more, 0.0).unwrap() < crb_theta1(&dense, 0.0).unwrap());
        let mean_dense = mean_scenario(16, CompressionOperator::identity(16));
        let hi = crb_theta1(&mean_dense, 40.0).unwrap();
        let hi10 = crb_theta1(&mean_dense, 50.0).unwrap();
        assert!((hi / hi10 - 10.0).abs() < 1e-9);
    }

    #[test]
    fn intervals_arithmetic() {
        let v = method_of_intervals(&[0.0, 1.0, 0.5], &[0.2, 0.2, 0.1]).unwrap();
        assert_eq!(v[0], 0.2);
        assert_eq!(v[1], SIGMA0_SQ);
        assert!((v[2] - (0.5 * SIGMA0_SQ + 0.05)).abs() < 1e-15);
        assert!(method_of_intervals(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn threshold_cases() {
        let snr = [0.0, 1.0, 2.0, 3.0];
        let crb = [0.1, 0.05, 0.02, 0.01];
        assert_eq!(threshold_snr(&snr, &crb, &crb, 2.0).unwrap(), 0.0);
        let flat = [SIGMA0_SQ; 4];
        assert!(matches!(
            threshold_snr(&snr, &flat, &crb, 2.0),
            Err(Error::NoThresholdInRange)
        ));
        // 4x CRB at 1 dB, 1x at 2 dB: excess +3.01 dB and -3.01 dB, so midway.
        let curve = [0.8, 0.2, 0.02, 0.01];
        let t = threshold_snr(&snr, &curve, &crb, 2.0).unwrap();
        assert!((t - 1.5).abs() < 1e-12, "{t}");
        // A late excursion above the criterion moves the threshold past it.
        let bumpy = [0.1, 0.05, 0.2, 0.01];
        assert!(threshold_snr(&snr, &bumpy, &crb, 2.0).unwrap() > 2.0);
    }

    #[test]
    fn report_prediction() {
        let r = ThresholdReport::new(
            36,
            vec![
                ArrayThreshold { label: "dense".into(), m: 36, threshold_snr_db: -10.0 },
                ArrayThreshold { label: "coprime".into(), m: 12, threshold_snr_db: -5.0 },
            ],
            Some(1.5),
        )
        .unwrap();
        assert!((r.predicted_delta_db - 10.0 * 3f64.log10()).abs() < 1e-12);
        assert_eq!(r.delta_db, 5.0);
        assert_eq!(r.pass, Some(true));
    }

    #[test]
    fn sweep_is_reproducible() {
        let psi = CompressionOperator::selection(&coprime_positions(5, 2).unwrap(), 16).unwrap();
        let sc = mean_scenario(16, psi);
        let a = mse_sweep(&sc).unwrap();
        let b = mse_sweep(&sc).unwrap();
        assert_eq!(a, b);
        assert!(a.points.iter().all(|p| p.mse >= 0.0 && p.trials == 4));
    }
}
