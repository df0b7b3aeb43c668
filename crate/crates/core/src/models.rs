//! Parameterized-mean and parameterized-covariance measurement models, the
//! compressed mode matrix `H = Psi K`, and its signal/orthogonal subspace split.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by std methods when dev-dependencies link std
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{steering_vector, CompressionOperator, ElectricalAngle, ElementPositions};
use crate::linalg::{
    dot_conj, hermitian_eigen, norm_sqr, orthogonal_complement, thin_svd, CMatrix, C64,
};

/// Relative tolerance deciding that the mode matrix has rank `p`.
pub const RANK_TOL: f64 = 1e-8;
/// Relative width of the band inside which two `h_min` criteria count as tied.
pub const TIE_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-10;

/// Per-source, per-element SNR in dB for a source of power `power`.
pub fn snr_db(power: f64, sigma2: f64) -> f64 {
    10.0 * (power / sigma2).log10()
}

/// Noise power giving `snr_db` for a source of power `power`.
pub fn sigma2_for_snr(power: f64, snr_db: f64) -> f64 {
    power * 10f64.powf(-snr_db / 10.0)
}

fn mode_matrix(positions: &ElementPositions, thetas: &[ElectricalAngle]) -> CMatrix {
    let columns: Vec<Vec<C64>> = thetas
        .iter()
        .map(|&t| steering_vector(positions, t))
        .collect();
    CMatrix::from_columns(&columns).expect("steering vectors share a length")
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain {
            what: "noise power",
            value: sigma2,
        });
    }
    Ok(())
}

/// Deterministic mode weights: `y ~ CN_n(K alpha, sigma2 I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanModel {
    thetas: Vec<ElectricalAngle>,
    alpha: Vec<C64>,
    sigma2: f64,
    positions: ElementPositions,
}

impl MeanModel {
    pub fn new(
        positions: ElementPositions,
        thetas: Vec<ElectricalAngle>,
        alpha: Vec<C64>,
        sigma2: f64,
    ) -> Result<Self> {
        if thetas.is_empty() || thetas.len() > positions.len() {
            return Err(Error::Validation(format!(
                "need 1 <= p <= n sources, got p={} for n={}",
                thetas.len(),
                positions.len()
            )));
        }
        if alpha.len() != thetas.len() {
            return Err(Error::DimensionMismatch {
                expected: thetas.len(),
                found: alpha.len(),
            });
        }
        check_sigma2(sigma2)?;
        Ok(MeanModel {
            thetas,
            alpha,
            sigma2,
            positions,
        })
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        Ok(MeanModel {
            sigma2,
            ..self.clone()
        })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn p(&self) -> usize {
        self.thetas.len()
    }

    pub fn thetas(&self) -> &[ElectricalAngle] {
        &self.thetas
    }

    pub fn alpha(&self) -> &[C64] {
        &self.alpha
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn positions(&self) -> &ElementPositions {
        &self.positions
    }

    /// SNR of the first source.
    pub fn snr_db(&self) -> f64 {
        snr_db(self.alpha[0].norm_sqr(), self.sigma2)
    }

    pub fn mode_matrix(&self) -> CMatrix {
        mode_matrix(&self.positions, &self.thetas)
    }

    /// `x(theta) = K alpha`.
    pub fn signal(&self) -> Vec<C64> {
        self.mode_matrix()
            .mul_vec(&self.alpha)
            .expect("alpha has p entries")
    }
}

/// Random mode weights `alpha ~ CN_p(0, R_aa)`: `y ~ CN_n(0, K R_aa K^H + sigma2 I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    thetas: Vec<ElectricalAngle>,
    r_alpha: CMatrix,
    sigma2: f64,
    positions: ElementPositions,
}

impl CovarianceModel {
    pub fn new(
        positions: ElementPositions,
        thetas: Vec<ElectricalAngle>,
        r_alpha: CMatrix,
        sigma2: f64,
    ) -> Result<Self> {
        let p = thetas.len();
        if p == 0 || p > positions.len() {
            return Err(Error::Validation(format!(
                "need 1 <= p <= n sources, got p={p} for n={}",
                positions.len()
            )));
        }
        if r_alpha.shape() != (p, p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: r_alpha.rows(),
            });
        }
        let scale = r_alpha.frobenius_norm().max(1.0);
        if r_alpha.hermitian_error() > PSD_TOL * scale {
            return Err(Error::Validation("source covariance is not Hermitian".into()));
        }
        let eig = hermitian_eigen(&r_alpha)?;
        if eig.values[p - 1] < -PSD_TOL * scale {
            return Err(Error::Validation(
                "source covariance is not positive semidefinite".into(),
            ));
        }
        check_sigma2(sigma2)?;
        Ok(CovarianceModel {
            thetas,
            r_alpha,
            sigma2,
            positions,
        })
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        Ok(CovarianceModel {
            sigma2,
            ..self.clone()
        })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn p(&self) -> usize {
        self.thetas.len()
    }

    pub fn thetas(&self) -> &[ElectricalAngle] {
        &self.thetas
    }

    pub fn r_alpha(&self) -> &CMatrix {
        &self.r_alpha
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn positions(&self) -> &ElementPositions {
        &self.positions
    }

    /// SNR of the first source, `[R_aa]_11 / sigma2`.
    pub fn snr_db(&self) -> f64 {
        snr_db(self.r_alpha[(0, 0)].re, self.sigma2)
    }

    pub fn mode_matrix(&self) -> CMatrix {
        mode_matrix(&self.positions, &self.thetas)
    }

    /// Noise-free signal covariance `R_xx = K R_aa K^H`.
    pub fn r_xx(&self) -> CMatrix {
        let k = self.mode_matrix();
        k.matmul(&self.r_alpha)
            .and_then(|kr| kr.matmul(&k.adjoint()))
            .expect("conforming shapes")
    }

    /// `R_yy = R_xx + sigma2 I`.
    pub fn r_yy(&self) -> CMatrix {
        let mut r = self.r_xx();
        for i in 0..r.rows() {
            r[(i, i)] += self.sigma2;
        }
        r
    }
}

/// Either measurement model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalModel {
    Mean(MeanModel),
    Covariance(CovarianceModel),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mean,
    Covariance,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mean => "mean",
            ModelKind::Covariance => "covariance",
        }
    }
}

impl SignalModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            SignalModel::Mean(_) => ModelKind::Mean,
            SignalModel::Covariance(_) => ModelKind::Covariance,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            SignalModel::Mean(m) => m.n(),
            SignalModel::Covariance(m) => m.n(),
        }
    }

    pub fn p(&self) -> usize {
        match self {
            SignalModel::Mean(m) => m.p(),
            SignalModel::Covariance(m) => m.p(),
        }
    }

    pub fn sigma2(&self) -> f64 {
        match self {
            SignalModel::Mean(m) => m.sigma2(),
            SignalModel::Covariance(m) => m.sigma2(),
        }
    }

    pub fn snr_db(&self) -> f64 {
        match self {
            SignalModel::Mean(m) => m.snr_db(),
            SignalModel::Covariance(m) => m.snr_db(),
        }
    }

    pub fn thetas(&self) -> &[ElectricalAngle] {
        match self {
            SignalModel::Mean(m) => m.thetas(),
            SignalModel::Covariance(m) => m.thetas(),
        }
    }

    pub fn positions(&self) -> &ElementPositions {
        match self {
            SignalModel::Mean(m) => m.positions(),
            SignalModel::Covariance(m) => m.positions(),
        }
    }

    /// Power of the first source (the one whose SNR is reported).
    pub fn reference_power(&self) -> f64 {
        match self {
            SignalModel::Mean(m) => m.alpha()[0].norm_sqr(),
            SignalModel::Covariance(m) => m.r_alpha()[(0, 0)].re,
        }
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Ok(match self {
            SignalModel::Mean(m) => SignalModel::Mean(m.with_sigma2(sigma2)?),
            SignalModel::Covariance(m) => SignalModel::Covariance(m.with_sigma2(sigma2)?),
        })
    }

    pub fn with_snr_db(&self, snr_db: f64) -> Result<Self> {
        self.with_sigma2(sigma2_for_snr(self.reference_power(), snr_db))
    }

    /// Modes after `psi`, or the raw dense modes when `psi` is `None`.
    pub fn modes(&self, psi: Option<&CompressionOperator>) -> Result<CompressedModes> {
        match (self, psi) {
            (SignalModel::Mean(m), Some(psi)) => compressed_modes_mean(m, psi),
            (SignalModel::Mean(m), None) => Ok(uncompressed_modes_mean(m)),
            (SignalModel::Covariance(m), Some(psi)) => compressed_modes_cov(m, psi),
            (SignalModel::Covariance(m), None) => Ok(uncompressed_modes_cov(m)),
        }
    }

    pub fn subspace_split(&self, modes: &CompressedModes) -> Result<SubspaceSplit> {
        match self {
            SignalModel::Mean(_) => subspace_split_mean(modes),
            SignalModel::Covariance(_) => subspace_split_cov(modes),
        }
    }

    pub fn hmin(&self, modes: &CompressedModes) -> Result<MinimumMode> {
        match self {
            SignalModel::Mean(_) => hmin_mean(modes),
            SignalModel::Covariance(_) => hmin_cov(modes),
        }
    }
}

/// Compressed modes `H = Psi K` with the model-specific signal term.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedModes {
    /// m x p.
    pub h: CMatrix,
    /// `z = H alpha`, mean model only.
    pub z: Option<Vec<C64>>,
    /// `R_zz = H R_aa H^H`, covariance model only.
    pub r_zz: Option<CMatrix>,
}

impl CompressedModes {
    pub fn m(&self) -> usize {
        self.h.rows()
    }

    pub fn p(&self) -> usize {
        self.h.cols()
    }
}

fn compress_modes(k: &CMatrix, psi: &CompressionOperator) -> Result<CMatrix> {
    if psi.n() != k.rows() {
        return Err(Error::DimensionMismatch {
            expected: k.rows(),
            found: psi.n(),
        });
    }
    let columns = (0..k.cols())
        .map(|c| psi.apply(&k.column(c)))
        .collect::<Result<Vec<_>>>()?;
    CMatrix::from_columns(&columns)
}

pub fn compressed_modes_mean(model: &MeanModel, psi: &CompressionOperator) -> Result<CompressedModes> {
    let h = compress_modes(&model.mode_matrix(), psi)?;
    let z = h.mul_vec(model.alpha())?;
    Ok(CompressedModes {
        h,
        z: Some(z),
        r_zz: None,
    })
}

/// Dense modes `K` with `x = K alpha`, no compressor involved.
pub fn uncompressed_modes_mean(model: &MeanModel) -> CompressedModes {
    CompressedModes {
        h: model.mode_matrix(),
        z: Some(model.signal()),
        r_zz: None,
    }
}

pub fn compressed_modes_cov(
    model: &CovarianceModel,
    psi: &CompressionOperator,
) -> Result<CompressedModes> {
    let h = compress_modes(&model.mode_matrix(), psi)?;
    let r_zz = h.matmul(model.r_alpha())?.matmul(&h.adjoint())?;
    Ok(CompressedModes {
        h,
        z: None,
        r_zz: Some(r_zz),
    })
}

/// Dense modes `K` with `R_xx`, no compressor involved.
pub fn uncompressed_modes_cov(model: &CovarianceModel) -> CompressedModes {
    CompressedModes {
        h: model.mode_matrix(),
        z: None,
        r_zz: Some(model.r_xx()),
    }
}

/// Orthonormal bases for the signal subspace and its complement.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceSplit {
    /// m x p signal basis.
    pub u_p: CMatrix,
    /// m x (m - p) orthogonal basis.
    pub u_0: CMatrix,
    /// Singular values (mean) or eigenvalues (covariance), nonincreasing.
    pub spectrum: Vec<f64>,
}

impl SubspaceSplit {
    pub fn m(&self) -> usize {
        self.u_p.rows()
    }

    pub fn p(&self) -> usize {
        self.u_p.cols()
    }

    pub fn signal_projector(&self) -> CMatrix {
        self.u_p.matmul(&self.u_p.adjoint()).expect("square")
    }

    pub fn orthogonal_projector(&self) -> CMatrix {
        self.u_0.matmul(&self.u_0.adjoint()).expect("square")
    }
}

fn rank_error(ratio: f64) -> Error {
    Error::Degenerate(format!(
        "signal subspace is rank deficient (relative spectrum floor {ratio:e}); \
         sources coincide or the compressor annihilates a mode"
    ))
}

/// SVD-based split of `H`; `spectrum` holds its singular values.
pub fn subspace_split_mean(modes: &CompressedModes) -> Result<SubspaceSplit> {
    let (m, p) = modes.h.shape();
    if p > m {
        return Err(Error::Degenerate(format!(
            "{p} modes cannot have rank {p} in {m} dimensions"
        )));
    }
    let svd = thin_svd(&modes.h)?;
    let top = svd.singular_values[0];
    let floor = svd.singular_values[p - 1];
    if !(floor > RANK_TOL * top) {
        return Err(rank_error(if top > 0.0 { floor / top } else { 0.0 }));
    }
    let u_0 = orthogonal_complement(&svd.u)?;
    Ok(SubspaceSplit {
        u_p: svd.u,
        u_0,
        spectrum: svd.singular_values,
    })
}

/// Eigen-split of `R_zz`; `spectrum` holds its top `p` eigenvalues.
pub fn subspace_split_cov(modes: &CompressedModes) -> Result<SubspaceSplit> {
    let r_zz = modes
        .r_zz
        .as_ref()
        .ok_or_else(|| Error::Validation("covariance split needs R_zz".into()))?;
    let (m, p) = modes.h.shape();
    if p > m {
        return Err(Error::Degenerate(format!(
            "{p} modes cannot have rank {p} in {m} dimensions"
        )));
    }
    let eig = hermitian_eigen(r_zz)?;
    let top = eig.values[0];
    let floor = eig.values[p - 1];
    if !(floor > RANK_TOL * top) {
        return Err(rank_error(if top > 0.0 { floor / top } else { 0.0 }));
    }
    Ok(SubspaceSplit {
        u_p: eig.vectors.columns_range(0, p),
        u_0: eig.vectors.columns_range(p, m),
        spectrum: eig.values[..p].to_vec(),
    })
}

/// The a-priori minimum mode and its unit-norm direction `rho_min`.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimumMode {
    pub index: usize,
    pub rho: Vec<C64>,
    /// Another mode's criterion lies within `TIE_TOL` of the minimum.
    pub tie: bool,
    pub criteria: Vec<f64>,
}

fn pick_minimum(modes: &CompressedModes, criteria: Vec<f64>) -> Result<MinimumMode> {
    let (index, &best) = criteria
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Validation("no modes".into()))?;
    let tie = criteria.iter().enumerate().any(|(i, &c)| {
        i != index
            && if best == 0.0 {
                c == 0.0
            } else {
                let r = c / best;
                (1.0 - TIE_TOL..=1.0 + TIE_TOL).contains(&r)
            }
    });
    let h = modes.h.column(index);
    let norm = norm_sqr(&h).sqrt();
    if norm == 0.0 {
        return Err(Error::Degenerate("minimum mode has zero norm".into()));
    }
    Ok(MinimumMode {
        index,
        rho: h.iter().map(|x| x / norm).collect(),
        tie,
        criteria,
    })
}

/// `argmin_i |h_i^H z|^2`, smallest index on ties.
pub fn hmin_mean(modes: &CompressedModes) -> Result<MinimumMode> {
    let z = modes
        .z
        .as_ref()
        .ok_or_else(|| Error::Validation("mean h_min needs z".into()))?;
    let criteria = (0..modes.p())
        .map(|i| dot_conj(&modes.h.column(i), z).norm_sqr())
        .collect();
    pick_minimum(modes, criteria)
}

/// `argmin_i |h_i^H R_zz h_i|^2`, smallest index on ties.
pub fn hmin_cov(modes: &CompressedModes) -> Result<MinimumMode> {
    let r = modes
        .r_zz
        .as_ref()
        .ok_or_else(|| Error::Validation("covariance h_min needs R_zz".into()))?;
    let criteria = (0..modes.p())
        .map(|i| {
            let h = modes.h.column(i);
            let rh = r.mul_vec(&h).expect("square R_zz");
            dot_conj(&h, &rh).norm_sqr()
        })
        .collect();
    pick_minimum(modes, criteria)
}
