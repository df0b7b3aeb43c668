//! Line-array geometry: dense and co-prime element layouts, steering vectors,
//! and row-orthonormal compression operators.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by std methods when dev-dependencies link std
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix, C64};
use crate::rng::{complex_normal, stream_rng};

/// Tolerance on `Psi Psi^H = I` for every compression operator.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Element positions in units of half a wavelength.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct ElementPositions(Vec<u32>);

impl ElementPositions {
    /// Validates a strictly increasing list starting at zero.
    pub fn new(positions: Vec<u32>) -> Result<Self> {
        if positions.first() != Some(&0) {
            return Err(Error::Validation("element positions must start at 0".into()));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "element positions must be strictly increasing".into(),
            ));
        }
        Ok(ElementPositions(positions))
    }

    /// Uniform line array `0..n`.
    pub fn dense(n: u32) -> Result<Self> {
        Self::new((0..n).collect())
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn aperture(&self) -> u32 {
        *self.0.last().unwrap_or(&0)
    }
}

impl TryFrom<Vec<u32>> for ElementPositions {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        ElementPositions::new(v)
    }
}

impl From<ElementPositions> for Vec<u32> {
    fn from(p: ElementPositions) -> Vec<u32> {
        p.0
    }
}

/// Per-element phase progression of a far-field source, in `(-pi, pi]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct ElectricalAngle(f64);

impl ElectricalAngle {
    pub fn new(theta: f64) -> Self {
        let mut t = theta % (2.0 * PI);
        if t <= -PI {
            t += 2.0 * PI;
        } else if t > PI {
            t -= 2.0 * PI;
        }
        ElectricalAngle(t)
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

impl From<f64> for ElectricalAngle {
    fn from(theta: f64) -> Self {
        ElectricalAngle::new(theta)
    }
}

impl From<ElectricalAngle> for f64 {
    fn from(a: ElectricalAngle) -> f64 {
        a.0
    }
}

/// Unnormalized mode vector with entries `exp(j p theta)`.
pub fn steering_vector(positions: &ElementPositions, theta: ElectricalAngle) -> Vec<C64> {
    steering_at(positions.as_slice(), theta.radians())
}

pub(crate) fn steering_at(positions: &[u32], theta: f64) -> Vec<C64> {
    positions
        .iter()
        .map(|&p| C64::from_polar(1.0, f64::from(p) * theta))
        .collect()
}

/// Derivative of [`steering_vector`] with respect to the angle.
pub fn steering_derivative(positions: &ElementPositions, theta: ElectricalAngle) -> Vec<C64> {
    positions
        .as_slice()
        .iter()
        .map(|&p| {
            let p = f64::from(p);
            C64::new(0.0, p) * C64::from_polar(1.0, p * theta.radians())
        })
        .collect()
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Co-prime layout: the union of `{k m1 : 0 <= k < 2 m2}` and
/// `{k m2 : 0 <= k < m1}`, sharing the element at 0.
pub fn coprime_positions(m1: u32, m2: u32) -> Result<ElementPositions> {
    if m1 == 0 || m2 == 0 {
        return Err(Error::Validation("co-prime factors must be positive".into()));
    }
    if gcd(m1, m2) != 1 {
        return Err(Error::Validation(format!(
            "({m1}, {m2}) are not co-prime"
        )));
    }
    let mut set = BTreeSet::new();
    set.extend((0..2 * m2).map(|k| k * m1));
    set.extend((0..m1).map(|k| k * m2));
    ElementPositions::new(set.into_iter().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressorKind {
    Identity,
    Selection,
    WhitenedRandom,
    /// A user-supplied row-orthonormal matrix.
    General,
}

/// Row-orthonormal `m x n` compression matrix `Psi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CompressorRepr", into = "CompressorRepr")]
pub struct CompressionOperator {
    matrix: CMatrix,
    kind: CompressorKind,
    source_positions: Option<ElementPositions>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompressorRepr {
    kind: CompressorKind,
    matrix: CMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_positions: Option<ElementPositions>,
}

impl TryFrom<CompressorRepr> for CompressionOperator {
    type Error = Error;
    fn try_from(r: CompressorRepr) -> Result<Self> {
        let mut op = CompressionOperator::from_matrix(r.matrix)?;
        if r.kind == CompressorKind::Selection && r.source_positions.is_none() {
            return Err(Error::Validation(
                "selection compressor requires source positions".into(),
            ));
        }
        op.kind = r.kind;
        op.source_positions = r.source_positions;
        Ok(op)
    }
}

impl From<CompressionOperator> for CompressorRepr {
    fn from(op: CompressionOperator) -> Self {
        CompressorRepr {
            kind: op.kind,
            matrix: op.matrix,
            source_positions: op.source_positions,
        }
    }
}

impl CompressionOperator {
    pub fn identity(n: usize) -> Self {
        CompressionOperator {
            matrix: CMatrix::identity(n),
            kind: CompressorKind::Identity,
            source_positions: None,
        }
    }

    /// Keeps the rows of `I_n` at `positions`.
    pub fn selection(positions: &ElementPositions, n: usize) -> Result<Self> {
        if let Some(&p) = positions.as_slice().iter().find(|&&p| p as usize >= n) {
            return Err(Error::Validation(format!(
                "position {p} does not fit a dense array of {n} elements"
            )));
        }
        let m = positions.len();
        let mut matrix = CMatrix::zeros(m, n);
        for (r, &p) in positions.as_slice().iter().enumerate() {
            matrix[(r, p as usize)] = C64::new(1.0, 0.0);
        }
        Ok(CompressionOperator {
            matrix,
            kind: CompressorKind::Selection,
            source_positions: Some(positions.clone()),
        })
    }

    /// `(Phi Phi^H)^{-1/2} Phi` for `Phi` with i.i.d. CN(0, 1) entries: a
    /// draw from the uniform law on the Stiefel manifold.
    pub fn random_whitened(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::Validation(format!(
                "random compressor needs 0 < m <= n (m={m}, n={n})"
            )));
        }
        for attempt in 0..3u64 {
            let mut rng = stream_rng(seed, &[0xC0_4D_E5, attempt]);
            let phi = CMatrix::from_fn(m, n, |_, _| complex_normal(&mut rng, 1.0));
            let gram = phi.matmul(&phi.adjoint())?;
            let eig = hermitian_eigen(&gram)?;
            let top = eig.values[0];
            let bottom = eig.values[m - 1];
            if !(bottom > 1e-12 * top) {
                continue;
            }
            let v = &eig.vectors;
            let inv_sqrt = CMatrix::from_fn(m, m, |i, j| {
                (0..m)
                    .map(|k| v[(i, k)] * v[(j, k)].conj() / eig.values[k].sqrt())
                    .sum()
            });
            let matrix = inv_sqrt.matmul(&phi)?;
            return Ok(CompressionOperator {
                matrix,
                kind: CompressorKind::WhitenedRandom,
                source_positions: None,
            });
        }
        Err(Error::Degenerate(
            "random compressor Gram matrix stayed singular after 3 draws".into(),
        ))
    }

    /// Wraps an arbitrary matrix after checking `Psi Psi^H = I`.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if matrix.rows() == 0 || matrix.rows() > matrix.cols() {
            return Err(Error::Validation(format!(
                "compressor must be m x n with 0 < m <= n, got {} x {}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let err = matrix.row_orthonormality_error();
        if !(err <= ORTHONORMALITY_TOL) {
            return Err(Error::Validation(format!(
                "compressor rows are not orthonormal (error {err:e})"
            )));
        }
        Ok(CompressionOperator {
            matrix,
            kind: CompressorKind::General,
            source_positions: None,
        })
    }

    /// Left-multiplies by a unitary `q` (m x m), rotating measurement coordinates.
    pub fn rotated(&self, q: &CMatrix) -> Result<Self> {
        let mut op = Self::from_matrix(q.matmul(&self.matrix)?)?;
        op.kind = CompressorKind::General;
        Ok(op)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> CompressorKind {
        self.kind
    }

    pub fn source_positions(&self) -> Option<&ElementPositions> {
        self.source_positions.as_ref()
    }

    /// Output dimension `m`.
    pub fn m(&self) -> usize {
        self.matrix.rows()
    }

    /// Input dimension `n`.
    pub fn n(&self) -> usize {
        self.matrix.cols()
    }

    pub fn compression_ratio(&self) -> f64 {
        self.n() as f64 / self.m() as f64
    }

    pub fn is_identity(&self) -> bool {
        self.kind == CompressorKind::Identity
    }

    /// `Psi v`, with fast paths for identity and selection operators.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: v.len(),
            });
        }
        match (self.kind, &self.source_positions) {
            (CompressorKind::Identity, _) => Ok(v.to_vec()),
            (CompressorKind::Selection, Some(pos)) => {
                Ok(pos.as_slice().iter().map(|&p| v[p as usize]).collect())
            }
            _ => self.matrix.mul_vec(v),
        }
    }
}
